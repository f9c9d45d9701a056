"""Corpus ingestion: labeled text to a unigram-count design matrix.

Documents are tokenized by lowercasing and splitting on any
non-alphanumeric character. The vocabulary is built from the training
split only, in first-occurrence order, so dev/test tokens can never
extend it; out-of-vocabulary tokens are simply dropped when vectorizing.
Every matrix gets a trailing all-ones bias column.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .sparse import SparseMatrix

# alphanumeric runs; underscore and punctuation split, case is folded
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text):
    """Lowercase and split on non-alphanumeric characters; keeps duplicates."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class LabeledDoc:
    label: int  # -1 or +1
    tokens: list


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


class Corpus:
    """Training documents plus the vocabulary they induce.

    vocabulary maps token -> column index, dense in [0, V); the bias
    column sits at index V.
    """

    def __init__(self, documents, vocabulary):
        self.documents = list(documents)
        self.vocabulary = dict(vocabulary)

    @classmethod
    def build(cls, train_docs, min_df=1):
        """Vocabulary in first-occurrence order over the training docs.

        min_df drops tokens appearing in fewer than that many documents
        (default 1 keeps everything).
        """
        train_docs = list(train_docs)
        for doc in train_docs:
            if doc.label not in (-1, 1):
                raise ValueError(f"label must be -1 or +1, got {doc.label!r}")
        order = []
        seen = set()
        df = Counter()
        for doc in train_docs:
            uniq = set(doc.tokens)
            df.update(uniq)
            for tok in doc.tokens:
                if tok not in seen:
                    seen.add(tok)
                    order.append(tok)
        if min_df > 1:
            order = [t for t in order if df[t] >= min_df]
        vocab = {tok: j for j, tok in enumerate(order)}
        return cls(train_docs, vocab)

    @property
    def n_features(self):
        """Total column count including the bias."""
        return len(self.vocabulary) + 1

    @property
    def bias_col(self):
        return len(self.vocabulary)


def build_matrix(corpus, docs):
    """Count matrix for `docs` under the corpus vocabulary.

    Entry (i, j) is how often vocabulary token j occurs in document i;
    unknown tokens are dropped. Returns (SparseMatrix, labels array).
    """
    vocab = corpus.vocabulary
    if not vocab:
        raise ValueError("vocabulary is empty")
    docs = list(docs)
    n_rows = len(docs)
    bias = corpus.bias_col
    per_col = [([], []) for _ in range(bias + 1)]
    labels = np.zeros(n_rows)
    for i, doc in enumerate(docs):
        labels[i] = doc.label
        counts = Counter(doc.tokens)
        for tok in sorted(counts):
            j = vocab.get(tok)
            if j is not None:
                per_col[j][0].append(i)
                per_col[j][1].append(float(counts[tok]))
        per_col[bias][0].append(i)
        per_col[bias][1].append(1.0)
    X = SparseMatrix.from_columns(n_rows, per_col, bias_col=bias)
    return X, labels


def stratified_split(docs, spec):
    """Deterministic per-class split into (train, dev) document lists.

    Per-class train counts are round(train_fraction * class size), so each
    class lands within one document of the requested fraction. Document
    order within each output follows the input order.
    """
    docs = list(docs)
    by_label = {}
    for i, doc in enumerate(docs):
        by_label.setdefault(doc.label, []).append(i)
    if len(by_label) < 2:
        raise ValueError("stratified split needs both classes present")
    rng = np.random.default_rng(spec.seed)
    train_idx = set()
    for label in sorted(by_label):
        members = np.array(by_label[label])
        n_train = int(round(spec.train_fraction * len(members)))
        perm = rng.permutation(len(members))
        train_idx.update(members[perm[:n_train]].tolist())
    train = [doc for i, doc in enumerate(docs) if i in train_idx]
    dev = [doc for i, doc in enumerate(docs) if i not in train_idx]
    return train, dev


# -- file formats -----------------------------------------------------------

def load_raw_corpus(path):
    """Read "label<TAB>text" lines; returns list of (label string, text)."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'label<TAB>text'")
            label, text = line.split("\t", 1)
            out.append((label, text))
    return out


def map_labels(raw_docs, mapping):
    """Apply a category-name -> ±1 mapping; unmapped labels are an error."""
    docs = []
    for label, text in raw_docs:
        if label not in mapping:
            raise ValueError(f"label {label!r} has no mapping to -1/+1")
        docs.append(LabeledDoc(label=mapping[label], tokens=tokenize(text)))
    return docs


def save_vocabulary(vocab, path):
    """One token per line; line number = column index."""
    inverse = sorted(vocab.items(), key=lambda kv: kv[1])
    with open(path, "w", encoding="utf-8") as fh:
        for tok, _ in inverse:
            fh.write(tok + "\n")


def load_vocabulary(path):
    vocab = {}
    with open(path, "r", encoding="utf-8") as fh:
        for j, line in enumerate(fh):
            vocab[line.rstrip("\n")] = j
    return vocab


def save_labels(labels, path):
    with open(path, "w", encoding="utf-8") as fh:
        for y in labels:
            fh.write(f"{int(y):+d}\n")


def load_labels(path):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            y = int(line)
            if y not in (-1, 1):
                raise ValueError(f"{path}:{lineno}: label must be -1 or +1")
            out.append(y)
    return np.array(out, dtype=np.float64)
