"""Group-structure ingestion and generation.

Groups of vocabulary indices come either from a group file or from
clustering word embeddings: Lloyd's k-means partitions the embedded
vocabulary, then each cluster is expanded with every member's nearest
neighbors, which is what makes the groups overlap. Singleton groups (one
per feature) can be appended so single words stay selectable alongside
the structured groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .groups import Group, GroupStructure


@dataclass
class KMeansConfig:
    k: int = 2000
    max_iter: int = 100
    seed: int = 0
    neighbors: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.neighbors < 0:
            raise ValueError("neighbors must be >= 0")


class EmbeddingTable:
    """token -> fixed-dimension real vector."""

    def __init__(self, vectors):
        self.vectors = {}
        self.dim = None
        for tok, vec in vectors.items():
            vec = np.asarray(vec, dtype=np.float64)
            if self.dim is None:
                self.dim = len(vec)
            elif len(vec) != self.dim:
                raise ValueError(
                    f"embedding for {tok!r} has dimension {len(vec)}, "
                    f"expected {self.dim}")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"embedding for {tok!r} has non-finite entries")
            self.vectors[tok] = vec

    def __contains__(self, tok):
        return tok in self.vectors

    def __getitem__(self, tok):
        return self.vectors[tok]

    def __len__(self):
        return len(self.vectors)


def load_embeddings(path):
    """Text format: one "token v1 v2 ... vE" line per token."""
    vectors = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected token and values")
            try:
                vectors[parts[0]] = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value ({exc})") from None
    return EmbeddingTable(vectors)


# -- group files -------------------------------------------------------------

def load_groups(path, n_cols, bias_col="last"):
    """Group file: one "name<TAB>index index ..." line per group.

    Indices are 0-based vocabulary columns, validated against n_cols and
    the bias column (by convention the last one). Overlap is fine.
    """
    if bias_col == "last":
        bias_col = n_cols - 1
    groups = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(
                    f"{path}:{lineno}: expected 'name<TAB>index ...'")
            name, rest = line.split("\t", 1)
            try:
                idx = [int(p) for p in rest.split()]
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: indices must be integers") from None
            if not idx:
                raise ValueError(f"{path}:{lineno}: empty group {name!r}")
            for j in idx:
                if not 0 <= j < n_cols:
                    raise ValueError(
                        f"{path}:{lineno}: index {j} out of range "
                        f"for {n_cols} features")
                if bias_col is not None and j == bias_col:
                    raise ValueError(
                        f"{path}:{lineno}: bias column {j} cannot be grouped")
            groups.append(Group.of(name, idx))
    return GroupStructure(groups)


def save_groups(structure, path):
    with open(path, "w", encoding="utf-8") as fh:
        for g in structure:
            fh.write(g.name + "\t" + " ".join(str(j) for j in g.members) + "\n")


# -- k-means over embeddings --------------------------------------------------

def _lloyd(points, k, rng, max_iter):
    """Plain Lloyd iterations; returns (labels, centers, wcss history).

    Centers start as a seeded sample of distinct points; a cluster that
    empties keeps its previous center. Assignment ties go to the lowest
    center index.
    """
    n = len(points)
    centers = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.full(n, -1)
    history = []
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return labels, centers, history


def _sq_dists(points, centers):
    # ||p||^2 - 2 p.c + ||c||^2, clipped: cancellation can dip below zero
    d2 = (points ** 2).sum(axis=1)[:, None] \
        - 2.0 * points @ centers.T + (centers ** 2).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def kmeans_cluster(emb, vocab, cfg):
    """Cluster the embedded vocabulary into at most k disjoint groups.

    Tokens without embeddings are left out entirely. Deterministic for a
    fixed seed. Clusters that end up empty are dropped. Group members are
    vocabulary column indices.
    """
    order = sorted(vocab.items(), key=lambda kv: kv[1])
    tokens = [tok for tok, _ in order if tok in emb]
    if len(tokens) < cfg.k:
        raise ValueError(
            f"k={cfg.k} exceeds the {len(tokens)} embedded vocabulary tokens")
    points = np.stack([emb[tok] for tok in tokens])
    rng = np.random.default_rng(cfg.seed)
    labels, _, _ = _lloyd(points, cfg.k, rng, cfg.max_iter)
    groups = []
    for c in range(cfg.k):
        members = [vocab[tokens[i]] for i in np.nonzero(labels == c)[0]]
        if members:
            groups.append(Group.of(f"cluster_{c}", members))
    return GroupStructure(groups)


def expand_overlap(groups, emb, vocab, neighbors=5, metric="euclidean"):
    """Add each group member's `neighbors` nearest embedded words to its group.

    Distances are measured in embedding space (Euclidean by default,
    "cosine" optional); candidates are the embedded in-vocabulary words,
    never the query word itself. Members without embeddings contribute no
    neighbors. Original members are always kept, so every input group is a
    subset of its expansion.
    """
    if metric not in ("euclidean", "cosine"):
        raise ValueError("metric must be 'euclidean' or 'cosine'")
    if neighbors == 0:
        return GroupStructure([Group(g.name, g.members) for g in groups])
    order = sorted(vocab.items(), key=lambda kv: kv[1])
    tokens = [tok for tok, _ in order if tok in emb]
    token_cols = np.array([vocab[tok] for tok in tokens], dtype=np.int64)
    col_to_pos = {int(c): p for p, c in enumerate(token_cols)}
    points = np.stack([emb[tok] for tok in tokens]) if tokens else \
        np.zeros((0, emb.dim or 0))
    if metric == "cosine":
        norms = np.linalg.norm(points, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        unit = points / safe[:, None]

    cache = {}

    def nearest(col):
        if col in cache:
            return cache[col]
        pos = col_to_pos.get(col)
        if pos is None:
            cache[col] = ()
            return ()
        if metric == "euclidean":
            dist = np.linalg.norm(points - points[pos], axis=1)
        else:
            dist = 1.0 - unit @ unit[pos]
        dist[pos] = np.inf  # a word is not its own neighbor
        ranked = np.argsort(dist, kind="stable")[:neighbors]
        cache[col] = tuple(int(token_cols[p]) for p in ranked)
        return cache[col]

    out = []
    for g in groups:
        members = set(g.members)
        for col in g.members:
            members.update(nearest(col))
        out.append(Group.of(g.name, members))
    return GroupStructure(out)


def augment_singletons(groups, n_cols, bias_col="last"):
    """Append every non-bias feature as its own one-member group.

    Existing groups keep their positions; singletons follow in column
    order. Calling this twice would duplicate names and fail, so callers
    guard against double augmentation.
    """
    if bias_col == "last":
        bias_col = n_cols - 1
    existing = list(groups)
    singles = [Group(name=f"single_{j}", members=(j,))
               for j in range(n_cols) if j != bias_col]
    return GroupStructure(existing + singles)
