"""Command-line entry point.

Subcommands wire the library into a file-based pipeline:

  vectorize    raw labeled text -> matrices, labels, vocabulary
  group        word embeddings -> overlapping cluster groups
  train        fit one model (omp / gomp / lasso / ridge / elastic / none)
  grid         dev-set grid search over the penalty grid
  eval         accuracy of a saved model on a matrix
  top-weights  highest-weighted vocabulary terms of a saved model

Every mutating run writes a JSON manifest holding the resolved
configuration, so outputs are reproducible from the manifest alone. The
--threads knob only changes how the correlation scan is chunked across
workers, never the numbers, so reruns are byte-identical regardless of it.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import baselines, evaluation, gomp as gomp_mod, grouping, omp as omp_mod
from . import sparse, textpipe
from .evaluation import FitReport, GridSpec, accuracy
from .logistic import DEFAULT_MAX_ITER, DEFAULT_TOL
from .sparse import SparseMatrix


class CliError(Exception):
    """Carries the exit code for a failed command."""

    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _usage(message):
    return CliError(message, 1)


def _data(message):
    return CliError(message, 2)


# -- model files ---------------------------------------------------------------

def save_model(theta, bias_col, path):
    """Header "d bias_col" (bias_col -1 when absent), then "index weight"
    lines for the nonzero coordinates in ascending index order."""
    theta = np.asarray(theta, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(theta)} {-1 if bias_col is None else bias_col}\n")
        for j in np.nonzero(theta)[0]:
            fh.write(f"{j} {float(theta[j])!r}\n")


def load_model(path):
    """Inverse of save_model; returns (theta, bias_col)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'd bias_col'")
        d, bias_col = int(header[0]), int(header[1])
        theta = np.zeros(d)
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'index weight'")
            j = int(parts[0])
            if not 0 <= j < d:
                raise ValueError(f"{path}:{lineno}: index {j} out of range")
            theta[j] = float(parts[1])
    return theta, (None if bias_col < 0 else bias_col)


def top_weights(theta, vocab, n):
    """Top-n (term, weight) lists for both weight signs.

    vocab maps token -> column; the model must align with it (its feature
    count is the vocabulary size plus the bias column).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if len(theta) != len(vocab) + 1:
        raise ValueError(
            f"model has {len(theta)} features but vocabulary has "
            f"{len(vocab)} tokens (+1 bias expected)")
    inverse = {j: tok for tok, j in vocab.items()}
    scored = [(float(theta[j]), inverse[j]) for j in range(len(vocab))
              if theta[j] != 0.0]
    positives = [(tok, w) for w, tok in
                 sorted((s for s in scored if s[0] > 0),
                        key=lambda s: (-s[0], s[1]))][:n]
    negatives = [(tok, w) for w, tok in
                 sorted((s for s in scored if s[0] < 0),
                        key=lambda s: (s[0], s[1]))][:n]
    return positives, negatives


# -- manifest ------------------------------------------------------------------

def _write_manifest(path, subcommand, config):
    manifest = {"subcommand": subcommand, "config": config}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- vectorize -----------------------------------------------------------------

def _parse_label_map(text):
    mapping = {}
    for part in text.split(","):
        name, _, val = part.partition("=")
        if not name or val not in ("-1", "+1", "1"):
            raise _usage(f"bad label mapping {part!r}; use name=-1 or name=+1")
        mapping[name] = 1 if val in ("+1", "1") else -1
    return mapping


def cmd_vectorize(args):
    mapping = _parse_label_map(args.label_map)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    raw_train = textpipe.load_raw_corpus(args.corpus)
    train_docs = textpipe.map_labels(raw_train, mapping)
    if args.dev_corpus:
        dev_docs = textpipe.map_labels(
            textpipe.load_raw_corpus(args.dev_corpus), mapping)
    else:
        spec = textpipe.SplitSpec(train_fraction=args.train_fraction,
                                  seed=args.seed)
        train_docs, dev_docs = textpipe.stratified_split(train_docs, spec)

    corpus = textpipe.Corpus.build(train_docs, min_df=args.min_df)
    if not corpus.vocabulary:
        raise _data("training corpus produced an empty vocabulary")

    for name, docs in (("train", train_docs), ("dev", dev_docs)):
        X, y = textpipe.build_matrix(corpus, docs)
        X.save(out / f"{name}.matrix")
        textpipe.save_labels(y, out / f"{name}.labels")
    if args.test_corpus:
        test_docs = textpipe.map_labels(
            textpipe.load_raw_corpus(args.test_corpus), mapping)
        X, y = textpipe.build_matrix(corpus, test_docs)
        X.save(out / "test.matrix")
        textpipe.save_labels(y, out / "test.labels")
    textpipe.save_vocabulary(corpus.vocabulary, out / "vocab.txt")

    _write_manifest(out / "manifest.json", "vectorize", {
        "corpus": args.corpus,
        "dev_corpus": args.dev_corpus,
        "test_corpus": args.test_corpus,
        "label_map": args.label_map,
        "train_fraction": args.train_fraction,
        "min_df": args.min_df,
        "seed": args.seed,
    })
    print(f"vocabulary size {len(corpus.vocabulary)}; "
          f"train {len(train_docs)} docs, dev {len(dev_docs)} docs")
    return 0


# -- group ---------------------------------------------------------------------

def cmd_group(args):
    emb = grouping.load_embeddings(args.embeddings)
    vocab = textpipe.load_vocabulary(args.vocab)
    n_embedded = sum(1 for tok in vocab if tok in emb)
    if n_embedded == 0:
        raise _data("no vocabulary token has an embedding")
    k = min(args.k, n_embedded)
    cfg = grouping.KMeansConfig(k=k, max_iter=args.max_iter, seed=args.seed,
                                neighbors=args.neighbors)
    structure = grouping.kmeans_cluster(emb, vocab, cfg)
    if args.neighbors > 0:
        structure = grouping.expand_overlap(structure, emb, vocab,
                                            neighbors=args.neighbors,
                                            metric=args.metric)
    grouping.save_groups(structure, args.out)
    _write_manifest(str(args.out) + ".manifest.json", "group", {
        "embeddings": args.embeddings,
        "vocab": args.vocab,
        "k": k,
        "max_iter": args.max_iter,
        "neighbors": args.neighbors,
        "metric": args.metric,
        "seed": args.seed,
    })
    print(f"wrote {len(structure)} groups (k-means on {n_embedded} "
          f"embedded tokens) to {args.out}")
    return 0


# -- train / grid --------------------------------------------------------------

def _load_design(matrix_path, labels_path):
    X = SparseMatrix.load(matrix_path)
    y = textpipe.load_labels(labels_path)
    if len(y) != X.n_rows:
        raise _data(f"{labels_path}: {len(y)} labels for {X.n_rows} rows")
    return X, y


def _load_group_structure(args, X):
    if args.groups:
        return grouping.load_groups(args.groups, X.n_cols,
                                    bias_col=X.bias_col)
    return gomp_mod.GroupStructure([])


def _check_gomp_usable(args):
    if args.method == "gomp" and not args.groups \
            and not args.augment_singletons:
        raise _usage("gomp needs --groups and/or --augment-singletons")


def _train_config(args):
    cfg = {
        "matrix": args.matrix,
        "labels": args.labels,
        "method": args.method,
        "budget": args.budget,
        "epsilon": args.epsilon,
        "groups": args.groups,
        "criterion": args.criterion,
        "augment_singletons": args.augment_singletons,
        "normalize_columns": args.normalize_columns,
        "penalize_bias": args.penalize_bias,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seed": args.seed,
    }
    return cfg


def cmd_train(args):
    _check_gomp_usable(args)
    if args.dev_matrix and not args.dev_labels:
        raise _usage("--dev-matrix needs --dev-labels")
    sparse.set_num_threads(args.threads)
    X, y = _load_design(args.matrix, args.labels)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    traj = None
    if args.method == "omp":
        cfg = omp_mod.OMPConfig(budget=args.budget, epsilon=args.epsilon,
                                lam=args.lam,
                                normalize_columns=args.normalize_columns,
                                penalize_bias=args.penalize_bias,
                                tol=args.tol, max_iter=args.max_iter)
        model, traj = omp_mod.run_omp(X, y, cfg)
        hp = {"lambda": args.lam, "budget": args.budget,
              "epsilon": args.epsilon}
    elif args.method == "gomp":
        cfg = gomp_mod.GOMPConfig(budget=args.budget, epsilon=args.epsilon,
                                  lam=args.lam, criterion=args.criterion,
                                  augment_singletons=args.augment_singletons,
                                  penalize_bias=args.penalize_bias,
                                  tol=args.tol, max_iter=args.max_iter)
        model, traj = gomp_mod.run_gomp(X, y, _load_group_structure(args, X),
                                        cfg)
        hp = {"lambda": args.lam, "budget": args.budget,
              "epsilon": args.epsilon, "criterion": args.criterion}
    else:
        if args.method == "lasso":
            pen = baselines.PenaltyConfig(lambda_l1=args.lam, lambda_l2=0.0)
            hp = {"lambda": args.lam}
        elif args.method == "ridge":
            pen = baselines.PenaltyConfig(lambda_l1=0.0, lambda_l2=args.lam)
            hp = {"lambda": args.lam}
        elif args.method == "elastic":
            pen = baselines.PenaltyConfig(lambda_l1=args.lambda_l1,
                                          lambda_l2=args.lambda_l2)
            hp = {"lambda_l1": args.lambda_l1, "lambda_l2": args.lambda_l2}
        else:  # none
            pen = baselines.PenaltyConfig(0.0, 0.0)
            hp = {}
        # proximal fits need far more iterations than Newton refits
        model = baselines.fit_penalized(X, y, pen, tol=args.tol,
                                        max_iter=max(args.max_iter, 1000),
                                        penalize_bias=args.penalize_bias)

    report = FitReport(
        method=args.method, hyperparams=hp,
        sparsity_pct=baselines.sparsity(model, bias_col=X.bias_col),
        n_active=int(np.count_nonzero(model.theta)
                     - (1 if X.bias_col is not None
                        and model.theta[X.bias_col] != 0 else 0)),
        seconds=time.perf_counter() - started,
        converged=model.converged,
    )
    if args.dev_matrix:
        X_dev, y_dev = _load_design(args.dev_matrix, args.dev_labels)
        report.dev_accuracy = accuracy(model, X_dev, y_dev)
        if traj is not None and traj.checkpoints:
            report.atoms_curve = tuple(
                evaluation.atoms_curve(traj, X_dev, y_dev))
            _write_curve(report.atoms_curve, out / "curve.csv")

    save_model(model.theta, X.bias_col, out / "model.txt")
    evaluation.write_reports([report], out / "report.txt")
    _write_manifest(out / "manifest.json", "train", _train_config(args))
    print(evaluation.human_table([report]))
    return 0


def _write_curve(curve, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("atoms,accuracy\n")
        for count, acc in curve:
            fh.write(f"{count},{acc!r}\n")


def _write_scatter(reports, path):
    """Accuracy-vs-sparsity points, one row per successful fit."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,hyperparams,sparsity_pct,dev_accuracy\n")
        for r in reports:
            if not r.ok():
                continue
            hp = ";".join(f"{k}={v}" for k, v in sorted(r.hyperparams.items()))
            fh.write(f"{r.method},{hp},{r.sparsity_pct!r},{r.dev_accuracy!r}\n")


def cmd_grid(args):
    _check_gomp_usable(args)
    sparse.set_num_threads(args.threads)
    X, y = _load_design(args.matrix, args.labels)
    X_dev, y_dev = _load_design(args.dev_matrix, args.dev_labels)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    lambdas = [float(v) for v in args.lambdas.split(",") if v]
    spec = GridSpec(method=args.method, lambda_values=lambdas)
    groups = _load_group_structure(args, X) if args.method == "gomp" else None
    try:
        best_model, reports = evaluation.grid_search(
            X, y, X_dev, y_dev, spec,
            budget=args.budget, epsilon=args.epsilon, groups=groups,
            criterion=args.criterion,
            augment_singletons=args.augment_singletons,
            normalize_columns=args.normalize_columns,
            tol=args.tol, max_iter=args.max_iter,
            penalize_bias=args.penalize_bias)
    except RuntimeError as exc:
        raise CliError(str(exc), 3) from exc

    best = min((r for r in reports if r.ok()), key=evaluation.selection_key)
    if args.test_matrix:
        X_test, y_test = _load_design(args.test_matrix, args.test_labels)
        best.test_accuracy = accuracy(best_model, X_test, y_test)

    save_model(best_model.theta, X.bias_col, out / "best_model.txt")
    evaluation.write_reports(reports, out / "reports.txt")
    _write_scatter(reports, out / "scatter.csv")
    if best.atoms_curve:
        _write_curve(best.atoms_curve, out / "curve.csv")
    cfg = _train_config(args)
    cfg.update({"dev_matrix": args.dev_matrix, "dev_labels": args.dev_labels,
                "test_matrix": args.test_matrix,
                "test_labels": args.test_labels, "lambdas": args.lambdas})
    _write_manifest(out / "manifest.json", "grid", cfg)
    print(evaluation.human_table(reports))
    print(f"\nbest: {evaluation.format_report(best)}")
    return 0


# -- eval / top-weights ----------------------------------------------------------

def cmd_eval(args):
    theta, _ = load_model(args.model)
    X, y = _load_design(args.matrix, args.labels)
    if len(theta) != X.n_cols:
        raise _data(f"model has {len(theta)} features, matrix has {X.n_cols}")
    acc = accuracy(theta, X, y)
    print(f"accuracy={acc!r}")
    if args.manifest_out:
        _write_manifest(args.manifest_out, "eval", {
            "model": args.model, "matrix": args.matrix, "labels": args.labels})
    return 0


def cmd_top_weights(args):
    theta, _ = load_model(args.model)
    vocab = textpipe.load_vocabulary(args.vocab)
    positives, negatives = top_weights(theta, vocab, args.n)
    print("largest positive weights:")
    for tok, w in positives:
        print(f"  +{w:.6g}  {tok}")
    print("largest negative weights:")
    for tok, w in negatives:
        print(f"  {w:.6g}  {tok}")
    if args.manifest_out:
        _write_manifest(args.manifest_out, "top-weights", {
            "model": args.model, "vocab": args.vocab, "n": args.n})
    return 0


# -- parser ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_solver_flags(p):
    p.add_argument("--budget", type=int, default=2000,
                   help="max selected features (omp/gomp)")
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="correlation stopping threshold")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="penalty strength")
    p.add_argument("--lambda-l1", type=float, default=0.0,
                   help="elastic net L1 strength")
    p.add_argument("--lambda-l2", type=float, default=0.0,
                   help="elastic net L2 strength")
    p.add_argument("--groups", default=None, help="group file for gomp")
    p.add_argument("--criterion", choices=gomp_mod.CRITERIA,
                   default="averaged")
    p.add_argument("--augment-singletons", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="append every feature as its own gomp group")
    p.add_argument("--normalize-columns", action="store_true",
                   help="score selection correlations against unit-L2 columns")
    p.add_argument("--penalize-bias", action=argparse.BooleanOptionalAction,
                   default=True, help="include the bias in the L2 penalty")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="correlation-scan workers; never changes results")


def build_parser():
    parser = _Parser(prog="textomp",
                     description="Greedy sparse feature selection for "
                                 "logistic text classifiers.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("vectorize", help="text corpus to sparse matrices")
    p.add_argument("--corpus", required=True,
                   help="training file, one 'label<TAB>text' per line")
    p.add_argument("--dev-corpus", default=None)
    p.add_argument("--test-corpus", default=None)
    p.add_argument("--label-map", required=True,
                   help="category mapping, e.g. 'med=-1,space=+1'")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("group", help="k-means word-embedding groups")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--k", type=int, default=2000)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--neighbors", type=int, default=5)
    p.add_argument("--metric", choices=("euclidean", "cosine"),
                   default="euclidean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("train", help="fit one model")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--method", required=True, choices=evaluation.METHODS)
    p.add_argument("--dev-matrix", default=None,
                   help="optional dev split for accuracy and atom curves")
    p.add_argument("--dev-labels", default=None)
    _add_solver_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="grid search tuned on the dev split")
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--dev-matrix", required=True)
    p.add_argument("--dev-labels", required=True)
    p.add_argument("--test-matrix", default=None)
    p.add_argument("--test-labels", default=None)
    p.add_argument("--method", required=True, choices=evaluation.METHODS)
    p.add_argument("--lambdas", default="0.01,0.1,1,10,100")
    _add_solver_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("eval", help="accuracy of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--manifest-out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("top-weights", help="largest-weight terms")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--manifest-out", default=None)
    p.set_defaults(func=cmd_top_weights)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
