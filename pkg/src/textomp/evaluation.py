"""Accuracy/sparsity metrics, dev-set grid search, and fit reports.

The grid-search protocol: fit every hyperparameter combination, score it
on the development split, keep the most accurate model; exact accuracy
ties go to the sparser model (fewest nonzero weights), and any remaining
tie to the smallest penalty, so the search is fully deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines, gomp as gomp_mod, omp as omp_mod
from .logistic import DEFAULT_MAX_ITER, DEFAULT_TOL

DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)

METHODS = ("omp", "gomp", "lasso", "ridge", "elastic", "none")


@dataclass
class GridSpec:
    method: str
    lambda_values: tuple = DEFAULT_LAMBDA_GRID

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        self.lambda_values = tuple(float(v) for v in self.lambda_values)
        if not self.lambda_values:
            raise ValueError("lambda grid is empty")
        if any(v <= 0 for v in self.lambda_values):
            raise ValueError("lambda grid values must be positive")

    def points(self):
        """Hyperparameter dicts in deterministic grid order."""
        if self.method == "none":
            return [{}]
        if self.method == "elastic":
            return [{"lambda_l1": l1, "lambda_l2": l2}
                    for l1 in self.lambda_values
                    for l2 in self.lambda_values]
        return [{"lambda": v} for v in self.lambda_values]


@dataclass
class FitReport:
    method: str
    hyperparams: dict = field(default_factory=dict)
    dev_accuracy: float = None
    test_accuracy: float = None
    sparsity_pct: float = None
    n_active: int = None
    seconds: float = 0.0
    converged: bool = None
    atoms_curve: tuple = None
    error: str = None

    def ok(self):
        return self.error is None


def _theta_of(model):
    return model.theta if hasattr(model, "theta") else np.asarray(model)


def accuracy(model, X, y):
    """Fraction of samples whose margin sign matches the label.

    A zero margin predicts +1. Raises on an empty evaluation set.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("empty evaluation set")
    if y.shape != (X.n_rows,):
        raise ValueError(f"y length {y.shape} != ({X.n_rows},)")
    margin = X.mat_vec(_theta_of(model))
    pred = np.where(margin >= 0.0, 1.0, -1.0)
    return float(np.mean(pred == y))


def atoms_curve(trajectory, X_dev, y_dev):
    """Dev accuracy at every stored (atom count, weights) checkpoint."""
    return [(count, accuracy(theta, X_dev, y_dev))
            for count, theta in trajectory.checkpoints]


def _fit_one(method, hp, X, y, *, budget, epsilon, groups, criterion,
             augment_singletons, normalize_columns, tol, max_iter,
             penalize_bias):
    """Returns (model, trajectory-or-None) for one grid point."""
    if method == "omp":
        cfg = omp_mod.OMPConfig(budget=budget, epsilon=epsilon,
                                lam=hp["lambda"],
                                normalize_columns=normalize_columns,
                                penalize_bias=penalize_bias,
                                tol=tol, max_iter=max_iter)
        return omp_mod.run_omp(X, y, cfg)
    if method == "gomp":
        cfg = gomp_mod.GOMPConfig(budget=budget, epsilon=epsilon,
                                  lam=hp["lambda"], criterion=criterion,
                                  augment_singletons=augment_singletons,
                                  penalize_bias=penalize_bias,
                                  tol=tol, max_iter=max_iter)
        return gomp_mod.run_gomp(X, y, groups if groups is not None else [],
                                 cfg)
    if method == "lasso":
        pen = baselines.PenaltyConfig(lambda_l1=hp["lambda"], lambda_l2=0.0)
    elif method == "ridge":
        pen = baselines.PenaltyConfig(lambda_l1=0.0, lambda_l2=hp["lambda"])
    elif method == "elastic":
        pen = baselines.PenaltyConfig(lambda_l1=hp["lambda_l1"],
                                      lambda_l2=hp["lambda_l2"])
    else:  # none: unregularized
        pen = baselines.PenaltyConfig(0.0, 0.0)
    # proximal fits need far more iterations than Newton refits; floor the cap
    model = baselines.fit_penalized(X, y, pen, tol=tol,
                                    max_iter=max(max_iter, 1000),
                                    penalize_bias=penalize_bias)
    return model, None


def selection_key(report):
    """Grid-search ranking: dev accuracy, then fewest nonzeros, then the
    smallest penalty; min() under this key is the winning report."""
    hp = report.hyperparams
    lam = hp.get("lambda", hp.get("lambda_l2", 0.0))
    return (-report.dev_accuracy, report.n_active,
            lam, hp.get("lambda_l1", 0.0))


def grid_search(X_train, y_train, X_dev, y_dev, spec, *, budget=2000,
                epsilon=0.0, groups=None, criterion="averaged",
                augment_singletons=True, normalize_columns=False,
                tol=None, max_iter=None, penalize_bias=True):
    """Fit the whole grid; returns (best model, reports in grid order).

    Individual fit failures are recorded on their report and the search
    continues; if every point fails, the last failure is re-raised.
    """
    tol = DEFAULT_TOL if tol is None else tol
    max_iter = DEFAULT_MAX_ITER if max_iter is None else max_iter

    reports = []
    best = None
    best_model = None
    last_exc = None
    for hp in spec.points():
        started = time.perf_counter()
        try:
            model, traj = _fit_one(spec.method, hp, X_train, y_train,
                                   budget=budget, epsilon=epsilon,
                                   groups=groups, criterion=criterion,
                                   augment_singletons=augment_singletons,
                                   normalize_columns=normalize_columns,
                                   tol=tol, max_iter=max_iter,
                                   penalize_bias=penalize_bias)
        except Exception as exc:  # recorded, search continues
            last_exc = exc
            reports.append(FitReport(method=spec.method, hyperparams=dict(hp),
                                     seconds=time.perf_counter() - started,
                                     error=str(exc) or repr(exc)))
            continue
        report = FitReport(
            method=spec.method,
            hyperparams=dict(hp),
            dev_accuracy=accuracy(model, X_dev, y_dev),
            sparsity_pct=baselines.sparsity(model, bias_col=X_train.bias_col),
            n_active=int(np.count_nonzero(model.theta)
                         - (1 if X_train.bias_col is not None
                            and model.theta[X_train.bias_col] != 0 else 0)),
            seconds=time.perf_counter() - started,
            converged=model.converged,
        )
        if traj is not None and traj.checkpoints:
            report.atoms_curve = tuple(atoms_curve(traj, X_dev, y_dev))
        reports.append(report)
        if best is None or selection_key(report) < selection_key(best):
            best = report
            best_model = model
    if best_model is None:
        raise RuntimeError("every grid point failed") from last_exc
    return best_model, reports


# -- report serialization -----------------------------------------------------

_METRIC_KEYS = ("method", "dev_accuracy", "test_accuracy", "sparsity_pct",
                "n_active", "seconds", "converged", "atoms_curve", "error")


def format_report(report):
    """One tab-separated key=value record; floats use repr so parsing is exact."""
    parts = [f"method={report.method}"]
    for key in sorted(report.hyperparams):
        val = report.hyperparams[key]
        parts.append(f"{key}={val!r}" if isinstance(val, float)
                     else f"{key}={val}")
    for key in _METRIC_KEYS[1:]:
        val = getattr(report, key)
        if val is None:
            continue
        if key == "atoms_curve":
            val = ",".join(f"{c}:{a!r}" for c, a in val)
        elif key == "converged":
            val = "true" if val else "false"
        elif isinstance(val, float):
            val = repr(val)
        parts.append(f"{key}={val}")
    return "\t".join(parts)


def _parse_value(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_report(line):
    fields = {}
    for part in line.rstrip("\n").split("\t"):
        key, _, val = part.partition("=")
        fields[key] = val
    report = FitReport(method=fields.pop("method"))
    for key in _METRIC_KEYS[1:]:
        if key not in fields:
            continue
        raw = fields.pop(key)
        if key == "atoms_curve":
            pairs = [p.split(":") for p in raw.split(",") if p]
            report.atoms_curve = tuple((int(c), float(a)) for c, a in pairs)
        elif key == "converged":
            report.converged = raw == "true"
        elif key == "error":
            report.error = raw
        elif key == "n_active":
            report.n_active = int(raw)
        else:
            setattr(report, key, float(raw))
    report.hyperparams = {k: _parse_value(v) for k, v in fields.items()}
    return report


def write_reports(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(format_report(report) + "\n")


def read_reports(path):
    with open(path, "r", encoding="utf-8") as fh:
        return [parse_report(line) for line in fh if line.strip()]


def human_table(reports):
    """Plain aligned table for stdout."""
    rows = [("method", "hyperparams", "dev_acc", "test_acc", "nonzero%",
             "atoms", "seconds", "status")]
    for r in reports:
        hp = " ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                      for k, v in sorted(r.hyperparams.items()))
        rows.append((
            r.method, hp or "-",
            "-" if r.dev_accuracy is None else f"{r.dev_accuracy:.4f}",
            "-" if r.test_accuracy is None else f"{r.test_accuracy:.4f}",
            "-" if r.sparsity_pct is None else f"{r.sparsity_pct:.3f}",
            "-" if r.n_active is None else str(r.n_active),
            f"{r.seconds:.2f}",
            "failed: " + r.error if r.error else
            ("ok" if r.converged in (True, None) else "no-convergence"),
        ))
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    return "\n".join(lines)
