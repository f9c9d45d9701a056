"""Greedy logistic orthogonal matching pursuit.

Loop: pick the inactive column most correlated with the residual, add it
to the active set, refit the L2-penalized logistic model on the enlarged
support, recompute the residual, repeat until the feature budget is hit,
the winning correlation falls to the precision threshold, or no candidate
columns remain.

The bias column is active from the start and never counted against the
budget; the first selection correlates against the raw labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .logistic import (DEFAULT_MAX_ITER, DEFAULT_TOL, ActiveSet, Model,
                       fit_restricted, residual)

CHECKPOINT_INTERVAL = 100


@dataclass
class OMPConfig:
    budget: int = 2000
    epsilon: float = 0.0
    lam: float = 1.0
    record_trajectory: bool = True
    normalize_columns: bool = False
    penalize_bias: bool = True
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    checkpoint_interval: int = CHECKPOINT_INTERVAL

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class SelectionRecord:
    """One greedy iteration: which column won and with what correlation."""

    index: int
    score: float
    converged: bool = True


@dataclass
class Trajectory:
    """Per-iteration selection records plus periodic weight snapshots.

    checkpoints holds (active non-bias feature count, theta copy) pairs,
    taken every checkpoint_interval selections and at termination, so
    accuracy-vs-atom-count curves can be replayed without refitting.
    """

    records: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)

    def selected_indices(self):
        return [r.index for r in self.records]


def select_feature(X, r, active, col_norms=None):
    """Inactive column with the largest |X_j^T r|; ties go to the lowest index.

    The bias column never competes (it is always active). col_norms, when
    given, rescales each score by 1/col_norms[j] (unit-L2 column scaling).
    Returns (index, signed correlation). Raises when no candidate remains.
    """
    scores = X.correlations(r)
    mask = np.ones(X.n_cols, dtype=bool)
    if X.bias_col is not None:
        mask[X.bias_col] = False
    for j in active:
        mask[j] = False
    if not mask.any():
        raise ValueError("no inactive candidate columns remain")
    ranked = np.abs(scores)
    if col_norms is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            ranked = np.where(col_norms > 0, ranked / col_norms, 0.0)
    ranked = np.where(mask, ranked, -1.0)
    j = int(np.argmax(ranked))
    return j, float(scores[j])


def run_omp(X, y, cfg):
    """Run the greedy selection loop; returns (final Model, Trajectory).

    Solver non-convergence on an iteration is recorded on that iteration's
    trajectory entry and the loop continues with the best iterate.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.n_rows,):
        raise ValueError(f"y length {y.shape} != ({X.n_rows},)")

    active = ActiveSet([X.bias_col] if X.bias_col is not None else [])
    traj = Trajectory()
    col_norms = X.col_norms() if cfg.normalize_columns else None

    if active:
        model = fit_restricted(X, y, active, cfg.lam, tol=cfg.tol,
                               max_iter=cfg.max_iter,
                               penalize_bias=cfg.penalize_bias)
    else:
        model = Model(theta=np.zeros(X.n_cols), active=active, lam=cfg.lam)
    r = y.copy()  # first selection correlates against the raw labels

    n_candidates = X.n_cols - len(active)
    while active.n_selected(X.bias_col) < cfg.budget and n_candidates > 0:
        j, corr = select_feature(X, r, active, col_norms=col_norms)
        if abs(corr) <= cfg.epsilon:
            break
        active.add(j)
        n_candidates -= 1
        model = fit_restricted(X, y, active, cfg.lam, tol=cfg.tol,
                               max_iter=cfg.max_iter,
                               warm_start=model.theta,
                               penalize_bias=cfg.penalize_bias)
        r = residual(X, model.theta, y)
        traj.records.append(SelectionRecord(index=j, score=corr,
                                            converged=model.converged))
        n_sel = active.n_selected(X.bias_col)
        if cfg.record_trajectory and n_sel % cfg.checkpoint_interval == 0:
            traj.checkpoints.append((n_sel, model.theta.copy()))

    n_sel = active.n_selected(X.bias_col)
    if cfg.record_trajectory and (
            not traj.checkpoints or traj.checkpoints[-1][0] != n_sel):
        traj.checkpoints.append((n_sel, model.theta.copy()))
    return model, traj
