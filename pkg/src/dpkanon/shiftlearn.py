"""Covariate-shift and transfer weights, weighted linear regression under
dummy or numeric coding, and the utility metrics (relative bias, R²,
histogram intersection).
"""
from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .dataset import DataTable, EmpiricalJoint, round_sig
from .errors import ConvergenceError, DegenerateError, DomainError, ShapeError


@dataclass
class ShiftWeights:
    """Per-record importance weights with their estimation provenance."""

    per_record: np.ndarray | None
    estimator: str  # none | nonparametric | logistic | transfer
    normalized: bool
    point_weights: dict | None = None  # value tuple -> weight, when discrete

    def __post_init__(self):
        if self.per_record is not None:
            w = np.asarray(self.per_record, dtype=float)
            if not np.all(np.isfinite(w)):
                raise DomainError("weights must be finite")
            if np.any(w < 0):
                raise DomainError("weights must be nonnegative")
            self.per_record = w


def _value_pmf(joint: EmpiricalJoint) -> dict:
    out = {}
    for t, c in joint.counts.items():
        key = tuple(joint.values[j][i] for j, i in enumerate(t))
        out[key] = c / joint.total
    return out


def _rows_to_keys(rows) -> list:
    return [tuple(r) for r in round_sig(np.atleast_2d(np.asarray(rows, float)))]


def nonparametric_weights(source: EmpiricalJoint, target: EmpiricalJoint,
                          source_rows=None, normalize: bool = False) -> ShiftWeights:
    """Empirical density-ratio weights w(v) = q(v)/p(v) over the source
    support; target support points unseen in the source are unreachable and
    only produce a warning."""
    if source.d != target.d:
        raise ShapeError("source and target joints have different dimensions")
    p = _value_pmf(source)
    q = _value_pmf(target)
    missing = [v for v in q if v not in p]
    if missing:
        warnings.warn(
            f"{len(missing)} target support point(s) have zero source "
            "probability and cannot be reached by reweighting"
        )
    point = {v: q.get(v, 0.0) / pv for v, pv in p.items()}

    per_record = None
    if source_rows is not None:
        keys = _rows_to_keys(source_rows)
        per_record = np.array([point[key] for key in keys])
        if normalize and per_record.mean() > 0:
            per_record = per_record / per_record.mean()
    return ShiftWeights(per_record, "nonparametric", normalize, point)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_weights(source_x, target_x, max_iter: int = 100,
                     tol: float = 1e-8) -> ShiftWeights:
    """Density-ratio weights from a linear logistic discriminator fit by
    iteratively reweighted least squares on the pooled sample.

    w(x) = P(target|x)/P(source|x) * n_source/n_target, mean-one normalized
    over the source records.
    """
    Xs = np.atleast_2d(np.asarray(source_x, dtype=float))
    Xt = np.atleast_2d(np.asarray(target_x, dtype=float))
    if Xs.shape[1] != Xt.shape[1]:
        raise ShapeError("source and target feature dimensions differ")
    ns, nt = len(Xs), len(Xt)
    X = np.vstack([Xs, Xt])
    X = np.column_stack([np.ones(len(X)), X])
    lab = np.concatenate([np.zeros(ns), np.ones(nt)])

    beta = np.zeros(X.shape[1])
    prev_ll = -np.inf
    converged = False
    for _ in range(max_iter):
        eta = X @ beta
        if np.max(np.abs(eta)) > 50:
            raise ConvergenceError(
                "logistic weight fit diverged (|log-odds| > 50); the pooled "
                "sample is likely perfectly separable"
            )
        mu = np.clip(_sigmoid(eta), 1e-12, 1 - 1e-12)
        ll = float(np.sum(lab * np.log(mu) + (1 - lab) * np.log(1 - mu)))
        if abs(ll - prev_ll) < tol:
            converged = True
            break
        prev_ll = ll
        wts = mu * (1 - mu)
        grad = X.T @ (lab - mu)
        hess = X.T @ (wts[:, None] * X) + 1e-10 * np.eye(X.shape[1])
        beta = beta + np.linalg.solve(hess, grad)
    if not converged:
        warnings.warn(f"logistic weight fit did not converge in {max_iter} iterations")

    eta_s = X[:ns] @ beta
    w = np.exp(eta_s) * (ns / nt)
    w = w / w.mean()
    return ShiftWeights(w, "logistic", True)


@dataclass
class TransferSpec:
    """Multi-task setup: per-record task labels, pooled training rows, and
    per-task target covariate samples."""

    tasks: np.ndarray               # (n,) task labels
    x: np.ndarray                   # (n, d) training covariates
    y: np.ndarray                   # (n,) training responses
    targets: dict                   # task -> target covariate rows
    priors: dict | None = None      # task -> prior; default empirical n_t/n

    def __post_init__(self):
        self.tasks = np.asarray(self.tasks)
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float)
        if self.priors is None:
            n = len(self.tasks)
            self.priors = {t: np.sum(self.tasks == t) / n
                           for t in np.unique(self.tasks)}
        total = sum(self.priors.values())
        if not np.isclose(total, 1.0) or any(p <= 0 for p in self.priors.values()):
            raise DomainError("task priors must be positive and sum to 1")


def transfer_weights(spec: TransferSpec, t, normalize: bool = False) -> ShiftWeights:
    """Plug-in transfer weights over the pooled training records:
    [p(x,y|t) / sum_t' p_t' p(x,y|t')] * [q(x|t)/p(x|t)]."""
    task_list = list(spec.priors)
    if t not in task_list:
        raise DomainError(f"task {t!r} not present in the spec")

    xy_keys = _rows_to_keys(np.column_stack([spec.x, spec.y]))
    x_keys = _rows_to_keys(spec.x)

    xy_pmf = {}
    x_pmf = {}
    for tt in task_list:
        mask = spec.tasks == tt
        n_t = int(mask.sum())
        xy_pmf[tt] = {k: c / n_t
                      for k, c in Counter(k for k, m in zip(xy_keys, mask) if m).items()}
        x_pmf[tt] = {k: c / n_t
                     for k, c in Counter(k for k, m in zip(x_keys, mask) if m).items()}

    q_counter = Counter(_rows_to_keys(spec.targets[t]))
    q_total = sum(q_counter.values())
    q_pmf = {k: c / q_total for k, c in q_counter.items()}

    w = np.empty(len(spec.tasks))
    for i, (kxy, kx) in enumerate(zip(xy_keys, x_keys)):
        mix = sum(spec.priors[tt] * xy_pmf[tt].get(kxy, 0.0) for tt in task_list)
        p_t_xy = xy_pmf[t].get(kxy, 0.0)
        p_t_x = x_pmf[t].get(kx, 0.0)
        if p_t_x == 0.0:
            w[i] = 0.0
        else:
            w[i] = (p_t_xy / mix) * (q_pmf.get(kx, 0.0) / p_t_x)
    if normalize and w.mean() > 0:
        w = w / w.mean()
    return ShiftWeights(w, "transfer", normalize)


@dataclass
class DesignInfo:
    """Column layout of a regression design matrix."""

    coding: str                     # dummy | numeric
    levels: tuple = ()              # per-variable sorted level tuples (dummy)
    columns: tuple = ()             # (variable index, level or None) per column
    d: int = 0


@dataclass
class RegressionModel:
    coding: str
    coef: np.ndarray
    design: DesignInfo
    ridge: float = field(default=1e-8)


def build_design(table_or_qi, coding: str, levels=None):
    """Design matrix with intercept.

    numeric: one raw-valued column per variable.  dummy: one indicator per
    level except the lowest of each variable; levels default to those
    observed in the data.
    """
    qi = table_or_qi.qi if isinstance(table_or_qi, DataTable) else table_or_qi
    qi = np.atleast_2d(np.asarray(qi, dtype=float))
    d = qi.shape[1]
    if coding == "numeric":
        info = DesignInfo("numeric", columns=tuple((j, None) for j in range(d)), d=d)
        return np.column_stack([np.ones(len(qi)), qi]), info
    if coding != "dummy":
        raise DomainError(f"unknown coding {coding!r}")
    rounded = round_sig(qi)
    if levels is None:
        levels = tuple(tuple(np.unique(rounded[:, j])) for j in range(d))
    else:
        levels = tuple(tuple(lv) for lv in levels)
    columns = tuple((j, lv) for j in range(d) for lv in levels[j][1:])
    info = DesignInfo("dummy", levels=levels, columns=columns, d=d)
    return apply_design(info, qi), info


def apply_design(info: DesignInfo, qi) -> np.ndarray:
    """Encode (possibly new) rows against a fitted design layout.

    Unseen dummy levels fall to the reference level (all-zero indicators)
    with a warning.
    """
    qi = np.atleast_2d(np.asarray(qi, dtype=float))
    if qi.shape[1] != info.d:
        raise ShapeError(f"expected {info.d} variables, got {qi.shape[1]}")
    if info.coding == "numeric":
        return np.column_stack([np.ones(len(qi)), qi])
    rounded = round_sig(qi)
    unseen = 0
    for j in range(info.d):
        unseen += int(np.sum(~np.isin(rounded[:, j], info.levels[j])))
    if unseen:
        warnings.warn(
            f"{unseen} cell(s) hold levels unseen at fit time; they fall to "
            "the reference level"
        )
    cols = [np.ones(len(qi))]
    for j, lv in info.columns:
        cols.append((rounded[:, j] == lv).astype(float))
    return np.column_stack(cols)


def weighted_least_squares(design, y, weights, ridge: float = 1e-8,
                           info: DesignInfo | None = None) -> RegressionModel:
    """Ridge-stabilized weighted least squares via QR of the sqrt-weight
    scaled system.  The intercept is not penalized.

    Weights are normalized to mean one internally so the fit is invariant to
    their overall scale.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(y, dtype=float)
    if isinstance(weights, ShiftWeights):
        w = weights.per_record
    else:
        w = np.asarray(weights, dtype=float)
    if w.shape[0] != X.shape[0] or y.shape[0] != X.shape[0]:
        raise ShapeError("design, response, and weights must align")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    wsum = w.sum()
    if wsum == 0:
        raise DegenerateError("all regression weights are zero")
    w = w * (len(w) / wsum)

    sqw = np.sqrt(w)
    Xw = X * sqw[:, None]
    yw = y * sqw
    if ridge > 0:
        pen = np.sqrt(ridge) * np.eye(X.shape[1])[1:]  # skip intercept
        Xw = np.vstack([Xw, pen])
        yw = np.concatenate([yw, np.zeros(X.shape[1] - 1)])
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    if info is None:
        info = DesignInfo("numeric", columns=tuple(), d=X.shape[1] - 1)
    return RegressionModel(info.coding, coef, info, ridge)


def predict(model: RegressionModel, qi) -> np.ndarray:
    return apply_design(model.design, qi) @ model.coef


def relative_bias(predicted, actual) -> float:
    """100 * (mean(predicted) - mean(actual)) / mean(actual)."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.shape != actual.shape:
        raise ShapeError("length mismatch")
    ma = actual.mean()
    if ma == 0:
        raise DomainError("actual mean is zero; relative bias undefined")
    return float(100.0 * (predicted.mean() - ma) / ma)


def r_squared(predicted, actual) -> float:
    """Coefficient of determination; may be negative."""
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0:
        raise DomainError("actual response has zero variance")
    ss_err = float(np.sum((actual - predicted) ** 2))
    return 1.0 - ss_err / ss_tot


def histogram_intersection(p: dict, q: dict) -> float:
    """Sum over the union support of min(p(v), q(v))."""
    support = set(p) | set(q)
    return float(sum(min(p.get(v, 0.0), q.get(v, 0.0)) for v in support))
