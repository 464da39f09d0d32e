"""Rosenblatt transformation: forward maps dither samples to uniform
coordinates via conditional CDFs of the dither law; inverse maps uniforms
onto the empirical distribution through the conditional inverse-CDF chain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .dataset import EmpiricalJoint, _inverse_index
from .dither import CellPartition, DitherSample
from .errors import DomainError, PartitionError
from .kmember import ClusterModel

_PD_TOL = 1e-10
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class UniformVector:
    u: np.ndarray
    record_index: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        object.__setattr__(self, "u", u)
        if np.any(u <= 0) or np.any(u > 1):
            raise DomainError("uniform coordinates must lie in (0, 1]")


def _within_cell_frac(x: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 1.0
    frac = (x - lo) / (hi - lo)
    return float(min(max(frac, 1e-15), 1.0))


def forward_cell_uniform(xt: DitherSample, model: ClusterModel,
                         partition: CellPartition,
                         joint: EmpiricalJoint) -> UniformVector:
    """Conditional mixture CDF of the piecewise-uniform dither, evaluated in
    closed form: the conditional cell mass equals the empirical conditional
    PMF, plus a linear within-interval term."""
    x = np.asarray(xt.xt, dtype=float)
    u = np.empty(partition.d)

    if partition.merged:
        # 1-d merged partition: cell masses n(cell)/n, uniform within cell.
        m = partition.locate(0, x[0])
        counts = np.array(
            [partition.cell_counts[(i,)] for i in range(partition.n_cells(0))],
            dtype=float,
        )
        total = counts.sum()
        before = counts[:m].sum()
        frac = _within_cell_frac(x[0], partition.lo[0][m], partition.hi[0][m])
        u[0] = (before + counts[m] * frac) / total
        return UniformVector(u, xt.record_index)

    prefix: tuple = ()
    for j in range(partition.d):
        i = partition.locate(j, x[j])
        idx, cumfrac, _ = joint.cond_table(prefix)
        pos = int(np.searchsorted(idx, i))
        if pos >= len(idx) or idx[pos] != i:
            raise PartitionError(
                f"dither sample falls in cell {i} of dimension {j}, which has "
                f"zero probability under prefix {prefix}"
            )
        f_prev = float(cumfrac[pos - 1]) if pos > 0 else 0.0
        p_i = float(cumfrac[pos]) - f_prev
        frac = _within_cell_frac(x[j], partition.lo[j][i], partition.hi[j][i])
        u[j] = min(f_prev + p_i * frac, 1.0)
        prefix = prefix + (i,)
    return UniformVector(u, xt.record_index)


def _conditional_coeffs(model: ClusterModel, alpha: float):
    """Per-cluster Gaussian conditioning coefficients for each dimension.

    Returns (coefs, sig) where coefs[ell][j] solves the leading principal
    submatrix system and sig[ell, j] is the conditional standard deviation.
    """
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    c = model.c
    d = model.centroids.shape[1]
    lam = model.covariances + alpha * np.eye(d)
    coefs = []
    sig = np.empty((c, d))
    for ell in range(c):
        per_j = []
        for j in range(d):
            if j == 0:
                b = np.empty(0)
                s2 = lam[ell, 0, 0]
            else:
                head = lam[ell, :j, :j]
                b = np.linalg.solve(head, lam[ell, :j, j])
                s2 = lam[ell, j, j] - lam[ell, j, :j] @ b
            if s2 <= _PD_TOL:
                raise RuntimeError(
                    f"conditional variance {s2} not positive in cluster {ell}, "
                    f"dimension {j}; covariance loading failed"
                )
            per_j.append(b)
            sig[ell, j] = np.sqrt(s2)
        coefs.append(per_j)
    return coefs, sig


def conditional_moments(model: ClusterModel, alpha: float, ell: int, j: int,
                        x_prefix) -> tuple[float, float]:
    """Conditional mean and variance of dimension j given the first j
    coordinates of the cluster-ell Gaussian dither."""
    coefs, sig = _conditional_coeffs(model, alpha)
    x_prefix = np.asarray(x_prefix, dtype=float)
    mu = model.centroids[ell, j] + coefs[ell][j] @ (x_prefix - model.centroids[ell, :j])
    return float(mu), float(sig[ell, j] ** 2)


def forward_gaussian(xt, model: ClusterModel, alpha: float):
    """Mixture-CDF forward transform for Gaussian dither.

    u_j averages the per-cluster conditional Gaussian CDFs under cluster
    posteriors updated by Bayes' rule; posteriors are carried in log space so
    far-from-centroid points do not underflow.

    Accepts a DitherSample (returns UniformVector) or an (N, d) array of
    samples (returns an (N, d) array).
    """
    single = isinstance(xt, DitherSample)
    X = np.atleast_2d(np.asarray(xt.xt if single else xt, dtype=float))
    if not np.all(np.isfinite(X)):
        raise DomainError("non-finite dither coordinates")
    n, d = X.shape
    coefs, sig = _conditional_coeffs(model, alpha)
    c = model.c
    sizes = model.sizes.astype(float)
    logpost = np.tile(np.log(sizes / sizes.sum()), (n, 1))  # (n, c)

    u = np.empty((n, d))
    for j in range(d):
        mu = np.empty((n, c))
        for ell in range(c):
            mu[:, ell] = model.centroids[ell, j]
            if j > 0:
                mu[:, ell] += (X[:, :j] - model.centroids[ell, :j]) @ coefs[ell][j]
        z = (X[:, j, None] - mu) / sig[None, :, j]
        post = np.exp(logpost - logsumexp(logpost, axis=1, keepdims=True))
        u[:, j] = np.einsum("nc,nc->n", post, ndtr(z))
        logpdf = -0.5 * z * z - np.log(sig[None, :, j]) - 0.5 * _LOG_2PI
        logpost = logpost + logpdf

    np.clip(u, np.finfo(float).tiny, 1.0, out=u)
    if single:
        return UniformVector(u[0], xt.record_index)
    return u


def inverse_empirical_indices(u, joint: EmpiricalJoint) -> tuple:
    """Sequential inverse conditional CDFs; returns per-dimension value
    indices into joint.values."""
    u = np.asarray(u.u if isinstance(u, UniformVector) else u, dtype=float)
    if np.any(u > 1) or np.any(u < 0):
        raise DomainError("uniform coordinates must lie in [0, 1]")
    u = np.maximum(u, np.finfo(float).tiny)  # clamp exact zeros
    prefix: tuple = ()
    for j in range(joint.d):
        i = _inverse_index(joint, j, prefix, float(u[j]))
        prefix = prefix + (i,)
    return prefix


def inverse_empirical(u, joint: EmpiricalJoint) -> np.ndarray:
    """Map uniform coordinates onto observed per-dimension values."""
    idx = inverse_empirical_indices(u, joint)
    return np.array([joint.values[j][i] for j, i in enumerate(idx)])
