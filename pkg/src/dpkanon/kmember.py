"""Greedy k-member clustering with a weighted squared-Euclidean distortion.

Every cluster must contain at least k records; the cluster count is fixed to
floor(n/k) and leftover records are absorbed by the nearest centroid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataTable
from .errors import DomainError, InfeasibleError, ShapeError


def distortion(a, b, w: float) -> float:
    """Weighted squared Euclidean distance between (x, y) points:
    ||x - x'||^2 + w (y - y')^2."""
    (xa, ya), (xb, yb) = a, b
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    if xa.shape != xb.shape:
        raise ShapeError(f"dimension mismatch: {xa.shape} vs {xb.shape}")
    if w <= 0:
        raise DomainError(f"distortion weight must be positive, got {w}")
    diff = xa - xb
    return float(diff @ diff + w * (float(ya) - float(yb)) ** 2)


@dataclass(frozen=True)
class ClusterModel:
    """k-member assignment plus per-cluster summaries."""

    assignment: np.ndarray   # (n,) cluster index in 0..c-1
    members: tuple           # c arrays of record indices
    values: tuple            # c arrays (n_l, d): quasi-identifier rows V_l
    member_y: tuple          # c arrays (n_l,): response values
    centroids: np.ndarray    # (c, d) mean quasi-identifiers
    centroids_y: np.ndarray  # (c,) mean responses
    covariances: np.ndarray  # (c, d, d) population covariances of V_l
    k: int
    w: float

    @property
    def c(self) -> int:
        return len(self.members)

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(m) for m in self.members])


def _summarize(table: DataTable, assignment: np.ndarray, c: int, k: int, w: float):
    members, values, member_y = [], [], []
    centroids = np.empty((c, table.d))
    centroids_y = np.empty(c)
    covs = np.empty((c, table.d, table.d))
    for ell in range(c):
        idx = np.flatnonzero(assignment == ell)
        rows = table.qi[idx]
        ys = table.response[idx]
        members.append(idx)
        values.append(rows)
        member_y.append(ys)
        centroids[ell] = rows.mean(axis=0)
        centroids_y[ell] = ys.mean()
        centered = rows - centroids[ell]
        covs[ell] = centered.T @ centered / len(idx)  # population form
    return ClusterModel(
        assignment=assignment,
        members=tuple(members),
        values=tuple(values),
        member_y=tuple(member_y),
        centroids=centroids,
        centroids_y=centroids_y,
        covariances=covs,
        k=k,
        w=w,
    )


def greedy_k_member(table: DataTable, k: int, w: float = 1.0, seed: int = 0) -> ClusterModel:
    """Greedy k-member clustering.

    Seeds the first cluster at a uniformly random record, grows each cluster
    by repeatedly adding the unassigned record closest to the running
    centroid, seeds each subsequent cluster at the unassigned record farthest
    from the previous centroid, then absorbs leftovers into the nearest
    centroid.  Ties break toward the lowest record index; deterministic for a
    given seed.
    """
    n = table.n
    if k < 2:
        raise DomainError(f"k must be at least 2, got {k}")
    if k > n:
        raise InfeasibleError(f"infeasible k: k={k} exceeds n={n}")
    if w <= 0:
        raise DomainError(f"distortion weight must be positive, got {w}")

    X = table.qi
    y = table.response
    c = n // k
    assignment = np.full(n, -1, dtype=int)
    unassigned = np.ones(n, dtype=bool)
    rng = np.random.default_rng(seed)

    def dist_to(cx, cy):
        diff = X - cx
        return np.einsum("ij,ij->i", diff, diff) + w * (y - cy) ** 2

    prev_centroid = None
    for ell in range(c):
        if ell == 0:
            candidates = np.flatnonzero(unassigned)
            seed_idx = int(candidates[rng.integers(len(candidates))])
        else:
            d2 = dist_to(*prev_centroid)
            d2[~unassigned] = -np.inf
            seed_idx = int(np.argmax(d2))  # first max -> lowest index on ties
        assignment[seed_idx] = ell
        unassigned[seed_idx] = False
        cx, cy = X[seed_idx].astype(float), float(y[seed_idx])
        size = 1
        while size < k:
            d2 = dist_to(cx, cy)
            d2[~unassigned] = np.inf
            add = int(np.argmin(d2))
            assignment[add] = ell
            unassigned[add] = False
            size += 1
            cx = cx + (X[add] - cx) / size
            cy = cy + (float(y[add]) - cy) / size
        prev_centroid = (cx, cy)

    # leftovers: nearest centroid by the same distortion
    if unassigned.any():
        cents = np.empty((c, table.d))
        cents_y = np.empty(c)
        for ell in range(c):
            idx = assignment == ell
            cents[ell] = X[idx].mean(axis=0)
            cents_y[ell] = y[idx].mean()
        for i in np.flatnonzero(unassigned):
            diff = cents - X[i]
            d2 = np.einsum("ij,ij->i", diff, diff) + w * (cents_y - y[i]) ** 2
            assignment[i] = int(np.argmin(d2))

    return _summarize(table, assignment, c, k, w)


def validate_k_anonymous(model: ClusterModel):
    """Check the k-member constraints: every cluster >= k members and the
    member lists form an exact partition.  Returns (ok, violations)."""
    violations = []
    n = model.n
    seen = np.zeros(n, dtype=int)
    for ell, idx in enumerate(model.members):
        if len(idx) < model.k:
            violations.append(
                f"cluster {ell} has {len(idx)} members, fewer than k={model.k}"
            )
        seen[idx] += 1
        if np.any(model.assignment[idx] != ell):
            violations.append(f"cluster {ell} member list disagrees with assignment")
    dup = np.flatnonzero(seen > 1)
    if dup.size:
        violations.append(f"records {dup.tolist()} appear in more than one cluster")
    missing = np.flatnonzero(seen == 0)
    if missing.size:
        violations.append(f"records {missing.tolist()} are unassigned")
    if model.c > n // model.k:
        violations.append(f"cluster count {model.c} exceeds floor(n/k)")
    return (not violations), violations


def total_distortion(model: ClusterModel, table: DataTable) -> float:
    """Sum of per-record distortions to the assigned cluster centroid."""
    cx = model.centroids[model.assignment]
    cy = model.centroids_y[model.assignment]
    diff = table.qi - cx
    return float(
        np.einsum("ij,ij->i", diff, diff).sum()
        + model.w * ((table.response - cy) ** 2).sum()
    )
