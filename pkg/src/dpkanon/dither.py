"""Continuous dither generation: piecewise-uniform intra-cluster dither over
rectangular cells, and Gaussian dither from per-cluster moments.

Randomness is organized as per-record substreams derived from a master seed,
so results do not depend on the order in which records are processed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import EmpiricalJoint, round_sig
from .errors import DomainError
from .kmember import ClusterModel


def substream(seed: int, *key) -> np.random.Generator:
    """Deterministic child stream of the master seed, keyed by integers."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class DitherSample:
    xt: np.ndarray
    record_index: int
    cluster: int


class CellPartition:
    """Rectangular tiling of quasi-identifier space: per-dimension interval
    boundaries plus per-cluster cell counts.

    Unbounded edge intervals get a symmetric truncation around the cell's
    value (half the median interior interval width) for sampling, which also
    defines the within-cell CDF used by the forward transform.
    """

    def __init__(self, values, boundaries, cluster_cell_counts, cell_counts,
                 cluster_sizes, groups=None):
        self.values = [np.asarray(v, dtype=float) for v in values]
        self.boundaries = [np.asarray(b, dtype=float) for b in boundaries]
        self.cluster_cell_counts = dict(cluster_cell_counts)
        self.cell_counts = dict(cell_counts)
        self.cluster_sizes = np.asarray(cluster_sizes, dtype=int)
        self.groups = None if groups is None else tuple(tuple(g) for g in groups)
        self.d = len(self.boundaries)
        self._build_supports()
        self._build_cluster_cells()

    @property
    def merged(self) -> bool:
        return self.groups is not None

    def n_cells(self, j: int) -> int:
        return len(self.boundaries[j]) - 1

    def _cell_value_span(self, j: int, i: int):
        """Smallest and largest observed values contained in cell i of dim j."""
        if self.merged and j == 0:
            g = self.groups[i]
            return self.values[0][g[0]], self.values[0][g[-1]]
        v = self.values[j][i]
        return v, v

    def _build_supports(self):
        self.delta = []
        self.lo = []
        self.hi = []
        for j in range(self.d):
            b = self.boundaries[j]
            interior = b[1:-1]
            if len(interior) >= 2:
                widths = np.diff(interior)
            elif len(self.values[j]) >= 2:
                widths = np.diff(self.values[j])
            else:
                widths = np.array([1.0])
            delta = float(np.median(widths)) / 2.0
            lo = np.empty(self.n_cells(j))
            hi = np.empty(self.n_cells(j))
            for i in range(self.n_cells(j)):
                vmin, vmax = self._cell_value_span(j, i)
                left, right = b[i], b[i + 1]
                lo[i] = left if np.isfinite(left) else vmin - delta
                hi[i] = right if np.isfinite(right) else vmax + delta
                if not np.isfinite(left):
                    hi[i] = min(hi[i], vmin + delta) if np.isfinite(right) else hi[i]
                if not np.isfinite(right) and np.isfinite(left):
                    lo[i] = max(lo[i], vmax - delta)
            self.delta.append(delta)
            self.lo.append(lo)
            self.hi.append(hi)

    def _build_cluster_cells(self):
        per_cluster: dict[int, dict] = {}
        for (ell, cell), cnt in self.cluster_cell_counts.items():
            per_cluster.setdefault(ell, {})[cell] = cnt
        self.cluster_cells = {}
        for ell, cells in per_cluster.items():
            keys = sorted(cells)
            counts = np.array([cells[k] for k in keys], dtype=float)
            self.cluster_cells[ell] = (keys, counts / counts.sum())

    def locate(self, j: int, x: float) -> int:
        """Index of the cell (b(i), b(i+1)] containing x in dimension j."""
        return int(np.searchsorted(self.boundaries[j][1:-1], x, side="left"))


def build_cell_partition(joint: EmpiricalJoint, model: ClusterModel) -> CellPartition:
    """Midpoint boundaries between consecutive distinct values, with cell
    counts tallied per cluster.  Verifies the bookkeeping identity
    sum_l n_l(cell) = n(cell)."""
    boundaries = []
    for v in joint.values:
        mids = (v[:-1] + v[1:]) / 2.0
        boundaries.append(np.concatenate(([-np.inf], mids, [np.inf])))

    cluster_cell_counts: dict = {}
    for ell, rows in enumerate(model.values):
        rounded = round_sig(rows)
        idx = np.column_stack(
            [np.searchsorted(joint.values[j], rounded[:, j]) for j in range(joint.d)]
        )
        for t in map(tuple, idx.tolist()):
            cluster_cell_counts[(ell, t)] = cluster_cell_counts.get((ell, t), 0) + 1

    totals: dict = {}
    for (_, cell), cnt in cluster_cell_counts.items():
        totals[cell] = totals.get(cell, 0) + cnt
    if totals != dict(joint.counts):
        raise ValueError("cluster cell counts do not reconcile with joint counts; "
                         "model and joint were built from different data")

    return CellPartition(
        joint.values,
        boundaries,
        cluster_cell_counts,
        dict(joint.counts),
        model.sizes,
    )


def sample_intra_cluster(record: int, model: ClusterModel,
                         partition: CellPartition,
                         rng: np.random.Generator) -> DitherSample:
    """Pick a cell with probability n_l(cell)/n_l, then draw coordinates
    independently uniform on each (possibly truncated) interval."""
    ell = int(model.assignment[record])
    cells, probs = partition.cluster_cells[ell]
    ci = int(rng.choice(len(cells), p=probs))
    cell = cells[ci]
    xt = np.empty(partition.d)
    for j, i in enumerate(cell):
        xt[j] = rng.uniform(partition.lo[j][i], partition.hi[j][i])
    return DitherSample(xt, record, ell)


def merge_cells_1d(partition: CellPartition, model: ClusterModel) -> CellPartition:
    """Merge contiguous 1-d cells that belong in full to the same cluster."""
    if partition.d != 1:
        raise DomainError("cell merging is defined for d = 1 only")

    n1 = partition.n_cells(0)
    owner = np.full(n1, -1, dtype=int)  # owning cluster, -1 if split
    for i in range(n1):
        total = partition.cell_counts.get((i,), 0)
        for ell in range(len(partition.cluster_sizes)):
            if partition.cluster_cell_counts.get((ell, (i,)), 0) == total and total > 0:
                owner[i] = ell
                break

    groups: list[list[int]] = []
    for i in range(n1):
        if groups and owner[i] != -1 and owner[i] == owner[groups[-1][-1]]:
            groups[-1].append(i)
        else:
            groups.append([i])

    b = partition.boundaries[0]
    new_bounds = [b[0]] + [b[g[-1] + 1] for g in groups]
    new_cluster_counts: dict = {}
    new_counts: dict = {}
    for m, g in enumerate(groups):
        for i in g:
            new_counts[(m,)] = new_counts.get((m,), 0) + partition.cell_counts[(i,)]
            for ell in range(len(partition.cluster_sizes)):
                cnt = partition.cluster_cell_counts.get((ell, (i,)), 0)
                if cnt:
                    new_cluster_counts[(ell, (m,))] = (
                        new_cluster_counts.get((ell, (m,)), 0) + cnt
                    )

    return CellPartition(
        partition.values,
        [np.asarray(new_bounds)],
        new_cluster_counts,
        new_counts,
        partition.cluster_sizes,
        groups=groups,
    )


def _loaded_cholesky(model: ClusterModel, alpha: float) -> np.ndarray:
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    d = model.centroids.shape[1]
    lam = model.covariances + alpha * np.eye(d)
    return np.linalg.cholesky(lam)


def sample_gaussian(record: int, model: ClusterModel, alpha: float,
                    rng: np.random.Generator) -> DitherSample:
    """Draw from N(centroid_l, Sigma_l + alpha I) for the record's cluster."""
    ell = int(model.assignment[record])
    L = _loaded_cholesky(model, alpha)[ell]
    z = rng.standard_normal(model.centroids.shape[1])
    xt = model.centroids[ell] + L @ z
    return DitherSample(xt, record, ell)


def sample_gaussian_batch(model: ClusterModel, alpha: float, records,
                          rng: np.random.Generator) -> np.ndarray:
    """Vectorized Gaussian dither for many records with a single stream.

    Draw order is fixed by the given record order, so the result is
    deterministic for a given generator state.
    """
    records = np.asarray(records, dtype=int)
    L = _loaded_cholesky(model, alpha)
    ells = model.assignment[records]
    z = rng.standard_normal((len(records), model.centroids.shape[1]))
    out = model.centroids[ells] + np.einsum("njk,nk->nj", L[ells], z)
    return out
