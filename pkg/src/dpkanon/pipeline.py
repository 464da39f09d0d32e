"""End-to-end anonymization pipeline: standardize, cluster, dither/transform,
destandardize, rejoin the response.

Only the quasi-identifiers are anonymized; the response participates in the
clustering distance but is passed through untouched.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from .dataset import (
    DataTable,
    EmpiricalJoint,
    Standardizer,
    build_empirical_joint,
    round_sig,
    standardize,
)
from .dither import (
    CellPartition,
    build_cell_partition,
    sample_gaussian,
    sample_intra_cluster,
    substream,
)
from .errors import DomainError
from .kmember import ClusterModel, greedy_k_member
from .rosenblatt import forward_cell_uniform, forward_gaussian, inverse_empirical_indices

METHODS = ("centroid", "resample", "permute", "cell_dither", "gaussian")

# substream channels
_CH_DITHER = 0
_CH_RESAMPLE = 2


@dataclass(frozen=True)
class AnonymizedTable:
    qi_hat: np.ndarray
    response: np.ndarray
    columns: tuple
    record_ids: tuple
    method: str
    k: int
    seed: int
    alpha: float
    w: float


@dataclass(frozen=True)
class PipelineState:
    """Clustering-stage artifacts, reusable across dither trials."""

    table: DataTable
    std_table: DataTable
    standardizer: Standardizer
    model: ClusterModel
    joint: EmpiricalJoint
    partition: CellPartition
    orig_values: tuple  # per-dimension sorted distinct original values
    k: int
    w: float
    seed: int


def prepare(table: DataTable, k: int, w: float = 1.0, seed: int = 0) -> PipelineState:
    std_table, std = standardize(table)
    model = greedy_k_member(std_table, k, w=w, seed=seed)
    joint = build_empirical_joint(std_table.qi)
    partition = build_cell_partition(joint, model)
    orig_values = tuple(
        np.unique(round_sig(table.qi[:, j])) for j in range(table.d)
    )
    return PipelineState(table, std_table, std, model, joint, partition,
                         orig_values, k, w, seed)


def resample_within_clusters(model: ClusterModel, rng: np.random.Generator,
                             with_replacement: bool) -> np.ndarray:
    """Per-record source indices: independent uniform member draws (with
    replacement) or a uniformly random permutation of each cluster's members
    (without)."""
    out = np.empty(model.n, dtype=int)
    for idx in model.members:
        if with_replacement:
            out[idx] = rng.choice(idx, size=len(idx), replace=True)
        else:
            out[idx] = rng.permutation(idx)
    return out


def resample_pmf(state: PipelineState) -> dict:
    """Analytic output PMF of the resample method in exact rational
    arithmetic: sum_l (n_l/n)(n_l(v)/n_l)."""
    n = state.model.n
    out: dict[tuple, Fraction] = {}
    for (_, cell), cnt in state.partition.cluster_cell_counts.items():
        out[cell] = out.get(cell, Fraction(0)) + Fraction(cnt, n)
    return out


def empirical_pmf_exact(joint: EmpiricalJoint) -> dict:
    return {t: Fraction(c, joint.total) for t, c in joint.counts.items()}


def _indices_to_original(state: PipelineState, idx_rows) -> np.ndarray:
    out = np.empty((len(idx_rows), len(state.orig_values)))
    for r, idx in enumerate(idx_rows):
        for j, i in enumerate(idx):
            out[r, j] = state.orig_values[j][i]
    return out


def transform(state: PipelineState, method: str, alpha: float = 1.0 / 3.0,
              trial: int = 0) -> AnonymizedTable:
    """Apply one anonymization method on a prepared state.

    `trial` keys the dither substreams so repeated trials on a fixed
    clustering draw fresh randomness deterministically.
    """
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    n = state.table.n
    seed = state.seed

    if method == "centroid":
        qi_std = state.model.centroids[state.model.assignment]
        qi_hat = state.standardizer.revert_qi(qi_std)
    elif method in ("resample", "permute"):
        rng = substream(seed, _CH_RESAMPLE, trial)
        src = resample_within_clusters(state.model, rng,
                                       with_replacement=(method == "resample"))
        qi_hat = state.table.qi[src].copy()
    elif method == "cell_dither":
        idx_rows = []
        for r in range(n):
            rng = substream(seed, _CH_DITHER, trial, r)
            xt = sample_intra_cluster(r, state.model, state.partition, rng)
            u = forward_cell_uniform(xt, state.model, state.partition, state.joint)
            idx_rows.append(inverse_empirical_indices(u, state.joint))
        qi_hat = _indices_to_original(state, idx_rows)
    else:  # gaussian
        xt = np.empty((n, state.table.d))
        for r in range(n):
            rng = substream(seed, _CH_DITHER, trial, r)
            xt[r] = sample_gaussian(r, state.model, alpha, rng).xt
        u = forward_gaussian(xt, state.model, alpha)
        idx_rows = [inverse_empirical_indices(u[r], state.joint) for r in range(n)]
        qi_hat = _indices_to_original(state, idx_rows)

    return AnonymizedTable(
        qi_hat=qi_hat,
        response=state.table.response.copy(),
        columns=state.table.columns,
        record_ids=state.table.record_ids,
        method=method,
        k=state.k,
        seed=seed,
        alpha=alpha,
        w=state.w,
    )


def anonymize(table: DataTable, k: int, method: str, w: float = 1.0,
              alpha: float = 1.0 / 3.0, seed: int = 0) -> AnonymizedTable:
    """Full pipeline: standardize, cluster, transform, destandardize, rejoin."""
    state = prepare(table, k, w=w, seed=seed)
    return transform(state, method, alpha=alpha)


def write_anonymized_csv(anon: AnonymizedTable, path, response_name: str = "response"):
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id"] + [c.name for c in anon.columns] + [response_name])
        for rid, row, y in zip(anon.record_ids, anon.qi_hat, anon.response):
            writer.writerow([rid] + [repr(float(v)) for v in row] + [repr(float(y))])


def write_sidecar(anon: AnonymizedTable, path):
    meta = {
        "method": anon.method,
        "k": anon.k,
        "seed": anon.seed,
        "alpha": anon.alpha,
        "w": anon.w,
        "n": int(len(anon.response)),
        "d": int(anon.qi_hat.shape[1]),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
