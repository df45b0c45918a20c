"""Exact k-th nearest neighbor distances over a stored embedding bank.

Exact search only: desk-scale banks make a full distance pass affordable and
keep results deterministic. Distance ties occupy multiple ranks (the k-th
order statistic of the multiset), with no tie-collapsing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError


def default_k(n_id: int) -> int:
    """k = 50 for banks with at least 10000 ID rows, else max(1, ceil(N/200))."""
    if n_id >= 10000:
        return 50
    return max(1, math.ceil(n_id / 200))


@dataclass(frozen=True)
class KnnIndex:
    bank: np.ndarray
    normalized: bool
    subsample_fraction: float


def normalize_rows(z: np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero rows raise."""
    z = np.asarray(z, dtype=np.float64)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(norms == 0):
        bad = np.nonzero(norms.ravel() == 0)[0].tolist()
        raise FitError(f"cannot L2-normalize zero rows at indices {bad}")
    return z / norms


def build_index(
    z: np.ndarray,
    subsample_fraction: float = 1.0,
    normalize: bool = True,
    seed: int = 0,
) -> KnnIndex:
    """Retain ceil(fraction*N) rows by a seeded uniform draw without replacement.

    Fraction 1.0 keeps every row in original order; subsampled banks preserve
    the original relative order of the drawn rows.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n < 1:
        raise ValueError("empty embedding bank")
    if not 0.0 < subsample_fraction <= 1.0:
        raise ValueError(f"subsample_fraction {subsample_fraction} outside (0, 1]")
    keep = math.ceil(subsample_fraction * n)
    if keep < n:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(n, size=keep, replace=False))
        bank = z[idx]
    else:
        bank = z
    if normalize:
        bank = normalize_rows(bank)
    return KnnIndex(bank=bank, normalized=normalize, subsample_fraction=subsample_fraction)


def kth_distance(index: KnnIndex, z: np.ndarray, k: int) -> np.ndarray | float:
    """Euclidean distance from each query row to its k-th nearest bank row.

    The caller is responsible for normalizing queries when the index was built
    normalized. Exact: distances are the k-th smallest of the full multiset.
    """
    bank = index.bank
    m = bank.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k={k} outside [1, {m}]")
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    queries = z[None, :] if single else z
    out = np.empty(queries.shape[0])
    for i, q in enumerate(queries):
        dists = np.linalg.norm(bank - q, axis=1)
        out[i] = np.partition(dists, k - 1)[k - 1]
    return float(out[0]) if single else out
