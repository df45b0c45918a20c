"""Dense kernels shared by the representation-based detectors.

All accumulation happens in float64 even though bundle storage is float32;
covariance sums over large N in 32-bit lose digits. Covariance uses the MLE
divisor N, and the Mahalanobis form is returned *squared* (monotone in the
true distance, so rankings and argmin-class are unchanged).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FitError, NumericError


class RankDeficiencyWarning(UserWarning):
    """Centered data has rank below the requested PCA dimension."""


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus k orthonormal principal directions (rows of ``components``)."""

    mean: np.ndarray
    components: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class GaussianByClass:
    """Per-class means with a shared regularized precision matrix."""

    means: np.ndarray
    precision: np.ndarray
    reg_epsilon: float


@dataclass(frozen=True)
class BackgroundGaussian:
    """Single Gaussian over all rows, label-free."""

    mean: np.ndarray
    precision: np.ndarray
    reg_epsilon: float


def default_epsilon(cov: np.ndarray) -> float:
    """Scale-invariant ridge: 1e-6 * trace(cov) / m."""
    m = cov.shape[0]
    return 1e-6 * float(np.trace(cov)) / m


def pca_fit(x: np.ndarray, k: int) -> PcaModel:
    """Fit PCA via SVD of the centered data matrix.

    Components are the top-k right singular directions ordered by descending
    singular value. Each component is sign-flipped so its largest-magnitude
    entry is positive (ties broken by lowest index), making output
    deterministic across platforms.

    Raises:
        ValueError: k outside [1, min(N, d)] or N < 2.
    Warns:
        RankDeficiencyWarning: centered data rank < k; trailing directions are
            arbitrary but still orthonormal.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError(f"pca_fit needs N >= 2, got {n}")
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k={k} outside [1, {min(n, d)}]")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(n, d) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank < k:
        warnings.warn(
            f"centered data rank {rank} < requested k={k}; trailing components are arbitrary",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    components = vt[:k].copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components)


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project rows of x onto the principal directions after centering."""
    x = np.asarray(x, dtype=np.float64)
    d = model.mean.shape[0]
    if x.shape[-1] != d:
        raise ValueError(f"expected {d} columns, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def regularize_precision(cov: np.ndarray, epsilon: float) -> np.ndarray:
    """Invert (cov + epsilon*I) via Cholesky, symmetrizing first.

    Raises:
        NumericError: Cholesky fails even after the ridge (epsilon too small
            for the data scale).
    """
    cov = np.asarray(cov, dtype=np.float64)
    sym = 0.5 * (cov + cov.T)
    ridged = sym + epsilon * np.eye(sym.shape[0])
    try:
        chol, lower = scipy.linalg.cho_factor(ridged, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(
            f"Cholesky failed on regularized covariance (epsilon={epsilon})"
        ) from exc
    precision = scipy.linalg.cho_solve((chol, lower), np.eye(sym.shape[0]))
    return 0.5 * (precision + precision.T)


def _shared_covariance(z: np.ndarray, means_per_row: np.ndarray) -> np.ndarray:
    diff = z - means_per_row
    return diff.T @ diff / z.shape[0]


def fit_class_gaussians(
    z: np.ndarray,
    labels: np.ndarray,
    num_classes: int | None = None,
    epsilon: float | None = None,
) -> GaussianByClass:
    """MLE class means with a shared covariance (divisor N) and regularized precision.

    Raises:
        FitError: some class in [0, C) has no samples.
    """
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels)
    c = int(num_classes) if num_classes is not None else int(labels.max()) + 1
    means = np.empty((c, z.shape[1]))
    for cls in range(c):
        rows = z[labels == cls]
        if rows.shape[0] == 0:
            raise FitError(f"class {cls} has no samples")
        means[cls] = rows.mean(axis=0)
    cov = _shared_covariance(z, means[labels])
    eps = default_epsilon(cov) if epsilon is None else float(epsilon)
    return GaussianByClass(means=means, precision=regularize_precision(cov, eps), reg_epsilon=eps)


def fit_background(z: np.ndarray, epsilon: float | None = None) -> BackgroundGaussian:
    """Single Gaussian over all rows; same estimator as a one-class fit.

    Raises:
        FitError: fewer than two rows.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] < 2:
        raise FitError(f"background fit needs N >= 2, got {z.shape[0]}")
    mean = z.mean(axis=0)
    cov = _shared_covariance(z, mean[None, :])
    eps = default_epsilon(cov) if epsilon is None else float(epsilon)
    return BackgroundGaussian(mean=mean, precision=regularize_precision(cov, eps), reg_epsilon=eps)


def mahalanobis_sq(z: np.ndarray, mean: np.ndarray, precision: np.ndarray) -> np.ndarray | float:
    """Squared Mahalanobis form (z-mean)' P (z-mean); batched over rows if z is 2-D."""
    z = np.asarray(z, dtype=np.float64)
    diff = z - mean
    if diff.ndim == 1:
        return float(diff @ precision @ diff)
    return np.einsum("ij,jk,ik->i", diff, precision, diff)
