"""Every scoring method behind one contract: fit once on ID data, then map an
embedding to a scalar where larger means more in-distribution.

Methods the literature states as distances (MDS, RMDS, KNN) are negated at the
scorer boundary so a single threshold rule covers every method; AUROC is
unaffected. Energy is the canonical log-sum-exp of logits at temperature 1; a
``printed_form`` flag computes the alternative sum-of-exp(-logit) variant for
comparison.

DICE masks are deterministic: ties at the sparsity cut are broken by smaller
contribution value first, then row-major index order. The bias term is never
masked. All percentage-to-count conversions use floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import knn as knn_mod
from . import linalg
from .array_store import ClassifierHead, read_npy, write_npy
from .errors import NumericError
from .knn import KnnIndex, build_index, kth_distance
from .linalg import BackgroundGaussian, GaussianByClass, PcaModel, mahalanobis_sq

DETECTOR_FORMAT_VERSION = 1
REPRESENTATION_METHODS = ("mds", "rmds", "knn")
LOGIT_METHODS = ("msp", "energy", "ash", "dice", "dicecol")
ALL_METHODS = LOGIT_METHODS + REPRESENTATION_METHODS


def pct_floor_count(p: float, n: int) -> int:
    """floor((p/100) * n), exact for integral p."""
    if float(p).is_integer():
        return (int(p) * n) // 100
    return math.floor(p * n / 100.0)


def logits(head: ClassifierHead, z: np.ndarray) -> np.ndarray:
    """W'z + b for one embedding or a batch of rows."""
    w = np.asarray(head.weights, dtype=np.float64)
    b = np.asarray(head.bias, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != w.shape[0]:
        raise ValueError(f"embedding dim {z.shape[-1]} != head input dim {w.shape[0]}")
    return z @ w + b


def _check_finite(logit_vec: np.ndarray) -> np.ndarray:
    arr = np.asarray(logit_vec, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NumericError("non-finite logits")
    return arr


def msp_score(logit_vec: np.ndarray) -> np.ndarray | float:
    """Maximum softmax probability, max-shifted for stability."""
    arr = _check_finite(logit_vec)
    shifted = arr - arr.max(axis=-1, keepdims=True)
    out = 1.0 / np.exp(shifted).sum(axis=-1)
    return float(out) if arr.ndim == 1 else out


def energy_score(logit_vec: np.ndarray, printed_form: bool = False) -> np.ndarray | float:
    """log-sum-exp of the logits (canonical), or sum of exp(-logit) if printed_form."""
    arr = _check_finite(logit_vec)
    if printed_form:
        out = np.exp(-arr).sum(axis=-1)
    else:
        m = arr.max(axis=-1, keepdims=True)
        out = (m + np.log(np.exp(arr - m).sum(axis=-1, keepdims=True))).squeeze(-1)
    return float(out) if arr.ndim == 1 else out


def ash_prune(z: np.ndarray, prune_percent: float) -> np.ndarray:
    """Zero the floor(p% * d) smallest entries; ties at the cut pruned lowest index first.

    Surviving values are untouched. Batched over rows if z is 2-D.
    """
    if not 0.0 <= prune_percent < 100.0:
        raise ValueError(f"prune_percent {prune_percent} outside [0, 100)")
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    rows = z[None, :].copy() if single else z.copy()
    n_zero = pct_floor_count(prune_percent, rows.shape[1])
    if n_zero:
        order = np.argsort(rows, axis=1, kind="stable")
        np.put_along_axis(rows, order[:, :n_zero], 0.0, axis=1)
    return rows[0] if single else rows


@dataclass(frozen=True)
class ContributionMask:
    """Binary d-by-C mask from DICE/DICE-COL contribution statistics."""

    mask: np.ndarray
    p: float
    mode: str  # "global" | "per-column"


def _contribution_matrix(z_id: np.ndarray, head: ClassifierHead) -> np.ndarray:
    mean_h = np.asarray(z_id, dtype=np.float64).mean(axis=0)
    return np.asarray(head.weights, dtype=np.float64) * mean_h[:, None]


def global_mask(v: np.ndarray, p: float) -> ContributionMask:
    """Zero the floor(p% * d * C) smallest entries of V across the whole matrix."""
    d, c = v.shape
    n_zero = pct_floor_count(p, d * c)
    mask = np.ones(d * c)
    order = np.argsort(v.ravel(order="C"), kind="stable")
    mask[order[:n_zero]] = 0.0
    return ContributionMask(mask=mask.reshape(d, c), p=p, mode="global")


def per_column_mask(v: np.ndarray, p: float) -> ContributionMask:
    """Zero the floor(p% * d) smallest entries of each column independently."""
    d, c = v.shape
    n_zero = pct_floor_count(p, d)
    mask = np.ones((d, c))
    for col in range(c):
        order = np.argsort(v[:, col], kind="stable")
        mask[order[:n_zero], col] = 0.0
    return ContributionMask(mask=mask, p=p, mode="per-column")


class Detector(Protocol):
    method: str

    def score_batch(self, z: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class MspDetector:
    head: ClassifierHead
    method: str = "msp"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        return msp_score(logits(self.head, np.atleast_2d(z)))


@dataclass(frozen=True)
class EnergyDetector:
    head: ClassifierHead
    printed_form: bool = False
    method: str = "energy"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        return energy_score(logits(self.head, np.atleast_2d(z)), self.printed_form)


@dataclass(frozen=True)
class AshDetector:
    head: ClassifierHead
    prune_percent: float = 90.0
    printed_form: bool = False
    method: str = "ash"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        pruned = ash_prune(np.atleast_2d(z), self.prune_percent)
        return energy_score(logits(self.head, pruned), self.printed_form)


@dataclass(frozen=True)
class DiceDetector:
    masked_head: ClassifierHead
    contribution_mask: ContributionMask
    printed_form: bool = False

    @property
    def method(self) -> str:
        return "dice" if self.contribution_mask.mode == "global" else "dicecol"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        return energy_score(logits(self.masked_head, np.atleast_2d(z)), self.printed_form)


@dataclass(frozen=True)
class MdsDetector:
    gaussians: GaussianByClass
    method: str = "mds"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        per_class = np.stack(
            [mahalanobis_sq(z, mu, self.gaussians.precision) for mu in self.gaussians.means]
        )
        return -per_class.min(axis=0)


@dataclass(frozen=True)
class RmdsDetector:
    gaussians: GaussianByClass
    background: BackgroundGaussian
    method: str = "rmds"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(z)
        bg = mahalanobis_sq(z, self.background.mean, self.background.precision)
        per_class = np.stack(
            [
                mahalanobis_sq(z, mu, self.gaussians.precision) - bg
                for mu in self.gaussians.means
            ]
        )
        return -per_class.min(axis=0)


@dataclass(frozen=True)
class KnnDetector:
    index: KnnIndex
    k: int
    method: str = "knn"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if self.index.normalized:
            z = knn_mod.normalize_rows(z)
        return -np.asarray(kth_distance(self.index, z, self.k))


@dataclass(frozen=True)
class PcaWrappedDetector:
    """Transforms queries into PCA space, then delegates to the inner detector."""

    pca: PcaModel
    inner: Detector

    @property
    def method(self) -> str:
        return f"{self.inner.method}_pca"

    def score_batch(self, z: np.ndarray) -> np.ndarray:
        return self.inner.score_batch(linalg.pca_transform(self.pca, np.atleast_2d(z)))


def mds_fit(z_id: np.ndarray, labels: np.ndarray, num_classes: int | None = None,
            epsilon: float | None = None) -> MdsDetector:
    return MdsDetector(linalg.fit_class_gaussians(z_id, labels, num_classes, epsilon))


def rmds_fit(z_id: np.ndarray, labels: np.ndarray, num_classes: int | None = None,
             epsilon: float | None = None) -> RmdsDetector:
    return RmdsDetector(
        gaussians=linalg.fit_class_gaussians(z_id, labels, num_classes, epsilon),
        background=linalg.fit_background(z_id, epsilon),
    )


def knn_fit(
    z_id: np.ndarray,
    k: int | None = None,
    normalize: bool = True,
    subsample_fraction: float = 1.0,
    seed: int = 0,
) -> KnnDetector:
    index = build_index(z_id, subsample_fraction, normalize, seed)
    if k is None:
        k = knn_mod.default_k(z_id.shape[0])
    if k > index.bank.shape[0]:
        raise ValueError(f"k={k} exceeds bank size {index.bank.shape[0]}")
    return KnnDetector(index=index, k=k)


def _masked_detector(z_id, head, p, mask_fn, printed_form) -> DiceDetector:
    if not 0.0 <= p < 100.0:
        raise ValueError(f"p={p} outside [0, 100)")
    cmask = mask_fn(_contribution_matrix(z_id, head), p)
    masked = ClassifierHead(
        weights=np.asarray(head.weights, dtype=np.float64) * cmask.mask,
        bias=np.asarray(head.bias, dtype=np.float64),
    )
    return DiceDetector(masked_head=masked, contribution_mask=cmask, printed_form=printed_form)


def dice_fit(z_id: np.ndarray, head: ClassifierHead, p: float = 90.0,
             printed_form: bool = False) -> DiceDetector:
    """Global sparsification of the head by average-contribution rank."""
    return _masked_detector(z_id, head, p, global_mask, printed_form)


def dicecol_fit(z_id: np.ndarray, head: ClassifierHead, p: float = 90.0,
                printed_form: bool = False) -> DiceDetector:
    """Column-wise sparsification: every class column keeps d - floor(p%*d) weights."""
    return _masked_detector(z_id, head, p, per_column_mask, printed_form)


def with_pca(
    inner: str,
    n_components: int,
    z_id: np.ndarray,
    labels: np.ndarray | None = None,
    num_classes: int | None = None,
    **inner_kwargs,
) -> PcaWrappedDetector:
    """Fit PCA on the ID embeddings, then fit a representation-based detector in PCA space."""
    if inner not in REPRESENTATION_METHODS:
        raise ValueError(f"inner method {inner!r} not in {REPRESENTATION_METHODS}")
    pca = linalg.pca_fit(z_id, n_components)
    reduced = linalg.pca_transform(pca, z_id)
    if inner == "mds":
        det: Detector = mds_fit(reduced, labels, num_classes, **inner_kwargs)
    elif inner == "rmds":
        det = rmds_fit(reduced, labels, num_classes, **inner_kwargs)
    else:
        det = knn_fit(reduced, **inner_kwargs)
    return PcaWrappedDetector(pca=pca, inner=det)


# ---------------------------------------------------------------------------
# serialization: a directory of NPY arrays plus a JSON sidecar


def _f32(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float32)


def save_detector(det: Detector, out_dir: str | Path) -> Path:
    """Serialize a fitted detector to a directory; returns the sidecar path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {}
    hyper: dict = {}
    inner = det
    if isinstance(det, PcaWrappedDetector):
        arrays["pca_mean"] = det.pca.mean
        arrays["pca_components"] = det.pca.components
        hyper["pca_components"] = det.pca.k
        inner = det.inner
    method = inner.method

    if isinstance(inner, (MspDetector, EnergyDetector, AshDetector)):
        arrays["weights"] = inner.head.weights
        arrays["bias"] = inner.head.bias
        if isinstance(inner, AshDetector):
            hyper["prune_percent"] = inner.prune_percent
        if isinstance(inner, (EnergyDetector, AshDetector)):
            hyper["printed_form"] = inner.printed_form
    elif isinstance(inner, DiceDetector):
        arrays["masked_weights"] = inner.masked_head.weights
        arrays["bias"] = inner.masked_head.bias
        arrays["mask"] = inner.contribution_mask.mask
        hyper["p"] = inner.contribution_mask.p
        hyper["mode"] = inner.contribution_mask.mode
        hyper["printed_form"] = inner.printed_form
    elif isinstance(inner, MdsDetector):
        arrays["class_means"] = inner.gaussians.means
        arrays["precision"] = inner.gaussians.precision
        hyper["epsilon"] = inner.gaussians.reg_epsilon
    elif isinstance(inner, RmdsDetector):
        arrays["class_means"] = inner.gaussians.means
        arrays["precision"] = inner.gaussians.precision
        arrays["background_mean"] = inner.background.mean
        arrays["background_precision"] = inner.background.precision
        hyper["epsilon"] = inner.gaussians.reg_epsilon
    elif isinstance(inner, KnnDetector):
        arrays["bank"] = inner.index.bank
        hyper["k"] = inner.k
        hyper["normalized"] = inner.index.normalized
        hyper["subsample_fraction"] = inner.index.subsample_fraction
    else:
        raise ValueError(f"cannot serialize detector of type {type(inner).__name__}")

    roles = {}
    for role, arr in arrays.items():
        fname = f"{role}.npy"
        write_npy(_f32(arr), out / fname)
        roles[role] = fname
    sidecar = {
        "version": DETECTOR_FORMAT_VERSION,
        "method": method,
        "hyperparameters": hyper,
        "arrays": roles,
    }
    sidecar_path = out / "detector.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return sidecar_path


def load_detector(in_dir: str | Path) -> Detector:
    """Inverse of :func:`save_detector`."""
    root = Path(in_dir)
    sidecar = json.loads((root / "detector.json").read_text())
    if sidecar.get("version") != DETECTOR_FORMAT_VERSION:
        raise ValueError(f"unsupported detector format version {sidecar.get('version')}")
    arrays = {
        role: np.asarray(read_npy(root / fname), dtype=np.float64)
        for role, fname in sidecar["arrays"].items()
    }
    hyper = sidecar["hyperparameters"]
    method = sidecar["method"]

    det: Detector
    if method == "msp":
        det = MspDetector(ClassifierHead(arrays["weights"], arrays["bias"]))
    elif method == "energy":
        det = EnergyDetector(
            ClassifierHead(arrays["weights"], arrays["bias"]),
            printed_form=hyper.get("printed_form", False),
        )
    elif method == "ash":
        det = AshDetector(
            ClassifierHead(arrays["weights"], arrays["bias"]),
            prune_percent=hyper["prune_percent"],
            printed_form=hyper.get("printed_form", False),
        )
    elif method in ("dice", "dicecol"):
        det = DiceDetector(
            masked_head=ClassifierHead(arrays["masked_weights"], arrays["bias"]),
            contribution_mask=ContributionMask(arrays["mask"], hyper["p"], hyper["mode"]),
            printed_form=hyper.get("printed_form", False),
        )
    elif method == "mds":
        det = MdsDetector(GaussianByClass(arrays["class_means"], arrays["precision"],
                                          hyper["epsilon"]))
    elif method == "rmds":
        det = RmdsDetector(
            gaussians=GaussianByClass(arrays["class_means"], arrays["precision"],
                                      hyper["epsilon"]),
            background=BackgroundGaussian(arrays["background_mean"],
                                          arrays["background_precision"], hyper["epsilon"]),
        )
    elif method == "knn":
        det = KnnDetector(
            index=KnnIndex(arrays["bank"], hyper["normalized"], hyper["subsample_fraction"]),
            k=hyper["k"],
        )
    else:
        raise ValueError(f"unknown detector method {method!r}")

    if "pca_mean" in arrays:
        det = PcaWrappedDetector(
            pca=PcaModel(arrays["pca_mean"], arrays["pca_components"]), inner=det
        )
    return det
