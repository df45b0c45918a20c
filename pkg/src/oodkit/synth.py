"""Deterministic synthetic bundles and brute-force oracles.

ID features are C spherical Gaussians at seeded random unit directions (all
components nonnegative, so logit methods see a usable head) scaled by the
separation radius. Class directions are confined to the first ``signal_dims``
coordinates; remaining coordinates are pure noise, which gives OOD recipes a
direction that is invisible to the classifier head but obvious to
representation-based detectors.

The classifier head is fit by least squares from features to scaled one-hot
targets: a realistic W coupling features to classes with zero framework
dependencies. Randomness comes from numpy's default PCG64 generator with
per-dataset seed derivation (seed, dataset index), so parallel generation can
never change output and reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import detectors as det_mod
from .array_store import ClassifierHead, write_npy
from .errors import GeneratorError


@dataclass(frozen=True)
class OodRecipe:
    """One OOD dataset: an explicit mean-shift vector, or a shift magnitude in
    units of the noise scale along the default direction, plus a covariance
    scale factor."""

    name: str
    group: str  # "near" | "far"
    shift: tuple[float, ...] | None = None
    shift_scale: float | None = None
    cov_scale: float = 1.0
    n: int | None = None
    # "classes": shifted copies of the ID class clusters (overlapping, near-style)
    # "centroid": one cluster at the shifted global mean (far-style)
    base: str = "centroid"
    # default shift direction: "noise" = last pure-noise axis, "random" = seeded
    # random unit vector, "centroid" = per-point from its class mean toward the
    # global mean (shrinks the decision margin; classes base only)
    direction: str = "noise"


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    d: int
    c: int
    n_per_class: int
    separation: float = 12.0
    noise: float = 1.0
    signal_dims: int | None = None  # defaults to min(c, d)
    target_scale: float = 12.0
    n_test_per_class: int | None = None
    recipes: tuple[OodRecipe, ...] = ()

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"d={self.d} must be >= 2")
        if self.c < 2:
            raise ValueError(f"c={self.c} must be >= 2")
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        if self.n_per_class < 2:
            raise ValueError("n_per_class must be >= 2")
        sd = self.effective_signal_dims
        if not 1 <= sd <= self.d:
            raise ValueError(f"signal_dims={sd} outside [1, {self.d}]")
        for r in self.recipes:
            if r.group not in ("near", "far"):
                raise ValueError(f"recipe group {r.group!r} must be 'near' or 'far'")

    @property
    def effective_signal_dims(self) -> int:
        return self.signal_dims if self.signal_dims is not None else min(self.c, self.d)

    @property
    def effective_n_test(self) -> int:
        return self.n_test_per_class if self.n_test_per_class is not None else max(
            20, self.n_per_class // 5
        )


def default_recipes(near_scale: float = 1.0, far_scale: float = 20.0) -> tuple[OodRecipe, ...]:
    return (
        OodRecipe(name="near_shift", group="near", shift_scale=near_scale,
                  base="classes", direction="centroid"),
        OodRecipe(name="far_shift", group="far", shift_scale=far_scale, base="centroid"),
    )


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _class_directions(rng: np.random.Generator, c: int, signal_dims: int) -> np.ndarray:
    """Distinct random unit directions in the signal subspace.

    Components are nonnegative and each class leans on its own dominant axis
    (class index mod signal_dims), mimicking the sparse class-aligned
    activations that make sparsification-based scoring viable at all. With a
    1-D signal subspace the directions alternate sign instead.
    """
    if signal_dims == 1:
        return np.array([[1.0 if cls % 2 == 0 else -1.0] for cls in range(c)])
    for _ in range(64):
        dirs = 0.25 * np.abs(rng.standard_normal((c, signal_dims)))
        for cls in range(c):
            dirs[cls, cls % signal_dims] += 1.0
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dists = np.linalg.norm(dirs[:, None, :] - dirs[None, :, :], axis=2)
        if dists[np.triu_indices(c, 1)].min() > 0.15:
            return dirs
    raise GeneratorError("could not draw sufficiently separated class directions")


def _ood_direction(spec: SynthSpec, mode: str, index: int) -> np.ndarray:
    """OOD shift direction: the last pure-noise axis, or a seeded random unit
    vector (always random when every coordinate carries signal)."""
    if mode == "noise" and spec.effective_signal_dims < spec.d:
        u = np.zeros(spec.d)
        u[-1] = 1.0
        return u
    if mode not in ("noise", "random"):
        raise ValueError(f"unknown shift direction {mode!r}")
    v = _rng(spec.seed, 1000 + index).standard_normal(spec.d)
    return v / np.linalg.norm(v)


def _class_means(spec: SynthSpec) -> np.ndarray:
    dirs = _class_directions(_rng(spec.seed, 0), spec.c, spec.effective_signal_dims)
    means = np.zeros((spec.c, spec.d))
    means[:, : spec.effective_signal_dims] = dirs * spec.separation
    return means


def _sample_id(
    spec: SynthSpec, n_per_class: int, stream: int, means: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    rng = _rng(spec.seed, stream)
    feats = np.empty((spec.c * n_per_class, spec.d))
    labels = np.empty(spec.c * n_per_class)
    for cls in range(spec.c):
        lo = cls * n_per_class
        feats[lo : lo + n_per_class] = means[cls] + spec.noise * rng.standard_normal(
            (n_per_class, spec.d)
        )
        labels[lo : lo + n_per_class] = cls
    return feats, labels


def _fit_head(feats: np.ndarray, labels: np.ndarray, c: int, target_scale: float
              ) -> ClassifierHead:
    n, d = feats.shape
    targets = np.zeros((n, c))
    targets[np.arange(n), labels.astype(int)] = target_scale
    design = np.hstack([feats, np.ones((n, 1))])
    sol, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return ClassifierHead(weights=sol[:d], bias=sol[d])


def _sample_ood(spec: SynthSpec, recipe: OodRecipe, index: int, means: np.ndarray) -> np.ndarray:
    rng = _rng(spec.seed, 100 + index)
    n = recipe.n if recipe.n is not None else spec.c * spec.effective_n_test
    if recipe.base == "classes":
        centers = means[rng.integers(0, spec.c, size=n)]
    elif recipe.base == "centroid":
        centers = means.mean(axis=0)[None, :].repeat(n, axis=0)
    else:
        raise ValueError(f"recipe {recipe.name!r}: unknown base {recipe.base!r}")
    if recipe.shift is not None:
        shift = np.asarray(recipe.shift, dtype=np.float64)
        if shift.shape != (spec.d,):
            raise ValueError(f"recipe {recipe.name!r}: shift must have length {spec.d}")
        centers = centers + shift
    elif recipe.shift_scale is not None:
        if recipe.direction == "centroid":
            toward = means.mean(axis=0) - centers
            norms = np.linalg.norm(toward, axis=1, keepdims=True)
            norms[norms == 0] = 1.0
            centers = centers + recipe.shift_scale * spec.noise * toward / norms
        else:
            centers = centers + recipe.shift_scale * spec.noise * _ood_direction(
                spec, recipe.direction, index
            )
    return centers + spec.noise * recipe.cov_scale * rng.standard_normal((n, spec.d))


def generate_bundle(
    spec: SynthSpec,
    out_dir: str | Path,
    means: np.ndarray | None = None,
    head: ClassifierHead | None = None,
) -> Path:
    """Write a complete on-disk bundle; returns the manifest path.

    Byte-identical across runs with the same spec. ``means`` and ``head``
    exist for generators that need to override the default class geometry or
    classifier; ordinary callers leave them None.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recipes = spec.recipes if spec.recipes else default_recipes()
    if means is None:
        means = _class_means(spec)

    train_feats, train_labels = _sample_id(spec, spec.n_per_class, stream=2, means=means)
    test_feats, _ = _sample_id(spec, spec.effective_n_test, stream=3, means=means)
    if head is None:
        head = _fit_head(train_feats, train_labels, spec.c, spec.target_scale)

    write_npy(train_feats.astype(np.float32), out / "id_train_features.npy")
    write_npy(train_labels.astype(np.float32), out / "id_train_labels.npy")
    write_npy(test_feats.astype(np.float32), out / "id_test_features.npy")
    write_npy(head.weights.astype(np.float32), out / "head_weights.npy")
    write_npy(head.bias.astype(np.float32), out / "head_bias.npy")

    ood_entries = []
    for i, recipe in enumerate(recipes):
        fname = f"ood_{recipe.name}.npy"
        write_npy(_sample_ood(spec, recipe, i, means).astype(np.float32), out / fname)
        ood_entries.append({"name": recipe.name, "features": fname, "group": recipe.group})

    manifest = {
        "version": 1,
        "feature_dim": spec.d,
        "num_classes": spec.c,
        "id_train": {"features": "id_train_features.npy", "labels": "id_train_labels.npy"},
        "id_test": {"features": "id_test_features.npy"},
        "ood": ood_entries,
        "head": {"weights": "head_weights.npy", "bias": "head_bias.npy"},
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


def generate_adversarial_head(
    spec: SynthSpec,
    out_dir: str | Path,
    p: float = 90.0,
    victim_class: int | None = None,
    bipolar_amplitude: float = 3.0,
    bipolar_mean: float = 0.15,
) -> Path:
    """Bundle whose head has one weight column with uniformly low contributions.

    The victim class is distinguished from the others only along one bipolar
    feature axis: the victim cluster sits at +amplitude on it, every other
    class slightly negative, so the axis's population mean is a small positive
    number. The weight carrying the victim class therefore has a large logit
    contribution for victim samples but a tiny *average* contribution, which
    puts every victim-column entry below the global sparsification
    keep-threshold: a global mask zeroes the whole column while a per-column
    mask retains the class-critical weight. Self-checks the construction and
    raises GeneratorError rather than emitting a bundle without the property.
    """
    if spec.c < 3:
        raise ValueError("adversarial head needs at least 3 classes")
    sd = spec.effective_signal_dims
    if sd + 1 >= spec.d:
        raise ValueError("adversarial head needs at least two pure-noise axes")
    victim = spec.c - 1 if victim_class is None else victim_class
    if not 0 <= victim < spec.c:
        raise ValueError(f"victim_class {victim} outside [0, {spec.c})")

    axis = sd  # first pure-noise axis becomes the only victim-discriminative one
    others_idx = [c for c in range(spec.c) if c != victim]
    out = Path(out_dir)

    # the bipolar-axis mean controls the victim column's average contribution;
    # walk it down until every victim entry falls below the global keep set
    for bm in (bipolar_mean, bipolar_mean / 3, bipolar_mean / 10):
        means = _class_means(spec)
        means[victim] = means[others_idx].mean(axis=0)
        low = (spec.c * bm - bipolar_amplitude) / (spec.c - 1)
        means[:, axis] = low * spec.noise
        means[victim, axis] = bipolar_amplitude * spec.noise

        train_feats, train_labels = _sample_id(spec, spec.n_per_class, stream=2, means=means)
        head = _fit_head(train_feats, train_labels, spec.c, spec.target_scale)
        # sanitize: the victim column rides the bipolar axis only
        weights = head.weights.copy()
        kept = weights[axis, victim]
        weights[:, victim] = 0.0
        weights[axis, victim] = kept
        head = ClassifierHead(weights=weights, bias=head.bias)

        mean_h = np.asarray(train_feats, dtype=np.float32).astype(np.float64).mean(axis=0)
        v = head.weights.astype(np.float32).astype(np.float64) * mean_h[:, None]
        if det_mod.global_mask(v, p).mask[:, victim].any():
            continue
        if not det_mod.per_column_mask(v, p).mask[axis, victim]:
            continue

        manifest_path = generate_bundle(spec, out, means=means, head=head)
        (out / "adversarial.json").write_text(
            json.dumps({"victim_class": victim, "p": p, "bipolar_axis": axis}, sort_keys=True)
            + "\n"
        )
        return manifest_path

    raise GeneratorError(
        f"construction check failed: no bipolar-axis mean puts column {victim} fully "
        f"below the global keep set at p={p}"
    )


def oracle_auroc(id_scores: np.ndarray, ood_scores: np.ndarray) -> float:
    """Explicit all-pairs Mann-Whitney count with half credit per tie; O(n^2)."""
    id_scores = np.asarray(id_scores, dtype=np.float64)[:, None]
    ood_scores = np.asarray(ood_scores, dtype=np.float64)[None, :]
    wins = (id_scores > ood_scores).sum() + 0.5 * (id_scores == ood_scores).sum()
    return float(wins / (id_scores.size * ood_scores.size))
