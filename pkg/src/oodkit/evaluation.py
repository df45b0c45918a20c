"""AUROC benchmarking: per-OOD-dataset metrics, Near/Far group means, the
95%-TPR threshold, FPR at that threshold, and CSV/Markdown/JSON rendering.

The classification rule is inclusive (score >= threshold counts as ID), and
the threshold is computed on ID *training* scores. Across multiple bundles
(model checkpoints) cells are reported as mean with sample standard deviation
(divisor n-1; a single bundle reports std 0).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import detectors as det_mod
from .array_store import EmbeddingBundle
from .errors import OodkitError

REPORT_FORMAT_VERSION = 1


def auroc(id_scores: np.ndarray, ood_scores: np.ndarray) -> float:
    """Probability a random ID score exceeds a random OOD score, ties half-credit.

    Mann-Whitney statistic computed by rank summation with mid-ranks,
    O(n log n).
    """
    id_scores = np.asarray(id_scores, dtype=np.float64)
    ood_scores = np.asarray(ood_scores, dtype=np.float64)
    if id_scores.size == 0 or ood_scores.size == 0:
        raise ValueError("auroc needs nonempty score vectors on both sides")
    if not (np.isfinite(id_scores).all() and np.isfinite(ood_scores).all()):
        raise ValueError("auroc requires finite scores")
    n_id, n_ood = id_scores.size, ood_scores.size
    ranks = rankdata(np.concatenate([id_scores, ood_scores]), method="average")
    u = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(u / (n_id * n_ood))


def threshold_at_tpr(id_train_scores: np.ndarray, tpr: float = 0.95) -> float:
    """Score cutoff such that at least ``tpr`` of the ID training scores pass it.

    Returns the ceil((1-tpr)*N)-th smallest score (1-indexed, clamped to 1).
    """
    scores = np.sort(np.asarray(id_train_scores, dtype=np.float64))
    if scores.size == 0:
        raise ValueError("empty score vector")
    if not 0.0 < tpr <= 1.0:
        raise ValueError(f"tpr {tpr} outside (0, 1]")
    # tolerant ceil: (1-0.95)*100 evaluates a hair above 5.0 in binary
    idx = max(1, math.ceil((1.0 - tpr) * scores.size - 1e-9))
    return float(scores[idx - 1])


def fpr_at_threshold(ood_scores: np.ndarray, threshold: float) -> float:
    """Fraction of OOD scores classified ID (score >= threshold)."""
    scores = np.asarray(ood_scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty score vector")
    return float(np.mean(scores >= threshold))


@dataclass(frozen=True)
class DetectorSpec:
    """One detector configuration to fit and evaluate."""

    method: str
    p: float = 90.0
    prune_percent: float = 90.0
    k: int | None = None
    pca_components: int | None = None
    normalize: bool = True
    subsample_fraction: float = 1.0
    epsilon: float | None = None
    printed_form: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.method not in det_mod.ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.pca_components is not None and self.method not in det_mod.REPRESENTATION_METHODS:
            raise ValueError(f"pca_components only applies to {det_mod.REPRESENTATION_METHODS}")

    @property
    def label(self) -> str:
        return f"{self.method}_pca" if self.pca_components is not None else self.method

    def hyperparameters(self) -> dict:
        h: dict = {}
        if self.method in ("dice", "dicecol"):
            h["p"] = self.p
            h["printed_form"] = self.printed_form
        if self.method == "ash":
            h["prune_percent"] = self.prune_percent
            h["printed_form"] = self.printed_form
        if self.method == "energy":
            h["printed_form"] = self.printed_form
        if self.method == "knn":
            h.update(k=self.k, normalize=self.normalize,
                     subsample_fraction=self.subsample_fraction, seed=self.seed)
        if self.method in ("mds", "rmds"):
            h["epsilon"] = self.epsilon
        if self.pca_components is not None:
            h["pca_components"] = self.pca_components
        return h


def fit_detector(bundle: EmbeddingBundle, spec: DetectorSpec) -> det_mod.Detector:
    """Fit one detector spec on a bundle's ID training split."""
    z = bundle.id_train.features
    labels = bundle.id_train.labels
    if spec.method == "msp":
        return det_mod.MspDetector(bundle.head)
    if spec.method == "energy":
        return det_mod.EnergyDetector(bundle.head, printed_form=spec.printed_form)
    if spec.method == "ash":
        return det_mod.AshDetector(bundle.head, prune_percent=spec.prune_percent,
                                   printed_form=spec.printed_form)
    if spec.method == "dice":
        return det_mod.dice_fit(z, bundle.head, spec.p, spec.printed_form)
    if spec.method == "dicecol":
        return det_mod.dicecol_fit(z, bundle.head, spec.p, spec.printed_form)

    inner_kwargs: dict
    if spec.method == "knn":
        inner_kwargs = dict(k=spec.k, normalize=spec.normalize,
                            subsample_fraction=spec.subsample_fraction, seed=spec.seed)
    else:
        inner_kwargs = dict(epsilon=spec.epsilon)
    if spec.pca_components is not None:
        if spec.method == "knn":
            return det_mod.with_pca("knn", spec.pca_components, z, **inner_kwargs)
        return det_mod.with_pca(spec.method, spec.pca_components, z, labels,
                                bundle.num_classes, **inner_kwargs)
    if spec.method == "mds":
        return det_mod.mds_fit(z, labels, bundle.num_classes, spec.epsilon)
    if spec.method == "rmds":
        return det_mod.rmds_fit(z, labels, bundle.num_classes, spec.epsilon)
    return det_mod.knn_fit(z, **inner_kwargs)


@dataclass(frozen=True)
class DatasetCell:
    name: str
    group: str
    auroc_mean: float
    auroc_std: float
    fpr_mean: float
    fpr_std: float


@dataclass(frozen=True)
class GroupCell:
    auroc_mean: float
    auroc_std: float


@dataclass(frozen=True)
class DetectorReport:
    label: str
    method: str
    hyperparameters: dict
    datasets: tuple[DatasetCell, ...]
    groups: dict[str, GroupCell]
    threshold_mean: float
    threshold_std: float


@dataclass(frozen=True)
class EvalReport:
    version: int
    tpr: float
    n_bundles: int
    detectors: tuple[DetectorReport, ...]


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def _evaluate_cell(bundle: EmbeddingBundle, spec: DetectorSpec, tpr: float):
    """Fit + score one (bundle, detector) cell; returns per-dataset metrics."""
    det = fit_detector(bundle, spec)
    id_train_scores = det.score_batch(bundle.id_train.features)
    id_test_scores = det.score_batch(bundle.id_test.features)
    threshold = threshold_at_tpr(id_train_scores, tpr)
    per_dataset = {}
    for ood in bundle.ood_sets:
        scores = det.score_batch(ood.features)
        per_dataset[ood.name] = (
            ood.group,
            auroc(id_test_scores, scores),
            fpr_at_threshold(scores, threshold),
        )
    return threshold, per_dataset


def run_benchmark(
    bundles: list[EmbeddingBundle],
    specs: list[DetectorSpec],
    tpr: float = 0.95,
) -> EvalReport:
    """Fit every spec on every bundle and aggregate metrics across bundles.

    Parallelism over (bundle, detector) cells is capped by the OODKIT_THREADS
    environment variable (default 1); assembly order is fixed, so the report
    is deterministic either way.
    """
    if not bundles:
        raise ValueError("run_benchmark needs at least one bundle")
    threads = max(1, int(os.environ.get("OODKIT_THREADS", "1")))
    jobs = [(bi, si) for si in range(len(specs)) for bi in range(len(bundles))]

    def run(job):
        bi, si = job
        try:
            return _evaluate_cell(bundles[bi], specs[si], tpr)
        except OodkitError as exc:
            raise OodkitError(f"bundle {bi}, detector {specs[si].label}: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    by_cell = dict(zip(jobs, results))

    detector_reports = []
    for si, spec in enumerate(specs):
        cells = [by_cell[(bi, si)] for bi in range(len(bundles))]
        thr_mean, thr_std = _mean_std([c[0] for c in cells])
        dataset_names = list(cells[0][1].keys())
        dataset_cells = []
        group_members: dict[str, list[list[float]]] = {}
        for name in dataset_names:
            group = cells[0][1][name][0]
            aurocs = [c[1][name][1] for c in cells]
            fprs = [c[1][name][2] for c in cells]
            a_mean, a_std = _mean_std(aurocs)
            f_mean, f_std = _mean_std(fprs)
            dataset_cells.append(DatasetCell(name, group, a_mean, a_std, f_mean, f_std))
            group_members.setdefault(group, []).append(aurocs)
        groups = {}
        for group, member_aurocs in sorted(group_members.items()):
            # per-bundle group mean first, then mean/std across bundles
            per_bundle = np.asarray(member_aurocs).mean(axis=0)
            g_mean, g_std = _mean_std(list(per_bundle))
            groups[group] = GroupCell(g_mean, g_std)
        detector_reports.append(DetectorReport(
            label=spec.label,
            method=spec.method,
            hyperparameters=spec.hyperparameters(),
            datasets=tuple(dataset_cells),
            groups=groups,
            threshold_mean=thr_mean,
            threshold_std=thr_std,
        ))
    return EvalReport(version=REPORT_FORMAT_VERSION, tpr=tpr, n_bundles=len(bundles),
                      detectors=tuple(detector_reports))


CSV_COLUMNS = ("detector", "dataset", "group", "auroc_mean", "auroc_std", "fpr_mean")


def render_report(report: EvalReport, fmt: str = "markdown") -> str:
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "markdown":
        return _render_markdown(report)
    if fmt == "json":
        return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def report_from_json(text: str) -> EvalReport:
    raw = json.loads(text)
    detectors = tuple(
        DetectorReport(
            label=d["label"],
            method=d["method"],
            hyperparameters=d["hyperparameters"],
            datasets=tuple(DatasetCell(**c) for c in d["datasets"]),
            groups={g: GroupCell(**c) for g, c in d["groups"].items()},
            threshold_mean=d["threshold_mean"],
            threshold_std=d["threshold_std"],
        )
        for d in raw["detectors"]
    )
    return EvalReport(version=raw["version"], tpr=raw["tpr"], n_bundles=raw["n_bundles"],
                      detectors=detectors)


def _render_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for det in report.detectors:
        for cell in det.datasets:
            writer.writerow([det.label, cell.name, cell.group,
                             f"{cell.auroc_mean:.6f}", f"{cell.auroc_std:.6f}",
                             f"{cell.fpr_mean:.6f}"])
    return buf.getvalue()


def _render_markdown(report: EvalReport) -> str:
    lines = ["| Detector | NearOOD | FarOOD |", "| --- | --- | --- |"]
    for det in report.detectors:
        cells = []
        for group in ("near", "far"):
            g = det.groups.get(group)
            cells.append("-" if g is None else
                         f"{100 * g.auroc_mean:.2f} ± {100 * g.auroc_std:.2f}")
        lines.append(f"| {det.label} | {cells[0]} | {cells[1]} |")
    lines.append("")
    lines.append("| Detector | Dataset | Group | AUROC mean | AUROC std | FPR mean |")
    lines.append("| --- | --- | --- | --- | --- | --- |")
    for det in report.detectors:
        for cell in det.datasets:
            lines.append(
                f"| {det.label} | {cell.name} | {cell.group} | {cell.auroc_mean:.4f} "
                f"| {cell.auroc_std:.4f} | {cell.fpr_mean:.4f} |"
            )
    lines.append("")
    return "\n".join(lines)
