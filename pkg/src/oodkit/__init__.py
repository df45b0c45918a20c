"""Post-hoc out-of-distribution detection on exported embeddings.

Fit logit-based (MSP, Energy, ASH, DICE, DICE-COL) and representation-based
(MDS, RMDS, KNN, each optionally PCA-reduced) detectors on a bundle of
penultimate features plus classifier-head weights, then benchmark them with
AUROC and FPR at the 95%-TPR threshold, grouped Near/Far.
"""

from .array_store import (
    ClassifierHead,
    EmbeddingBundle,
    EmbeddingSet,
    OodSet,
    load_bundle,
    read_npy,
    write_npy,
)
from .evaluation import (
    DetectorSpec,
    EvalReport,
    auroc,
    fpr_at_threshold,
    render_report,
    run_benchmark,
    threshold_at_tpr,
)
from .synth import OodRecipe, SynthSpec, generate_adversarial_head, generate_bundle, oracle_auroc

__all__ = [
    "ClassifierHead",
    "DetectorSpec",
    "EmbeddingBundle",
    "EmbeddingSet",
    "EvalReport",
    "OodRecipe",
    "OodSet",
    "SynthSpec",
    "auroc",
    "fpr_at_threshold",
    "generate_adversarial_head",
    "generate_bundle",
    "load_bundle",
    "oracle_auroc",
    "read_npy",
    "render_report",
    "run_benchmark",
    "threshold_at_tpr",
    "write_npy",
]

__version__ = "0.1.0"
