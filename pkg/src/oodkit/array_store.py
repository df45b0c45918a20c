"""Bit-exact NPY v1.0 reader/writer and bundle loading.

Everything downstream consumes float32 arrays produced here. The format is
deliberately narrow: NPY v1.0 only, dtype ``<f4`` only. Column-major files are
accepted on read and normalized to row-major; we always write row-major.
Labels travel as float32 arrays holding integral values so the whole bundle
needs exactly one codec.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BundleValidationError, FormatError, ManifestError, UnsupportedDtypeError

MAGIC = b"\x93NUMPY"
OOD_GROUPS = ("near", "far")


def read_npy(path: str | Path) -> np.ndarray:
    """Read an NPY v1.0 file into a row-major float32 array.

    Raises:
        FormatError: bad magic, unsupported version, malformed header, or
            payload shorter than the header promises.
        UnsupportedDtypeError: dtype other than little-endian float32.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 10 or raw[:6] != MAGIC:
        raise FormatError(f"{path}: not an NPY file (bad magic)")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"{path}: unsupported NPY version {major}.{minor} (only 1.0)")
    (header_len,) = struct.unpack("<H", raw[8:10])
    header_end = 10 + header_len
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(raw[10:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise FormatError(f"{path}: unparsable header") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"{path}: header keys {sorted(header)!r} unexpected")
    if header["descr"] != "<f4":
        raise UnsupportedDtypeError(f"{path}: dtype {header['descr']!r}, only '<f4' supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"{path}: bad shape {shape!r}")
    fortran = header["fortran_order"]
    if fortran not in (True, False):
        raise FormatError(f"{path}: bad fortran_order {fortran!r}")

    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    payload = raw[header_end:]
    if len(payload) < 4 * count:
        raise FormatError(
            f"{path}: truncated payload (header promises {count} floats, "
            f"{len(payload) // 4} present)"
        )
    if len(payload) > 4 * count:
        raise FormatError(f"{path}: trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<f4", count=count)
    order = "F" if fortran else "C"
    return np.ascontiguousarray(data.reshape(shape, order=order))


def write_npy(array: np.ndarray, path: str | Path) -> None:
    """Write a float32 array as NPY v1.0, row-major, header space-padded to a 64-byte multiple."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    shape = arr.shape
    if len(shape) == 1:
        shape_repr = f"({shape[0]},)"
    else:
        shape_repr = "(" + ", ".join(str(s) for s in shape) + ")"
    header = f"{{'descr': '<f4', 'fortran_order': False, 'shape': {shape_repr}, }}"
    # total of magic(6) + version(2) + len(2) + header must be a 64-byte multiple
    unpadded = 10 + len(header) + 1
    pad = (64 - unpadded % 64) % 64
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(struct.pack("<H", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(arr.tobytes(order="C"))


@dataclass(frozen=True)
class ClassifierHead:
    """Final linear layer: ``weights`` is d-by-C, ``bias`` length C."""

    weights: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class EmbeddingSet:
    """Penultimate features (N-by-d) with optional integer class labels."""

    features: np.ndarray
    labels: np.ndarray | None = None


@dataclass(frozen=True)
class OodSet:
    name: str
    group: str
    features: np.ndarray


@dataclass(frozen=True)
class EmbeddingBundle:
    feature_dim: int
    num_classes: int
    id_train: EmbeddingSet
    id_test: EmbeddingSet
    ood_sets: tuple[OodSet, ...]
    head: ClassifierHead


def _load_features(path: Path, feature_dim: int, what: str) -> np.ndarray:
    arr = read_npy(path)
    if arr.ndim != 2 or arr.shape[1] != feature_dim:
        raise BundleValidationError(
            f"{what} ({path}): expected N x {feature_dim} features, got shape {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise BundleValidationError(f"{what} ({path}): non-finite feature values")
    return arr


def _load_labels(path: Path, n: int, num_classes: int, what: str) -> np.ndarray:
    arr = read_npy(path)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise BundleValidationError(f"{what} ({path}): expected {n} labels, got shape {arr.shape}")
    if not np.all(arr == np.floor(arr)):
        raise BundleValidationError(f"{what} ({path}): non-integral label values")
    labels = arr.astype(np.int64)
    if labels.min(initial=0) < 0 or (n > 0 and labels.max() >= num_classes):
        raise BundleValidationError(
            f"{what} ({path}): labels outside [0, {num_classes})"
        )
    return labels


def load_bundle(manifest_path: str | Path) -> EmbeddingBundle:
    """Load and cross-validate a bundle described by a manifest JSON file.

    Either returns a bundle satisfying every type invariant or raises; no
    partially valid bundle escapes.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{manifest_path}: {exc}") from exc

    required = {"version", "feature_dim", "num_classes", "id_train", "id_test", "ood", "head"}
    if not isinstance(manifest, dict) or not required.issubset(manifest):
        raise ManifestError(f"{manifest_path}: missing keys {sorted(required - set(manifest))}")
    if manifest["version"] != 1:
        raise ManifestError(f"{manifest_path}: unsupported manifest version {manifest['version']}")
    d = manifest["feature_dim"]
    c = manifest["num_classes"]
    if not (isinstance(d, int) and d >= 1 and isinstance(c, int) and c >= 1):
        raise ManifestError(f"{manifest_path}: feature_dim/num_classes must be positive ints")

    root = manifest_path.parent

    if "labels" not in manifest["id_train"]:
        raise BundleValidationError(f"{manifest_path}: id_train must carry labels")
    train_feats = _load_features(root / manifest["id_train"]["features"], d, "id_train features")
    train_labels = _load_labels(
        root / manifest["id_train"]["labels"], train_feats.shape[0], c, "id_train labels"
    )
    id_train = EmbeddingSet(train_feats, train_labels)

    test_feats = _load_features(root / manifest["id_test"]["features"], d, "id_test features")
    id_test = EmbeddingSet(test_feats)

    ood_sets = []
    for entry in manifest["ood"]:
        if entry.get("group") not in OOD_GROUPS:
            raise ManifestError(
                f"{manifest_path}: ood group {entry.get('group')!r} not in {OOD_GROUPS}"
            )
        feats = _load_features(root / entry["features"], d, f"ood set {entry['name']!r}")
        ood_sets.append(OodSet(entry["name"], entry["group"], feats))

    w_path = root / manifest["head"]["weights"]
    weights = read_npy(w_path)
    if weights.shape != (d, c):
        raise BundleValidationError(
            f"head weights ({w_path}): expected {d} x {c}, got {weights.shape}"
        )
    b_path = root / manifest["head"]["bias"]
    bias = read_npy(b_path)
    if bias.shape != (c,):
        raise BundleValidationError(f"head bias ({b_path}): expected length {c}, got {bias.shape}")
    if not (np.isfinite(weights).all() and np.isfinite(bias).all()):
        raise BundleValidationError("head weights/bias contain non-finite values")

    return EmbeddingBundle(
        feature_dim=d,
        num_classes=c,
        id_train=id_train,
        id_test=id_test,
        ood_sets=tuple(ood_sets),
        head=ClassifierHead(weights, bias),
    )
