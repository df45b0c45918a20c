import json
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oodkit.array_store import load_bundle, read_npy, write_npy
from oodkit.errors import BundleValidationError, FormatError, ManifestError, UnsupportedDtypeError
from oodkit.synth import SynthSpec, generate_bundle


def test_roundtrip_1d(tmp_path):
    write_npy(np.array([1.0, 2.0, 3.0], dtype=np.float32), tmp_path / "a.npy")
    arr = read_npy(tmp_path / "a.npy")
    assert arr.shape == (3,)
    assert arr.tolist() == [1.0, 2.0, 3.0]


def test_roundtrip_2d_bitwise(tmp_path):
    a = np.array([[1.5, -2.25], [3.0, 0.1]], dtype=np.float32)
    write_npy(a, tmp_path / "a.npy")
    b = read_npy(tmp_path / "a.npy")
    assert b.shape == (2, 2)
    assert np.array_equal(a.view(np.uint32), b.view(np.uint32))


def test_header_layout(tmp_path):
    write_npy(np.zeros((2, 2), dtype=np.float32), tmp_path / "a.npy")
    raw = (tmp_path / "a.npy").read_bytes()
    assert raw[:6] == b"\x93NUMPY"
    assert raw[6:8] == b"\x01\x00"
    (hlen,) = struct.unpack("<H", raw[8:10])
    assert (10 + hlen) % 64 == 0
    header = raw[10 : 10 + hlen]
    assert header.endswith(b"\n")
    assert b"'shape': (2, 2)" in header
    assert b"'descr': '<f4'" in header
    assert b"'fortran_order': False" in header


def test_empty_array(tmp_path):
    write_npy(np.zeros((0,), dtype=np.float32), tmp_path / "e.npy")
    arr = read_npy(tmp_path / "e.npy")
    assert arr.shape == (0,)


def test_numpy_interop(tmp_path):
    # files we write are loadable by numpy and vice versa
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    write_npy(a, tmp_path / "ours.npy")
    assert np.array_equal(np.load(tmp_path / "ours.npy"), a)
    np.save(tmp_path / "theirs.npy", a)
    assert np.array_equal(read_npy(tmp_path / "theirs.npy"), a)


def test_fortran_order_normalized(tmp_path):
    a = np.asfortranarray(np.arange(6, dtype=np.float32).reshape(2, 3))
    np.save(tmp_path / "f.npy", a)
    raw = (tmp_path / "f.npy").read_bytes()
    assert b"'fortran_order': True" in raw[:128]
    loaded = read_npy(tmp_path / "f.npy")
    assert loaded.flags["C_CONTIGUOUS"]
    assert np.array_equal(loaded, a)


def test_truncated_payload(tmp_path):
    write_npy(np.zeros(8, dtype=np.float32), tmp_path / "t.npy")
    raw = (tmp_path / "t.npy").read_bytes()
    (tmp_path / "t.npy").write_bytes(raw[:-16])
    with pytest.raises(FormatError, match="truncated"):
        read_npy(tmp_path / "t.npy")


def test_bad_magic(tmp_path):
    (tmp_path / "bad.npy").write_bytes(b"not an npy file at all")
    with pytest.raises(FormatError, match="magic"):
        read_npy(tmp_path / "bad.npy")


def test_unsupported_dtype(tmp_path):
    np.save(tmp_path / "d.npy", np.zeros(3, dtype=np.float64))
    with pytest.raises(UnsupportedDtypeError):
        read_npy(tmp_path / "d.npy")


def test_unsupported_version(tmp_path):
    write_npy(np.zeros(3, dtype=np.float32), tmp_path / "v.npy")
    raw = bytearray((tmp_path / "v.npy").read_bytes())
    raw[6] = 2
    (tmp_path / "v.npy").write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="version"):
        read_npy(tmp_path / "v.npy")


@settings(max_examples=50)
@given(
    arrays(
        dtype=np.float32,
        shape=st.one_of(
            st.integers(0, 20),
            st.tuples(st.integers(0, 8), st.integers(0, 8)),
        ),
        elements=st.floats(allow_nan=False, width=32),
    )
)
def test_roundtrip_property(tmp_path_factory, a):
    path = tmp_path_factory.mktemp("npy") / "p.npy"
    write_npy(a, path)
    b = read_npy(path)
    assert a.shape == b.shape
    assert np.array_equal(a.view(np.uint32), b.view(np.uint32))


@pytest.fixture()
def synth_bundle(tmp_path):
    spec = SynthSpec(seed=3, d=8, c=3, n_per_class=40)
    return generate_bundle(spec, tmp_path / "bundle")


def test_load_bundle_ok(synth_bundle):
    bundle = load_bundle(synth_bundle)
    assert bundle.feature_dim == 8
    assert bundle.num_classes == 3
    assert bundle.id_train.labels is not None
    assert bundle.id_train.features.shape[1] == 8


def test_load_bundle_head_mismatch(synth_bundle):
    root = Path(synth_bundle).parent
    bad = np.zeros((8, 4), dtype=np.float32)  # C+1 columns
    write_npy(bad, root / "head_weights.npy")
    with pytest.raises(BundleValidationError, match="head_weights"):
        load_bundle(synth_bundle)


def test_load_bundle_bad_group(synth_bundle):
    manifest = json.loads(Path(synth_bundle).read_text())
    manifest["ood"][0]["group"] = "mid"
    Path(synth_bundle).write_text(json.dumps(manifest))
    with pytest.raises(ManifestError, match="mid"):
        load_bundle(synth_bundle)


def test_load_bundle_missing_labels(synth_bundle):
    manifest = json.loads(Path(synth_bundle).read_text())
    del manifest["id_train"]["labels"]
    Path(synth_bundle).write_text(json.dumps(manifest))
    with pytest.raises(BundleValidationError, match="labels"):
        load_bundle(synth_bundle)


def test_load_bundle_non_integral_labels(synth_bundle):
    root = Path(synth_bundle).parent
    labels = read_npy(root / "id_train_labels.npy")
    labels = labels + 0.5
    write_npy(labels, root / "id_train_labels.npy")
    with pytest.raises(BundleValidationError, match="non-integral"):
        load_bundle(synth_bundle)


def test_load_bundle_label_out_of_range(synth_bundle):
    root = Path(synth_bundle).parent
    labels = read_npy(root / "id_train_labels.npy").copy()
    labels[0] = 99.0
    write_npy(labels, root / "id_train_labels.npy")
    with pytest.raises(BundleValidationError, match="labels"):
        load_bundle(synth_bundle)


def test_load_bundle_nan_features(synth_bundle):
    root = Path(synth_bundle).parent
    feats = read_npy(root / "id_test_features.npy").copy()
    feats[0, 0] = np.nan
    write_npy(feats, root / "id_test_features.npy")
    with pytest.raises(BundleValidationError, match="non-finite"):
        load_bundle(synth_bundle)
