"""Parity fixtures: self-consistency, byte-identical regeneration, and the
cross-check against the production inference path."""

import numpy as np
import pytest

from dealias_trainer.dalw import load_bundle
from dealias_trainer.fixture import (
    INPUT_NAME,
    OUTPUT_NAME,
    export_parity_fixture,
    reference_forward,
    verify_fixture,
)

from conftest import random_bundle


def test_export_and_verify(tmp_path):
    bundle = random_bundle(seed=31)
    path = tmp_path / "parity.dalw"
    export_parity_fixture(bundle, 99, str(path), bins=32, frames=16)
    assert verify_fixture(str(path)) < 1e-6


def test_fixture_rides_in_one_container(tmp_path):
    bundle = random_bundle(seed=32)
    path = tmp_path / "parity.dalw"
    export_parity_fixture(bundle, 5, str(path), bins=32, frames=16)
    back = load_bundle(str(path))
    names = set(back.names())
    assert INPUT_NAME in names
    assert OUTPUT_NAME in names
    for name in bundle.names():
        np.testing.assert_array_equal(back.tensor(name), bundle.tensor(name))
    assert back.tensor(INPUT_NAME).shape == (4, 32, 16)
    assert back.tensor(OUTPUT_NAME).shape == (4, 32, 16)


def test_regeneration_is_byte_identical(tmp_path):
    bundle = random_bundle(seed=33)
    p1, p2 = tmp_path / "a.dalw", tmp_path / "b.dalw"
    export_parity_fixture(bundle, 1234, str(p1), bins=32, frames=16)
    export_parity_fixture(bundle, 1234, str(p2), bins=32, frames=16)
    assert p1.read_bytes() == p2.read_bytes()


def test_seed_changes_input(tmp_path):
    bundle = random_bundle(seed=34)
    p1, p2 = tmp_path / "a.dalw", tmp_path / "b.dalw"
    export_parity_fixture(bundle, 1, str(p1), bins=32, frames=16)
    export_parity_fixture(bundle, 2, str(p2), bins=32, frames=16)
    a = load_bundle(str(p1)).tensor(INPUT_NAME)
    b = load_bundle(str(p2)).tensor(INPUT_NAME)
    assert not np.array_equal(a, b)


def test_tamper_detected(tmp_path):
    bundle = random_bundle(seed=35)
    path = tmp_path / "parity.dalw"
    export_parity_fixture(bundle, 7, str(path), bins=32, frames=16)
    back = load_bundle(str(path))
    tensors = []
    for name, arr in back.tensors:
        if name == OUTPUT_NAME:
            arr = arr + np.float32(0.25)
        tensors.append((name, arr))
    from dealias_trainer.dalw import Bundle, save_bundle
    save_bundle(Bundle(back.descriptor, tuple(tensors)), str(path))
    assert verify_fixture(str(path)) >= 0.2


def test_production_side_matches_fixture(tmp_path):
    """The acceptance surface in miniature: the production inference path
    reproduces the stored reference output within 1e-4."""
    nnmask = pytest.importorskip("dealias.nnmask")

    bundle = random_bundle(seed=36, v=2, mode="diag", depth=2, base=4)
    path = tmp_path / "parity.dalw"
    export_parity_fixture(bundle, 2024, str(path), bins=64, frames=32)

    w = nnmask.load_weights(str(path))
    grid = np.asarray(w.tensor(INPUT_NAME), dtype=np.float64)
    feat = nnmask.FeatureTensor(grid, grid.shape[1], grid.shape[2], 1.0,
                                w.descriptor["depth"])
    mask = nnmask.unet_forward(w, feat).grid
    ref = np.asarray(w.tensor(OUTPUT_NAME), dtype=np.float64)
    assert np.max(np.abs(mask - ref)) < 1e-4


def test_reference_forward_is_float64(tmp_path):
    bundle = random_bundle(seed=37)
    rng = np.random.default_rng(0)
    out = reference_forward(bundle, rng.standard_normal((4, 32, 16)))
    assert out.dtype == np.float64
    assert out.shape == (4, 32, 16)
