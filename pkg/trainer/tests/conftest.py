"""Shared fixtures: synthetic manifests, rendered scenes, small bundles.

Unit tests run on hand-built WAV corpora so they stay fast and dependency
light. Parity tests import the production pipeline package (`dealias`) as
the reference implementation; that import is allowed in tests only — the
shipped trainer sources never touch it.
"""

import json

import numpy as np
import pytest
import scipy.io.wavfile

from dealias_trainer.dalw import Bundle, architecture_shapes


def write_float32_wav(path, data, rate):
    """data: [samples, channels] float64/float32 in [-1, 1]."""
    scipy.io.wavfile.write(path, rate, np.asarray(data, dtype=np.float32))


def synthetic_manifest(root, n_scenes, *, rate=16000, duration=2.0, seed=0,
                       n_sources=1, spacing=0.06):
    """Manifest of random-noise scenes in the rendered-dataset layout.

    The audio carries no acoustic structure; use it for mechanics (staging,
    stepping, serialization), not for loss-quality assertions.
    """
    rng = np.random.default_rng(seed)
    scenes = root / "scenes"
    scenes.mkdir(parents=True, exist_ok=True)
    n = int(round(rate * duration))
    records = []
    for i in range(n_scenes):
        mix = 0.05 * rng.standard_normal((n, 4))
        mix_rel = f"scenes/scene_{i:05d}_mix.wav"
        write_float32_wav(root / mix_rel, mix, rate)
        sources = []
        for k in range(n_sources):
            src = 0.05 * rng.standard_normal((n, 1))
            src_rel = f"scenes/scene_{i:05d}_src{k}.wav"
            write_float32_wav(root / src_rel, src, rate)
            sources.append({
                "azimuth_deg": float(rng.uniform(0.0, 360.0)),
                "kind": "white",
                "seed": int(rng.integers(0, 2**31)),
                "path": src_rel,
            })
        records.append({
            "id": f"scene_{i:05d}",
            "seed": i,
            "sample_rate": rate,
            "duration": duration,
            "spacing_x": spacing,
            "spacing_y": spacing,
            "mixture": mix_rel,
            "sources": sources,
        })
    manifest = root / "manifest.jsonl"
    with open(manifest, "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")
    return manifest


@pytest.fixture(scope="session")
def tiny_manifest(tmp_path_factory):
    """Three random-noise desk-format scenes."""
    root = tmp_path_factory.mktemp("tinycorpus")
    return synthetic_manifest(root, 3, seed=7)


@pytest.fixture(scope="session")
def rendered_manifest(tmp_path_factory):
    """Four scenes rendered by the production simulator (reference data)."""
    dealias = pytest.importorskip("dealias")
    from dealias.experiments import preset as primary_preset
    from dealias.simulate import generate_dataset

    root = tmp_path_factory.mktemp("rendered")
    cfg = primary_preset("i_fix", "desk")
    return generate_dataset(cfg.scene, 4, 4242, str(root))


def random_bundle(seed=0, v=2, mode="diag", depth=2, base=4):
    """Small bundle with seeded Gaussian tensors (head kept near identity)."""
    rng = np.random.default_rng(seed)
    desc = {"v": v, "mode": mode, "depth": depth, "base": base}
    tensors = []
    for name, shape in architecture_shapes(desc):
        data = 0.1 * rng.standard_normal(shape).astype(np.float32)
        tensors.append((name, data))
    return Bundle(desc, tuple(tensors))
