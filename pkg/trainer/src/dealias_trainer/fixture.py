"""Parity fixtures: one container holding weights, a seeded input grid,
and the reference forward output.

The reference pass runs in double precision on the float32 weights and
input, so any consumer that also promotes to float64 reproduces it to
~1e-12; a single-precision forward still lands well inside 1e-4.  Export
is deterministic: the same bundle and seed regenerate the file
bit-identically.
"""

from __future__ import annotations

import numpy as np
import torch

from .dalw import FIXTURE_PREFIX, Bundle, load_bundle, save_bundle
from .errors import ConfigError, DataError
from .model import bundle_to_model

INPUT_NAME = FIXTURE_PREFIX + "input"
OUTPUT_NAME = FIXTURE_PREFIX + "output"
INPUT_RMS = 2.0 ** -0.5  # per-component spread of unit-RMS complex tiles


def _default_grid(depth: int, bins: int | None, frames: int | None) -> tuple[int, int]:
    block = 1 << depth
    b = 512 if bins is None else int(bins)
    f = 64 if frames is None else int(frames)
    b = max(block, (b // block) * block)
    f = max(block, (f // block) * block)
    return b, f


def reference_forward(bundle: Bundle, grid: np.ndarray) -> np.ndarray:
    """Double-precision forward pass of the architecture tensors on
    [2V, F', T'] input; returns [C_out, F', T'] float64."""
    model = bundle_to_model(bundle.without_fixture()).double()
    model.eval()
    x = torch.from_numpy(np.asarray(grid, dtype=np.float64))[None]
    with torch.no_grad():
        out = model(x)[0]
    return out.numpy()


def export_parity_fixture(bundle: Bundle, seed: int, path: str,
                          bins: int | None = None, frames: int | None = None) -> None:
    """Write weights + seeded input + reference output into one container."""
    desc = bundle.descriptor
    n_bins, n_frames = _default_grid(desc["depth"], bins, frames)
    block = 1 << desc["depth"]
    if n_bins % block or n_frames % block:
        raise ConfigError(f"fixture grid {(n_bins, n_frames)} must divide by 2^{desc['depth']}")
    gen = torch.Generator().manual_seed(seed & 0x7FFFFFFFFFFFFFFF)
    grid = (torch.randn((2 * desc["v"], n_bins, n_frames), generator=gen)
            * INPUT_RMS).numpy().astype(np.float32)
    out = reference_forward(bundle, grid).astype(np.float32)
    tensors = tuple((n, a) for n, a in bundle.tensors if not n.startswith(FIXTURE_PREFIX))
    tensors = tensors + ((INPUT_NAME, grid), (OUTPUT_NAME, out))
    save_bundle(Bundle(dict(desc), tensors), path)


def verify_fixture(path: str) -> float:
    """Recompute the reference pass on the reloaded container; returns the
    max absolute deviation from the stored output."""
    bundle = load_bundle(path)
    names = bundle.names()
    if INPUT_NAME not in names or OUTPUT_NAME not in names:
        raise DataError(f"{path}: container has no parity fixture tensors")
    out = reference_forward(bundle, bundle.tensor(INPUT_NAME).astype(np.float64))
    return float(np.max(np.abs(out - bundle.tensor(OUTPUT_NAME).astype(np.float64))))
