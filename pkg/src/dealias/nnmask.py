"""Neural mask predictor: feature packing, a fixed compact U-Net forward
pass, weight-bundle serialization, and the mask-to-filter reshape.

The architecture is frozen so that an external trainer can reproduce it
parameter for parameter: per encoder level two 3x3 convolutions (stride 1,
zero padding 1) with ReLU, then 2x2 max-pool; a double-conv bottleneck;
per decoder level 2x nearest-neighbor upsample, a 3x3 channel-halving
convolution with ReLU, concatenation as [skip, upsampled], and another
double conv; finally a 1x1 head with identity activation. Convolutions are
cross-correlations (no kernel flip). Depth 0 degenerates to the head alone.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .core import Spectrogram, _frozen
from .errors import (
    CorruptWeightsError,
    InvalidArgumentError,
    NotAWeightFileError,
)
from .spatial_codec import FILTER_MODES, FilterField

_MAGIC = b"DALW"
_VERSION = 1
FIXTURE_PREFIX = "fixture."


def mask_channels(v: int, mode: str) -> int:
    if mode == "diag":
        return 2 * v
    if mode == "full":
        return 2 * v * v
    raise InvalidArgumentError(f"mode must be one of {FILTER_MODES}, got {mode!r}")


# ------------------------------------------------------------------ features

@dataclass(frozen=True)
class FeatureTensor:
    """Real-valued network input [2V, F', T'] plus the crop/pad bookkeeping
    needed to map masks back onto the original grid."""

    grid: np.ndarray
    original_bins: int
    original_frames: int
    scale: float
    depth: int

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 3 or g.shape[0] % 2:
            raise InvalidArgumentError(f"feature grid must be [2V, F', T'], got {g.shape}")
        block = 1 << self.depth
        if g.shape[1] % block or g.shape[2] % block:
            raise InvalidArgumentError(
                f"feature dims {g.shape[1:]} must be divisible by 2^{self.depth}"
            )
        if not np.all(np.isfinite(g)):
            raise InvalidArgumentError("feature grid must be finite")
        object.__setattr__(self, "grid", _frozen(g))

    @property
    def n_virtual(self) -> int:
        return self.grid.shape[0] // 2


def features_from_vmics(v: Spectrogram, depth: int) -> FeatureTensor:
    """Pack virtual-mic tiles as interleaved real/imag channels, cropped and
    padded so both grid dimensions divide by 2^depth.

    Frequency is cropped downward (low bins kept), time is zero-padded at the
    end. The whole grid is scaled by g = 1/max(rms(|v|), 1e-8); g is recorded
    so downstream consumers know the masks were predicted on scaled input.
    """
    if depth < 0:
        raise InvalidArgumentError(f"depth must be nonnegative, got {depth}")
    block = 1 << depth
    n_bins, n_frames = v.n_bins, v.n_frames
    if n_bins < block:
        raise InvalidArgumentError(f"{n_bins} bins cannot support depth {depth}")
    keep = (n_bins // block) * block
    frames = ((n_frames + block - 1) // block) * block
    rms = float(np.sqrt(np.mean(np.abs(v.data) ** 2)))
    g = 1.0 / max(rms, 1e-8)
    grid = np.zeros((2 * v.n_channels, keep, frames))
    grid[0::2, :, :n_frames] = g * v.data[:, :keep, :].real
    grid[1::2, :, :n_frames] = g * v.data[:, :keep, :].imag
    return FeatureTensor(grid, n_bins, n_frames, g, depth)


# ------------------------------------------------------------------ weights

@dataclass(frozen=True)
class MaskTensor:
    grid: np.ndarray  # [C_out, F', T'], unbounded (identity output activation)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 3:
            raise InvalidArgumentError(f"mask grid must be [C, F', T'], got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidArgumentError("mask grid must be finite")
        object.__setattr__(self, "grid", _frozen(g))


def architecture_shapes(descriptor: dict) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) table implied by a descriptor, in execution order."""
    v, mode = descriptor["v"], descriptor["mode"]
    depth, base = descriptor["depth"], descriptor["base"]
    if v < 1 or depth < 0 or base < 1:
        raise InvalidArgumentError(f"bad descriptor {descriptor}")
    c_out = mask_channels(v, mode)
    table: list[tuple[str, tuple[int, ...]]] = []

    def conv(name, out_ch, in_ch, k):
        table.append((f"{name}.weight", (out_ch, in_ch, k, k)))
        table.append((f"{name}.bias", (out_ch,)))

    ch_in = 2 * v
    for level in range(depth):
        ch = base << level
        conv(f"enc{level}.conv1", ch, ch_in, 3)
        conv(f"enc{level}.conv2", ch, ch, 3)
        ch_in = ch
    if depth > 0:
        ch = base << depth
        conv("bottleneck.conv1", ch, ch_in, 3)
        conv("bottleneck.conv2", ch, ch, 3)
        for level in range(depth - 1, -1, -1):
            ch = base << level
            conv(f"dec{level}.up", ch, ch * 2, 3)
            conv(f"dec{level}.conv1", ch, ch * 2, 3)  # input is [skip, up]
            conv(f"dec{level}.conv2", ch, ch, 3)
        ch_in = base
    conv("head", c_out, ch_in, 1)
    return table


@dataclass(frozen=True)
class WeightBundle:
    """Immutable named tensors plus the architecture they parameterize.

    Names outside the architecture table are permitted only under the
    reserved "fixture." prefix (parity fixtures ride along in the bundle).
    """

    descriptor: dict
    tensors: tuple

    def __post_init__(self):
        desc = dict(self.descriptor)
        if set(desc) != {"v", "mode", "depth", "base"}:
            raise CorruptWeightsError(f"descriptor keys {sorted(desc)} unexpected")
        desc = {"v": int(desc["v"]), "mode": str(desc["mode"]),
                "depth": int(desc["depth"]), "base": int(desc["base"])}
        expected = dict(architecture_shapes(desc))
        frozen = []
        seen = {}
        for name, arr in self.tensors:
            a = np.asarray(arr, dtype=np.float32)
            if name in seen:
                raise CorruptWeightsError(f"tensor {name}: duplicated")
            if not name.startswith(FIXTURE_PREFIX):
                if name not in expected:
                    raise CorruptWeightsError(f"tensor {name}: not in architecture")
                if a.shape != expected[name]:
                    raise CorruptWeightsError(
                        f"tensor {name}: expected shape {expected[name]}, got {a.shape}"
                    )
            if not np.all(np.isfinite(a)):
                raise CorruptWeightsError(f"tensor {name}: non-finite values")
            seen[name] = True
            frozen.append((name, _frozen(a)))
        missing = [n for n in expected if n not in seen]
        if missing:
            raise CorruptWeightsError(f"tensor {missing[0]}: missing from bundle")
        object.__setattr__(self, "descriptor", desc)
        object.__setattr__(self, "tensors", tuple(frozen))

    def tensor(self, name: str) -> np.ndarray:
        for n, arr in self.tensors:
            if n == name:
                return arr
        raise CorruptWeightsError(f"tensor {name}: missing from bundle")

    def names(self) -> list[str]:
        return [n for n, _ in self.tensors]


def identity_filter_bundle(v: int, mode: str, depth: int = 0, base: int = 1) -> WeightBundle:
    """Weights whose masks encode the identity filter at every tile: all conv
    weights zero, head bias set to the interleaved identity pattern."""
    desc = {"v": v, "mode": mode, "depth": depth, "base": base}
    tensors = []
    for name, shape in architecture_shapes(desc):
        data = np.zeros(shape, dtype=np.float32)
        if name == "head.bias":
            if mode == "diag":
                data[0::2] = 1.0
            else:
                for r in range(v):
                    data[2 * (r * v + r)] = 1.0
        tensors.append((name, data))
    return WeightBundle(desc, tuple(tensors))


# ------------------------------------------------------------------ forward

def _conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = w.shape[2]
    pad = k // 2
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    out = np.einsum("ihwkl,oikl->ohw", win, w.astype(np.float64), optimize=True)
    return out + b.astype(np.float64)[:, None, None]


def _relu(x):
    return np.maximum(x, 0.0)


def _pool2(x):
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def _upsample2(x):
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def unet_forward(weights: WeightBundle, features: FeatureTensor) -> MaskTensor:
    """Deterministic forward pass; output spatial dims equal input dims."""
    desc = weights.descriptor
    if features.grid.shape[0] != 2 * desc["v"]:
        raise InvalidArgumentError(
            f"features have {features.grid.shape[0]} channels, descriptor wants {2 * desc['v']}"
        )
    if features.depth != desc["depth"]:
        raise InvalidArgumentError(
            f"features packed for depth {features.depth}, descriptor is depth {desc['depth']}"
        )

    def double_conv(x, stem):
        x = _relu(_conv2d(x, weights.tensor(f"{stem}.conv1.weight"), weights.tensor(f"{stem}.conv1.bias")))
        return _relu(_conv2d(x, weights.tensor(f"{stem}.conv2.weight"), weights.tensor(f"{stem}.conv2.bias")))

    x = features.grid
    skips = []
    for level in range(desc["depth"]):
        x = double_conv(x, f"enc{level}")
        skips.append(x)
        x = _pool2(x)
    if desc["depth"] > 0:
        x = double_conv(x, "bottleneck")
        for level in range(desc["depth"] - 1, -1, -1):
            x = _upsample2(x)
            x = _relu(_conv2d(x, weights.tensor(f"dec{level}.up.weight"), weights.tensor(f"dec{level}.up.bias")))
            x = np.concatenate([skips[level], x], axis=0)
            x = double_conv(x, f"dec{level}")
    x = _conv2d(x, weights.tensor("head.weight"), weights.tensor("head.bias"))
    return MaskTensor(x)


# ------------------------------------------------------------------ reshape

def masks_to_filters(mask: MaskTensor, mode: str, features: FeatureTensor) -> FilterField:
    """Reassemble per-tile filters from mask channels.

    Entry (r, c) of the filter at tile (frame, bin) reads channels 2(rV+c)
    and 2(rV+c)+1 as real and imaginary parts (diag: entry i from 2i, 2i+1).
    Time padding is dropped, cropped top bins come back as identity filters.
    The feature scaling g cancels: masks multiply the unscaled tiles.
    """
    v = features.n_virtual
    want = mask_channels(v, mode)
    if mask.grid.shape[0] != want:
        raise InvalidArgumentError(
            f"{mode} masks for V={v} need {want} channels, got {mask.grid.shape[0]}"
        )
    if mask.grid.shape[1:] != features.grid.shape[1:]:
        raise InvalidArgumentError(
            f"mask grid {mask.grid.shape[1:]} does not match features {features.grid.shape[1:]}"
        )
    cplx = mask.grid[0::2] + 1j * mask.grid[1::2]  # [V or V^2, F', T']
    cplx = cplx[:, :, : features.original_frames]
    kept = features.grid.shape[1]
    frames, bins = features.original_frames, features.original_bins
    if mode == "diag":
        tensor = np.ones((frames, bins, v), dtype=np.complex128)
        tensor[:, :kept, :] = cplx.transpose(2, 1, 0)
    else:
        tensor = np.zeros((frames, bins, v, v), dtype=np.complex128)
        tensor[:, kept:] = np.eye(v)
        entries = cplx.reshape(v, v, kept, frames)
        tensor[:, :kept] = entries.transpose(3, 2, 0, 1)
    return FilterField(mode, tensor)


def filters_to_masks(filt: FilterField, depth: int) -> MaskTensor:
    """Inverse of masks_to_filters on the kept region; padded frames are zero."""
    block = 1 << depth
    if filt.n_bins < block:
        raise InvalidArgumentError(f"{filt.n_bins} bins cannot support depth {depth}")
    kept = (filt.n_bins // block) * block
    frames = ((filt.n_frames + block - 1) // block) * block
    v = filt.v
    if filt.mode == "diag":
        entries = filt.tensor[:, :kept, :].transpose(2, 1, 0)  # [V, F', T]
    else:
        entries = filt.tensor[:, :kept].transpose(2, 3, 1, 0).reshape(v * v, kept, filt.n_frames)
    grid = np.zeros((2 * entries.shape[0], kept, frames))
    grid[0::2, :, : filt.n_frames] = entries.real
    grid[1::2, :, : filt.n_frames] = entries.imag
    return MaskTensor(grid)


# ------------------------------------------------------------------ storage

def save_weights(bundle: WeightBundle, path: str) -> None:
    table = []
    blobs = []
    offset = 0
    for name, arr in bundle.tensors:
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"descriptor": bundle.descriptor, "tensors": table}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_weights(path: str) -> WeightBundle:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise NotAWeightFileError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 12:
        raise CorruptWeightsError(f"{path}: truncated header")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise CorruptWeightsError(f"{path}: unsupported version {version}")
    if len(blob) < 12 + header_len:
        raise CorruptWeightsError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
        descriptor = header["descriptor"]
        table = header["tensors"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CorruptWeightsError(f"{path}: unreadable header: {exc}") from exc
    data = blob[12 + header_len :]
    tensors = []
    for entry in table:
        try:
            name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        except (KeyError, TypeError) as exc:
            raise CorruptWeightsError(f"{path}: malformed tensor entry: {exc}") from exc
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 4 * count
        if offset < 0 or end > len(data):
            raise CorruptWeightsError(f"{path}: tensor {name} extends past end of file")
        arr = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape)
        tensors.append((name, arr))
    return WeightBundle(descriptor, tuple(tensors))
