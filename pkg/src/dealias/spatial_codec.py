"""Decoder matrices, alias-free target encoding, and per-tile filtering.

The processing model is, per STFT tile (frame n, bin k):

    y(n,k) = D . M(n,k) . v(n,k)

V virtual-mic values are reshaped by a complex V x V filter M (optionally
diagonal), then decoded to Q output channels by a real, frequency-independent
matrix D.

Targets come from t(n,k) = E . s(n,k) where s stacks the K source spectra as
heard at the array center and [E]_{qk} = alpha + (1-alpha)(u_q . u_k) is the
pickup an ideal first-order pattern aimed at u_q has for a source at u_k.
E is real, so targets carry no direction-dependent phase; restoring relative
phase is entirely the filter's job.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import Direction, Spectrogram, _frozen
from .errors import DataFormatError, InvalidArgumentError

FILTER_MODES = ("diag", "full")

_DFF_MAGIC = b"DFFC"
_DFF_VERSION = 1


@dataclass(frozen=True)
class DecoderMatrix:
    """Real Q x V decode matrix; decode_directions is empty for identity."""

    entries: np.ndarray
    decode_directions: tuple[Direction, ...] = ()

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise InvalidArgumentError(f"decoder must be a 2-d matrix, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InvalidArgumentError("decoder entries must be finite")
        if self.decode_directions and len(self.decode_directions) != e.shape[0]:
            raise InvalidArgumentError(
                f"{len(self.decode_directions)} directions for {e.shape[0]} decoder rows"
            )
        object.__setattr__(self, "entries", _frozen(e))
        object.__setattr__(self, "decode_directions", tuple(self.decode_directions))

    @property
    def n_outputs(self) -> int:
        return self.entries.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.entries.shape[1]


def identity_decoder(v: int) -> DecoderMatrix:
    if v < 1:
        raise InvalidArgumentError(f"need at least one channel, got {v}")
    return DecoderMatrix(np.eye(v))


def cardioid_fan_decoder(directions) -> DecoderMatrix:
    """In-phase decode of (W, X, Y): row q = [0.5, 0.5 cos phi_q, 0.5 sin phi_q],
    so a low-frequency plane wave from theta decodes to 0.5 + 0.5 cos(theta - phi_q);
    unit gain on-axis and no negative lobe."""
    dirs = tuple(directions)
    if not dirs:
        raise InvalidArgumentError("need at least one decode direction")
    rows = np.array([[0.5, 0.5 * d.unit[0], 0.5 * d.unit[1]] for d in dirs])
    return DecoderMatrix(rows, dirs)


@dataclass(frozen=True)
class EncoderMatrix:
    """Real Q x K target mixing matrix with shape coefficient alpha."""

    entries: np.ndarray
    alpha: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2:
            raise InvalidArgumentError(f"encoder must be 2-d, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InvalidArgumentError("encoder entries must be finite")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must be in [0, 1], got {self.alpha}")
        lo = 2.0 * self.alpha - 1.0
        if e.size and (e.min() < lo or e.max() > 1.0):
            raise InvalidArgumentError("encoder entries out of first-order pattern range")
        object.__setattr__(self, "entries", _frozen(e))

    @property
    def n_outputs(self) -> int:
        return self.entries.shape[0]

    @property
    def n_sources(self) -> int:
        return self.entries.shape[1]


def target_encoder(decode_dirs, source_dirs, alpha: float) -> EncoderMatrix:
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must be in [0, 1], got {alpha}")
    qs = tuple(decode_dirs)
    ks = tuple(source_dirs)
    e = np.array([[alpha + (1.0 - alpha) * q.dot(k) for k in ks] for q in qs])
    # clip 1-ulp float spill so the stated pattern bounds hold exactly
    e = np.clip(e.reshape(len(qs), len(ks)), 2.0 * alpha - 1.0, 1.0)
    return EncoderMatrix(e, alpha)


def make_targets(encoder: EncoderMatrix, source_specs: Spectrogram) -> Spectrogram:
    """t = E . s per tile; sources stacked as spectrogram channels."""
    if source_specs.n_channels != encoder.n_sources:
        raise InvalidArgumentError(
            f"encoder expects {encoder.n_sources} sources, got {source_specs.n_channels}"
        )
    t = np.einsum("qk,kft->qft", encoder.entries, source_specs.data)
    return source_specs.with_data(t)


@dataclass(frozen=True)
class FilterField:
    """Per-tile filters: [frames, bins, V] in diag mode, [frames, bins, V, V] full."""

    mode: str
    tensor: np.ndarray

    def __post_init__(self):
        if self.mode not in FILTER_MODES:
            raise InvalidArgumentError(f"mode must be one of {FILTER_MODES}, got {self.mode!r}")
        t = np.asarray(self.tensor)
        if not np.iscomplexobj(t):
            t = t.astype(np.complex128)
        want = 3 if self.mode == "diag" else 4
        if t.ndim != want:
            raise InvalidArgumentError(f"{self.mode} filter tensor must be {want}-d, got {t.ndim}-d")
        if self.mode == "full" and t.shape[2] != t.shape[3]:
            raise InvalidArgumentError(f"full filters must be square, got {t.shape[2:]}")
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("filter entries must be finite")
        object.__setattr__(self, "tensor", _frozen(t))

    @property
    def n_frames(self) -> int:
        return self.tensor.shape[0]

    @property
    def n_bins(self) -> int:
        return self.tensor.shape[1]

    @property
    def v(self) -> int:
        return self.tensor.shape[2]

    @classmethod
    def identity(cls, n_frames: int, n_bins: int, v: int, mode: str = "diag") -> "FilterField":
        if mode == "diag":
            return cls("diag", np.ones((n_frames, n_bins, v), dtype=np.complex128))
        eye = np.broadcast_to(np.eye(v, dtype=np.complex128), (n_frames, n_bins, v, v))
        return cls("full", eye.copy())

    def as_full(self) -> "FilterField":
        if self.mode == "full":
            return self
        t, f, v = self.tensor.shape
        full = np.zeros((t, f, v, v), dtype=np.complex128)
        idx = np.arange(v)
        full[:, :, idx, idx] = self.tensor
        return FilterField("full", full)


def apply_filter(decoder: DecoderMatrix, filt: FilterField, v: Spectrogram) -> Spectrogram:
    """y = D . M . v per tile; diag filters multiply elementwise before decoding."""
    if decoder.n_inputs != filt.v or filt.v != v.n_channels:
        raise InvalidArgumentError(
            f"channel mismatch: decoder takes {decoder.n_inputs}, "
            f"filter is {filt.v}-wide, spectrogram has {v.n_channels}"
        )
    if (filt.n_frames, filt.n_bins) != (v.n_frames, v.n_bins):
        raise InvalidArgumentError(
            f"filter grid {filt.n_frames}x{filt.n_bins} does not match "
            f"spectrogram {v.n_frames}x{v.n_bins}"
        )
    tiles = np.transpose(v.data, (2, 1, 0))  # [T, F, V]
    if filt.mode == "diag":
        mixed = filt.tensor * tiles
    else:
        # broadcast-multiply + sum keeps the diag case bit-identical to the
        # elementwise path when off-diagonals are zero
        mixed = (filt.tensor * tiles[:, :, None, :]).sum(axis=-1)
    out = np.einsum("qv,tfv->qft", decoder.entries, mixed)
    return v.with_data(out)


# ------------------------------------------------------------- container

def write_filter_field(path: str, filt: FilterField) -> None:
    """Single-precision binary container: magic, version, JSON header, then
    the complex64 tensor little-endian row-major."""
    header = json.dumps(
        {"mode": filt.mode, "frames": filt.n_frames, "bins": filt.n_bins, "v": filt.v},
        sort_keys=True,
    ).encode()
    payload = np.ascontiguousarray(filt.tensor.astype(np.dtype("<c8")))
    with open(path, "wb") as fh:
        fh.write(_DFF_MAGIC)
        fh.write(struct.pack("<II", _DFF_VERSION, len(header)))
        fh.write(header)
        fh.write(payload.tobytes())


def read_filter_field(path: str) -> FilterField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _DFF_MAGIC:
        raise DataFormatError(f"{os.path.basename(path)}: not a filter-field container")
    if len(raw) < 12:
        raise DataFormatError("filter-field container truncated before header")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != _DFF_VERSION:
        raise DataFormatError(f"unsupported filter-field version {version}")
    if len(raw) < 12 + hlen:
        raise DataFormatError("filter-field header truncated")
    try:
        header = json.loads(raw[12 : 12 + hlen].decode())
        mode = header["mode"]
        shape = (header["frames"], header["bins"], header["v"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"bad filter-field header: {exc}") from exc
    if mode == "full":
        shape = shape + (shape[-1],)
    elif mode != "diag":
        raise DataFormatError(f"bad filter-field mode {mode!r}")
    count = int(np.prod(shape))
    data = np.frombuffer(raw[12 + hlen :], dtype=np.dtype("<c8"))
    if data.size != count:
        raise DataFormatError(f"filter-field payload holds {data.size} entries, header says {count}")
    return FilterField(mode, data.reshape(shape))
