"""WAV and manifest input plus the forward STFT.

STFT conventions (fixed, shared with the inference package): periodic Hann
analysis window, hop = fft_size / 2, the signal is padded with fft_size / 2
zeros on both sides plus a tail so every hop lands on a full frame.  Output
is [channels, bins, frames], complex128.
"""

from __future__ import annotations

import json
import os

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, DataError


def read_wav(path: str) -> tuple[np.ndarray, int]:
    """Returns ([channels, samples] float64, sample_rate); float32 RIFF only."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as e:
        raise DataError(f"{path}: not a readable WAV file ({e})") from e
    if data.dtype != np.float32:
        raise DataError(f"{path}: expected IEEE float32 samples, got {data.dtype}")
    if data.ndim == 1:
        data = data[:, None]
    return data.T.astype(np.float64), int(rate)


def read_manifest(path: str) -> list[dict]:
    """JSON-lines scene records with source paths resolved against the
    manifest's directory."""
    base = os.path.dirname(os.path.abspath(path))
    records = []
    try:
        with open(path) as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DataError(f"{path}:{i + 1}: invalid JSON line ({e})") from e
                records.append(rec)
    except OSError as e:
        raise DataError(f"{path}: cannot read manifest ({e})") from e
    out = []
    for i, rec in enumerate(records):
        try:
            out.append(
                {
                    "id": rec.get("id", f"scene_{i:05d}"),
                    "sample_rate": int(rec["sample_rate"]),
                    "spacing_x": float(rec["spacing_x"]),
                    "spacing_y": float(rec["spacing_y"]),
                    "mixture": os.path.join(base, rec["mixture"]),
                    "sources": [
                        {
                            "azimuth_deg": float(s["azimuth_deg"]),
                            "path": os.path.join(base, s["path"]),
                        }
                        for s in rec["sources"]
                    ],
                }
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}: record {i} is malformed ({e})") from e
    if not out:
        raise DataError(f"{path}: manifest holds no scenes")
    return out


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(x: np.ndarray, fft_size: int, hop: int) -> np.ndarray:
    """Forward STFT of [channels, samples] real input -> [C, bins, frames]."""
    if fft_size < 4 or fft_size % 2:
        raise ConfigError(f"fft_size must be even and >= 4, got {fft_size}")
    if hop != fft_size // 2:
        raise ConfigError(f"only 50% overlap is supported: hop {hop} != {fft_size // 2}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    n = x.shape[1]
    if n == 0:
        raise DataError("input signal is empty")
    if not np.all(np.isfinite(x)):
        raise DataError("input samples must be finite")
    pad = fft_size // 2
    covered = pad + n + pad
    rem = (covered - fft_size) % hop
    tail = (hop - rem) % hop
    xp = np.pad(x, ((0, 0), (pad, pad + tail)))
    frames = np.lib.stride_tricks.sliding_window_view(xp, fft_size, axis=1)[:, ::hop]
    spec = np.fft.rfft(frames * hann_periodic(fft_size), axis=-1)
    return np.ascontiguousarray(spec.transpose(0, 2, 1))
