"""WAV, JSON-lines, and spectrogram-container helpers.

WAV files are RIFF with IEEE float32 samples (format tag 3), channels
interleaved. scipy handles the container; this module fixes the [channels,
samples] orientation used everywhere else in the package. Spectrograms get
their own tiny container (magic DSPC): version, JSON header with the STFT
grid parameters, then complex64 little-endian tiles.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np
from scipy.io import wavfile

from .core import Spectrogram
from .errors import DataFormatError

_SPEC_MAGIC = b"DSPC"
_SPEC_VERSION = 1


def write_wav(path: str, samples: np.ndarray, sample_rate: int) -> None:
    a = np.asarray(samples, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    wavfile.write(path, sample_rate, np.ascontiguousarray(a.T.astype(np.float32)))


def read_wav(path: str) -> tuple[np.ndarray, int]:
    """Returns ([channels, samples] float64, sample_rate)."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as e:
        raise DataFormatError(f"{path}: not a readable WAV file ({e})") from e
    if data.dtype != np.float32:
        raise DataFormatError(f"{path}: expected IEEE float32 samples, got {data.dtype}")
    if data.ndim == 1:
        data = data[:, None]
    return data.T.astype(np.float64), int(rate)


def write_jsonl(path: str, records: list[dict]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: str) -> list[dict]:
    out = []
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}:{i + 1}: invalid JSON line ({e})") from e
    return out


def write_spectrogram(path: str, spec: Spectrogram) -> None:
    header = json.dumps(
        {
            "sample_rate": spec.sample_rate,
            "fft_size": spec.fft_size,
            "hop": spec.hop,
            "n_samples": spec.n_samples,
            "channels": spec.n_channels,
            "bins": spec.n_bins,
            "frames": spec.n_frames,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_SPEC_MAGIC)
        fh.write(struct.pack("<II", _SPEC_VERSION, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(spec.data.astype("<c8")).tobytes())


def read_spectrogram(path: str) -> Spectrogram:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _SPEC_MAGIC:
        raise DataFormatError(f"{path}: not a spectrogram container")
    if len(blob) < 12:
        raise DataFormatError(f"{path}: truncated header")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != _SPEC_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if len(blob) < 12 + header_len:
        raise DataFormatError(f"{path}: truncated header")
    try:
        h = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
        shape = (h["channels"], h["bins"], h["frames"])
        params = (h["sample_rate"], h["fft_size"], h["hop"], h["n_samples"])
    except (ValueError, KeyError) as e:
        raise DataFormatError(f"{path}: unreadable header ({e})") from e
    count = shape[0] * shape[1] * shape[2]
    data = blob[12 + header_len :]
    if len(data) < 8 * count:
        raise DataFormatError(f"{path}: tile data truncated")
    tiles = np.frombuffer(data[: 8 * count], dtype="<c8").reshape(shape)
    return Spectrogram(tiles.astype(np.complex128), *params)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
