"""Forward/inverse STFT with fixed conventions.

Periodic Hann analysis window, 50% overlap (hop = fft_size/2, enforced),
fft_size/2 zeros of pre/post padding so every original sample is covered by
two frames. The inverse is weighted overlap-add with the same window,
normalized by the summed squared window per sample, then trimmed back to the
original length. Round-trip error is float rounding only.
"""

from __future__ import annotations

import numpy as np

from .core import MonoSignal, MultichannelSignal, Spectrogram
from .errors import InvalidArgumentError, UnsupportedConfigurationError


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _check_params(fft_size: int, hop: int):
    if fft_size < 4 or fft_size % 2:
        raise InvalidArgumentError(f"fft_size must be even and >= 4, got {fft_size}")
    if hop != fft_size // 2:
        raise UnsupportedConfigurationError(
            f"only 50% overlap is supported: hop {hop} != fft_size/2 {fft_size // 2}"
        )


def stft_forward(signal: MultichannelSignal | MonoSignal, fft_size: int, hop: int) -> Spectrogram:
    _check_params(fft_size, hop)
    if isinstance(signal, MonoSignal):
        x = signal.samples[None, :]
    else:
        x = signal.samples
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input samples must be finite")
    n = x.shape[1]
    if n == 0:
        raise InvalidArgumentError("input signal is empty")

    pad = fft_size // 2
    covered = pad + n + pad
    # extend so (length - fft_size) is an exact multiple of hop
    rem = (covered - fft_size) % hop
    tail = (hop - rem) % hop
    xp = np.pad(x, ((0, 0), (pad, pad + tail)))

    frames = np.lib.stride_tricks.sliding_window_view(xp, fft_size, axis=1)[:, ::hop]
    spec = np.fft.rfft(frames * hann_periodic(fft_size), axis=-1)
    data = np.ascontiguousarray(spec.transpose(0, 2, 1))
    return Spectrogram(data, signal.sample_rate, fft_size, hop, n_samples=n)


def _overlap_add(frames: np.ndarray, hop: int, total: int) -> np.ndarray:
    """OLA for 50% overlap: same-parity frames never overlap, so two bulk adds."""
    c, t, fft = frames.shape
    acc = np.zeros((c, total))
    for parity in (0, 1):
        part = frames[:, parity::2]
        k = part.shape[1]
        if k == 0:
            continue
        start = parity * hop
        acc[:, start:start + k * fft] += part.reshape(c, k * fft)
    return acc


def stft_inverse(spec: Spectrogram) -> MultichannelSignal:
    _check_params(spec.fft_size, spec.hop)
    fft, hop, t = spec.fft_size, spec.hop, spec.n_frames
    if t < 1:
        raise InvalidArgumentError("spectrogram has no frames")
    w = hann_periodic(fft)

    frames = np.fft.irfft(spec.data.transpose(0, 2, 1), n=fft, axis=-1) * w
    total = (t - 1) * hop + fft
    acc = _overlap_add(frames, hop, total)

    wsq = np.broadcast_to(w * w, (1, t, fft))
    norm = _overlap_add(wsq, hop, total)[0]
    y = np.where(norm > 1e-12, acc, 0.0) / np.where(norm > 1e-12, norm, 1.0)

    pad = fft // 2
    n = spec.n_samples if spec.n_samples is not None else total - fft
    if n > total - pad:
        raise InvalidArgumentError(
            f"n_samples {n} exceeds synthesized coverage {total - pad}"
        )
    out = y[:, pad:pad + n]
    return MultichannelSignal(out, spec.sample_rate)
