"""Objective evaluation: complex SI-SNR, phase-aware loss, polar sweeps.

The sweep drives a caller-supplied pipeline object; anything exposing

    sweep_source(seed) -> MonoSignal
    decode_single_source(direction, signal) -> Spectrogram   # Q channels

can be swept. Source signals are drawn once per sweep and reused at every
azimuth so the normalized pattern compares like against like.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Direction, Spectrogram, _frozen
from .errors import DealiasError, InvalidArgumentError, UndefinedMetricError
from .rng import derive_seed

SNR_EPS = 1e-12  # bounds the metric to [-120, +120] dB


@dataclass(frozen=True)
class SnrSummary:
    per_channel_db: np.ndarray
    mean_db: float

    def __post_init__(self):
        object.__setattr__(self, "per_channel_db", _frozen(np.asarray(self.per_channel_db)))


def c_si_snr(estimate: Spectrogram, target: Spectrogram) -> SnrSummary:
    """Complex scale-invariant SNR per channel, in dB, plus the channel mean.

    Per channel the target is optimally complex-scaled onto the estimate:
    a = <x_hat, x>/<x, x>, s = a x, snr = 10 log10(|s|^2/(|x_hat-s|^2 + eps|s|^2)).
    Invariant to any nonzero complex scaling of the estimate.
    """
    if estimate.data.shape != target.data.shape:
        raise InvalidArgumentError(
            f"shape mismatch: estimate {estimate.data.shape}, target {target.data.shape}"
        )
    values = np.empty(estimate.n_channels)
    for q in range(estimate.n_channels):
        x_hat = estimate.data[q].ravel()
        x = target.data[q].ravel()
        denom = np.real(np.vdot(x, x))
        if denom == 0.0:
            raise UndefinedMetricError(f"target channel {q} is all-zero")
        a = np.vdot(x, x_hat) / denom  # vdot conjugates its first argument
        s = a * x
        num = np.real(np.vdot(s, s))
        err = np.real(np.vdot(x_hat - s, x_hat - s)) + SNR_EPS * num
        ratio = num / err if err > 0.0 else 0.0
        values[q] = 10.0 * np.log10(max(ratio, SNR_EPS))
    return SnrSummary(values, float(np.mean(values)))


def phasen_loss(estimate: Spectrogram, target: Spectrogram, p: float = 0.3) -> float:
    """Amplitude plus phase-aware loss on power-compressed spectra.

    0.5 mean((|t|^p - |y|^p)^2) + 0.5 mean(||t|^p e^{j ang t} - |y|^p e^{j ang y}|^2),
    averaged over channels. Zero exactly when magnitudes match and phases agree
    wherever the magnitude is nonzero.
    """
    if estimate.data.shape != target.data.shape:
        raise InvalidArgumentError(
            f"shape mismatch: estimate {estimate.data.shape}, target {target.data.shape}"
        )
    if p <= 0:
        raise InvalidArgumentError(f"compression exponent must be positive, got {p}")
    total = 0.0
    for q in range(estimate.n_channels):
        t = target.data[q]
        y = estimate.data[q]
        tm = np.abs(t) ** p
        ym = np.abs(y) ** p
        tc = tm * np.exp(1j * np.angle(t))  # angle(0) = 0, so 0 stays 0
        yc = ym * np.exp(1j * np.angle(y))
        amp = np.mean((tm - ym) ** 2)
        pha = np.mean(np.abs(tc - yc) ** 2)
        total += 0.5 * amp + 0.5 * pha
    return float(total / estimate.n_channels)


def band_partition(f_alias: float, fs: float) -> list[tuple[float, float]]:
    """Four octave-style analysis bands anchored at the aliasing onset,
    clipped to Nyquist; empty bands are dropped."""
    if not 0.0 < f_alias < fs / 2.0:
        raise InvalidArgumentError(
            f"aliasing frequency must sit inside (0, fs/2), got {f_alias} at fs {fs}"
        )
    nyq = fs / 2.0
    edges = [0.0, f_alias, 2.0 * f_alias, 4.0 * f_alias, nyq]
    bands = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        hi = min(hi, nyq)
        if lo >= nyq or hi <= lo:
            continue
        bands.append((lo, hi))
    return bands


@dataclass(frozen=True)
class PolarResponse:
    """Normalized band magnitudes on an azimuth grid: [band, azimuth, channel]."""

    bands: tuple
    azimuths_deg: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        az = np.asarray(self.azimuths_deg, dtype=np.float64)
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        bands = tuple((float(lo), float(hi)) for lo, hi in self.bands)
        if mags.ndim != 3 or mags.shape[0] != len(bands) or mags.shape[1] != az.size:
            raise InvalidArgumentError(
                f"magnitudes {mags.shape} inconsistent with {len(bands)} bands, {az.size} azimuths"
            )
        if not np.all(np.isfinite(mags)) or mags.min() < 0.0:
            raise InvalidArgumentError("magnitudes must be finite and nonnegative")
        peak = mags.max(axis=1)
        live = peak > 0.0
        if np.any(np.abs(peak[live] - 1.0) > 1e-6):
            raise InvalidArgumentError("magnitudes must be normalized to peak 1 per band/channel")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "azimuths_deg", _frozen(az))
        object.__setattr__(self, "magnitudes", _frozen(mags))

    @property
    def n_channels(self) -> int:
        return self.magnitudes.shape[2]


def _band_masks(freqs: np.ndarray, bands) -> list[np.ndarray]:
    masks = []
    for i, (lo, hi) in enumerate(bands):
        m = (freqs >= lo) & (freqs < hi)
        if i == len(bands) - 1:
            m |= freqs == hi  # the top band owns its upper edge (Nyquist)
        masks.append(m)
    return masks


def spatial_sweep(pipeline, grid, n_signals: int, bands, seed: int,
                  threads: int = 1) -> PolarResponse:
    """Empirical polar patterns: single sources on a grid, band-RMS per output
    channel, averaged over signals, normalized per (band, channel).

    `threads` bounds azimuth-level parallelism; results are ordered and
    identical for any thread count.
    """
    dirs = tuple(grid)
    if not dirs:
        raise InvalidArgumentError("sweep grid is empty")
    if n_signals < 1:
        raise InvalidArgumentError(f"need at least one signal, got {n_signals}")
    bands = tuple((float(lo), float(hi)) for lo, hi in bands)
    for lo, hi in bands:
        if not 0.0 <= lo < hi:
            raise InvalidArgumentError(f"bad band ({lo}, {hi})")

    signals = [pipeline.sweep_source(derive_seed(seed, i)) for i in range(n_signals)]
    masks = None

    def measure(direction):
        nonlocal masks
        rows = None
        for sig in signals:
            try:
                out = pipeline.decode_single_source(direction, sig)
            except DealiasError as exc:
                raise type(exc)(f"sweep failed at azimuth {direction.azimuth_deg}: {exc}") from exc
            if masks is None:
                masks = _band_masks(out.bin_frequencies, bands)
            if rows is None:
                rows = np.zeros((len(bands), out.n_channels))
            for bi, mask in enumerate(masks):
                if not np.any(mask):
                    continue
                band_power = np.mean(np.abs(out.data[:, mask, :]) ** 2, axis=(1, 2))
                rows[bi] += np.sqrt(band_power)
        return rows

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_azimuth = list(pool.map(measure, dirs))
    else:
        per_azimuth = [measure(d) for d in dirs]
    acc = np.stack(per_azimuth, axis=1) / n_signals
    peak = acc.max(axis=1, keepdims=True)
    acc = np.divide(acc, peak, out=np.zeros_like(acc), where=peak > 0)
    return PolarResponse(bands, np.array([d.azimuth_deg for d in dirs]), acc)


def pattern_deviation_db(measured, reference, floor_db: float = -40.0) -> np.ndarray:
    """Pointwise |dB gap| between two normalized patterns.

    Both sides are floored before comparing: an ideal pattern has true nulls
    (-inf dB) that no finite-resolution measurement can follow, so deviations
    are only meaningful down to a display floor.
    """
    measured = np.asarray(measured, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if measured.shape != reference.shape:
        raise InvalidArgumentError(
            f"shape mismatch: measured {measured.shape}, reference {reference.shape}"
        )
    floor = 10.0 ** (floor_db / 20.0)
    m = 20.0 * np.log10(np.maximum(measured, floor))
    r = 20.0 * np.log10(np.maximum(reference, floor))
    return np.abs(m - r)


def polar_to_csv(resp: PolarResponse, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["band_lo_hz", "band_hi_hz", "channel", "azimuth_deg", "magnitude"])
        for bi, (lo, hi) in enumerate(resp.bands):
            for ch in range(resp.n_channels):
                for ai, az in enumerate(resp.azimuths_deg):
                    writer.writerow([lo, hi, ch, az, resp.magnitudes[bi, ai, ch]])


def polar_metadata_json(resp: PolarResponse, path: str, seed: int, n_signals: int, pipeline_id: str) -> None:
    meta = {
        "pipeline": pipeline_id,
        "seed": seed,
        "n_signals": n_signals,
        "bands": [list(b) for b in resp.bands],
        "n_azimuths": int(resp.azimuths_deg.size),
        "n_channels": resp.n_channels,
    }
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
