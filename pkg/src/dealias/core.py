"""Shared value types: directions, array geometry, signals, spectrograms.

Conventions used throughout the package:

* azimuths are degrees counter-clockwise from +x, normalized to [0, 360)
* directions live in the horizontal plane; unit vectors are (cos az, sin az)
* multichannel sample arrays are [channels, samples]
* spectrogram tensors are [channels, bins, frames], complex
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import cosdg, sindg

from .errors import InvalidArgumentError

SPEED_OF_SOUND = 343.0  # m/s, dry air ~20 C


def _frozen(a: np.ndarray) -> np.ndarray:
    """Return a C-contiguous copy with the writeable flag cleared."""
    out = np.ascontiguousarray(a)
    if out is a:
        out = a.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Direction:
    """A horizontal-plane direction of arrival."""

    azimuth_deg: float

    def __post_init__(self):
        az = float(self.azimuth_deg) % 360.0
        if az == 360.0:  # float modulo of small negatives rounds up to the modulus
            az = 0.0
        object.__setattr__(self, "azimuth_deg", az)

    @property
    def unit(self) -> np.ndarray:
        # degree-domain trig is exact at the axes (sin 90 = 1, cos 90 = 0)
        az = self.azimuth_deg
        return np.array([float(cosdg(az)), float(sindg(az))])

    def dot(self, other: "Direction") -> float:
        return float(cosdg(self.azimuth_deg - other.azimuth_deg))


def direction_from_azimuth(azimuth_deg: float) -> Direction:
    if not math.isfinite(azimuth_deg):
        raise InvalidArgumentError(f"azimuth must be finite, got {azimuth_deg!r}")
    return Direction(azimuth_deg)


def aliasing_frequency(spacing_m: float, c: float = SPEED_OF_SOUND) -> float:
    """Spatial-aliasing onset c/(2d) for a sensor pair spaced d apart."""
    if spacing_m <= 0 or c <= 0:
        raise InvalidArgumentError(f"spacing and c must be positive, got {spacing_m}, {c}")
    return c / (2.0 * spacing_m)


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar cross of exactly four sensors, one pair per axis, symmetric about the origin.

    Sensor order is fixed: +x, -x, +y, -y. Positions are meters.
    """

    spacing_x: float
    spacing_y: float
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.spacing_x <= 0 or self.spacing_y <= 0:
            raise InvalidArgumentError(
                f"spacings must be positive, got {self.spacing_x}, {self.spacing_y}"
            )
        hx, hy = self.spacing_x / 2.0, self.spacing_y / 2.0
        pos = np.array([[hx, 0.0], [-hx, 0.0], [0.0, hy], [0.0, -hy]])
        object.__setattr__(self, "positions", _frozen(pos))

    @property
    def n_sensors(self) -> int:
        return 4


def cross_array(spacing_x: float, spacing_y: float | None = None) -> ArrayGeometry:
    return ArrayGeometry(spacing_x, spacing_x if spacing_y is None else spacing_y)


@dataclass(frozen=True)
class MonoSignal:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1:
            raise InvalidArgumentError(f"mono samples must be 1-d, got shape {s.shape}")
        if self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(s))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples)))) if len(self) else 0.0


@dataclass(frozen=True)
class MultichannelSignal:
    """Equal-length channels in a [channels, samples] array."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2:
            raise InvalidArgumentError(f"samples must be [channels, samples], got {s.shape}")
        if self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(s))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def channel(self, i: int) -> MonoSignal:
        return MonoSignal(self.samples[i], self.sample_rate)


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT tensor [channels, bins, frames].

    ``n_samples`` records the pre-padding signal length so the inverse
    transform can trim exactly; synthetic spectrograms may leave it None.
    """

    data: np.ndarray
    sample_rate: int
    fft_size: int
    hop: int
    n_samples: int | None = None

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3:
            raise InvalidArgumentError(f"data must be [channels, bins, frames], got {d.shape}")
        if not np.iscomplexobj(d):
            d = d.astype(np.complex128)
        expected_bins = self.fft_size // 2 + 1
        if d.shape[1] != expected_bins:
            raise InvalidArgumentError(
                f"bins {d.shape[1]} inconsistent with fft_size {self.fft_size}"
            )
        object.__setattr__(self, "data", _frozen(d))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    @property
    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * (self.sample_rate / self.fft_size)

    def with_data(self, data: np.ndarray) -> "Spectrogram":
        """Same grid, different tensor (channel count may change)."""
        return Spectrogram(data, self.sample_rate, self.fft_size, self.hop, self.n_samples)
