"""Pressure-gradient virtual microphones formed in the STFT domain.

Two families share one recipe, difference closely spaced omnis and equalize:

* cardioid pair: delay-and-subtract on one sensor pair gives two
  opposite-facing cardioids (right = +x look, left = -x look)
* planar first-order encode: plain differences on the x and y pairs give
  the two figure-of-eight components X and Y; W is the four-sensor mean

The raw on-axis response of the differenced pair rises ~linearly at low
frequency, then rings through nulls above the aliasing onset. Inverting it
exactly would concentrate the allowed gain right at those nulls and distort
the band below onset, so the equalizer inverts the low-frequency slope
reference instead (4j*b*e^{-jb} for the delayed pair, 2j*b for the plain
difference, b = pi*f*d/c), with a Tikhonov floor sized so the realized gain
peaks exactly at the cap:

    H = conj(R0) / (|R0|^2 + lam),  lam = 10^(-G/10)/4  ->  max|H| = 10^(G/20)

Gain convention: each virtual mic approaches unit on-axis response from
below as frequency rises clear of the gain cap. DC is zeroed by H(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SPEED_OF_SOUND, Direction, Spectrogram, _frozen
from .errors import InvalidArgumentError

DEFAULT_MAX_GAIN_DB = 30.0


@dataclass(frozen=True)
class EqualizerProfile:
    """Regularized inverse of a per-bin reference response.

    ``gains`` holds the realized equalizer conj(R0)/(|R0|^2 + lam); its
    magnitude never exceeds 10^(g_max_db/20).
    """

    reference_response: np.ndarray
    lam: float
    g_max_db: float
    gains: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = np.asarray(self.reference_response, dtype=np.complex128)
        if self.lam <= 0:
            raise InvalidArgumentError(f"regularization must be positive, got {self.lam}")
        h = np.conj(r) / (np.abs(r) ** 2 + self.lam)
        object.__setattr__(self, "reference_response", _frozen(r))
        object.__setattr__(self, "gains", _frozen(h))

    @property
    def max_gain(self) -> float:
        return 10.0 ** (self.g_max_db / 20.0)


def _beta(freqs, spacing: float, c: float) -> np.ndarray:
    return np.pi * np.asarray(freqs, dtype=np.float64) * spacing / c


def _gain_floor(g_max_db: float) -> float:
    if g_max_db <= 0:
        raise InvalidArgumentError(f"gain cap must be positive dB, got {g_max_db}")
    return 10.0 ** (-g_max_db / 10.0) / 4.0


def pair_equalizer(
    freqs, spacing: float, c: float = SPEED_OF_SOUND, g_max_db: float = DEFAULT_MAX_GAIN_DB
) -> EqualizerProfile:
    """Equalizer for the delay-and-subtract cardioid pair."""
    b = _beta(freqs, spacing, c)
    ref = 4j * b * np.exp(-1j * b)
    return EqualizerProfile(ref, _gain_floor(g_max_db), g_max_db)


def gradient_equalizer(
    freqs, spacing: float, c: float = SPEED_OF_SOUND, g_max_db: float = DEFAULT_MAX_GAIN_DB
) -> EqualizerProfile:
    """Equalizer for the plain-difference figure-of-eight component."""
    b = _beta(freqs, spacing, c)
    return EqualizerProfile(2j * b, _gain_floor(g_max_db), g_max_db)


def gradient_cardioid_pair(
    mics: Spectrogram,
    spacing: float,
    c: float = SPEED_OF_SOUND,
    g_max_db: float = DEFAULT_MAX_GAIN_DB,
) -> Spectrogram:
    """Two opposite-facing cardioids from one sensor pair (+axis, -axis order).

    Channel 0 looks along +axis, channel 1 along -axis:
    y0 = H*(V0 - e^{-j2pi f d/c} V1), y1 = H*(V1 - e^{-j2pi f d/c} V0).
    """
    if mics.n_channels != 2:
        raise InvalidArgumentError(f"expected a 2-channel pair, got {mics.n_channels}")
    h = pair_equalizer(mics.bin_frequencies, spacing, c, g_max_db).gains[:, None]
    delay = np.exp(-2j * np.pi * mics.bin_frequencies * spacing / c)[:, None]
    v0, v1 = mics.data[0], mics.data[1]
    out = np.stack([h * (v0 - delay * v1), h * (v1 - delay * v0)])
    return mics.with_data(out)


def foa_planar_encode(
    mics: Spectrogram,
    spacing_x: float,
    spacing_y: float,
    c: float = SPEED_OF_SOUND,
    g_max_db: float = DEFAULT_MAX_GAIN_DB,
) -> Spectrogram:
    """W/X/Y planar encode from the four-sensor cross (+x,-x,+y,-y order).

    W is the unequalized mean of all four sensors; X and Y are equalized
    pair differences along their axes.
    """
    if mics.n_channels != 4:
        raise InvalidArgumentError(f"expected 4 channels (+x,-x,+y,-y), got {mics.n_channels}")
    freqs = mics.bin_frequencies
    hx = gradient_equalizer(freqs, spacing_x, c, g_max_db).gains[:, None]
    hy = gradient_equalizer(freqs, spacing_y, c, g_max_db).gains[:, None]
    d = mics.data
    w = d.mean(axis=0)
    x = hx * (d[0] - d[1])
    y = hy * (d[2] - d[3])
    return mics.with_data(np.stack([w, x, y]))


@dataclass(frozen=True)
class CardioidPairBeamformer:
    """Config for the two-cardioid virtual array on the x pair."""

    spacing: float
    c: float = SPEED_OF_SOUND
    g_max_db: float = DEFAULT_MAX_GAIN_DB

    @property
    def n_virtual(self) -> int:
        return 2

    @property
    def look_directions(self) -> tuple[Direction, Direction]:
        return (Direction(0.0), Direction(180.0))

    def process(self, mics: Spectrogram) -> Spectrogram:
        """Accepts the bare pair or the full cross (x pair = channels 0, 1)."""
        if mics.n_channels == 4:
            mics = mics.with_data(mics.data[:2])
        return gradient_cardioid_pair(mics, self.spacing, self.c, self.g_max_db)

    def steering(self, direction: Direction, freqs) -> np.ndarray:
        """Exact complex response [2, F] to a unit plane wave."""
        b = _beta(freqs, self.spacing, self.c)
        h = pair_equalizer(freqs, self.spacing, self.c, self.g_max_db).gains
        cosw = np.cos(np.radians(direction.azimuth_deg))
        v0 = np.exp(1j * b * cosw)
        v1 = np.exp(-1j * b * cosw)
        delay = np.exp(-2j * b)
        return np.stack([h * (v0 - delay * v1), h * (v1 - delay * v0)])


@dataclass(frozen=True)
class FoaBeamformer:
    """Config for the W/X/Y virtual array on the full cross."""

    spacing_x: float
    spacing_y: float
    c: float = SPEED_OF_SOUND
    g_max_db: float = DEFAULT_MAX_GAIN_DB

    @property
    def n_virtual(self) -> int:
        return 3

    def process(self, mics: Spectrogram) -> Spectrogram:
        return foa_planar_encode(mics, self.spacing_x, self.spacing_y, self.c, self.g_max_db)

    def steering(self, direction: Direction, freqs) -> np.ndarray:
        """Exact complex response [3, F] to a unit plane wave."""
        ux, uy = direction.unit
        bx = _beta(freqs, self.spacing_x, self.c)
        by = _beta(freqs, self.spacing_y, self.c)
        hx = gradient_equalizer(freqs, self.spacing_x, self.c, self.g_max_db).gains
        hy = gradient_equalizer(freqs, self.spacing_y, self.c, self.g_max_db).gains
        w = 0.5 * (np.cos(bx * ux) + np.cos(by * uy))
        x = hx * (np.exp(1j * bx * ux) - np.exp(-1j * bx * ux))
        y = hy * (np.exp(1j * by * uy) - np.exp(-1j * by * uy))
        return np.stack([w.astype(np.complex128), x, y])


def steering_response(beamformer, direction: Direction, f) -> np.ndarray:
    """Response of each virtual mic to a unit plane wave; [V] for scalar f,
    [V, F] for an array of frequencies."""
    f_arr = np.atleast_1d(np.asarray(f, dtype=np.float64))
    out = beamformer.steering(direction, f_arr)
    return out[:, 0] if np.isscalar(f) or getattr(f, "ndim", 0) == 0 else out
