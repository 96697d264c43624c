"""Experiment presets: array family, STFT grid, and decode geometry.

These mirror the conventions of the inference package's presets so that
bundles trained here drop into its pipelines unchanged:

* family "i":  opposite-facing cardioid pair on the x axis, V = 2 virtual
  mics, identity decode to Q = 2 outputs aimed at 0 and 180 degrees
* family "ii": planar W/X/Y first-order set, V = 3, decoded to a Q = 4
  cardioid fan at 0/180/90/270 degrees
* scale "paper": 44.1 kHz, 2048/1024 STFT, 3 cm sensor spacing
* scale "desk":  16 kHz, 1024/512 STFT, 6 cm sensor spacing

The target mix for a source at azimuth theta picked up by an ideal
first-order pattern aimed at phi is alpha + (1 - alpha) cos(theta - phi),
with alpha = 0.5 (cardioid) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import cosdg, sindg

from .errors import ConfigError

PRESET_NAMES = ("i_fix", "i_var", "ii_fix", "ii_var")
SCALE_NAMES = ("paper", "desk")
FILTER_MODES = ("diag", "full")
SPEED_OF_SOUND = 343.0
TARGET_ALPHA = 0.5
FAN_AZIMUTHS_DEG = (0.0, 180.0, 90.0, 270.0)


@dataclass(frozen=True)
class TrainerPreset:
    name: str
    scale: str
    family: str
    sample_rate: int
    fft_size: int
    hop: int
    spacing_fix: float
    alpha: float = TARGET_ALPHA

    @property
    def n_virtual(self) -> int:
        return 2 if self.family == "i" else 3

    @property
    def n_outputs(self) -> int:
        return 2 if self.family == "i" else 4

    @property
    def decode_azimuths_deg(self) -> tuple[float, ...]:
        if self.family == "i":
            return (0.0, 180.0)
        return FAN_AZIMUTHS_DEG

    @property
    def decode_matrix(self) -> np.ndarray:
        """Real [Q, V] decode matrix applied after the per-tile filter."""
        if self.family == "i":
            return np.eye(2)
        return np.array(
            [[0.5, 0.5 * float(cosdg(a)), 0.5 * float(sindg(a))] for a in FAN_AZIMUTHS_DEG]
        )

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


def preset(name: str, scale: str = "desk") -> TrainerPreset:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}, expected one of {PRESET_NAMES}")
    if scale not in SCALE_NAMES:
        raise ConfigError(f"unknown scale {scale!r}, expected one of {SCALE_NAMES}")
    family = name.split("_")[0]
    if scale == "paper":
        return TrainerPreset(name, scale, family, 44100, 2048, 1024, 0.03)
    return TrainerPreset(name, scale, family, 16000, 1024, 512, 0.06)


def encoder_matrix(decode_azimuths_deg, source_azimuths_deg, alpha: float) -> np.ndarray:
    """Real [Q, K] target mix: entry (q, k) is the ideal first-order pickup,
    clipped so one-ulp trig spill cannot leave the pattern's value range."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must be in [0, 1], got {alpha}")
    e = np.array(
        [
            [alpha + (1.0 - alpha) * float(cosdg(q - k)) for k in source_azimuths_deg]
            for q in decode_azimuths_deg
        ]
    )
    return np.clip(e.reshape(len(tuple(decode_azimuths_deg)), -1), 2.0 * alpha - 1.0, 1.0)
