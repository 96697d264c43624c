"""Scene preprocessing: virtual microphones, targets, and feature packing.

This re-implements the exact front-end conventions of the inference
package so that bundles trained here behave identically when dropped into
it (parity is enforced by fixture tests, not by sharing code):

* virtual mics are differenced sensor pairs with a regularized slope
  equalizer, gain-capped at 30 dB; family "i" is the delay-and-subtract
  cardioid pair on the x axis, family "ii" the W/X/Y planar set
* targets are t = E . s per tile, where E mixes the source spectra (as
  heard at the array center) with ideal first-order pickups; E is real
* bin 0 is zeroed on both sides: the gradient front-end has no response
  at DC and per-frame DC in the targets is a window artifact
* network features interleave real/imag parts channel-wise, crop the
  frequency axis down to a multiple of 2^depth (low bins kept), zero-pad
  time up to a multiple, and scale by g = 1 / max(rms(|v|), 1e-8); masks
  are later applied to the *unscaled* tiles, so g cancels
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import read_wav, stft
from .errors import ConfigError, DataError
from .presets import SPEED_OF_SOUND, TrainerPreset, encoder_matrix

DEFAULT_MAX_GAIN_DB = 30.0
RMS_FLOOR = 1e-8


def _equalizer(reference: np.ndarray, g_max_db: float) -> np.ndarray:
    lam = 10.0 ** (-g_max_db / 10.0) / 4.0
    return np.conj(reference) / (np.abs(reference) ** 2 + lam)


def pair_gains(freqs, spacing: float, c: float = SPEED_OF_SOUND,
               g_max_db: float = DEFAULT_MAX_GAIN_DB) -> np.ndarray:
    """Equalizer for the delay-and-subtract cardioid pair."""
    b = np.pi * np.asarray(freqs, dtype=np.float64) * spacing / c
    return _equalizer(4j * b * np.exp(-1j * b), g_max_db)


def gradient_gains(freqs, spacing: float, c: float = SPEED_OF_SOUND,
                   g_max_db: float = DEFAULT_MAX_GAIN_DB) -> np.ndarray:
    """Equalizer for the plain-difference figure-of-eight component."""
    b = np.pi * np.asarray(freqs, dtype=np.float64) * spacing / c
    return _equalizer(2j * b, g_max_db)


def virtual_mics(mics: np.ndarray, freqs: np.ndarray, family: str,
                 spacing_x: float, spacing_y: float) -> np.ndarray:
    """[C, F, T] sensor tiles -> [V, F, T] virtual-mic tiles.

    Family "i" uses the x pair (channels 0, 1): two opposite-facing
    cardioids.  Family "ii" uses the full +x,-x,+y,-y cross: unequalized
    mean (W) plus equalized pair differences (X, Y).
    """
    if family == "i":
        if mics.shape[0] not in (2, 4):
            raise DataError(f"family i needs the x pair (2 or 4 channels), got {mics.shape[0]}")
        h = pair_gains(freqs, spacing_x)[:, None]
        delay = np.exp(-2j * np.pi * freqs * spacing_x / SPEED_OF_SOUND)[:, None]
        v0, v1 = mics[0], mics[1]
        return np.stack([h * (v0 - delay * v1), h * (v1 - delay * v0)])
    if family == "ii":
        if mics.shape[0] != 4:
            raise DataError(f"family ii needs 4 channels (+x,-x,+y,-y), got {mics.shape[0]}")
        hx = gradient_gains(freqs, spacing_x)[:, None]
        hy = gradient_gains(freqs, spacing_y)[:, None]
        w = mics.mean(axis=0)
        x = hx * (mics[0] - mics[1])
        y = hy * (mics[2] - mics[3])
        return np.stack([w, x, y])
    raise ConfigError(f"unknown family {family!r}")


# ------------------------------------------------------------------ features

def kept_bins(n_bins: int, depth: int) -> int:
    block = 1 << depth
    if depth < 0:
        raise ConfigError(f"depth must be nonnegative, got {depth}")
    if n_bins < block:
        raise ConfigError(f"{n_bins} bins cannot support depth {depth}")
    return (n_bins // block) * block


def padded_frames(n_frames: int, depth: int) -> int:
    block = 1 << depth
    return ((n_frames + block - 1) // block) * block


def feature_scale(v: np.ndarray) -> float:
    """g = 1 / max(rms over all tiles of |v|, 1e-8), on the full grid."""
    rms = float(np.sqrt(np.mean(np.abs(v) ** 2)))
    return 1.0 / max(rms, RMS_FLOOR)


def pack_features(v: np.ndarray, depth: int) -> tuple[np.ndarray, float]:
    """[V, F, T] complex tiles -> ([2V, F', T'] float64 grid, scale g).

    Channel 2i is the real part of virtual mic i, channel 2i+1 the
    imaginary part; frequency is cropped downward, time zero-padded.
    """
    n_ch, n_bins, n_frames = v.shape
    keep = kept_bins(n_bins, depth)
    frames = padded_frames(n_frames, depth)
    g = feature_scale(v)
    grid = np.zeros((2 * n_ch, keep, frames))
    grid[0::2, :, :n_frames] = g * v[:, :keep, :].real
    grid[1::2, :, :n_frames] = g * v[:, :keep, :].imag
    return grid, g


# -------------------------------------------------------------- scene tensors

def _compress(z: np.ndarray, p: float, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """(|z|^p, |z|^p e^{j ang z}) with the squared magnitude clamped at
    ``floor`` — the same formulation the training loss uses, so constants
    precomputed here are exchangeable with its tensor-side terms."""
    power = z.real**2 + z.imag**2
    safe = np.maximum(power, floor)
    mag = power * safe ** (p / 2.0 - 1.0)
    return mag, z * safe ** ((p - 1.0) / 2.0)


@dataclass
class SceneTensors:
    """One scene staged for training, in float32 with real/imag interleaved.

    ``v32``/``t32`` cover the kept frequency bins only; the contribution
    of the cropped top bins (which pass through the identity filter) is
    folded into the constant per-channel loss terms ``top_amp``/``top_pha``.
    """

    scene_id: str
    v32: "object"       # torch [2V, keep, T] float32, unscaled virtual tiles
    t32: "object"       # torch [2Q, keep, T] float32, target tiles
    g: float            # feature scaling
    top_amp: np.ndarray  # [Q] float64, summed squared magnitude gap, top bins
    top_pha: np.ndarray  # [Q] float64, summed squared phasor gap, top bins
    n_bins: int
    n_frames: int
    keep: int
    pad_frames: int


def preprocess_record(rec: dict, pre: TrainerPreset, depth: int,
                      p: float, floor: float) -> SceneTensors:
    """Manifest record -> staged training tensors for one scene."""
    import torch

    mix, rate = read_wav(rec["mixture"])
    if rate != pre.sample_rate:
        raise DataError(
            f"{rec['id']}: mixture rate {rate} does not match preset {pre.name}/{pre.scale} "
            f"rate {pre.sample_rate}"
        )
    spec = stft(mix, pre.fft_size, pre.hop)
    freqs = np.arange(pre.n_bins) * (pre.sample_rate / pre.fft_size)
    v = virtual_mics(spec, freqs, pre.family, rec["spacing_x"], rec["spacing_y"])

    src_specs = []
    azimuths = []
    for s in rec["sources"]:
        samples, s_rate = read_wav(s["path"])
        if s_rate != rate:
            raise DataError(f"{rec['id']}: source rate {s_rate} differs from mixture rate {rate}")
        if samples.shape[1] != mix.shape[1]:
            raise DataError(f"{rec['id']}: source length {samples.shape[1]} differs from mixture")
        src_specs.append(stft(samples[:1], pre.fft_size, pre.hop)[0])
        azimuths.append(s["azimuth_deg"])
    if not src_specs:
        raise DataError(f"{rec['id']}: scene has no sources")
    enc = encoder_matrix(pre.decode_azimuths_deg, azimuths, pre.alpha)
    t = np.einsum("qk,kft->qft", enc, np.stack(src_specs))

    # the gradient front-end has no DC response; per-frame DC in the targets
    # is a window artifact of mean-free material — excluded on both sides
    v[:, 0, :] = 0.0
    t[:, 0, :] = 0.0

    n_bins, n_frames = v.shape[1], v.shape[2]
    keep = kept_bins(n_bins, depth)
    g = feature_scale(v)

    d = pre.decode_matrix
    est_top = np.einsum("qv,vft->qft", d, v[:, keep:, :])
    tm, tc = _compress(t[:, keep:, :], p, floor)
    em, ec = _compress(est_top, p, floor)
    top_amp = np.sum((tm - em) ** 2, axis=(1, 2))
    top_pha = np.sum(np.abs(tc - ec) ** 2, axis=(1, 2))

    def interleave(z: np.ndarray) -> "torch.Tensor":
        out = np.empty((2 * z.shape[0], keep, n_frames), dtype=np.float32)
        out[0::2] = z[:, :keep, :].real
        out[1::2] = z[:, :keep, :].imag
        return torch.from_numpy(out)

    return SceneTensors(
        scene_id=rec["id"],
        v32=interleave(v),
        t32=interleave(t),
        g=g,
        top_amp=top_amp,
        top_pha=top_pha,
        n_bins=n_bins,
        n_frames=n_frames,
        keep=keep,
        pad_frames=padded_frames(n_frames, depth),
    )
