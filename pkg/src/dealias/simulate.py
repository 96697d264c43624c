"""Anechoic far-field scene sampling, source synthesis, and array rendering.

A scene is a set of plane-wave sources in the horizontal plane hitting the
four-sensor cross array. Rendering applies each source's per-sensor delay
-(p . u)/c (referenced to the array center) as a phase ramp on the
zero-padded full-signal DFT, so fractional delays are exact band-limited
shifts; wrap-around lands in the padding and is trimmed away.

Source material is synthetic. Five generator kinds stand in for licensed
corpora; all are zero-mean, RMS 0.1 and fully determined by a 64-bit seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.fft import next_fast_len

from .core import (
    SPEED_OF_SOUND,
    ArrayGeometry,
    Direction,
    MonoSignal,
    MultichannelSignal,
    cross_array,
)
from .errors import InvalidArgumentError
from .fileio import ensure_dir, read_jsonl, read_wav, write_jsonl, write_wav
from .rng import Xoshiro256pp, derive_seed, fill_normal

SOURCE_KINDS = ("white", "pink", "am_noise", "chirp", "multitone")

TARGET_RMS = 0.1


# ---------------------------------------------------------------- sources

def _shaped_noise(seed: int, n: int, amplitude_weight) -> np.ndarray:
    """Real noise with per-bin spectral amplitude weights; DC forced to zero."""
    nb = n // 2 + 1
    z = fill_normal(seed, 2 * nb)
    spec = (z[0::2] + 1j * z[1::2]).astype(np.complex128)
    f = np.arange(nb, dtype=np.float64)
    w = amplitude_weight(f)
    spec *= w
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = spec[-1].real
    return np.fft.irfft(spec, n=n)


def synth_source(kind: str, duration: float, sample_rate: int, seed: int) -> MonoSignal:
    """Deterministic test source, zero-mean, RMS exactly 0.1."""
    if kind not in SOURCE_KINDS:
        raise InvalidArgumentError(f"unknown source kind {kind!r}; expected one of {SOURCE_KINDS}")
    n = int(round(duration * sample_rate))
    if n < 16:
        raise InvalidArgumentError(f"source too short: {n} samples")

    if kind == "white":
        x = fill_normal(seed, n)
    elif kind == "pink":
        # power ~ 1/f, i.e. -3 dB/octave, from the first bin up
        x = _shaped_noise(seed, n, lambda f: 1.0 / np.sqrt(np.maximum(f, 1.0)))
    elif kind == "am_noise":
        # speech-weighted noise (flat to ~400 Hz, -6 dB/oct power above) with
        # a slow sinusoidal amplitude envelope
        knee = 400.0 * n / sample_rate  # knee expressed in bins
        base = _shaped_noise(seed, n, lambda f: 1.0 / np.sqrt(1.0 + (f / knee) ** 2))
        g = Xoshiro256pp(derive_seed(seed, 1))
        f_mod = g.uniform(2.0, 8.0)
        phase = g.uniform(0.0, 2.0 * np.pi)
        t = np.arange(n) / sample_rate
        x = base * (1.0 + 0.5 * np.sin(2.0 * np.pi * f_mod * t + phase))
    elif kind == "chirp":
        g = Xoshiro256pp(derive_seed(seed, 1))
        phase = g.uniform(0.0, 2.0 * np.pi)
        f0, f1 = 50.0, 0.45 * sample_rate
        t = np.arange(n) / sample_rate
        x = np.sin(2.0 * np.pi * (f0 * t + 0.5 * (f1 - f0) / duration * t * t) + phase)
    else:  # multitone
        g = Xoshiro256pp(derive_seed(seed, 1))
        t = np.arange(n) / sample_rate
        x = np.zeros(n)
        lo, hi = np.log(100.0), np.log(0.4 * sample_rate)
        for _ in range(8):
            f = np.exp(g.uniform(lo, hi))
            x += np.sin(2.0 * np.pi * f * t + g.uniform(0.0, 2.0 * np.pi))

    x = x - x.mean()
    rms = np.sqrt(np.mean(x * x))
    return MonoSignal(x * (TARGET_RMS / rms), sample_rate)


# ----------------------------------------------------------------- scenes

@dataclass(frozen=True)
class SceneSource:
    direction: Direction
    kind: str
    seed: int


@dataclass(frozen=True)
class SourceScene:
    sources: tuple[SceneSource, ...]
    spacing_x: float
    spacing_y: float
    sample_rate: int
    duration: float
    seed: int

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def geometry(self) -> ArrayGeometry:
        return cross_array(self.spacing_x, self.spacing_y)


@dataclass(frozen=True)
class SceneConfig:
    """Distributions a scene is drawn from.

    spacing_mode 'fix' pins both sensor pairs to spacing_fix; 'var' draws the
    two spacings independently from spacing_var_range. n_sources None means
    uniform over 1..max_sources.
    """

    sample_rate: int = 44100
    duration: float = 5.0
    spacing_mode: str = "fix"
    spacing_fix: float = 0.03
    spacing_var_range: tuple[float, float] = (0.01, 0.10)
    n_sources: int | None = None
    max_sources: int = 4
    kinds: tuple[str, ...] = SOURCE_KINDS

    def __post_init__(self):
        if self.spacing_mode not in ("fix", "var"):
            raise InvalidArgumentError(f"spacing_mode must be fix|var, got {self.spacing_mode!r}")
        for k in self.kinds:
            if k not in SOURCE_KINDS:
                raise InvalidArgumentError(f"unknown source kind {k!r}")

    def with_kinds(self, kinds) -> "SceneConfig":
        return replace(self, kinds=tuple(kinds))


def sample_scene(config: SceneConfig, seed: int) -> SourceScene:
    """Draw one scene. Draw order is fixed: source count, azimuths, spacings,
    kinds; per-source signal seeds are derived from the scene seed."""
    g = Xoshiro256pp(seed)
    n = config.n_sources if config.n_sources is not None else g.integer(config.max_sources) + 1
    azimuths = [g.uniform(0.0, 360.0) for _ in range(n)]
    if config.spacing_mode == "fix":
        sx = sy = config.spacing_fix
    else:
        lo, hi = config.spacing_var_range
        sx = g.uniform(lo, hi)
        sy = g.uniform(lo, hi)
    kinds = [g.choice(config.kinds) for _ in range(n)]
    sources = tuple(
        SceneSource(Direction(az), kind, derive_seed(seed, k))
        for k, (az, kind) in enumerate(zip(azimuths, kinds))
    )
    return SourceScene(sources, sx, sy, config.sample_rate, config.duration, seed)


def synth_scene_signals(scene: SourceScene) -> list[MonoSignal]:
    return [
        synth_source(s.kind, scene.duration, scene.sample_rate, s.seed)
        for s in scene.sources
    ]


# --------------------------------------------------------------- rendering

def render_array(
    scene: SourceScene,
    signals: list[MonoSignal] | None = None,
    c: float = SPEED_OF_SOUND,
) -> MultichannelSignal:
    """Mix all sources at the four sensors with exact fractional delays."""
    if signals is None:
        signals = synth_scene_signals(scene)
    if len(signals) != scene.n_sources:
        raise InvalidArgumentError(
            f"{len(signals)} signals for {scene.n_sources} sources"
        )
    n = scene.n_samples
    fs = scene.sample_rate
    pos = scene.geometry.positions  # [4, 2]

    max_delay = float(np.max(np.abs(pos))) / c * fs
    pad = next_fast_len(n + int(np.ceil(max_delay)) + 2048)
    freqs = np.fft.rfftfreq(pad, d=1.0 / fs)

    acc = np.zeros((4, freqs.shape[0]), dtype=np.complex128)
    for src, sig in zip(scene.sources, signals):
        if len(sig) != n or sig.sample_rate != fs:
            raise InvalidArgumentError(
                f"signal ({len(sig)} samples at {sig.sample_rate} Hz) does not match "
                f"scene ({n} samples at {fs} Hz)"
            )
        taus = -(pos @ src.direction.unit) / c  # seconds, relative to center
        spec = np.fft.rfft(sig.samples, n=pad)
        acc += spec[None, :] * np.exp(-2j * np.pi * freqs[None, :] * taus[:, None])

    mics = np.fft.irfft(acc, n=pad, axis=1)[:, :n]
    return MultichannelSignal(mics, fs)


# ---------------------------------------------------------------- datasets

def generate_dataset(
    config: SceneConfig,
    n_scenes: int,
    seed: int,
    out_dir: str,
    c: float = SPEED_OF_SOUND,
) -> str:
    """Render scenes to WAV and write a JSON-lines manifest; returns its path.

    Layout: <out_dir>/scenes/scene_%05d_{mix,srcK}.wav; paths in the manifest
    are relative to the manifest's directory.
    """
    ensure_dir(out_dir)
    scene_dir = ensure_dir(os.path.join(out_dir, "scenes"))
    records = []
    for i in range(n_scenes):
        scene = sample_scene(config, derive_seed(seed, i))
        signals = synth_scene_signals(scene)
        mics = render_array(scene, signals, c=c)
        sid = f"scene_{i:05d}"
        mix_rel = f"scenes/{sid}_mix.wav"
        write_wav(os.path.join(out_dir, mix_rel), mics.samples, scene.sample_rate)
        src_entries = []
        for k, (src, sig) in enumerate(zip(scene.sources, signals)):
            rel = f"scenes/{sid}_src{k}.wav"
            write_wav(os.path.join(scene_dir, f"{sid}_src{k}.wav"), sig.samples, scene.sample_rate)
            src_entries.append(
                {
                    "azimuth_deg": src.direction.azimuth_deg,
                    "kind": src.kind,
                    "seed": src.seed,
                    "path": rel,
                }
            )
        records.append(
            {
                "id": sid,
                "seed": scene.seed,
                "sample_rate": scene.sample_rate,
                "duration": scene.duration,
                "spacing_x": scene.spacing_x,
                "spacing_y": scene.spacing_y,
                "mixture": mix_rel,
                "sources": src_entries,
            }
        )
    manifest = os.path.join(out_dir, "manifest.jsonl")
    write_jsonl(manifest, records)
    return manifest


@dataclass(frozen=True)
class SceneRecord:
    """One manifest entry resolved against the manifest location."""

    scene: SourceScene
    mixture_path: str
    source_paths: tuple[str, ...]

    def load_mixture(self) -> MultichannelSignal:
        data, rate = read_wav(self.mixture_path)
        return MultichannelSignal(data, rate)

    def load_sources(self) -> list[MonoSignal]:
        out = []
        for p in self.source_paths:
            data, rate = read_wav(p)
            out.append(MonoSignal(data[0], rate))
        return out


def record_from_dict(rec: dict, base_dir: str) -> SceneRecord:
    sources = tuple(
        SceneSource(Direction(s["azimuth_deg"]), s["kind"], s["seed"])
        for s in rec["sources"]
    )
    scene = SourceScene(
        sources,
        rec["spacing_x"],
        rec["spacing_y"],
        rec["sample_rate"],
        rec["duration"],
        rec["seed"],
    )
    return SceneRecord(
        scene,
        os.path.join(base_dir, rec["mixture"]),
        tuple(os.path.join(base_dir, s["path"]) for s in rec["sources"]),
    )


def load_manifest(path: str) -> list[SceneRecord]:
    base = os.path.dirname(os.path.abspath(path))
    return [record_from_dict(r, base) for r in read_jsonl(path)]
