import cmath
import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dealias.core import Direction, MonoSignal, Spectrogram
from dealias.errors import InvalidArgumentError, UndefinedMetricError
from dealias.metrics import (
    PolarResponse,
    SnrSummary,
    _band_masks,
    band_partition,
    c_si_snr,
    phasen_loss,
    polar_metadata_json,
    polar_to_csv,
    spatial_sweep,
)

RNG = np.random.default_rng(0xC51)


def _spec(data, fs=16000.0, fft=None):
    data = np.asarray(data, dtype=complex)
    if fft is None:
        fft = 2 * (data.shape[1] - 1)
    return Spectrogram(data, fs, fft, fft // 2, 1024)


def _random_spec(channels=2, bins=129, frames=7, seed=1):
    r = np.random.default_rng(seed)
    d = r.standard_normal((channels, bins, frames)) + 1j * r.standard_normal((channels, bins, frames))
    return _spec(d)


# ---------------------------------------------------------------- C-Si-SNR

def _si_snr_scalar(x_hat, x):
    # independent scalar-loop reference
    ip = sum(u * v.conjugate() for u, v in zip(x_hat, x))
    pw = sum(abs(v) ** 2 for v in x)
    a = ip / pw
    s = [a * v for v in x]
    num = sum(abs(v) ** 2 for v in s)
    err = sum(abs(u - v) ** 2 for u, v in zip(x_hat, s)) + 1e-12 * num
    return 10.0 * math.log10(max(num / err, 1e-12))


def test_snr_equal_hits_cap():
    t = _random_spec(seed=2)
    out = c_si_snr(t, t)
    assert out.per_channel_db == pytest.approx([120.0, 120.0], abs=1e-9)
    assert out.mean_db == pytest.approx(120.0, abs=1e-9)


def test_snr_matches_scalar_reference():
    est = _random_spec(channels=3, bins=17, frames=5, seed=3)
    tgt = _random_spec(channels=3, bins=17, frames=5, seed=4)
    out = c_si_snr(est, tgt)
    for q in range(3):
        ref = _si_snr_scalar(est.data[q].ravel().tolist(), tgt.data[q].ravel().tolist())
        assert out.per_channel_db[q] == pytest.approx(ref, abs=1e-9)
    assert out.mean_db == pytest.approx(np.mean(out.per_channel_db), abs=1e-12)


def test_snr_complex_scale_invariance():
    est = _random_spec(seed=5)
    tgt = _random_spec(seed=6)
    base = c_si_snr(est, tgt)
    for alpha in (3.0, -2.0, 0.3 - 0.7j, 1e-4j):
        scaled = c_si_snr(est.with_data(alpha * est.data), tgt)
        # invariant up to float reassociation in the inner products
        assert scaled.per_channel_db == pytest.approx(base.per_channel_db, abs=1e-9)


def test_snr_orthogonal_error_gives_twenty_db():
    r = np.random.default_rng(7)
    x = r.standard_normal(4096) + 1j * r.standard_normal(4096)
    e = r.standard_normal(4096) + 1j * r.standard_normal(4096)
    e = e - (np.vdot(x, e) / np.vdot(x, x)) * x
    e *= np.sqrt(0.01 * np.real(np.vdot(x, x)) / np.real(np.vdot(e, e)))
    est = _spec((x + e).reshape(1, 128, 32), fft=254)
    tgt = _spec(x.reshape(1, 128, 32), fft=254)
    assert c_si_snr(est, tgt).mean_db == pytest.approx(20.0, abs=0.01)


def test_snr_floor_at_minus_120():
    tgt = _spec(np.ones((1, 4, 4)))
    est = tgt.with_data(np.zeros((1, 4, 4), complex))
    assert c_si_snr(est, tgt).mean_db == -120.0
    # estimate orthogonal to the target projects to nothing
    orth = np.zeros((1, 4, 4), complex)
    orth[0, 0, 0] = 1.0
    orth[0, 0, 1] = -1.0
    assert c_si_snr(tgt.with_data(orth), tgt).mean_db == -120.0


def test_snr_zero_target_channel_rejected():
    est = _random_spec(seed=8)
    dead = est.data.copy()
    dead[1] = 0.0
    with pytest.raises(UndefinedMetricError):
        c_si_snr(est, est.with_data(dead))


def test_snr_channel_permutation():
    est = _random_spec(channels=3, seed=9)
    tgt = _random_spec(channels=3, seed=10)
    fwd = c_si_snr(est, tgt)
    rev = c_si_snr(est.with_data(est.data[::-1]), tgt.with_data(tgt.data[::-1]))
    assert rev.per_channel_db == pytest.approx(fwd.per_channel_db[::-1], abs=1e-12)
    assert rev.mean_db == pytest.approx(fwd.mean_db, abs=1e-12)


def test_snr_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        c_si_snr(_random_spec(channels=2), _random_spec(channels=3))


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 20.0))
@settings(max_examples=25, deadline=None)
def test_snr_real_scaling_property(seed, gain):
    est = _random_spec(channels=1, bins=9, frames=4, seed=seed)
    tgt = _random_spec(channels=1, bins=9, frames=4, seed=seed + 1)
    a = c_si_snr(est, tgt).mean_db
    b = c_si_snr(est.with_data(gain * est.data), tgt).mean_db
    assert b == pytest.approx(a, abs=1e-8)


# ---------------------------------------------------------------- PHASEN loss

def _phasen_scalar(y, t, p):
    per = []
    for q in range(len(t)):
        amp = 0.0
        pha = 0.0
        n = 0
        for ty, yy in zip(t[q], y[q]):
            tm, ta = cmath.polar(ty)
            ym, ya = cmath.polar(yy)
            tc = (tm**p) * cmath.exp(1j * ta)
            yc = (ym**p) * cmath.exp(1j * ya)
            amp += (tm**p - ym**p) ** 2
            pha += abs(tc - yc) ** 2
            n += 1
        per.append(0.5 * amp / n + 0.5 * pha / n)
    return sum(per) / len(per)


def test_phasen_zero_on_equal():
    t = _random_spec(seed=11)
    assert phasen_loss(t, t) == 0.0


def test_phasen_matches_scalar_reference():
    est = _random_spec(channels=2, bins=6, frames=3, seed=12)
    tgt = _random_spec(channels=2, bins=6, frames=3, seed=13)
    ref = _phasen_scalar(
        [est.data[q].ravel().tolist() for q in range(2)],
        [tgt.data[q].ravel().tolist() for q in range(2)],
        0.3,
    )
    assert phasen_loss(est, tgt) == pytest.approx(ref, rel=1e-9)
    ref7 = _phasen_scalar(
        [est.data[q].ravel().tolist() for q in range(2)],
        [tgt.data[q].ravel().tolist() for q in range(2)],
        0.7,
    )
    assert phasen_loss(est, tgt, p=0.7) == pytest.approx(ref7, rel=1e-9)


def test_phasen_positive_on_any_mismatch():
    tgt = _random_spec(seed=14)
    assert phasen_loss(tgt.with_data(2.0 * tgt.data), tgt) > 0.0
    assert phasen_loss(tgt.with_data(tgt.data * np.exp(0.1j)), tgt) > 0.0


def test_phasen_zero_tiles_are_safe():
    # angle(0) is defined as 0, so zero tiles must not produce NaN
    t = np.zeros((1, 3, 3), complex)
    y = np.ones((1, 3, 3), complex)
    assert math.isfinite(phasen_loss(_spec(y), _spec(t)))
    assert math.isfinite(phasen_loss(_spec(t), _spec(y)))
    assert phasen_loss(_spec(t), _spec(t)) == 0.0


def test_phasen_rejects_bad_exponent():
    t = _random_spec(seed=15)
    with pytest.raises(InvalidArgumentError):
        phasen_loss(t, t, p=0.0)


# ---------------------------------------------------------------- band partition

def test_bands_standard_case():
    assert band_partition(1000.0, 16000.0) == [
        (0.0, 1000.0),
        (1000.0, 2000.0),
        (2000.0, 4000.0),
        (4000.0, 8000.0),
    ]


def test_bands_top_band_clipped_and_dropped():
    fa = 5716.666666666667
    bands = band_partition(fa, 44100.0)
    assert len(bands) == 3
    assert bands[0] == (0.0, fa)
    assert bands[1] == (fa, 2 * fa)
    assert bands[2] == (2 * fa, 22050.0)


def test_bands_fourth_band_empty_at_exact_nyquist():
    assert band_partition(2000.0, 16000.0) == [
        (0.0, 2000.0),
        (2000.0, 4000.0),
        (4000.0, 8000.0),
    ]


def test_bands_validation():
    with pytest.raises(InvalidArgumentError):
        band_partition(0.0, 16000.0)
    with pytest.raises(InvalidArgumentError):
        band_partition(8000.0, 16000.0)
    with pytest.raises(InvalidArgumentError):
        band_partition(-3.0, 16000.0)


@given(st.floats(1.0, 40000.0), st.floats(8000.0, 96000.0))
@settings(max_examples=200, deadline=None)
def test_bands_cover_spectrum_contiguously(fa, fs):
    if not fa < fs / 2.0:
        return
    bands = band_partition(fa, fs)
    assert bands[0][0] == 0.0
    assert bands[-1][1] == fs / 2.0
    for (_, hi), (lo, _) in zip(bands[:-1], bands[1:]):
        assert lo == hi
    for lo, hi in bands:
        assert lo < hi <= fs / 2.0


def test_band_masks_top_band_owns_nyquist():
    freqs = np.arange(129) * (16000.0 / 256.0)
    masks = _band_masks(freqs, [(0.0, 4000.0), (4000.0, 8000.0)])
    assert masks[0][0] and not masks[0][64]
    assert masks[1][64] and masks[1][128]  # 8000 Hz bin included
    assert not (masks[0] & masks[1]).any()
    assert (masks[0] | masks[1]).all()


# ---------------------------------------------------------------- polar sweep

class _PatternStub:
    """Plays back a fixed analytic pattern; optional seed-dependent wobble."""

    def __init__(self, seed_wobble=False, fail_at=None):
        self.fs = 8000.0
        self.fft = 256
        self.seed_wobble = seed_wobble
        self.fail_at = fail_at

    def sweep_source(self, seed):
        amp = 0.5 + (seed % 997) / 997.0
        return MonoSignal(np.full(16, amp), self.fs)

    def decode_single_source(self, direction, signal):
        if self.fail_at is not None and direction.azimuth_deg == self.fail_at:
            raise InvalidArgumentError("stub refuses this direction")
        amp = float(signal.samples[0])
        front = 0.5 + 0.5 * math.cos(math.radians(direction.azimuth_deg))
        if self.seed_wobble:
            front = front + 0.05 * amp
        bins = self.fft // 2 + 1
        tilt = 1.0 + np.arange(bins) / bins  # azimuth-independent coloration
        data = np.zeros((2, bins, 4), complex)
        data[0] = (amp * front * tilt)[:, None] * np.exp(0.3j)
        data[1] = (amp * 1.0 * tilt)[:, None]
        return Spectrogram(data, self.fs, self.fft, self.fft // 2, 16)


GRID8 = [Direction(a) for a in range(0, 360, 45)]
BANDS = [(0.0, 2000.0), (2000.0, 4000.0)]


def test_sweep_recovers_known_pattern():
    resp = spatial_sweep(_PatternStub(), GRID8, n_signals=3, bands=BANDS, seed=99)
    expect = np.array([0.5 + 0.5 * math.cos(math.radians(a)) for a in range(0, 360, 45)])
    for bi in range(2):
        # per-bin coloration and source level cancel under normalization
        assert resp.magnitudes[bi, :, 0] == pytest.approx(expect, abs=1e-12)
        assert resp.magnitudes[bi, :, 1] == pytest.approx(np.ones(8), abs=1e-12)


def test_sweep_reproducible_and_seed_sensitive():
    stub = _PatternStub(seed_wobble=True)
    a = spatial_sweep(stub, GRID8, n_signals=4, bands=BANDS, seed=5)
    b = spatial_sweep(stub, GRID8, n_signals=4, bands=BANDS, seed=5)
    c = spatial_sweep(stub, GRID8, n_signals=4, bands=BANDS, seed=6)
    assert np.array_equal(a.magnitudes, b.magnitudes)
    assert not np.array_equal(a.magnitudes, c.magnitudes)


def test_sweep_empty_band_stays_zero():
    resp = spatial_sweep(_PatternStub(), GRID8, 2, [(0.0, 2000.0), (10.0, 20.0)], seed=1)
    assert np.all(resp.magnitudes[1] == 0.0)
    assert resp.magnitudes[0].max() == pytest.approx(1.0)


def test_sweep_propagates_pipeline_error_with_context():
    stub = _PatternStub(fail_at=90.0)
    with pytest.raises(InvalidArgumentError, match="azimuth 90"):
        spatial_sweep(stub, GRID8, 2, BANDS, seed=1)


def test_sweep_validation():
    with pytest.raises(InvalidArgumentError):
        spatial_sweep(_PatternStub(), [], 2, BANDS, seed=1)
    with pytest.raises(InvalidArgumentError):
        spatial_sweep(_PatternStub(), GRID8, 0, BANDS, seed=1)
    with pytest.raises(InvalidArgumentError):
        spatial_sweep(_PatternStub(), GRID8, 2, [(3.0, 2.0)], seed=1)


# ---------------------------------------------------------------- polar container

def _small_response():
    mags = np.zeros((1, 4, 2))
    mags[0, :, 0] = [1.0, 0.5, 0.25, 0.5]
    mags[0, :, 1] = [0.1, 1.0, 0.1, 0.3]
    return PolarResponse(((0.0, 4000.0),), np.array([0.0, 90.0, 180.0, 270.0]), mags)


def test_polar_validation():
    good = _small_response()
    assert good.n_channels == 2
    with pytest.raises(InvalidArgumentError):
        PolarResponse(((0.0, 1.0),), np.array([0.0]), np.ones((2, 1, 1)))
    bad = np.full((1, 4, 2), 0.5)
    with pytest.raises(InvalidArgumentError):
        PolarResponse(((0.0, 4000.0),), np.array([0.0, 90.0, 180.0, 270.0]), bad)
    neg = np.ones((1, 4, 2))
    neg[0, 1, 0] = -0.2
    with pytest.raises(InvalidArgumentError):
        PolarResponse(((0.0, 4000.0),), np.array([0.0, 90.0, 180.0, 270.0]), neg)


def test_polar_allows_silent_channel():
    mags = np.zeros((1, 3, 2))
    mags[0, :, 0] = [1.0, 0.4, 0.2]
    resp = PolarResponse(((0.0, 100.0),), np.array([0.0, 10.0, 20.0]), mags)
    assert np.all(resp.magnitudes[0, :, 1] == 0.0)


def test_polar_csv_layout(tmp_path):
    resp = _small_response()
    path = tmp_path / "sweep.csv"
    polar_to_csv(resp, str(path))
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["band_lo_hz", "band_hi_hz", "channel", "azimuth_deg", "magnitude"]
    assert len(rows) == 1 + 1 * 4 * 2
    assert rows[1] == ["0.0", "4000.0", "0", "0.0", "1.0"]
    assert float(rows[3][4]) == 0.25 or float(rows[3][4]) == 0.25  # row order: azimuth fastest
    got = {(r[2], r[3]): float(r[4]) for r in rows[1:]}
    assert got[("0", "180.0")] == 0.25
    assert got[("1", "90.0")] == 1.0


def test_polar_metadata(tmp_path):
    resp = _small_response()
    path = tmp_path / "sweep.json"
    polar_metadata_json(resp, str(path), seed=42, n_signals=16, pipeline_id="pair/identity")
    meta = json.loads(path.read_text())
    assert meta["seed"] == 42
    assert meta["n_signals"] == 16
    assert meta["pipeline"] == "pair/identity"
    assert meta["bands"] == [[0.0, 4000.0]]
    assert meta["n_azimuths"] == 4
