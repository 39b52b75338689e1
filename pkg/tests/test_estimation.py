import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chanaccess.constellations import build_constellation
from chanaccess.errors import DegenerateFrameError, InsufficientDataError
from chanaccess.estimation import (
    FrameSeries,
    SquelchParams,
    center_signal,
    debias_c42,
    estimate_c42_frame,
    estimate_noise_floor,
    frame_gate_mask,
    frame_series,
    normalize_c42,
    squelch,
    usable_samples,
)


def cn(rng, n, var=1.0):
    return np.sqrt(var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_center_examples():
    assert np.allclose(center_signal([1, 3]), [-1, 1])
    z = np.array([1 + 1j, -1 - 1j])
    assert np.allclose(center_signal(z), z)
    assert np.allclose(center_signal([1j] * 4), 0)
    with pytest.raises(ValueError):
        center_signal([])


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=1, max_size=50))
def test_center_properties(xs):
    y = center_signal(xs)
    rms = np.sqrt(np.mean(np.abs(np.asarray(xs)) ** 2)) or 1.0
    assert len(y) == len(xs)
    assert abs(y.mean()) <= 1e-12 * max(rms, 1.0) * 10


def test_c42_alternating():
    c42, c21, c20 = estimate_c42_frame([1, -1, 1, -1])
    assert (c42, c21, c20) == pytest.approx((-2.0, 1.0, 1.0))


def test_c42_short_frame():
    with pytest.raises(ValueError):
        estimate_c42_frame([1, 2, 3])


def test_c42_gaussian_and_bpsk():
    rng = np.random.default_rng(1)
    assert abs(estimate_c42_frame(center_signal(cn(rng, 100_000)))[0]) < 0.05
    y = build_constellation("BPSK").sample(rng, 200_000)
    assert estimate_c42_frame(y)[0] == pytest.approx(-2, abs=1e-3)


@pytest.mark.parametrize("args,expected", [((-2, 1, 0), -2), ((-2, 2, 1), -2), ((-0.5, 1.5, 1), -2)])
def test_normalize(args, expected):
    assert normalize_c42(*args) == pytest.approx(expected)


def test_normalize_degenerate():
    with pytest.raises(DegenerateFrameError):
        normalize_c42(-1, 1.0, 1.0)


def test_debias_removes_gaussian_bias():
    rng = np.random.default_rng(3)
    j, n = 200, 4000
    x = cn(rng, (n, j), 2.0)
    x = x - x.mean(axis=1, keepdims=True)
    p = np.abs(x) ** 2
    c21 = p.mean(1)
    c20 = (x * x).mean(1)
    plug = (p * p).mean(1) - np.abs(c20) ** 2 - 2 * c21**2
    se = plug.std() / np.sqrt(n)
    # plug-in mean is about -4 P^2 / J, the corrected one is zero
    assert plug.mean() == pytest.approx(-16 / j, abs=4 * se)
    assert abs(debias_c42(plug, c21, c20, j).mean()) < 4 * se
    with pytest.raises(ValueError):
        debias_c42(plug, c21, c20, 4)


def test_squelch_pure_noise():
    rng = np.random.default_rng(2)
    kept = squelch(cn(rng, 50_000), 1.0, 2.0, 256)
    assert kept.size < 0.05 * 50_000


def test_squelch_always_on():
    rng = np.random.default_rng(2)
    x = build_constellation("QPSK").sample(rng, 10_000) + cn(rng, 10_000, 0.1)
    assert squelch(x, 0.1, 2.0, 32).size == x.size


def test_squelch_half_active():
    rng = np.random.default_rng(4)
    n = 100_000
    sig = build_constellation("QPSK").sample(rng, n)
    sig[(np.arange(n) // 1000) % 2 == 1] = 0
    r = sig + cn(rng, n, 0.1)
    assert squelch(r, 0.1).size / n == pytest.approx(0.5, abs=0.05)


def test_squelch_param_validation():
    with pytest.raises(ValueError):
        SquelchParams(kappa=1.0)
    with pytest.raises(ValueError):
        SquelchParams(window=4)
    with pytest.raises(ValueError):
        SquelchParams(granularity="slot")
    with pytest.raises(ValueError):
        SquelchParams(frame_kappa=0.9)


def test_frame_gate_rejects_noise_blocks():
    rng = np.random.default_rng(5)
    j = 500
    sig = np.concatenate([np.zeros(10 * j), build_constellation("QPSK").sample(rng, 10 * j)])
    r = sig + cn(rng, sig.size, 1.0)
    mask = frame_gate_mask(r, j, 1.0)
    assert mask.tolist() == [False] * 10 + [True] * 10
    assert usable_samples(r, j, 1.0, SquelchParams()) == 10 * j
    assert usable_samples(r, j, 1.0, None) == r.size


@pytest.mark.parametrize("mod,target", [("BPSK", -2.0), ("QPSK", -1.0)])
def test_frame_series_noiseless_means(mod, target):
    rng = np.random.default_rng(6)
    r = build_constellation(mod).sample(rng, 500 * 200)
    fs = frame_series(r, 500, 200, 0.0)
    assert fs.frames_used == 200
    assert fs.values.mean() == pytest.approx(target, abs=0.02)


def test_frame_series_16qam_raw_variance():
    # theory assumes a known normalizing power: Ĉ42 of unit-power frames
    rng = np.random.default_rng(8)
    r = build_constellation("16-QAM").sample(rng, 500 * 2000)
    fs = frame_series(r, 500, 2000, 0.0, None, debias=False)
    raw = fs.values * fs.signal_power**2
    assert raw.var() == pytest.approx(1.3824 / 500, rel=0.25)
    # dividing by the frame's own power estimate removes most of that spread
    assert fs.values.var() < 0.5 * raw.var()


def test_frame_series_insufficient():
    rng = np.random.default_rng(0)
    with pytest.raises(InsufficientDataError):
        frame_series(cn(rng, 5000), 500, 10, 1.0)
    with pytest.raises(InsufficientDataError):
        frame_series(np.ones(600), 500, 10, 0.0, None)


def test_frame_series_drops_degenerate_frames():
    rng = np.random.default_rng(9)
    # silent half has zero power, so its estimated signal power is negative
    r = np.concatenate([build_constellation("QPSK").sample(rng, 5000) + cn(rng, 5000, 0.01), np.zeros(5000)])
    fs = frame_series(r, 500, 20, 0.01, None)
    assert fs.frames_used == 10


def test_frame_series_sample_granularity():
    rng = np.random.default_rng(10)
    r = build_constellation("QPSK").sample(rng, 500 * 50) + cn(rng, 500 * 50, 0.1)
    fs = frame_series(r, 500, 50, 0.1, SquelchParams(granularity="sample"))
    assert fs.frames_used == 50
    assert fs.values.mean() == pytest.approx(-1, abs=0.05)


@given(mag=st.floats(1e-3, 1e3), phase=st.floats(0, 2 * np.pi))
def test_flat_fading_invariance(mag, phase):
    rng = np.random.default_rng(11)
    r = build_constellation("16-QAM").sample(rng, 500 * 8)
    a = frame_series(r, 500, 8, 0.0, None).values
    b = frame_series(mag * np.exp(1j * phase) * r, 500, 8, 0.0, None).values
    assert np.max(np.abs(a - b)) < 1e-9


def test_variance_scales_inverse_j():
    rng = np.random.default_rng(12)
    con = build_constellation("4-PAM")
    ratios = []
    for _ in range(10):
        v1 = frame_series(con.sample(rng, 250 * 400), 250, 400, 0.0, None).values.var()
        v2 = frame_series(con.sample(rng, 500 * 400), 500, 400, 0.0, None).values.var()
        ratios.append(v1 / v2)
    assert np.mean(ratios) == pytest.approx(2.0, rel=0.2)


@pytest.mark.parametrize("mod", ["BPSK", "4-PAM", "QPSK", "64-QAM", "V32"])
def test_estimator_converges(mod):
    rng = np.random.default_rng(13)
    from chanaccess.constellations import alphabet_cumulants

    target = alphabet_cumulants(build_constellation(mod)).c42.real
    errs = [abs(estimate_c42_frame(center_signal(build_constellation(mod).sample(rng, j)))[0] - target) for j in (1000, 100_000)]
    assert errs[1] < 0.05
    assert errs[1] < errs[0] + 0.01


def test_rho_per_frame():
    fs = FrameSeries(np.array([-1.0, -1.0]), 500, 0.5, np.array([1.0, 0.5]))
    assert fs.rho() == pytest.approx([1.5, 2.0])


def test_noise_floor_estimate():
    rng = np.random.default_rng(14)
    n = 200_000
    sig = build_constellation("QPSK").sample(rng, n)
    sig[(np.arange(n) // 5000) % 2 == 0] = 0
    r = sig + cn(rng, n, 0.2)
    assert estimate_noise_floor(r) == pytest.approx(0.2, rel=0.1)


def test_linear_cost():
    rng = np.random.default_rng(15)
    r = build_constellation("QPSK").sample(rng, 500 * 1600)
    frame_series(r, 500, 100, 0.0, None)

    def timed(f):
        best = np.inf
        for _ in range(5):
            t = time.perf_counter()
            frame_series(r, 500, f, 0.0, None)
            best = min(best, time.perf_counter() - t)
        return best

    t1, t4 = timed(400), timed(1600)
    assert 1.5 < t4 / t1 < 8
