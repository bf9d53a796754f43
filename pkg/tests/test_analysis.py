import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdcvac.analysis import (
    AMPLITUDE,
    RAW_EXTREMA,
    SINUSOID_FIT,
    AnalysisError,
    distinguishability,
    duality_report,
    fit_sinusoid,
    visibility,
)
from spdcvac.bench import FringeScan, ScanMode, phase_values, poisson_counts

PHASES = phase_values(33)


def fringe(v, mean=1.0, phase=0.3, x=PHASES):
    return FringeScan("A", "phi", x, mean * (1 + v * np.cos(x - phase)))


def poisson_scan(v, counts_per_point, seed, x=PHASES):
    mode = ScanMode("poisson", seed=seed, scale=counts_per_point)
    rates = 1 + v * np.cos(x - 0.3)
    counts = poisson_counts(rates, mode, "A|phi")
    return FringeScan("A", "phi", x, counts / counts_per_point, mode, np.sqrt(counts) / counts_per_point, counts)


def test_visibility_examples():
    assert visibility(FringeScan("A", "phi", PHASES, 1 + np.cos(PHASES)))[0] == pytest.approx(1.0, abs=1e-9)
    assert visibility(fringe(0.0))[0] == pytest.approx(0.0, abs=1e-12)
    # Cmax = 4c + c, Cmin = c
    c = 0.25
    rates = 2 * c * (1 + np.cos(PHASES)) + c
    assert visibility(FringeScan("A", "phi", PHASES, rates))[0] == pytest.approx(2 / 3, abs=1e-12)
    assert visibility(FringeScan("A", "phi", PHASES, rates), RAW_EXTREMA)[0] == pytest.approx(2 / 3, abs=1e-12)


@given(st.floats(0, 1), st.floats(1e-6, 1e6), st.floats(-4, 4))
@settings(max_examples=60, deadline=None)
def test_fit_recovers_visibility_and_is_scale_invariant(v, k, phase):
    s = fringe(v, 1.0, phase)
    v1 = visibility(s)[0]
    v2 = visibility(FringeScan("A", "phi", PHASES, s.rates * k))[0]
    assert v1 == pytest.approx(v, abs=1e-12)
    assert abs(v1 - v2) < 1e-12
    d1 = distinguishability(3.0, 1.0 + v)[0]
    d2 = distinguishability(3.0 * k, (1.0 + v) * k)[0]
    assert abs(d1 - d2) < 1e-12


def test_fit_background_subtraction():
    s = FringeScan("A", "phi", PHASES, 1.5 + np.cos(PHASES))
    assert visibility(s, background=0.5)[0] == pytest.approx(1.0)
    fit = fit_sinusoid(s)
    assert fit.offset == pytest.approx(1.5) and fit.amplitude == pytest.approx(1.0)
    assert fit.phase == pytest.approx(0.0, abs=1e-12)


def test_visibility_errors():
    with pytest.raises(AnalysisError, match="all zero"):
        visibility(FringeScan("A", "phi", PHASES, np.zeros(33)))
    with pytest.raises(AnalysisError, match="less than one period"):
        visibility(FringeScan("A", "phi", PHASES[:10], np.ones(10) + PHASES[:10]))
    with pytest.raises(AnalysisError, match="no fringe period"):
        visibility(FringeScan("A", "phi", PHASES, np.ones(33), period=None))
    with pytest.raises(AnalysisError, match="rank deficient"):
        # every sample at the same fringe phase
        x = 2 * np.pi * np.arange(4)
        visibility(FringeScan("A", "phi", x, np.ones(4)))
    with pytest.raises(AnalysisError, match="residual rms"):
        # background larger than the signal leaves a negative offset
        visibility(fringe(0.5), background=10.0)
    with pytest.raises(ValueError):
        visibility(fringe(0.5), "MEDIAN")


def test_distinguishability_examples():
    assert distinguishability(100, 100)[0] == 0
    assert distinguishability(195, 5)[0] == pytest.approx(0.95)
    assert distinguishability(7.5, 0)[0] == 1
    d, sigma = distinguishability(195, 5, counts=True)
    assert sigma == pytest.approx(math.sqrt(4 * 195 * 5 / 200**3))
    with pytest.raises(AnalysisError):
        distinguishability(0, 0)
    with pytest.raises(AnalysisError):
        distinguishability(-1, 1)


def test_duality_report_examples():
    r = duality_report(1.0, 0.0)
    assert r.duality_sum == 1.0 and not r.violation
    r = duality_report(0.9, 0.0)
    assert r.duality_sum == pytest.approx(0.81)
    r = duality_report(0.0, 0.0)
    assert r.duality_sum == 0 and r.fully_mixed
    r = duality_report((0.8, 0.01), (0.7, 0.02), AMPLITUDE)
    assert r.sigma_sum == pytest.approx(math.hypot(2 * 0.8 * 0.01, 2 * 0.7 * 0.02))
    assert r.violation  # 1.13 is far beyond 2 sigma
    assert not duality_report((0.8, 0.1), (0.7, 0.1)).violation
    assert r.to_dict()["violation"] is True
    with pytest.raises(AnalysisError):
        duality_report(float("nan"), 0.0)
    with pytest.raises(AnalysisError):
        duality_report(0.5, -0.2)


def test_poisson_fit_recovers_visibility():
    v_true = 2 / 3
    s = poisson_scan(v_true, 1e4, seed=0)
    v, sigma = visibility(s)
    assert abs(v - v_true) < 3 * sigma
    assert 0 < sigma < 0.01


def test_poisson_sigma_is_calibrated_and_scales():
    v_true = 0.6
    sigmas = {}
    for scale in (1e2, 1e3, 1e4):
        pulls, sig = [], []
        for seed in range(300):
            v, s = visibility(poisson_scan(v_true, scale, seed))
            pulls.append((v - v_true) / s)
            sig.append(s)
        sigmas[scale] = np.mean(sig)
        assert abs(np.mean(pulls)) < 0.25
        assert np.std(pulls) == pytest.approx(1.0, abs=0.15)
    assert sigmas[1e2] / sigmas[1e3] == pytest.approx(math.sqrt(10), rel=0.1)
    assert sigmas[1e3] / sigmas[1e4] == pytest.approx(math.sqrt(10), rel=0.1)


def test_raw_extrema_bias_is_upward():
    diffs, sigmas = [], []
    for seed in range(200):
        s = poisson_scan(0.5, 1e3, seed)
        v_fit, sigma = visibility(s, SINUSOID_FIT)
        v_raw, _ = visibility(s, RAW_EXTREMA)
        assert v_raw - v_fit >= -3 * sigma
        diffs.append(v_raw - v_fit)
    assert np.mean(diffs) > 0


def test_monte_carlo_scan_with_vanishing_stderr():
    # a point with zero spread must not break the fit
    stderr = np.full(33, 1e-3)
    stderr[16] = 0.0
    s = FringeScan("A", "phi", PHASES, 1 + np.cos(PHASES), ScanMode("mc"), stderr)
    v, sigma = visibility(s)
    assert v == pytest.approx(1.0, abs=1e-12)
    assert 0 < sigma < 1e-2
