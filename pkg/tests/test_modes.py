import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from spdcvac.modes import (
    HermiteGaussMode,
    TransverseProfile,
    centered_axis,
    far_field,
    hermite_gauss_1d,
    mode_amplitude,
    overlap,
    uncertainty_product,
)

W = 100.0
LAM = 0.702


def quad_overlap(a, b):
    """Brute-force adaptive quadrature of the separable overlap integral."""
    out = 1.0
    for axis, i in (("x", 0), ("y", 1)):
        lo = min(a.center[i], b.center[i]) - 12 * max(a.waist_radius, b.waist_radius)
        hi = max(a.center[i], b.center[i]) + 12 * max(a.waist_radius, b.waist_radius)
        val, _ = integrate.quad(lambda x: float(a.factor(axis, x) * b.factor(axis, x)), lo, hi, limit=400,
                                epsabs=1e-13, epsrel=1e-12)
        out *= val
    return out


def test_mode_amplitude_examples():
    m00 = HermiteGaussMode(waist_radius=W)
    peak = mode_amplitude(m00, (0.0, 0.0))
    assert peak.imag == 0 and peak.real > 0
    for p in [(10.0, 0.0), (0.0, -30.0), (5.0, 5.0)]:
        assert abs(mode_amplitude(m00, p)) < peak.real
    m10 = HermiteGaussMode(order_x=1, waist_radius=W)
    assert mode_amplitude(m10, (0.0, 0.0)) == 0
    for d in (20.0, 70.0, 150.0):
        plus, minus = mode_amplitude(m10, (d, 0.0)), mode_amplitude(m10, (-d, 0.0))
        assert plus == pytest.approx(-minus, rel=1e-14)


def test_normalization():
    for nx, ny in [(0, 0), (1, 0), (2, 3)]:
        m = HermiteGaussMode(nx, ny, waist_radius=W)
        assert abs(overlap(m, m) - 1) < 1e-6
        assert quad_overlap(m, m) == pytest.approx(1.0, abs=1e-9)


def test_orthonormality_up_to_order_3():
    orders = [(n, m) for n in range(4) for m in range(4)]
    for a in orders:
        for b in orders:
            val = overlap(HermiteGaussMode(*a, waist_radius=W), HermiteGaussMode(*b, waist_radius=W))
            assert abs(val - (1.0 if a == b else 0.0)) < 1e-6, (a, b)


@pytest.mark.parametrize("d_over_w", [0.0, 0.5, 1.0, 2.0, 4.0])
def test_displaced_gaussian_overlap_matches_quadrature(d_over_w):
    a = HermiteGaussMode(waist_radius=W)
    b = HermiteGaussMode(waist_radius=W, center=(d_over_w * W, 0.0))
    oracle = quad_overlap(a, b)
    assert abs(abs(overlap(a, b)) - abs(oracle)) < 1e-5
    assert abs(overlap(a, b)) == pytest.approx(math.exp(-(d_over_w**2) / 4), abs=1e-9)


@given(
    nx=st.integers(0, 3), ny=st.integers(0, 3), mx=st.integers(0, 3),
    dx=st.floats(-200, 200), dy=st.floats(-200, 200), w2=st.floats(50, 200),
)
@settings(max_examples=25, deadline=None)
def test_overlap_matches_quad_oracle(nx, ny, mx, dx, dy, w2):
    a = HermiteGaussMode(nx, ny, waist_radius=W)
    b = HermiteGaussMode(mx, ny, waist_radius=w2, center=(dx, dy))
    val = overlap(a, b)
    assert abs(val - quad_overlap(a, b)) < 1e-6
    assert abs(val) <= 1 + 1e-9


def test_overlap_phase_and_wavelength_mismatch():
    a = HermiteGaussMode(waist_radius=W)
    b = HermiteGaussMode(waist_radius=W, phase_offset=0.7)
    assert overlap(a, b) == pytest.approx(np.exp(0.7j), abs=1e-9)
    with pytest.raises(ValueError, match="wavelength"):
        overlap(a, HermiteGaussMode(waist_radius=W, wavelength=0.5))


def test_invalid_modes():
    with pytest.raises(ValueError):
        HermiteGaussMode(waist_radius=0)
    with pytest.raises(ValueError):
        HermiteGaussMode(wavelength=-1)
    with pytest.raises(ValueError):
        HermiteGaussMode(order_x=-1)


def test_far_field_of_gaussian_is_gaussian():
    prof = HermiteGaussMode(waist_radius=W, wavelength=LAM).profile_1d()
    ff = far_field(prof)
    theta = ff.axes[0]
    w_theta = LAM / (2 * math.pi * W)
    # Fourier transform of the normalized Gaussian, with angle = lambda * f
    expected = (math.pi * w_theta**2) ** -0.25 * np.exp(-0.5 * (theta / w_theta) ** 2)
    assert np.max(np.abs(ff.values - expected)) < 1e-9 * expected.max()


def test_far_field_tem01_has_central_zero():
    ff = far_field(HermiteGaussMode(order_x=1, waist_radius=W).profile_1d())
    i = ff.intensity
    assert i[len(i) // 2] < 1e-20 * i.max()
    left, right = i[: len(i) // 2].argmax(), i[len(i) // 2:].argmax() + len(i) // 2
    assert i[left] == pytest.approx(i[right], rel=1e-9)


@given(st.integers(0, 3), st.floats(60, 140), st.floats(-40, 40))
@settings(max_examples=20, deadline=None)
def test_far_field_unitary_and_double_transform_flips(order, w, shift):
    m = HermiteGaussMode(order_x=order, waist_radius=w, center=(shift, 0.0))
    prof = TransverseProfile((centered_axis(1024, w / 16),), m.factor("x", centered_axis(1024, w / 16)) + 0j, LAM)
    ff = far_field(prof)
    assert ff.power() == pytest.approx(prof.power(), rel=1e-6)
    back = far_field(ff)
    flipped = np.roll(prof.values[::-1], 1)  # x -> -x on an FFT-centered grid
    assert np.max(np.abs(back.values - flipped)) < 1e-5 * np.max(np.abs(prof.values))


def test_far_field_two_dimensional_power():
    prof = HermiteGaussMode(1, 2, waist_radius=W).profile(samples=128, half_extent=8 * W)
    assert far_field(prof).power() == pytest.approx(prof.power(), rel=1e-6)


def test_far_field_rejects_bad_grids():
    m = HermiteGaussMode(waist_radius=W)
    with pytest.raises(ValueError, match="extent"):
        far_field(m.profile_1d(samples=16))
    with pytest.raises(ValueError, match="spacing"):
        far_field(m.profile_1d(spacing=W / 2, samples=64))
    with pytest.raises(ValueError):
        far_field(TransverseProfile((centered_axis(64, 1.0),), np.ones(64)))


def test_two_slit_far_field_matches_point_source_sum():
    # two in-phase slits: fringe maximum on axis, period lambda / a
    a, width, dx = 200.0, 20.0, 0.25
    x = centered_axis(2**15, dx)
    aperture = ((np.abs(x - a / 2) < width / 2) | (np.abs(x + a / 2) < width / 2)).astype(complex)
    ff = far_field(TransverseProfile((x,), aperture, LAM))
    theta = ff.axes[0]
    sel = np.abs(theta) < 3 * LAM / a
    # brute-force sum of point sources over the open samples
    src = x[aperture.real > 0]
    brute = np.abs(np.exp(-2j * np.pi * np.outer(theta[sel], src) / LAM).sum(axis=1) * dx / math.sqrt(LAM)) ** 2
    assert np.max(np.abs(ff.intensity[sel] - brute)) < 1e-9 * brute.max()
    i = ff.intensity
    assert i.argmax() == len(i) // 2
    # the next fringe maximum sits one period lambda/a away
    j = np.flatnonzero(sel & (theta > 0.5 * LAM / a) & (theta < 1.5 * LAM / a))
    peak = theta[j[np.argmax(i[j])]]
    assert peak == pytest.approx(LAM / a, abs=2 * (theta[1] - theta[0]))


@pytest.mark.parametrize(
    "mode,expected,tol",
    [
        (HermiteGaussMode(waist_radius=W), 1.0, 1e-4),
        (HermiteGaussMode(waist_radius=2 * W), 1.0, 1e-4),
        (HermiteGaussMode(order_x=1, waist_radius=W), 3.0, 1e-3),
        (HermiteGaussMode(order_x=2, waist_radius=W), 5.0, 1e-3),
    ],
)
def test_uncertainty_product(mode, expected, tol):
    dx, dtheta, ratio = uncertainty_product(mode)
    assert ratio == pytest.approx(expected, abs=tol)
    # analytic rms widths: w sqrt(n + 1/2) and lambda sqrt(n + 1/2) / (2 pi w)
    n = mode.order_x
    assert dx == pytest.approx(mode.waist_radius * math.sqrt(n + 0.5), rel=1e-4)
    assert dtheta == pytest.approx(mode.wavelength * math.sqrt(n + 0.5) / (2 * math.pi * mode.waist_radius), rel=1e-4)


def test_hermite_gauss_1d_quadrature_normalization():
    for n in range(5):
        val, _ = integrate.quad(lambda x: hermite_gauss_1d(n, x, W) ** 2, -15 * W, 15 * W, limit=200)
        assert val == pytest.approx(1.0, abs=1e-9)
