"""Hermite-Gaussian transverse modes at the waist plane.

Lengths are in micrometers, angles in radians.  Modes are Hermite functions in
``x / w`` with ``w = waist_radius``: TEM00 has field ``exp(-r**2 / (2 w**2))``,
so its intensity falls to 1/e at ``r = w`` and two copies displaced by ``d``
overlap to ``exp(-d**2 / (4 w**2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_hermite

QUAD_NODES = 256
QUAD_HALF_WIDTH = 6.0  # waists either side of each mode center

_GL_X, _GL_W = np.polynomial.legendre.leggauss(QUAD_NODES)


def gauss_legendre(lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    half = 0.5 * (hi - lo)
    return lo + half * (_GL_X + 1.0), half * _GL_W


def hermite_gauss_1d(order: int, x, waist: float):
    """Square-normalized 1-D Hermite-Gaussian factor centered at 0."""
    x = np.asarray(x, dtype=float)
    u = x / waist
    norm = 1.0 / math.sqrt(2.0**order * math.factorial(order) * math.sqrt(math.pi) * waist)
    return norm * eval_hermite(order, u) * np.exp(-0.5 * u * u)


@dataclass(frozen=True)
class HermiteGaussMode:
    order_x: int = 0
    order_y: int = 0
    waist_radius: float = 100.0
    wavelength: float = 0.702
    center: tuple[float, float] = (0.0, 0.0)
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.order_x < 0 or self.order_y < 0:
            raise ValueError("mode orders must be non-negative")
        if not self.waist_radius > 0:
            raise ValueError("waist_radius must be > 0")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def factor(self, axis: str, coord):
        """1-D field factor along ``axis`` ('x' or 'y')."""
        if axis == "x":
            return hermite_gauss_1d(self.order_x, np.asarray(coord) - self.center[0], self.waist_radius)
        if axis == "y":
            return hermite_gauss_1d(self.order_y, np.asarray(coord) - self.center[1], self.waist_radius)
        raise ValueError(f"unknown axis {axis!r}")

    def field(self, x, y):
        return self.factor("x", x) * self.factor("y", y) * np.exp(1j * self.phase_offset)

    def profile(self, half_extent: float | None = None, samples: int = 256) -> "TransverseProfile":
        """Sample the 2-D field on a square grid centered on the mode."""
        half = half_extent if half_extent is not None else QUAD_HALF_WIDTH * self.waist_radius
        xs = self.center[0] + centered_axis(samples, 2 * half / samples)
        ys = self.center[1] + centered_axis(samples, 2 * half / samples)
        values = self.field(xs[:, None], ys[None, :])
        return TransverseProfile((xs, ys), values, self.wavelength)

    def profile_1d(self, axis: str = "x", spacing: float | None = None, samples: int = 1024) -> "TransverseProfile":
        dx = spacing if spacing is not None else self.waist_radius / 16
        idx = 0 if axis == "x" else 1
        xs = self.center[idx] + centered_axis(samples, dx)
        return TransverseProfile((xs,), self.factor(axis, xs).astype(complex), self.wavelength)


def mode_amplitude(mode: HermiteGaussMode, point) -> complex:
    x, y = point
    return complex(mode.field(x, y))


def _axis_overlap(a: HermiteGaussMode, b: HermiteGaussMode, axis: str) -> float:
    i = 0 if axis == "x" else 1
    half_a = QUAD_HALF_WIDTH * a.waist_radius
    half_b = QUAD_HALF_WIDTH * b.waist_radius
    lo = min(a.center[i] - half_a, b.center[i] - half_b)
    hi = max(a.center[i] + half_a, b.center[i] + half_b)
    x, w = gauss_legendre(lo, hi)
    return float(np.sum(w * a.factor(axis, x) * b.factor(axis, x)))


def overlap(a: HermiteGaussMode, b: HermiteGaussMode) -> complex:
    """<a|b> over the transverse plane (separable Gauss-Legendre quadrature)."""
    if not math.isclose(a.wavelength, b.wavelength, rel_tol=1e-12):
        raise ValueError(
            f"cannot overlap modes of different wavelength ({a.wavelength} vs {b.wavelength})"
        )
    value = _axis_overlap(a, b, "x") * _axis_overlap(a, b, "y")
    return value * complex(np.exp(1j * (b.phase_offset - a.phase_offset)))


# -- sampled profiles -------------------------------------------------------


def centered_axis(samples: int, spacing: float) -> np.ndarray:
    """Uniform axis with index ``samples // 2`` at zero (FFT-centered)."""
    return (np.arange(samples) - samples // 2) * spacing


@dataclass
class TransverseProfile:
    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    wavelength: float | None = None
    domain: str = "position"  # or "angle"
    _spacing: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.values = np.asarray(self.values)
        if self.values.shape != tuple(len(a) for a in self.axes):
            raise ValueError(
                f"values shape {self.values.shape} does not match axes {[len(a) for a in self.axes]}"
            )
        spacing = []
        for a in self.axes:
            d = np.diff(a)
            if len(a) < 2 or not np.allclose(d, d[0], rtol=1e-9, atol=0) or d[0] <= 0:
                raise ValueError("profile axes must be uniform and increasing")
            spacing.append(float(d[0]))
        self._spacing = tuple(spacing)

    @property
    def spacing(self) -> tuple[float, ...]:
        return self._spacing

    @property
    def cell(self) -> float:
        return float(np.prod(self._spacing))

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def power(self) -> float:
        return float(self.intensity.sum() * self.cell)

    def rms_width(self, axis: int = 0) -> float:
        marginal = self.intensity
        for other in reversed(range(len(self.axes))):
            if other != axis:
                marginal = marginal.sum(axis=other)
        total = marginal.sum()
        if not total > 0:
            raise ValueError("profile carries no power")
        coord = self.axes[axis]
        mean = np.sum(coord * marginal) / total
        return float(np.sqrt(np.sum((coord - mean) ** 2 * marginal) / total))


def far_field(profile: TransverseProfile) -> TransverseProfile:
    """Unitary Fraunhofer transform; the output axis is angle ``wavelength * f``.

    Scaled so that total power (sum * cell) is conserved and a second
    application returns the parity-flipped input.
    """
    if profile.wavelength is None:
        raise ValueError("far_field needs a wavelength")
    lam = profile.wavelength
    for i, (coord, dx) in enumerate(zip(profile.axes, profile.spacing)):
        rms = profile.rms_width(i)
        extent = len(coord) * dx
        if extent < 6.0 * rms:
            raise ValueError(f"axis {i}: grid extent {extent:.4g} < 6 x rms width {rms:.4g}")
        if dx > rms / 4.0:
            raise ValueError(f"axis {i}: spacing {dx:.4g} under-resolves rms width {rms:.4g}")
    axes_out = []
    values = np.fft.ifftshift(profile.values)
    values = np.fft.fftn(values)
    values = np.fft.fftshift(values)
    for i, (coord, dx) in enumerate(zip(profile.axes, profile.spacing)):
        n = len(coord)
        freq = np.fft.fftshift(np.fft.fftfreq(n, dx))
        origin = coord[n // 2]
        shape = [1] * len(profile.axes)
        shape[i] = n
        values = values * (dx / math.sqrt(lam)) * np.exp(-2j * np.pi * freq * origin).reshape(shape)
        axes_out.append(lam * freq)
    domain = "angle" if profile.domain == "position" else "position"
    return TransverseProfile(tuple(axes_out), values, lam, domain)


def uncertainty_product(mode: HermiteGaussMode, axis: str = "x") -> tuple[float, float, float]:
    """RMS waist width, RMS far-field divergence and their product over lambda/(4 pi)."""
    prof = mode.profile_1d(axis)
    spread = prof.rms_width()
    divergence = far_field(prof).rms_width()
    return spread, divergence, spread * divergence / (mode.wavelength / (4 * math.pi))
