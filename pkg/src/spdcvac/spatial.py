"""Reduced spatial biphoton model for transverse-mode interference.

The two-photon amplitude in the crystal near field is factorized as::

    Psi(xs, xi) = u_pump((xs + xi) / 2) * exp(-(xs - xi)**2 / (4 * sigma_c**2))

so fixing the idler position leaves a pure conditional signal amplitude.
Everything here is one-dimensional along the pump's hump axis (x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import fields as fc
from .fields import CrystalConfig, Emission, FieldExpression, FieldTerm, Carrier
from .modes import HermiteGaussMode, TransverseProfile, centered_axis, gauss_legendre, overlap
from .vacuum import VacuumRegistry

_GL64 = np.polynomial.legendre.leggauss(64)


@dataclass(frozen=True)
class BiphotonAmplitude:
    pump_mode: HermiteGaussMode
    correlation_width: float
    wavelength: float = 0.702  # signal wavelength, used for far fields

    def __post_init__(self):
        if not self.correlation_width > 0:
            raise ValueError("correlation_width must be > 0")
        if not self.correlation_width < self.pump_mode.waist_radius:
            raise ValueError("correlation_width must be smaller than the pump waist")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")

    def joint(self, signal_pos, idler_pos):
        """Unnormalized two-photon amplitude."""
        xs, xi = np.asarray(signal_pos, float), np.asarray(idler_pos, float)
        sigma = self.correlation_width
        return self.pump_mode.factor("x", 0.5 * (xs + xi)) * np.exp(-((xs - xi) ** 2) / (4 * sigma**2))

    def conditional_norm(self, idler_pos: float) -> float:
        sigma = self.correlation_width
        x, w = gauss_legendre(idler_pos - 10 * sigma, idler_pos + 10 * sigma)
        return float(math.sqrt(np.sum(w * np.abs(self.joint(x, idler_pos)) ** 2)))


def conditional_signal_amplitude(bp: BiphotonAmplitude, idler_pos: float, signal_pos) -> complex:
    """Signal amplitude at ``signal_pos`` given an idler click at ``idler_pos``."""
    norm = bp.conditional_norm(idler_pos)
    if norm == 0:
        raise ValueError(f"no two-photon amplitude for idler at {idler_pos}")
    value = bp.joint(signal_pos, idler_pos) / norm
    return complex(value) if np.ndim(value) == 0 else value.astype(complex)


def hump_positions(mode: HermiteGaussMode) -> np.ndarray:
    """Intensity maxima of the mode along x, ascending."""
    n, w = mode.order_x, mode.waist_radius
    if n == 0:
        return np.array([mode.center[0]])
    if n == 1:
        return mode.center[0] + np.array([-w, w])
    x = mode.center[0] + np.linspace(-4 * w, 4 * w, 20001)
    inten = np.abs(mode.factor("x", x)) ** 2
    peaks = np.flatnonzero((inten[1:-1] > inten[:-2]) & (inten[1:-1] >= inten[2:])) + 1
    return x[peaks]


def hump_correlation(bp: BiphotonAmplitude) -> float:
    """Probability that signal and idler sit on the same side of the pump center.

    With ``X = (xs + xi)/2`` and ``xi_ = xs - xi`` the joint density factorizes
    into ``|u(X)|^2`` times a normal density of width ``sigma_c`` in ``xi_``;
    both photons share a side when ``|X| > |xi_|/2``.
    """
    mode = bp.pump_mode
    sigma = bp.correlation_width
    xi_nodes, xi_weights = gauss_legendre(0.0, 10 * sigma)
    density = np.exp(-(xi_nodes**2) / (2 * sigma**2)) / (math.sqrt(2 * math.pi) * sigma)
    t = 0.5 * xi_nodes
    # mass of |u|^2 inside [-t, t] around the pump center
    nodes, weights = _GL64
    inner = np.array(
        [
            np.sum(ti * weights * np.abs(mode.factor("x", mode.center[0] + ti * nodes)) ** 2)
            for ti in t
        ]
    )
    return float(2 * np.sum(xi_weights * density * (1.0 - inner)))


def calibrate_correlation_width(pump_mode: HermiteGaussMode, target: float = 0.96, wavelength: float = 0.702) -> float:
    """Correlation width giving the requested same-hump probability."""
    w = pump_mode.waist_radius

    def excess(sigma):
        return hump_correlation(BiphotonAmplitude(pump_mode, sigma, wavelength)) - target

    lo, hi = 1e-4 * w, (1 - 1e-9) * w
    if excess(lo) < 0 or excess(hi) > 0:
        raise ValueError(f"hump correlation {target} not reachable with sigma_c below the waist")
    return float(brentq(excess, lo, hi, xtol=1e-12 * w))


@dataclass(frozen=True)
class SlitGeometry:
    centers: tuple[float, float]
    width: float
    angles: np.ndarray

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("slit width must be > 0")
        c1, c2 = self.centers
        if abs(c1 - c2) <= self.width:
            raise ValueError("slits overlap")

    @property
    def separation(self) -> float:
        return abs(self.centers[0] - self.centers[1])

    @classmethod
    def for_mode(cls, mode: HermiteGaussMode, wavelength: float, width: float | None = None,
                 samples: int = 1024, periods: float = 10.0) -> "SlitGeometry":
        """Slits on the two humps (hump 1 first, at positive x); angle grid of ``samples``
        points spanning +-``periods`` fringe periods with zero at index ``samples // 2``."""
        humps = hump_positions(mode)
        if len(humps) < 2:
            raise ValueError("mode has fewer than two humps")
        c1, c2 = float(humps[-1]), float(humps[0])
        width = width if width is not None else mode.waist_radius / 4
        fringe = wavelength / abs(c1 - c2)
        angles = centered_axis(samples, 2 * periods * fringe / samples)
        return cls((c1, c2), width, angles)


def slit_far_field(amp_at_slit1: complex, amp_at_slit2: complex, geom: SlitGeometry,
                   wavelength: float) -> TransverseProfile:
    """Fraunhofer amplitude behind two uniformly illuminated slits.

    Same normalization as :func:`spdcvac.modes.far_field`, so the result can
    be compared directly with a transformed aperture profile.
    """
    f = geom.angles / wavelength
    envelope = geom.width * np.sinc(geom.width * f) / math.sqrt(wavelength)
    c1, c2 = geom.centers
    values = envelope * (
        amp_at_slit1 * np.exp(-2j * np.pi * f * c1) + amp_at_slit2 * np.exp(-2j * np.pi * f * c2)
    )
    return TransverseProfile((geom.angles,), values, wavelength, "angle")


def slit_amplitudes(bp: BiphotonAmplitude, geom: SlitGeometry, idler_pos: float) -> tuple[complex, complex]:
    a = conditional_signal_amplitude(bp, idler_pos, np.array(geom.centers, float))
    return complex(a[0]), complex(a[1])


def vd_at_idler_position(bp: BiphotonAmplitude, geom: SlitGeometry, idler_pos: float) -> tuple[float, float]:
    a1, a2 = slit_amplitudes(bp, geom, idler_pos)
    p1, p2 = abs(a1) ** 2, abs(a2) ** 2
    if p1 + p2 == 0:
        raise ValueError(f"both slit amplitudes vanish for idler at {idler_pos}")
    # 2|a1||a2| <= p1 + p2 exactly; clamp the last-ulp round-off
    return min(2 * abs(a1) * abs(a2) / (p1 + p2), 1.0), abs(p1 - p2) / (p1 + p2)


def vd_scan(bp: BiphotonAmplitude, geom: SlitGeometry, idler_positions) -> tuple[np.ndarray, np.ndarray]:
    pairs = [vd_at_idler_position(bp, geom, x) for x in idler_positions]
    v, d = zip(*pairs) if pairs else ((), ())
    return np.array(v), np.array(d)


def conditioned_screen_fields(bp: BiphotonAmplitude, geom: SlitGeometry, idler_pos: float,
                              registry: VacuumRegistry) -> list[FieldExpression]:
    """Per-angle signal field behind the slits, given an idler click at ``idler_pos``.

    Both slit contributions are created against the single vacuum mode seen by
    the idler detector, so they share one carrier and interfere.
    """
    mode = registry.register(f"idler@{idler_pos:.9g}")
    a1, a2 = slit_amplitudes(bp, geom, idler_pos)
    event = Emission("pump-mode", 1.0)
    carrier = Carrier.vacuum_conj(mode)
    lam = bp.wavelength
    f = geom.angles / lam
    envelope = geom.width * np.sinc(geom.width * f) / math.sqrt(lam)
    e1 = envelope * np.exp(-2j * np.pi * f * geom.centers[0])
    e2 = envelope * np.exp(-2j * np.pi * f * geom.centers[1])
    return [
        FieldExpression((FieldTerm(a1 * x1, carrier, event), FieldTerm(a2 * x2, carrier, event)), "screen")
        for x1, x2 in zip(e1, e2)
    ]


# -- cone-source coherence ---------------------------------------------------


def cone_mode_coherence(detection_waist: float, separation: float, background_fraction: float = 0.0,
                        wavelength: float = 0.702) -> tuple[float, float]:
    """Closed-form (V, D) for two displaced TEM00 detection modes on the emission cone."""
    if not detection_waist > 0:
        raise ValueError("detection_waist must be > 0")
    if not 0.0 <= background_fraction < 1.0:
        raise ValueError("background_fraction must lie in [0, 1)")
    mu = abs(overlap(
        HermiteGaussMode(waist_radius=detection_waist, wavelength=wavelength),
        HermiteGaussMode(waist_radius=detection_waist, wavelength=wavelength, center=(separation, 0.0)),
    ))
    mu = min(mu, 1.0)
    # 1 - mu^2 from the displacement directly; differencing near mu = 1 loses digits
    d = math.sqrt(-math.expm1(-((separation / detection_waist) ** 2) / 2))
    return (1.0 - background_fraction) * mu, d


@dataclass
class ConeInterferometer:
    """Two detection modes cut from a continuum of independent emitters.

    Each emitter along the tangential coordinate owns its own vacuum modes, so
    light from different emitters never interferes; a Mach-Zehnder then
    superposes detection mode 1 and a phase-shifted mode 2.
    """

    registry: VacuumRegistry
    path1: FieldExpression
    path2: FieldExpression
    background: FieldExpression
    transmittance: float = 0.5

    def output(self, phase: float) -> FieldExpression:
        out, _ = fc.combine_beam_splitter(self.path1, fc.apply_phase(self.path2, phase), self.transmittance)
        return (out + self.background).with_port("mz")

    def arms_at_detector(self) -> tuple[FieldExpression, FieldExpression]:
        empty = FieldExpression()
        arm1, _ = fc.combine_beam_splitter(self.path1, empty, self.transmittance)
        arm2, _ = fc.combine_beam_splitter(empty, self.path2, self.transmittance)
        return arm1, arm2


def cone_interferometer(waist: float, separation: float, background_fraction: float = 0.0,
                        gain: float = 0.1, transmittance: float = 0.5,
                        spacing: float | None = None) -> ConeInterferometer:
    if not 0.0 <= background_fraction < 1.0:
        raise ValueError("background_fraction must lie in [0, 1)")
    dx = spacing if spacing is not None else waist / 8
    lo = min(0.0, separation) - 6 * waist
    hi = max(0.0, separation) + 6 * waist
    xs = lo + dx * np.arange(int(math.ceil((hi - lo) / dx)) + 1)
    mode1 = HermiteGaussMode(waist_radius=waist)
    mode2 = HermiteGaussMode(waist_radius=waist, center=(separation, 0.0))
    u1 = mode1.factor("x", xs) * math.sqrt(dx)
    u2 = mode2.factor("x", xs) * math.sqrt(dx)
    registry = VacuumRegistry()
    config = CrystalConfig(gain=gain)
    path1_terms, path2_terms = [], []
    for k, x in enumerate(xs):
        signal, _ = fc.spdc_emit(
            config, registry.register(f"cone[{k}].signal"), registry.register(f"cone[{k}].idler"), f"cone[{k}]"
        )
        path1_terms.extend((signal * u1[k]).terms)
        path2_terms.extend((signal * u2[k]).terms)
    path1 = FieldExpression(tuple(path1_terms), "mode1")
    path2 = FieldExpression(tuple(path2_terms), "mode2")
    background = FieldExpression()
    if background_fraction > 0:
        mean_rate = transmittance * fc.ensemble_rate(path1) + (1 - transmittance) * fc.ensemble_rate(path2)
        extra = background_fraction / (1 - background_fraction) * mean_rate
        signal, _ = fc.spdc_emit(
            config, registry.register("background.signal"), registry.register("background.idler"), "background"
        )
        background = signal * math.sqrt(extra / fc.ensemble_rate(signal))
    registry.seal()
    return ConeInterferometer(registry, path1, path2, background, transmittance)
