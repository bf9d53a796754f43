"""Visibility, distinguishability and duality bookkeeping for fringe scans."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .bench import FringeScan

RAW_EXTREMA = "RAW_EXTREMA"
SINUSOID_FIT = "SINUSOID_FIT"
AMPLITUDE = "AMPLITUDE"  # V and D taken straight from model amplitudes

# slack for float round-off when comparing D^2 + V^2 against 1
DUALITY_EPS = 1e-12
REWEIGHT_STEPS = 3


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class SinusoidFit:
    offset: float
    amplitude: float
    phase: float
    covariance: np.ndarray
    residual_rms: float

    @property
    def visibility(self) -> float:
        return self.amplitude / self.offset


def _variances(scan: FringeScan) -> np.ndarray | None:
    if scan.counts is not None:
        exposure = scan.mode.scale * scan.mode.integration
        if exposure == 0:
            return None
        # zero-count points still carry information; floor at one count
        return np.maximum(scan.counts, 1.0) / exposure**2
    if scan.stderr is not None:
        return scan.stderr**2
    return None


def fit_sinusoid(scan: FringeScan, background: float = 0.0) -> SinusoidFit:
    """Least-squares fit of ``a + b*cos(k*x - x0)`` at the scan's known period.

    Linear in the ``(1, cos, sin)`` basis.  Count data are fitted with Poisson
    weights, re-weighted a fixed number of times from the fitted model so the
    weights do not correlate with the noise.  Monte Carlo means are fitted
    unweighted with a sandwich covariance, since their standard error can
    legitimately vanish at a point.
    """
    if scan.period is None:
        raise AnalysisError(f"scan {scan.detector!r} has no fringe period")
    x = scan.parameter_values
    if x[-1] - x[0] < scan.period * (1 - 1e-9):
        raise AnalysisError(
            f"scan {scan.detector!r} spans {x[-1] - x[0]:.4g}, less than one period {scan.period:.4g}"
        )
    y = scan.rates - background
    k = 2 * math.pi / scan.period
    basis = np.column_stack([np.ones_like(x), np.cos(k * x), np.sin(k * x)])
    var = _variances(scan)
    weighted = scan.counts is not None and var is not None
    weights = 1.0 / np.sqrt(var) if weighted else np.ones_like(x)
    coef, _, rank, _ = np.linalg.lstsq(basis * weights[:, None], y * weights, rcond=None)
    if weighted and rank == 3:
        exposure = scan.mode.scale * scan.mode.integration
        for _ in range(REWEIGHT_STEPS):
            model_counts = (basis @ coef + background) * exposure
            var = np.maximum(model_counts, 1.0) / exposure**2
            weights = 1.0 / np.sqrt(var)
            coef, _, rank, _ = np.linalg.lstsq(basis * weights[:, None], y * weights, rcond=None)
    residual = y - basis @ coef
    rms = float(np.sqrt(np.mean(residual**2)))
    if rank < 3:
        raise AnalysisError(f"sinusoid fit is rank deficient (rank {rank}); residual rms {rms:.3g}")
    a, c, s = coef
    if not a > 0:
        raise AnalysisError(f"fitted offset {a:.3g} is not positive; residual rms {rms:.3g}")
    if var is None:
        cov = np.zeros((3, 3))
    elif weighted:
        cov = np.linalg.inv((basis * weights[:, None] ** 2).T @ basis)
    else:
        bread = np.linalg.inv(basis.T @ basis)
        cov = bread @ (basis.T * var) @ basis @ bread
    return SinusoidFit(float(a), float(math.hypot(c, s)), float(math.atan2(s, c)), cov, rms)


def visibility(scan: FringeScan, method: str = SINUSOID_FIT, background: float = 0.0) -> tuple[float, float]:
    """Fringe visibility ``(Cmax - Cmin) / (Cmax + Cmin)`` and its standard error."""
    rates = scan.rates - background
    if not np.any(rates != 0):
        raise AnalysisError(f"visibility undefined: scan {scan.detector!r} is all zero")
    if method == RAW_EXTREMA:
        i_max, i_min = int(np.argmax(rates)), int(np.argmin(rates))
        hi, lo = rates[i_max], rates[i_min]
        v = (hi - lo) / (hi + lo)
        var = _variances(scan)
        if var is None:
            return float(v), 0.0
        s = (hi + lo) ** 2
        sigma = math.sqrt((2 * lo / s) ** 2 * var[i_max] + (2 * hi / s) ** 2 * var[i_min])
        return float(v), sigma
    if method != SINUSOID_FIT:
        raise ValueError(f"unknown visibility method {method!r}")
    fit = fit_sinusoid(scan, background)
    a, b = fit.offset, fit.amplitude
    cov = fit.covariance
    if b > 0:
        c, s = b * math.cos(fit.phase), b * math.sin(fit.phase)
        grad = np.array([-b / a**2, c / (a * b), s / (a * b)])
    else:
        grad = np.array([0.0, 1.0 / a, 1.0 / a]) / math.sqrt(2)
    sigma = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    return float(b / a), sigma


def distinguishability(r_path1: float, r_path2: float, counts: bool = False) -> tuple[float, float]:
    """``|R1 - R2| / (R1 + R2)`` from coincidence rates; Poisson error if ``counts``."""
    if r_path1 < 0 or r_path2 < 0:
        raise AnalysisError("coincidence rates must be non-negative")
    total = r_path1 + r_path2
    if total == 0:
        raise AnalysisError("distinguishability undefined: both coincidence rates are zero")
    d = abs(r_path1 - r_path2) / total
    sigma = math.sqrt(4 * r_path1 * r_path2 / total**3) if counts else 0.0
    return d, sigma


@dataclass(frozen=True)
class DualityReport:
    V: float
    D: float
    duality_sum: float
    sigma_V: float = 0.0
    sigma_D: float = 0.0
    method: str = SINUSOID_FIT

    @property
    def sigma_sum(self) -> float:
        return math.hypot(2 * self.V * self.sigma_V, 2 * self.D * self.sigma_D)

    @property
    def violation(self) -> bool:
        return self.duality_sum > 1 + 2 * self.sigma_sum + DUALITY_EPS

    @property
    def fully_mixed(self) -> bool:
        return self.V == 0 and self.D == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(sigma_sum=self.sigma_sum, violation=self.violation, fully_mixed=self.fully_mixed)
        return out


def _split(value) -> tuple[float, float]:
    if isinstance(value, tuple):
        return float(value[0]), float(value[1])
    return float(value), 0.0


def duality_report(v, d, method: str = SINUSOID_FIT) -> DualityReport:
    """Combine ``v`` and ``d`` (each a value or ``(value, sigma)``) into a report."""
    V, sV = _split(v)
    D, sD = _split(d)
    for name, x in (("V", V), ("D", D)):
        # noisy estimates may exceed 1; that surfaces as a duality violation
        if not (math.isfinite(x) and x >= -1e-12):
            raise AnalysisError(f"{name} = {x} is not a valid fraction")
    return DualityReport(V, D, D * D + V * V, sV, sD, method)
