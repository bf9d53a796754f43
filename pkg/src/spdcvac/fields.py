"""Field expressions built from coherent terms and stochastic vacuum phasors.

A detector field is a linear combination of *carriers*:

* ``COHERENT``: phase-locked laser light (pump, seed, stimulated emission).
  All coherent terms on a bench share one phase reference.
* ``VACUUM(m)``: the vacuum phasor ``exp(i*phi_m)`` of mode ``m``.
* ``VACUUM_CONJ(m)``: its conjugate, produced when a crystal down-converts
  against vacuum ``m`` (the ``a_pump * a_dagger`` coupling).

Phases of distinct vacuum modes are independent and uniform, so after
ensemble averaging the carriers are mutually incoherent and only terms on
the same carrier interfere.  Bare vacuum passthrough (a ``VACUUM`` term with
no emission event attached) is empty space and produces no clicks.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .vacuum import (
    REFERENCE_STREAM,
    VacuumModeId,
    VacuumRegistry,
    sample_amplitudes,
    sample_phases,
    uniform_block,
)

MC_CHUNK = 8192


class CarrierKind(Enum):
    COHERENT = "coherent"
    VACUUM = "vacuum"
    VACUUM_CONJ = "vacuum_conj"


@dataclass(frozen=True)
class Carrier:
    kind: CarrierKind
    ref: str | VacuumModeId

    @classmethod
    def coherent(cls, label: str) -> "Carrier":
        return cls(CarrierKind.COHERENT, label)

    @classmethod
    def vacuum(cls, mode: VacuumModeId) -> "Carrier":
        return cls(CarrierKind.VACUUM, mode)

    @classmethod
    def vacuum_conj(cls, mode: VacuumModeId) -> "Carrier":
        return cls(CarrierKind.VACUUM_CONJ, mode)

    def conjugate(self) -> "Carrier":
        if self.kind is CarrierKind.COHERENT:
            label = self.ref[:-1] if self.ref.endswith("*") else self.ref + "*"
            return Carrier.coherent(label)
        if self.kind is CarrierKind.VACUUM:
            return Carrier.vacuum_conj(self.ref)
        return Carrier.vacuum(self.ref)

    def __str__(self) -> str:
        if self.kind is CarrierKind.COHERENT:
            return f"coh[{self.ref}]"
        if self.kind is CarrierKind.VACUUM:
            return f"vac[{self.ref}]"
        return f"vac*[{self.ref}]"


@dataclass(frozen=True)
class Emission:
    """Tag identifying which crystal's down-conversion created a term.

    ``amplitude`` is the emission amplitude ``C * pump * exp(i*pump_phase)``;
    it is carried along for coincidence normalization but does not take part
    in equality.
    """

    crystal: str
    amplitude: complex = field(default=1.0, compare=False)
    pump: str = field(default="pump", compare=False)


@dataclass(frozen=True)
class FieldTerm:
    coefficient: complex
    carrier: Carrier
    event: Emission | None = None
    polarization: str | None = None

    def __post_init__(self):
        if not cmath.isfinite(self.coefficient):
            raise ValueError(f"non-finite coefficient {self.coefficient!r}")

    @property
    def is_bare_vacuum(self) -> bool:
        return self.carrier.kind is CarrierKind.VACUUM and self.event is None

    def scaled(self, factor: complex) -> "FieldTerm":
        return replace(self, coefficient=self.coefficient * factor)


@dataclass(frozen=True)
class FieldExpression:
    terms: tuple[FieldTerm, ...] = ()
    port: str = ""

    def __post_init__(self):
        if not isinstance(self.terms, tuple):
            object.__setattr__(self, "terms", tuple(self.terms))

    def __add__(self, other: "FieldExpression") -> "FieldExpression":
        return FieldExpression(self.terms + other.terms, self.port or other.port)

    def __mul__(self, factor: complex) -> "FieldExpression":
        return FieldExpression(tuple(t.scaled(factor) for t in self.terms), self.port)

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self.terms)

    def with_port(self, port: str) -> "FieldExpression":
        return FieldExpression(self.terms, port)

    def with_polarization(self, polarization: str | None) -> "FieldExpression":
        return FieldExpression(
            tuple(replace(t, polarization=polarization) for t in self.terms), self.port
        )

    def polarized(self, polarization: str | None) -> "FieldExpression":
        """Sub-expression of terms carrying the given polarization tag."""
        return FieldExpression(
            tuple(t for t in self.terms if t.polarization == polarization), self.port
        )

    def tagged(self, crystals: Iterable[str]) -> "FieldExpression":
        keep = set(crystals)
        return FieldExpression(
            tuple(t for t in self.terms if t.event is not None and t.event.crystal in keep),
            self.port,
        )

    @property
    def events(self) -> set[str]:
        return {t.event.crystal for t in self.terms if t.event is not None}


def vacuum_field(mode: VacuumModeId, port: str = "", polarization: str | None = None) -> FieldExpression:
    return FieldExpression((FieldTerm(1.0 + 0j, Carrier.vacuum(mode), polarization=polarization),), port)


def coherent_field(amplitude: float, phase: float, label: str, port: str = "") -> FieldExpression:
    return FieldExpression((FieldTerm(amplitude * cmath.exp(1j * phase), Carrier.coherent(label)),), port)


# -- crystals ---------------------------------------------------------------


@dataclass(frozen=True)
class CoherentSeed:
    amplitude: float
    phase: float = 0.0
    label: str = "seed"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("seed amplitude must be >= 0")


@dataclass(frozen=True)
class CrystalConfig:
    """Small-gain crystal.  The spontaneous rate per crystal is ``(gain*pump_amplitude)**2``."""

    gain: float
    pump_phase: float = 0.0
    pump_amplitude: float = 1.0
    seed: CoherentSeed | None = None
    pump_label: str = "pump"

    def __post_init__(self):
        if not self.gain >= 0:
            raise ValueError(f"gain must be >= 0, got {self.gain}")
        if not self.pump_amplitude >= 0:
            raise ValueError(f"pump_amplitude must be >= 0, got {self.pump_amplitude}")

    @property
    def emission_amplitude(self) -> complex:
        return self.gain * self.pump_amplitude * cmath.exp(1j * self.pump_phase)


def _created(
    amplitude: complex, source: FieldExpression, event: Emission, polarization: str | None
) -> tuple[FieldTerm, ...]:
    # conj of the other arm's input; terms already created by a crystal are
    # dropped (two-pair terms are second order in the gain)
    return tuple(
        FieldTerm(amplitude * t.coefficient.conjugate(), t.carrier.conjugate(), event, polarization)
        for t in source.terms
        if t.event is None
    )


def down_convert(
    config: CrystalConfig,
    signal_in: FieldExpression,
    idler_in: FieldExpression,
    crystal_id: str,
    polarizations: tuple[str | None, str | None] = (None, None),
) -> tuple[FieldExpression, FieldExpression]:
    """Output fields of a crystal whose signal/idler inputs are arbitrary expressions.

    ``signal_out = signal_in + A * conj(idler_in)`` and the mirror relation for
    the idler, with ``A`` the emission amplitude.  A coherent seed in the idler
    input therefore yields a stimulated coherent term in the signal.
    """
    if config.seed is not None:
        idler_in = idler_in + coherent_field(
            config.seed.amplitude, config.seed.phase, config.seed.label
        ).with_polarization(polarizations[1])
    amp = config.emission_amplitude
    signal_terms = signal_in.terms
    idler_terms = idler_in.terms
    if amp != 0:
        event = Emission(crystal_id, amp, config.pump_label)
        signal_terms += _created(amp, idler_in, event, polarizations[0])
        idler_terms += _created(amp, signal_in, event, polarizations[1])
    return (
        FieldExpression(signal_terms, f"{crystal_id}.signal"),
        FieldExpression(idler_terms, f"{crystal_id}.idler"),
    )


def spdc_emit(
    config: CrystalConfig,
    signal_vac: VacuumModeId,
    idler_vac: VacuumModeId,
    crystal_id: str,
    registry: VacuumRegistry | None = None,
) -> tuple[FieldExpression, FieldExpression]:
    """Signal and idler fields of one crystal fed by two vacuum modes."""
    if registry is not None:
        for mode in (signal_vac, idler_vac):
            if mode not in registry:
                raise ValueError(f"vacuum mode {mode} is not registered")
    return down_convert(config, vacuum_field(signal_vac), vacuum_field(idler_vac), crystal_id)


# -- passive optics ---------------------------------------------------------


def combine_beam_splitter(
    in1: FieldExpression, in2: FieldExpression, transmittance: float
) -> tuple[FieldExpression, FieldExpression]:
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    t = math.sqrt(transmittance)
    r = 1j * math.sqrt(1.0 - transmittance)
    out1 = in1 * t + in2 * r
    out2 = in1 * r + in2 * t
    return out1.with_port("out1"), out2.with_port("out2")


def apply_phase(expr: FieldExpression, phase: float) -> FieldExpression:
    if phase == 0:
        return expr
    return expr * cmath.exp(1j * phase)


# -- ensemble statistics ----------------------------------------------------

COHERENT_GROUP = "coherent"


def group_key(term: FieldTerm):
    if term.carrier.kind is CarrierKind.COHERENT:
        return COHERENT_GROUP
    return term.carrier


def group_amplitudes(expr: FieldExpression) -> dict:
    """Coherent amplitude per mutually incoherent carrier group (bare vacuum excluded)."""
    groups: dict = {}
    for t in expr.terms:
        if t.is_bare_vacuum:
            continue
        key = group_key(t)
        groups[key] = groups.get(key, 0j) + t.coefficient
    return groups


def rate_components(expr: FieldExpression) -> dict:
    return {k: abs(a) ** 2 for k, a in group_amplitudes(expr).items()}


def ensemble_rate(expr: FieldExpression) -> float:
    """Vacuum-averaged count rate: sum over carrier groups of |group amplitude|^2."""
    return float(sum(abs(a) ** 2 for a in group_amplitudes(expr).values()))


def pair_amplitudes(a: FieldExpression, b: FieldExpression) -> dict[str, complex]:
    """Biphoton amplitude for a click at ``a`` and one at ``b``, per pump reference.

    A crystal event ``k`` contributes ``c_a(k) * c_b(k) / A_k``: the emission
    amplitude ``A_k`` appears once in each leg, the pair carries it once.
    Events pumped by the same coherent pump add coherently.
    """
    legs = []
    events: dict[str, Emission] = {}
    for expr in (a, b):
        amps: dict[str, complex] = defaultdict(complex)
        for t in expr.terms:
            if t.event is not None and t.carrier.kind is CarrierKind.VACUUM_CONJ:
                amps[t.event.crystal] += t.coefficient
                events[t.event.crystal] = t.event
        legs.append(amps)
    classes: dict[str, complex] = {}
    for tag in sorted(legs[0].keys() & legs[1].keys()):
        event = events[tag]
        if event.amplitude == 0:
            continue
        pair = legs[0][tag] * legs[1][tag] / event.amplitude
        classes[event.pump] = classes.get(event.pump, 0j) + pair
    return classes


def ensemble_coincidence(a: FieldExpression, b: FieldExpression) -> float:
    return float(sum(abs(v) ** 2 for v in pair_amplitudes(a, b).values()))


def which_path(path1: FieldExpression, path2: FieldExpression) -> tuple[float, float]:
    """Predicted fringe visibility and optimal which-path distinguishability.

    The carrier groups of each path's contribution act as that path's marker
    state.  Visibility follows from the marker overlap; distinguishability is
    the trace norm of ``w1*rho1 - w2*rho2``, i.e. what a reference detector
    optimally marking path 1 can extract in coincidence.
    """
    g1, g2 = group_amplitudes(path1), group_amplitudes(path2)
    n1 = sum(abs(v) ** 2 for v in g1.values())
    n2 = sum(abs(v) ** 2 for v in g2.values())
    total = n1 + n2
    if total == 0:
        raise ValueError("both paths are empty")
    keys = sorted(g1.keys() | g2.keys(), key=repr)
    a = np.array([g1.get(k, 0j) for k in keys])
    b = np.array([g2.get(k, 0j) for k in keys])
    inner = complex(np.vdot(a, b))
    # The trace norm of |a><a| - |b><b| is sqrt((n1 - n2)^2 + 4 (n1 n2 - |<a|b>|^2)).
    # The Gram determinant is summed as a Lagrange identity so identical markers give exactly 0.
    cross = np.outer(a, b) - np.outer(b, a)
    gram_det = 0.5 * float(np.sum(np.abs(cross) ** 2))
    distinguishability = math.sqrt((n1 - n2) ** 2 + 4.0 * gram_det) / total
    visibility = 2.0 * abs(inner) / total
    return visibility, min(distinguishability, 1.0)


# -- Monte Carlo ------------------------------------------------------------


def _stack(exprs: Sequence[FieldExpression], registry: VacuumRegistry):
    m = len(registry)
    coh = np.zeros(len(exprs), complex)
    plus = np.zeros((m, len(exprs)), complex)
    minus = np.zeros((m, len(exprs)), complex)
    for j, expr in enumerate(exprs):
        for t in expr.terms:
            kind = t.carrier.kind
            if kind is CarrierKind.COHERENT:
                coh[j] += t.coefficient
            elif t.carrier.ref not in registry:
                raise ValueError(f"vacuum mode {t.carrier.ref} is not in the registry")
            elif kind is CarrierKind.VACUUM_CONJ:
                minus[t.carrier.ref.index, j] += t.coefficient
            elif not t.is_bare_vacuum:
                plus[t.carrier.ref.index, j] += t.coefficient
    return coh, plus, minus


def _merge(count, mean, m2, chunk: np.ndarray):
    # Chan et al. pairwise update; chunking is fixed so the result is deterministic
    n_b = chunk.shape[0]
    # shift by the first row so constant columns give exactly zero spread
    shifted = chunk - chunk[0]
    offset = shifted.mean(axis=0)
    mean_b = chunk[0] + offset
    m2_b = ((shifted - offset) ** 2).sum(axis=0)
    if count == 0:
        return n_b, mean_b, m2_b
    n = count + n_b
    delta = mean_b - mean
    return n, mean + delta * (n_b / n), m2 + m2_b + delta**2 * (count * n_b / n)


def _finish(count, mean, m2):
    if count < 2:
        return mean, np.zeros_like(mean)
    return mean, np.sqrt(m2 / (count - 1) / count)


def monte_carlo_rates(
    exprs: Sequence[FieldExpression], registry: VacuumRegistry, seed: int, trials: int
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled mean rate and standard error for several fields over shared trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    coh, plus, minus = _stack(exprs, registry)
    count, mean, m2 = 0, None, None
    for start in range(0, trials, MC_CHUNK):
        n = min(MC_CHUNK, trials - start)
        z = sample_amplitudes(registry, seed, start, n) * np.exp(1j * sample_phases(registry, seed, start, n))
        amp = coh[None, :] + z @ plus + z.conj() @ minus
        count, mean, m2 = _merge(count, mean, m2, np.abs(amp) ** 2)
    return _finish(count, mean, m2)


def monte_carlo_rate(
    expr: FieldExpression, registry: VacuumRegistry, seed: int, trials: int
) -> tuple[float, float]:
    mean, err = monte_carlo_rates([expr], registry, seed, trials)
    return float(mean[0]), float(err[0])


def monte_carlo_coincidences(
    pairs: Sequence[tuple[FieldExpression, FieldExpression]], seed: int, trials: int
) -> tuple[np.ndarray, np.ndarray]:
    """Coincidence rates with an independent random phase per pump reference and trial."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    classes = [pair_amplitudes(a, b) for a, b in pairs]
    labels = sorted({k for c in classes for k in c})
    amps = np.array([[c.get(k, 0j) for c in classes] for k in labels], complex).reshape(len(labels), len(pairs))
    count, mean, m2 = 0, None, None
    for start in range(0, trials, MC_CHUNK):
        n = min(MC_CHUNK, trials - start)
        z = np.exp(2j * np.pi * uniform_block(seed, REFERENCE_STREAM, start, n, len(labels)))
        count, mean, m2 = _merge(count, mean, m2, np.abs(z @ amps) ** 2)
    return _finish(count, mean, m2)
