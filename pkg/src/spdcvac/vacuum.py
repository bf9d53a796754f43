"""Vacuum-mode bookkeeping and seeded random-phase realizations.

Each vacuum mode is a unit phasor ``exp(i*phi)`` whose phase is drawn
uniformly on ``[0, 2*pi)`` per Monte Carlo trial.  Draws come from a
Philox counter-based generator keyed by ``(seed, stream)``: trial ``t``
always reads the same counter block, so a single trial and a batch of
trials produce identical phases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi
_UINT64 = (1 << 64) - 1

# Philox stream keys; one per kind of random quantity
VACUUM_STREAM = 0
REFERENCE_STREAM = 1
AMPLITUDE_STREAM = 2


class RegistryError(ValueError):
    """Raised on misuse of a :class:`VacuumRegistry`."""


@dataclass(frozen=True)
class VacuumModeId:
    index: int
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass
class VacuumRegistry:
    """Dense, label-unique set of vacuum modes for one scenario.

    Modes are registered while the bench is built, then the registry is
    sealed; only sealed registries can be sampled.
    """

    amplitude_fluctuations: bool = False
    _modes: list[VacuumModeId] = field(default_factory=list)
    _by_label: dict[str, VacuumModeId] = field(default_factory=dict)
    sealed: bool = False

    def register(self, label: str) -> VacuumModeId:
        if self.sealed:
            raise RegistryError(f"registry is sealed; cannot register {label!r}")
        if label in self._by_label:
            raise RegistryError(f"duplicate vacuum label {label!r}")
        mode = VacuumModeId(len(self._modes), label)
        self._modes.append(mode)
        self._by_label[label] = mode
        return mode

    def seal(self) -> "VacuumRegistry":
        self.sealed = True
        return self

    def __len__(self) -> int:
        return len(self._modes)

    def __contains__(self, mode: object) -> bool:
        return (
            isinstance(mode, VacuumModeId)
            and mode.index < len(self._modes)
            and self._modes[mode.index] == mode
        )

    def __getitem__(self, label: str) -> VacuumModeId:
        return self._by_label[label]

    @property
    def modes(self) -> tuple[VacuumModeId, ...]:
        return tuple(self._modes)


def register_vacuum(registry: VacuumRegistry, label: str) -> VacuumModeId:
    return registry.register(label)


@dataclass(frozen=True)
class PhaseRealization:
    trial_index: int
    phases: dict[VacuumModeId, float]
    amplitudes: dict[VacuumModeId, float] | None = None


def uniform_block(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniform [0, 1) draws, one row of ``width`` values per trial.

    Row ``k`` depends only on ``(seed, stream, start + k)``.
    """
    if width == 0:
        return np.zeros((count, 0))
    block = -(-width // 4) * 4
    bitgen = np.random.Philox(key=[seed & _UINT64, stream])
    bitgen.advance(start * (block // 4))
    return np.random.Generator(bitgen).random((count, block))[:, :width]


def sample_phases(registry: VacuumRegistry, seed: int, start: int, count: int) -> np.ndarray:
    """Phases for trials ``start .. start+count-1``, shape ``(count, len(registry))``."""
    _require_sealed(registry)
    return TWO_PI * uniform_block(seed, VACUUM_STREAM, start, count, len(registry))


def sample_amplitudes(registry: VacuumRegistry, seed: int, start: int, count: int) -> np.ndarray:
    """Rayleigh magnitudes with unit mean square (all ones when fluctuations are off)."""
    _require_sealed(registry)
    if not registry.amplitude_fluctuations:
        return np.ones((count, len(registry)))
    u = uniform_block(seed, AMPLITUDE_STREAM, start, count, len(registry))
    return np.sqrt(-np.log1p(-u))


def sample_realization(registry: VacuumRegistry, seed: int, trial_index: int) -> PhaseRealization:
    if trial_index < 0:
        raise RegistryError("trial_index must be non-negative")
    phases = sample_phases(registry, seed, trial_index, 1)[0]
    amps = None
    if registry.amplitude_fluctuations:
        row = sample_amplitudes(registry, seed, trial_index, 1)[0]
        amps = {m: float(a) for m, a in zip(registry.modes, row)}
    return PhaseRealization(
        trial_index=trial_index,
        phases={m: float(p) for m, p in zip(registry.modes, phases)},
        amplitudes=amps,
    )


def _require_sealed(registry: VacuumRegistry) -> None:
    if not registry.sealed:
        raise RegistryError("registry must be sealed before sampling")
