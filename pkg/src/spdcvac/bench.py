"""Composable optical benches and phase/delay scans.

A bench is described as a list of element dicts::

    [{"name": "BBO1", "type": "crystal", "gain": 0.1},
     {"name": "BBO2", "type": "crystal", "inputs": {"idler": "BBO1.idler"}},
     {"name": "A", "type": "detector", "inputs": {"in": "BBO2.signal"}},
     {"name": "trash", "type": "dump", "inputs": {"in": "BBO2.idler"}}]

Unconnected inputs receive a fresh vacuum mode.  Every output must feed
exactly one downstream input; use a ``dump`` to discard a beam.
"""

from __future__ import annotations

import copy
import math
import zlib
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import fields as fc
from .fields import CoherentSeed, CrystalConfig, FieldExpression
from .vacuum import VacuumRegistry


class BenchError(ValueError):
    pass


@dataclass(frozen=True)
class ElementType:
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    params: Mapping[str, Any]


ELEMENT_TYPES: dict[str, ElementType] = {
    "crystal": ElementType(
        ("signal", "idler"),
        ("signal", "idler"),
        {
            "gain": 0.1,
            "pump_amplitude": 1.0,
            "pump_phase": 0.0,
            "pump": "pump",
            "crystal_type": "I",
            "seed_amplitude": 0.0,
            "seed_phase": 0.0,
            "seed": "seed",
        },
    ),
    "beam_splitter": ElementType(("in1", "in2"), ("out1", "out2"), {"transmittance": 0.5}),
    "polarizing_beam_splitter": ElementType(("in",), ("h", "v"), {}),
    "mirror": ElementType(("in",), ("out",), {}),
    "delay": ElementType(("in",), ("out",), {"phase": 0.0}),
    "attenuator": ElementType(("in",), ("out",), {"transmittance": 1.0}),
    "detector": ElementType(("in",), (), {"dark_rate": 0.0}),
    "dump": ElementType(("in",), (), {}),
}

_TYPE_II_PORTS = (("in",), ("out",))
SIGNAL_POL, IDLER_POL = "H", "V"


def _ports(kind: str, params: Mapping[str, Any]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    spec = ELEMENT_TYPES[kind]
    if kind == "crystal" and params.get("crystal_type") == "II":
        return _TYPE_II_PORTS
    return spec.inputs, spec.outputs


@dataclass
class Element:
    name: str
    kind: str
    params: dict[str, Any]
    inputs: dict[str, tuple[str, str]]

    @property
    def ports(self):
        return _ports(self.kind, self.params)


@dataclass
class Bench:
    elements: dict[str, Element]  # topological order
    registry: VacuumRegistry
    vacuum_inputs: dict[tuple[str, str], FieldExpression]
    description: list[dict] = field(repr=False, default_factory=list)

    @property
    def detectors(self) -> tuple[str, ...]:
        return tuple(n for n, e in self.elements.items() if e.kind == "detector")

    def parameters(self) -> dict[str, Any]:
        return {f"{n}.{k}": v for n, e in self.elements.items() for k, v in e.params.items()}


def _parse_ref(ref: str, where: str) -> tuple[str, str]:
    if not isinstance(ref, str) or ref.count(".") != 1:
        raise BenchError(f"{where}: connection {ref!r} must look like 'element.port'")
    elem, port = ref.split(".")
    return elem, port


def build_bench(description: Sequence[Mapping[str, Any]], amplitude_fluctuations: bool = False) -> Bench:
    raw: dict[str, Element] = {}
    for i, item in enumerate(description):
        item = dict(item)
        name = item.pop("name", None)
        kind = item.pop("type", None)
        where = f"element #{i}" + (f" ({name})" if name else "")
        if not name or "." in str(name):
            raise BenchError(f"{where}: missing or invalid name")
        if name in raw:
            raise BenchError(f"{where}: duplicate element name {name!r}")
        if kind not in ELEMENT_TYPES:
            raise BenchError(f"{where}: unknown element type {kind!r}")
        connections = item.pop("inputs", {}) or {}
        params = dict(ELEMENT_TYPES[kind].params)
        for key, value in item.items():
            if key not in params:
                raise BenchError(f"{where}: unknown parameter {key!r} for {kind}")
            params[key] = value
        if kind == "crystal" and params["crystal_type"] not in ("I", "II"):
            raise BenchError(f"{where}: crystal_type must be 'I' or 'II'")
        ins, _ = _ports(kind, params)
        inputs = {}
        for port, ref in connections.items():
            if port not in ins:
                raise BenchError(f"{where}: {kind} has no input port {port!r}")
            inputs[port] = _parse_ref(ref, f"{where}.{port}")
        raw[name] = Element(name, kind, params, inputs)

    consumed: dict[tuple[str, str], str] = {}
    for elem in raw.values():
        for port, (src, src_port) in elem.inputs.items():
            where = f"{elem.name}.{port}"
            if src not in raw:
                raise BenchError(f"{where}: unknown source element {src!r}")
            if src_port not in raw[src].ports[1]:
                raise BenchError(f"{where}: element {src!r} has no output port {src_port!r}")
            if (src, src_port) in consumed:
                raise BenchError(
                    f"{where}: output {src}.{src_port} already feeds {consumed[(src, src_port)]}"
                )
            consumed[(src, src_port)] = where
    for elem in raw.values():
        for port in elem.ports[1]:
            if (elem.name, port) not in consumed:
                raise BenchError(f"{elem.name}.{port}: dangling output port (connect it or add a dump)")

    graph = {n: {src for src, _ in e.inputs.values()} for n, e in raw.items()}
    try:
        order = list(TopologicalSorter(graph).static_order())
    except CycleError as exc:
        raise BenchError(f"cycle in bench: {' -> '.join(exc.args[1])}") from None

    for name, elem in raw.items():
        if elem.kind == "detector" and not _has_source(name, raw):
            raise BenchError(f"{name}: detector is not reachable from any crystal")

    registry = VacuumRegistry(amplitude_fluctuations=amplitude_fluctuations)
    vacuum_inputs: dict[tuple[str, str], FieldExpression] = {}
    for name in order:
        elem = raw[name]
        for port in elem.ports[0]:
            if port in elem.inputs:
                continue
            if (elem.kind == "crystal" and elem.params["crystal_type"] == "II") or elem.kind == "polarizing_beam_splitter":
                expr = fc.vacuum_field(registry.register(f"{name}.{port}:{SIGNAL_POL}"), polarization=SIGNAL_POL)
                expr = expr + fc.vacuum_field(registry.register(f"{name}.{port}:{IDLER_POL}"), polarization=IDLER_POL)
            else:
                expr = fc.vacuum_field(registry.register(f"{name}.{port}"))
            vacuum_inputs[(name, port)] = expr
    registry.seal()
    return Bench({n: raw[n] for n in order}, registry, vacuum_inputs, [dict(d) for d in description])


def _has_source(name: str, elements: Mapping[str, Element]) -> bool:
    stack, seen = [name], set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        if elements[n].kind == "crystal":
            return True
        stack.extend(src for src, _ in elements[n].inputs.values())
    return False


def _crystal(elem: Element, params: Mapping[str, Any], inputs: Mapping[str, FieldExpression]):
    seed = None
    if params["seed_amplitude"] > 0:
        seed = CoherentSeed(float(params["seed_amplitude"]), float(params["seed_phase"]), params["seed"])
    config = CrystalConfig(
        gain=float(params["gain"]),
        pump_phase=float(params["pump_phase"]),
        pump_amplitude=float(params["pump_amplitude"]),
        seed=seed,
        pump_label=params["pump"],
    )
    if params["crystal_type"] == "II":
        beam = inputs["in"]
        signal, idler = fc.down_convert(
            config, beam.polarized(SIGNAL_POL), beam.polarized(IDLER_POL), elem.name, (SIGNAL_POL, IDLER_POL)
        )
        return {"out": signal + idler}
    signal, idler = fc.down_convert(config, inputs["signal"], inputs["idler"], elem.name)
    return {"signal": signal, "idler": idler}


def _propagate(elem: Element, params: Mapping[str, Any], inputs: Mapping[str, FieldExpression]):
    kind = elem.kind
    if kind == "crystal":
        return _crystal(elem, params, inputs)
    if kind == "beam_splitter":
        out1, out2 = fc.combine_beam_splitter(inputs["in1"], inputs["in2"], float(params["transmittance"]))
        return {"out1": out1, "out2": out2}
    if kind == "polarizing_beam_splitter":
        beam = inputs["in"]
        stray = [t for t in beam.terms if t.polarization not in (SIGNAL_POL, IDLER_POL)]
        if stray:
            raise BenchError(f"{elem.name}: polarizing splitter received untagged light")
        return {"h": beam.polarized(SIGNAL_POL), "v": beam.polarized(IDLER_POL) * 1j}
    if kind == "mirror":
        return {"out": inputs["in"] * 1j}
    if kind == "delay":
        return {"out": fc.apply_phase(inputs["in"], float(params["phase"]))}
    if kind == "attenuator":
        t = float(params["transmittance"])
        if not 0.0 <= t <= 1.0:
            raise BenchError(f"{elem.name}: transmittance must lie in [0, 1]")
        return {"out": inputs["in"] * math.sqrt(t)}
    return {}


def _resolve_overrides(bench: Bench, overrides: Mapping[str, Any] | None) -> dict[str, dict[str, Any]]:
    params = {n: dict(e.params) for n, e in bench.elements.items()}
    for key, value in (overrides or {}).items():
        name, _, param = key.partition(".")
        if name not in params or param not in params[name]:
            raise BenchError(f"unknown bench parameter {key!r}")
        params[name][param] = value
    return params


def evaluate(bench: Bench, overrides: Mapping[str, Any] | None = None) -> dict[str, FieldExpression]:
    """Field expression arriving at every detector."""
    params = _resolve_overrides(bench, overrides)
    outputs: dict[tuple[str, str], FieldExpression] = {}
    detected: dict[str, FieldExpression] = {}
    for name, elem in bench.elements.items():
        inputs = {}
        for port in elem.ports[0]:
            if port in elem.inputs:
                inputs[port] = outputs.pop(elem.inputs[port])
            else:
                inputs[port] = bench.vacuum_inputs[(name, port)]
        if elem.kind == "detector":
            detected[name] = inputs["in"].with_port(name)
            continue
        for port, expr in _propagate(elem, params[name], inputs).items():
            outputs[(name, port)] = expr.with_port(f"{name}.{port}")
    return detected


# -- scans ------------------------------------------------------------------

SCAN_KINDS = ("analytic", "mc", "poisson")


@dataclass(frozen=True)
class ScanMode:
    """How scan rates are produced.

    ``mc`` averages ``trials`` vacuum-phase realizations; ``poisson`` draws
    counts with mean ``rate * scale * integration`` per point.
    """

    kind: str = "analytic"
    trials: int = 100_000
    seed: int = 0
    scale: float = 1.0
    integration: float = 1.0

    def __post_init__(self):
        if self.kind not in SCAN_KINDS:
            raise ValueError(f"unknown scan mode {self.kind!r}; expected one of {SCAN_KINDS}")
        if self.kind == "mc" and self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.scale < 0 or self.integration <= 0:
            raise ValueError("scale must be >= 0 and integration > 0")


@dataclass
class FringeScan:
    detector: str
    parameter: str
    parameter_values: np.ndarray
    rates: np.ndarray
    mode: ScanMode = field(default_factory=ScanMode)
    stderr: np.ndarray | None = None
    counts: np.ndarray | None = None
    period: float | None = 2 * math.pi

    def __post_init__(self):
        self.parameter_values = np.asarray(self.parameter_values, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.parameter_values.shape != self.rates.shape:
            raise ValueError("parameter_values and rates differ in length")
        if np.any(np.diff(self.parameter_values) <= 0):
            raise ValueError("scan parameter must be strictly increasing")
        if np.any(self.rates < 0):
            raise ValueError("rates must be non-negative")


def _substream(seed: int, name: str, point: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed & ((1 << 64) - 1), spawn_key=(zlib.crc32(name.encode()), point))
    return np.random.default_rng(ss)


def poisson_counts(rates: np.ndarray, mode: ScanMode, stream: str) -> np.ndarray:
    exposure = mode.scale * mode.integration
    return np.array(
        [_substream(mode.seed, stream, i).poisson(r * exposure) for i, r in enumerate(rates)], dtype=float
    )


def sample_rates(
    analytic: Callable[[], np.ndarray],
    monte_carlo: Callable[[], tuple[np.ndarray, np.ndarray]],
    mode: ScanMode,
    stream: str,
    dark_rate: float = 0.0,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Rates, standard errors and counts for one scan under ``mode``."""
    if mode.kind == "mc":
        mean, err = monte_carlo()
        return mean + dark_rate, err, None
    rates = np.asarray(analytic(), dtype=float) + dark_rate
    if mode.kind == "analytic":
        return rates, None, None
    counts = poisson_counts(rates, mode, stream)
    exposure = mode.scale * mode.integration
    if exposure == 0:
        return np.zeros_like(rates), np.zeros_like(rates), counts
    return counts / exposure, np.sqrt(counts) / exposure, counts


def scan_fields(
    exprs: Sequence[FieldExpression],
    registry: VacuumRegistry,
    detector: str,
    parameter: str,
    values,
    mode: ScanMode,
    dark_rate: float = 0.0,
    period: float | None = 2 * math.pi,
) -> FringeScan:
    rates, err, counts = sample_rates(
        lambda: [fc.ensemble_rate(e) for e in exprs],
        lambda: fc.monte_carlo_rates(exprs, registry, mode.seed, mode.trials),
        mode,
        f"{detector}|{parameter}",
        dark_rate,
    )
    return FringeScan(detector, parameter, values, rates, mode, err, counts, period)


def scan(
    bench: Bench, detector: str, parameter: str, values, mode: ScanMode | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> FringeScan:
    mode = mode or ScanMode()
    if detector not in bench.detectors:
        raise BenchError(f"unknown detector {detector!r}")
    _resolve_overrides(bench, {parameter: 0.0})
    values = np.asarray(values, dtype=float)
    base = dict(overrides or {})
    exprs = [evaluate(bench, {**base, parameter: v})[detector] for v in values]
    dark = float(_resolve_overrides(bench, base)[detector]["dark_rate"])
    return scan_fields(exprs, bench.registry, detector, parameter, values, mode, dark)


def coincidence_scan(
    bench: Bench, detector_a: str, detector_b: str, parameter: str, values, mode: ScanMode | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> FringeScan:
    mode = mode or ScanMode()
    for det in (detector_a, detector_b):
        if det not in bench.detectors:
            raise BenchError(f"unknown detector {det!r}")
    _resolve_overrides(bench, {parameter: 0.0})
    values = np.asarray(values, dtype=float)
    base = dict(overrides or {})
    pairs = []
    for v in values:
        fields_ = evaluate(bench, {**base, parameter: v})
        pairs.append((fields_[detector_a], fields_[detector_b]))
    name = f"{detector_a}x{detector_b}"
    rates, err, counts = sample_rates(
        lambda: [fc.ensemble_coincidence(a, b) for a, b in pairs],
        lambda: fc.monte_carlo_coincidences(pairs, mode.seed, mode.trials),
        mode,
        f"{name}|{parameter}",
    )
    return FringeScan(name, parameter, values, rates, mode, err, counts)


def phase_values(points: int = 33) -> np.ndarray:
    """``points`` equally spaced phases covering one full period, both ends included."""
    return np.linspace(0.0, 2 * math.pi, points)


def with_params(description: Sequence[Mapping[str, Any]], **updates: Mapping[str, Any]) -> list[dict]:
    """Copy of a bench description with per-element parameter updates."""
    out = copy.deepcopy([dict(d) for d in description])
    for item in out:
        if item["name"] in updates:
            item.update(updates[item["name"]])
    return out
