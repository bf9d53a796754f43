"""The five built-in experiments, their parameter tables, and the runner.

Each scenario declares its parameters once (name, type, default, doc); the
validator, config parser and ``--explain`` output all read that table.
"""

from __future__ import annotations

import difflib
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import __version__
from . import fields as fc
from .analysis import AMPLITUDE, SINUSOID_FIT, DualityReport, duality_report, visibility
from .bench import (
    Bench,
    FringeScan,
    ScanMode,
    build_bench,
    evaluate,
    phase_values,
    scan,
    scan_fields,
)
from .modes import HermiteGaussMode
from .spatial import (
    BiphotonAmplitude,
    SlitGeometry,
    calibrate_correlation_width,
    conditioned_screen_fields,
    cone_interferometer,
    hump_correlation,
    slit_amplitudes,
    slit_far_field,
    vd_at_idler_position,
)
from .vacuum import VacuumRegistry


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "float", "int", "str" or "floats"
    default: Any
    doc: str
    choices: tuple = ()
    check: Callable[[Any], bool] | None = field(default=None, compare=False)
    requirement: str = ""

    def coerce(self, value, where: str = ""):
        where = where or self.name
        try:
            if self.kind == "float":
                if isinstance(value, bool):
                    raise TypeError
                out = float(value)
            elif self.kind == "int":
                if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                    raise TypeError
                out = int(value) if not isinstance(value, str) else int(value.strip())
            elif self.kind == "floats":
                items = value.split(",") if isinstance(value, str) else list(value)
                out = tuple(float(v) for v in items if str(v).strip() != "")
                if not out:
                    raise ValueError
            else:
                if not isinstance(value, str):
                    raise TypeError
                out = value.strip()
        except (TypeError, ValueError):
            raise ScenarioError(f"{where}: expected {self.kind}, got {value!r}") from None
        if self.choices and out not in self.choices:
            raise ScenarioError(f"{where}: {out!r} is not one of {', '.join(map(str, self.choices))}")
        if self.check is not None and not self.check(out):
            raise ScenarioError(f"{where}: {out!r} violates {self.requirement}")
        return out

    def format(self, value) -> str:
        if self.kind == "floats":
            return ", ".join(f"{v:.12g}" for v in value)
        if self.kind == "float":
            return f"{value:.12g}"
        return str(value)


def _nonneg(x):
    return x >= 0


def _positive(x):
    return x > 0


def _fraction(x):
    return 0.0 <= x <= 1.0


COMMON_PARAMS = (
    Param("mode", "str", "analytic", "rate model: exact ensemble average, vacuum-phase Monte Carlo, or Poisson counts",
          ("analytic", "mc", "poisson")),
    Param("trials", "int", 100_000, "Monte Carlo trials per scan point (mc mode only)", check=_positive,
          requirement="trials > 0"),
    Param("seed", "int", 0, "RNG seed for vacuum phases and Poisson draws", check=_nonneg, requirement="seed >= 0"),
    Param("scale", "float", 1e6, "counts per unit rate per unit integration time (poisson mode)", check=_positive,
          requirement="scale > 0"),
    Param("integration", "float", 1.0, "integration time per scan point (poisson mode)", check=_positive,
          requirement="integration > 0"),
)

_POINTS = Param("points", "int", 33, "phase samples over one full fringe period, ends included",
                check=lambda n: n >= 5, requirement="points >= 5")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    summary: str
    params: tuple[Param, ...]
    runner: Callable[["Scenario"], "ResultBundle"]

    @property
    def all_params(self) -> tuple[Param, ...]:
        return COMMON_PARAMS + self.params

    def param(self, key: str) -> Param:
        for p in self.all_params:
            if p.name == key:
                return p
        raise KeyError(key)


@dataclass(frozen=True)
class Scenario:
    name: str
    parameters: dict

    def __getitem__(self, key):
        return self.parameters[key]

    @property
    def scan_mode(self) -> ScanMode:
        p = self.parameters
        return ScanMode(p["mode"], p["trials"], p["seed"], p["scale"], p["integration"])


@dataclass
class ResultBundle:
    scenario: str
    parameters: dict
    scans: list[FringeScan]
    reports: dict[str, DualityReport]
    tables: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)
    version: str = f"v{__version__}"

    def scan_for(self, detector: str) -> FringeScan:
        for s in self.scans:
            if s.detector == detector:
                return s
        raise KeyError(detector)

    @property
    def violations(self) -> list[str]:
        out = [f"{name}: D^2+V^2 = {r.duality_sum:.6g}" for name, r in self.reports.items() if r.violation]
        for tname, table in self.tables.items():
            if "duality_sum" in table:
                bad = np.flatnonzero(table["duality_sum"] > 1 + 1e-12)
                out.extend(f"{tname}[{i}]: D^2+V^2 = {table['duality_sum'][i]:.6g}" for i in bad)
        return out


def nearest_key(key: str, candidates) -> str | None:
    match = difflib.get_close_matches(key, list(candidates), n=1, cutoff=0.0)
    return match[0] if match else None


def make_scenario(name: str, overrides: dict | None = None, where: str = "") -> Scenario:
    """Validate ``overrides`` against the scenario's table and fill in defaults."""
    if name not in SCENARIOS:
        hint = nearest_key(name, SCENARIOS)
        raise ScenarioError(f"{where}unknown scenario {name!r}" + (f" (did you mean {hint!r}?)" if hint else ""))
    spec = SCENARIOS[name]
    known = {p.name: p for p in spec.all_params}
    values = {p.name: p.default for p in spec.all_params}
    for key, value in (overrides or {}).items():
        if key not in known:
            hint = nearest_key(key, known)
            raise ScenarioError(
                f"{where}{name}.{key}: unknown parameter" + (f" (nearest valid key: {hint!r})" if hint else "")
            )
        values[key] = known[key].coerce(value, f"{where}{name}.{key}")
    return Scenario(name, values)


def stimulated_visibility(n: float) -> float:
    """Fringe visibility of two equally seeded emitters at mean seed photon number ``n``."""
    if not n >= 0:
        raise ValueError("seed photon number must be >= 0")
    if math.isinf(n):
        return 1.0
    return n / (n + 1.0)


def run(scenario: Scenario | str, overrides: dict | None = None) -> ResultBundle:
    if isinstance(scenario, str):
        scenario = make_scenario(scenario, overrides)
    elif overrides:
        scenario = make_scenario(scenario.name, {**scenario.parameters, **overrides})
    return SCENARIOS[scenario.name].runner(scenario)


# -- helpers ----------------------------------------------------------------


def _path_report(bench: Bench, scan_: FringeScan, off1: dict, off2: dict, base: dict | None = None) -> DualityReport:
    """Fitted V from the scan, D from the two single-path fields at the detector."""
    base = base or {}
    path1 = evaluate(bench, {**base, **off2})[scan_.detector]
    path2 = evaluate(bench, {**base, **off1})[scan_.detector]
    _, d = fc.which_path(path1, path2)
    return duality_report(visibility(scan_, SINUSOID_FIT), d, SINUSOID_FIT)


def _provenance(scenario: Scenario) -> dict:
    return dict(scenario.parameters)


# -- three crystals ---------------------------------------------------------

THREE_CRYSTAL_PARAMS = (
    Param("gain1", "float", 0.1, "gain of BBO1 (pump off at 0)", check=_nonneg, requirement="gain >= 0"),
    Param("gain2", "float", 0.1, "gain of BBO2 (pump off at 0)", check=_nonneg, requirement="gain >= 0"),
    Param("gain3", "float", 0.1, "gain of BBO3 (pump off at 0)", check=_nonneg, requirement="gain >= 0"),
    Param("pump_amplitude", "float", 1.0, "common pump amplitude", check=_nonneg, requirement="pump_amplitude >= 0"),
    Param("transmittance", "float", 0.5, "power transmittance of both combining beam splitters", check=_fraction,
          requirement="0 <= transmittance <= 1"),
    Param("alignment", "str", "bbo3_idler",
          "bbo3_idler: BBO3 shares BBO1's idler mode and BBO2 its signal mode; bbo2_idler: the reverse",
          ("bbo3_idler", "bbo2_idler")),
    _POINTS,
)


def three_crystal_description(p: dict) -> tuple[list[dict], str, str]:
    """Bench plus the names of the idler-sharing and signal-sharing partner crystals."""
    idler_partner, signal_partner = ("BBO3", "BBO2") if p["alignment"] == "bbo3_idler" else ("BBO2", "BBO3")
    amp = p["pump_amplitude"]
    crystals = {
        "BBO1": {"gain": p["gain1"]},
        "BBO2": {"gain": p["gain2"]},
        "BBO3": {"gain": p["gain3"]},
    }
    crystals[idler_partner]["inputs"] = {"idler": "BBO1.idler"}
    crystals[signal_partner]["inputs"] = {"signal": "BBO1.signal"}
    T = p["transmittance"]
    desc = [{"name": n, "type": "crystal", "pump_amplitude": amp, **crystals[n]} for n in ("BBO1", "BBO2", "BBO3")]
    desc += [
        {"name": "armA1", "type": "attenuator", "inputs": {"in": f"{signal_partner}.signal"}},
        {"name": "armA2", "type": "attenuator", "inputs": {"in": f"{idler_partner}.signal"}},
        {"name": "BS_A", "type": "beam_splitter", "transmittance": T, "inputs": {"in1": "armA1.out", "in2": "armA2.out"}},
        {"name": "A", "type": "detector", "inputs": {"in": "BS_A.out1"}},
        {"name": "A2", "type": "detector", "inputs": {"in": "BS_A.out2"}},
        {"name": "armD1", "type": "attenuator", "inputs": {"in": f"{idler_partner}.idler"}},
        {"name": "armD2", "type": "attenuator", "inputs": {"in": f"{signal_partner}.idler"}},
        {"name": "BS_D", "type": "beam_splitter", "transmittance": T, "inputs": {"in1": "armD1.out", "in2": "armD2.out"}},
        {"name": "D", "type": "detector", "inputs": {"in": "BS_D.out1"}},
        {"name": "D2", "type": "detector", "inputs": {"in": "BS_D.out2"}},
    ]
    return desc, idler_partner, signal_partner


def _three_crystal(sc: Scenario) -> ResultBundle:
    desc, idler_partner, signal_partner = three_crystal_description(sc.parameters)
    bench = build_bench(desc)
    mode = sc.scan_mode
    phases = phase_values(sc["points"])
    scans, reports = [], {}
    for det, partner, arm in (("A", idler_partner, "armA"), ("D", signal_partner, "armD")):
        s = scan(bench, det, f"{partner}.pump_phase", phases, mode)
        scans.append(s)
        reports[det] = _path_report(
            bench, s, {f"{arm}1.transmittance": 0.0}, {f"{arm}2.transmittance": 0.0}
        )
    metrics = {}
    for det in ("A", "D"):
        # rate carried by carrier groups that see only one crystal: the flat background
        expr = evaluate(bench)[det]
        groups = fc.group_amplitudes(expr)
        flat = 0.0
        for key, amp in groups.items():
            crystals = {t.event.crystal for t in expr.terms if fc.group_key(t) == key and t.event is not None}
            if len(crystals) == 1:
                flat += abs(amp) ** 2
        metrics[f"{det}.background_rate"] = flat
        metrics[f"{det}.mean_rate"] = fc.ensemble_rate(expr)
    return ResultBundle(sc.name, _provenance(sc), scans, reports, metrics=metrics)


# -- stimulated emission ----------------------------------------------------

STIMULATED_PARAMS = (
    Param("gain", "float", 0.1, "gain of both crystals", check=_positive, requirement="gain > 0"),
    Param("pump_amplitude", "float", 1.0, "pump amplitude of both crystals", check=_positive,
          requirement="pump_amplitude > 0"),
    Param("seed_photon_number", "float", 19.0,
          "mean seed photon number n: squared ratio of stimulated to spontaneous amplitude per crystal",
          check=_nonneg, requirement="n >= 0"),
    Param("seed_phase", "float", 0.0, "phase of the common seed laser (rad)"),
    _POINTS,
)


def stimulated_description(p: dict, variant: str) -> tuple[list[dict], tuple[str, str]]:
    crystal = {
        "type": "crystal",
        "gain": p["gain"],
        "pump_amplitude": p["pump_amplitude"],
        "seed_amplitude": math.sqrt(p["seed_photon_number"]),
        "seed_phase": p["seed_phase"],
    }
    # Both variants reach A through a fold mirror and a 50/50 splitter.  The
    # mirror factor i and the splitter's reflection i*sqrt(1/2) commute exactly
    # in floating point, so both variants produce bit-identical detector fields.
    if variant == "sequential":
        # the signal mode of BBO1 passes through BBO3; both idlers carry the seed
        names = ("BBO1", "BBO3")
        desc = [
            {"name": "BBO1", **crystal},
            {"name": "BBO3", **crystal, "inputs": {"signal": "BBO1.signal"}},
            {"name": "M", "type": "mirror", "inputs": {"in": "BBO3.signal"}},
            {"name": "BS", "type": "beam_splitter", "inputs": {"in1": "M.out"}},
        ]
    else:
        names = ("BBO2", "BBO3")
        desc = [
            {"name": "BBO2", **crystal},
            {"name": "BBO3", **crystal},
            {"name": "M", "type": "mirror", "inputs": {"in": "BBO2.signal"}},
            {"name": "BS", "type": "beam_splitter", "inputs": {"in1": "M.out", "in2": "BBO3.signal"}},
        ]
    desc += [
        {"name": "A", "type": "detector", "inputs": {"in": "BS.out1"}},
        {"name": "A2", "type": "detector", "inputs": {"in": "BS.out2"}},
    ]
    desc += [{"name": f"dump_{n}", "type": "dump", "inputs": {"in": f"{n}.idler"}} for n in names]
    return desc, names


def _stimulated(variant: str):
    def runner(sc: Scenario) -> ResultBundle:
        desc, (first, second) = stimulated_description(sc.parameters, variant)
        bench = build_bench(desc)
        s = scan(bench, "A", f"{second}.pump_phase", phase_values(sc["points"]), sc.scan_mode)
        report = _path_report(bench, s, {f"{first}.pump_amplitude": 0.0}, {f"{second}.pump_amplitude": 0.0})
        metrics = {"predicted_visibility": stimulated_visibility(sc["seed_photon_number"])}
        return ResultBundle(sc.name, _provenance(sc), [s], {"A": report}, metrics=metrics)

    return runner


# -- cone source Mach-Zehnder -----------------------------------------------

SPATIAL_MZ_PARAMS = (
    Param("waist", "float", 100.0, "detection mode waist (1/e intensity radius, um)", check=_positive,
          requirement="waist > 0"),
    Param("separations", "floats", (0.0, 0.5, 1.0, 2.0, 4.0),
          "tangential separations of the two detection modes, in waists"),
    Param("background_fraction", "float", 0.0, "uncorrelated background share of the single rate",
          check=lambda x: 0 <= x < 1, requirement="0 <= background_fraction < 1"),
    Param("gain", "float", 0.1, "emitter gain", check=_positive, requirement="gain > 0"),
    Param("transmittance", "float", 0.5, "power transmittance of the combining beam splitter",
          check=lambda x: 0 < x < 1, requirement="0 < transmittance < 1"),
    Param("sampling", "float", 8.0, "emitters per waist along the cone", check=lambda x: x >= 8,
          requirement="sampling >= 8"),
    _POINTS,
)


def _spatial_mz(sc: Scenario) -> ResultBundle:
    w = sc["waist"]
    phases = phase_values(sc["points"])
    scans, reports = [], {}
    rows = {"separation": [], "V": [], "D": [], "duality_sum": []}
    for sep in sc["separations"]:
        mz = cone_interferometer(w, sep * w, sc["background_fraction"], sc["gain"], sc["transmittance"],
                                 spacing=w / sc["sampling"])
        exprs = [mz.output(phi) for phi in phases]
        det = f"d{sep:g}w"
        s = scan_fields(exprs, mz.registry, det, "delay_phase", phases, sc.scan_mode)
        scans.append(s)
        _, d = fc.which_path(*mz.arms_at_detector())
        r = duality_report(visibility(s, SINUSOID_FIT), d, SINUSOID_FIT)
        reports[det] = r
        for key, val in (("separation", sep), ("V", r.V), ("D", r.D), ("duality_sum", r.duality_sum)):
            rows[key].append(val)
    tables = {"coherence_scan": {k: np.array(v) for k, v in rows.items()}}
    return ResultBundle(sc.name, _provenance(sc), scans, reports, tables)


# -- TEM01 double slit ------------------------------------------------------

TEM01_PARAMS = (
    Param("waist", "float", 100.0, "pump TEM01 waist (um)", check=_positive, requirement="waist > 0"),
    Param("wavelength", "float", 0.702, "signal wavelength (um)", check=_positive, requirement="wavelength > 0"),
    Param("correlation_width", "float", 0.0,
          "signal-idler position correlation width sigma_c (um); 0 calibrates it from hump_correlation",
          check=_nonneg, requirement="correlation_width >= 0"),
    Param("hump_correlation", "float", 0.96, "probability that both photons leave the same hump (calibration target)",
          check=lambda x: 0.5 < x < 1, requirement="0.5 < hump_correlation < 1"),
    Param("slit_width", "float", 0.0, "slit width (um); 0 means waist/4", check=_nonneg,
          requirement="slit_width >= 0"),
    Param("idler_span", "float", 1.5, "idler scan covers +-idler_span waists", check=_positive,
          requirement="idler_span > 0"),
    Param("idler_points", "int", 61, "idler detector positions in the scan", check=lambda n: n >= 2,
          requirement="idler_points >= 2"),
    Param("offset_sigmas", "float", 3.0, "offset of the second conditioned screen, in sigma_c toward hump 1",
          check=_nonneg, requirement="offset_sigmas >= 0"),
    Param("angle_samples", "int", 1024, "far-field angle samples", check=lambda n: n >= 16,
          requirement="angle_samples >= 16"),
    Param("fringe_periods", "float", 10.0, "far-field half range in fringe periods", check=_positive,
          requirement="fringe_periods > 0"),
)


def tem01_setup(p: dict) -> tuple[BiphotonAmplitude, SlitGeometry]:
    mode = HermiteGaussMode(order_x=1, waist_radius=p["waist"], wavelength=p["wavelength"])
    sigma = p["correlation_width"] or calibrate_correlation_width(mode, p["hump_correlation"], p["wavelength"])
    bp = BiphotonAmplitude(mode, sigma, p["wavelength"])
    geom = SlitGeometry.for_mode(mode, p["wavelength"], p["slit_width"] or None, p["angle_samples"],
                                 p["fringe_periods"])
    return bp, geom


def _tem01(sc: Scenario) -> ResultBundle:
    bp, geom = tem01_setup(sc.parameters)
    sigma = bp.correlation_width
    positions = {"center": 0.0, "offset": sc["offset_sigmas"] * sigma}
    registry = VacuumRegistry()
    screens = {k: conditioned_screen_fields(bp, geom, x, registry) for k, x in positions.items()}
    registry.seal()
    scans, reports, metrics = [], {}, {"correlation_width": sigma, "hump_correlation": hump_correlation(bp)}
    for key, x in positions.items():
        s = scan_fields(screens[key], registry, f"screen_{key}", "angle", geom.angles, sc.scan_mode, period=None)
        scans.append(s)
        v, d = vd_at_idler_position(bp, geom, x)
        reports[key] = duality_report(v, d, AMPLITUDE)
        intensity = slit_far_field(*slit_amplitudes(bp, geom, x), geom, bp.wavelength).intensity
        metrics[f"{key}.idler_position"] = x
        metrics[f"{key}.central_to_peak"] = float(intensity[len(intensity) // 2] / intensity.max())
    span = sc["idler_span"] * sc["waist"]
    xs = np.linspace(-span, span, sc["idler_points"])
    vd = [vd_at_idler_position(bp, geom, x) for x in xs]
    V = np.array([v for v, _ in vd])
    D = np.array([d for _, d in vd])
    tables = {"vd_scan": {"idler_position": xs, "V": V, "D": D, "duality_sum": V * V + D * D}}
    return ResultBundle(sc.name, _provenance(sc), scans, reports, tables, metrics)


SCENARIOS: dict[str, ScenarioSpec] = {
    s.name: s
    for s in (
        ScenarioSpec("three_crystal", "induced coherence with three crystals; fringes at signal detector A "
                     "and idler detector D", THREE_CRYSTAL_PARAMS, _three_crystal),
        ScenarioSpec("stimulated_sequential", "two seeded crystals in series sharing one signal mode",
                     STIMULATED_PARAMS, _stimulated("sequential")),
        ScenarioSpec("stimulated_parallel", "two seeded crystals side by side, signals combined on a beam splitter",
                     STIMULATED_PARAMS, _stimulated("parallel")),
        ScenarioSpec("spatial_mz", "Mach-Zehnder between two displaced detection modes on the emission cone",
                     SPATIAL_MZ_PARAMS, _spatial_mz),
        ScenarioSpec("tem01_double_slit", "TEM01-pumped biphotons through a double slit, conditioned on the idler "
                     "position", TEM01_PARAMS, _tem01),
    )
}


def explain(name: str) -> str:
    spec = SCENARIOS[name]
    rows = [(p.name, p.kind, p.format(p.default), p.doc) for p in spec.all_params]
    widths = [max(len(r[i]) for r in rows + [("name", "type", "default", "")]) for i in range(3)]
    lines = [f"{spec.name}: {spec.summary}", ""]
    lines.append(f"  {'name':<{widths[0]}}  {'type':<{widths[1]}}  {'default':<{widths[2]}}  description")
    for r in rows:
        lines.append(f"  {r[0]:<{widths[0]}}  {r[1]:<{widths[1]}}  {r[2]:<{widths[2]}}  {r[3]}")
    return "\n".join(lines)
