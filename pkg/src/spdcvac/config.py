"""Run configuration files.

Grammar, one statement per line::

    # comment (also allowed after a value)
    scenario = three_crystal
    mode = mc
    seed = 7
    out = results
    format = csv, json

    [three_crystal]
    gain2 = 0

Top-level keys are ``scenario``, ``mode``, ``trials``, ``seed``, ``out`` and
``format``.  A section named after the scenario holds its parameter
overrides; list values are comma separated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .scenarios import SCENARIOS, ScenarioError, make_scenario, nearest_key

FORMATS = ("csv", "json")
TOP_LEVEL = ("scenario", "mode", "trials", "seed", "out", "format")
_SECTION = re.compile(r"^\[\s*([A-Za-z0-9_]+)\s*\]$")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    overrides: dict = field(default_factory=dict)
    out: str = "results"
    formats: tuple[str, ...] = FORMATS
    seed: int = 0
    mode: str = "analytic"
    trials: int = 100_000

    def __post_init__(self):
        bad = [f for f in self.formats if f not in FORMATS]
        if bad or not self.formats:
            raise ConfigError(f"format must be a non-empty subset of {', '.join(FORMATS)}; got {bad or 'nothing'}")
        for key in self.overrides:
            if key in ("mode", "seed", "trials"):
                raise ConfigError(f"{key} is a top-level setting, not a scenario override")
        # validates names, types and ranges; raises with the offending key path
        self.scenario_obj()

    def scenario_obj(self):
        return make_scenario(
            self.scenario, {**self.overrides, "mode": self.mode, "seed": self.seed, "trials": self.trials}
        )


def _parse_formats(value: str) -> tuple[str, ...]:
    return tuple(v.strip().lower() for v in value.split(",") if v.strip())


def parse_config(text: str) -> RunConfig:
    top: dict[str, tuple[int, str]] = {}
    sections: dict[str, dict[str, tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1)
            if current in sections:
                raise ConfigError(f"line {lineno}: duplicate section [{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        target = top if current is None else sections[current]
        if key in target:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if current is None and key not in TOP_LEVEL:
            hint = nearest_key(key, TOP_LEVEL)
            raise ConfigError(f"line {lineno}: unknown key {key!r} (nearest valid key: {hint!r})")
        target[key] = (lineno, value)

    if "scenario" not in top:
        raise ConfigError("missing scenario: add a line 'scenario = <name>'")
    lineno, scenario = top["scenario"]
    if scenario not in SCENARIOS:
        hint = nearest_key(scenario, SCENARIOS)
        raise ConfigError(f"line {lineno}: unknown scenario {scenario!r} (nearest: {hint!r})")
    spec = SCENARIOS[scenario]
    for name, body in sections.items():
        if name != scenario:
            first = min((ln for ln, _ in body.values()), default=0)
            raise ConfigError(f"line {first or '?'}: section [{name}] does not match scenario {scenario!r}")

    kwargs: dict = {"scenario": scenario}
    for key in ("mode", "trials", "seed"):
        if key in top:
            ln, value = top[key]
            try:
                kwargs[key] = spec.param(key).coerce(value, key)
            except ScenarioError as exc:
                raise ConfigError(f"line {ln}: {exc}") from None
    if "out" in top:
        kwargs["out"] = top["out"][1]
    if "format" in top:
        kwargs["formats"] = _parse_formats(top["format"][1])

    overrides = {}
    names = [p.name for p in spec.all_params if p.name not in TOP_LEVEL]
    for key, (ln, value) in sections.get(scenario, {}).items():
        if key not in names:
            hint = nearest_key(key, names)
            raise ConfigError(f"line {ln}: unknown key {scenario}.{key} (nearest valid key: {hint!r})")
        try:
            overrides[key] = spec.param(key).coerce(value, f"{scenario}.{key}")
        except ScenarioError as exc:
            raise ConfigError(f"line {ln}: {exc}") from None
    kwargs["overrides"] = overrides
    try:
        return RunConfig(**kwargs)
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def _literal(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_literal(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_text(config: RunConfig) -> str:
    """Config file text that parses back to ``config``."""
    lines = [
        f"scenario = {config.scenario}",
        f"mode = {config.mode}",
        f"trials = {config.trials}",
        f"seed = {config.seed}",
        f"out = {config.out}",
        f"format = {', '.join(config.formats)}",
    ]
    if config.overrides:
        lines += ["", f"[{config.scenario}]"]
        lines += [f"{k} = {_literal(v)}" for k, v in config.overrides.items()]
    return "\n".join(lines) + "\n"
