"""Command-line front end: ``spdcvac run <scenario|config> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import FORMATS, ConfigError, RunConfig, _parse_formats, parse_config
from .scenarios import SCENARIOS, ResultBundle, ScenarioError, explain, nearest_key, run

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _num(x) -> str:
    return f"{float(x):.12g}"


def _round(obj):
    """Round every float to 12 significant digits for serialization."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(_num(x)) if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write(path: Path, text: str) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None


def _table_csv(columns: dict) -> str:
    names = list(columns)
    rows = [",".join(names)]
    for i in range(len(columns[names[0]])):
        rows.append(",".join(_num(columns[n][i]) for n in names))
    return "\n".join(rows) + "\n"


def emit(bundle: ResultBundle, config: RunConfig) -> list[Path]:
    """Write scan CSVs, table CSVs and ``summary.json``; return the paths written."""
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    mode = bundle.parameters["mode"]
    written, scan_files = [], {}
    if "csv" in config.formats:
        for s in bundle.scans:
            path = out / f"{bundle.scenario}_{s.detector}_{mode}.csv"
            lines = ["scan_parameter,rate,stderr"]
            for i, (x, r) in enumerate(zip(s.parameter_values, s.rates)):
                err = "" if s.stderr is None else _num(s.stderr[i])
                lines.append(f"{_num(x)},{_num(r)},{err}")
            _write(path, "\n".join(lines) + "\n")
            written.append(path)
            scan_files[s.detector] = path.name
        for name, table in bundle.tables.items():
            path = out / f"{name}.csv"
            _write(path, _table_csv(table))
            written.append(path)
    if "json" in config.formats:
        summary = {
            "scenario": bundle.scenario,
            "version": bundle.version,
            "mode": mode,
            "seed": bundle.parameters["seed"],
            "parameters": {k: list(v) if isinstance(v, tuple) else v for k, v in bundle.parameters.items()},
            "reports": {k: r.to_dict() for k, r in bundle.reports.items()},
            "metrics": bundle.metrics,
            "scans": [
                {"detector": s.detector, "parameter": s.parameter, "points": len(s.rates),
                 "file": scan_files.get(s.detector)}
                for s in bundle.scans
            ],
            "tables": {k: {c: list(v) for c, v in t.items()} for k, t in bundle.tables.items()},
            "violations": bundle.violations,
        }
        path = out / "summary.json"
        _write(path, json.dumps(_round(summary), indent=2) + "\n")
        written.append(path)
    return written


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def resolve_config(args) -> RunConfig:
    target = args.target
    if target in SCENARIOS:
        base = RunConfig(target)
    elif os.path.isfile(target):
        try:
            text = Path(target).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {target}: {exc.strerror or exc}") from None
        try:
            base = parse_config(text)
        except ConfigError as exc:
            raise ConfigError(f"{target}: {exc}") from None
    else:
        hint = nearest_key(target, SCENARIOS)
        raise ConfigError(f"{target!r} is neither a scenario nor a config file (did you mean {hint!r}?)")

    overrides = dict(base.overrides)
    top = {"mode": base.mode, "seed": base.seed, "trials": base.trials}
    spec = SCENARIOS[base.scenario]
    for key, value in _parse_set(args.set).items():
        try:
            param = spec.param(key)
        except KeyError:
            names = [p.name for p in spec.all_params]
            raise ConfigError(
                f"--set {key}: unknown parameter for {base.scenario} (nearest valid key: {nearest_key(key, names)!r})"
            ) from None
        try:
            coerced = param.coerce(value, f"{base.scenario}.{key}")
        except ScenarioError as exc:
            raise ConfigError(str(exc)) from None
        if key in top:
            top[key] = coerced
        else:
            overrides[key] = coerced
    for key in ("mode", "seed", "trials"):
        if getattr(args, key) is not None:
            top[key] = getattr(args, key)
    try:
        return RunConfig(
            base.scenario,
            overrides,
            args.out if args.out is not None else base.out,
            _parse_formats(args.format) if args.format is not None else base.formats,
            **top,
        )
    except ScenarioError as exc:
        raise ConfigError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spdcvac", description=__doc__)
    parser.add_argument("--list-scenarios", action="store_true", help="list built-in scenarios and exit")
    parser.add_argument("--explain", metavar="SCENARIO", help="print the parameter table of a scenario and exit")
    sub = parser.add_subparsers(dest="command")
    p = sub.add_parser("run", help="run a scenario and write its result files")
    p.add_argument("target", help="scenario name or path to a config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="parameter override (repeatable)")
    p.add_argument("--mode", choices=("analytic", "mc", "poisson"))
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--format", metavar="FORMATS", help=f"comma-separated subset of {','.join(FORMATS)}")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_scenarios:
        for name, spec in SCENARIOS.items():
            print(f"{name:<24}{spec.summary}")
        return EXIT_OK
    if args.explain:
        if args.explain not in SCENARIOS:
            print(f"error: unknown scenario {args.explain!r} (did you mean "
                  f"{nearest_key(args.explain, SCENARIOS)!r}?)", file=sys.stderr)
            return EXIT_USAGE
        print(explain(args.explain))
        return EXIT_OK
    if args.command != "run":
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        config = resolve_config(args)
        bundle = run(config.scenario_obj())
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        paths = emit(bundle, config)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in paths:
        print(path)
    for name, r in bundle.reports.items():
        print(f"{name}: V={r.V:.6g} D={r.D:.6g} D^2+V^2={r.duality_sum:.6g}")
    if bundle.violations:
        for v in bundle.violations:
            print(f"duality violation: {v}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
