import json

import pytest
from hypothesis import given, settings, strategies as st

from spdcvac import cli
from spdcvac.analysis import duality_report
from spdcvac.config import ConfigError, RunConfig, parse_config, to_text
from spdcvac.scenarios import SCENARIOS, run


def test_minimal_config_applies_defaults():
    cfg = parse_config("scenario = three_crystal\n")
    sc = cfg.scenario_obj()
    assert cfg.overrides == {} and cfg.mode == "analytic" and cfg.formats == ("csv", "json")
    for p in SCENARIOS["three_crystal"].all_params:
        assert sc[p.name] == p.default


def test_config_section_override():
    cfg = parse_config("scenario = three_crystal  # BBO2 dark\n\n[three_crystal]\ngain2 = 0\n")
    assert cfg.overrides == {"gain2": 0.0}
    b = run(cfg.scenario_obj())
    assert abs(b.reports["A"].V - 1) < 1e-9


def test_misspelled_key_reports_line_and_nearest():
    text = "scenario = three_crystal\n[three_crystal]\ngain1 = 0.1\ngian2 = 0\n"
    with pytest.raises(ConfigError, match=r"line 4: unknown key three_crystal.gian2 \(nearest valid key: 'gain2'\)"):
        parse_config(text)
    with pytest.raises(ConfigError, match=r"line 2: unknown key 'sede'.*'seed'"):
        parse_config("scenario = spatial_mz\nsede = 3\n")


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("mode = mc\n", "missing scenario"),
        ("scenario = three_crystals\n", "line 1: unknown scenario.*'three_crystal'"),
        ("scenario = three_crystal\nseed = abc\n", "line 2: .*seed"),
        ("scenario = three_crystal\n[three_crystal]\ngain2 = lots\n", "line 3: .*gain2"),
        ("scenario = three_crystal\njust words\n", "line 2: expected 'key = value'"),
        ("scenario = three_crystal\n[spatial_mz]\nwaist = 3\n", "line 3: section"),
        ("scenario = three_crystal\nformat = xml\n", "format"),
        ("scenario = three_crystal\nseed = 1\nseed = 2\n", "line 3: duplicate"),
    ],
)
def test_config_errors(text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(text)


_finite = st.floats(0.0, 10.0, allow_nan=False)


@given(
    st.sampled_from(["analytic", "mc", "poisson"]),
    st.integers(0, 2**31),
    st.integers(1, 10**6),
    _finite,
    st.floats(0.0, 1.0),
    st.lists(st.floats(0.0, 8.0), min_size=1, max_size=5),
    st.sampled_from([("csv",), ("json",), ("csv", "json")]),
)
@settings(max_examples=60, deadline=None)
def test_config_round_trip(mode, seed, trials, gain, bg, seps, formats):
    a = RunConfig("three_crystal", {"gain2": gain, "alignment": "bbo2_idler"}, "out dir", formats, seed, mode, trials)
    assert parse_config(to_text(a)) == a
    b = RunConfig("spatial_mz", {"separations": tuple(seps), "background_fraction": min(bg, 0.99)},
                  "o", formats, seed, mode, trials)
    assert parse_config(to_text(b)) == b


def test_list_and_explain(capsys):
    assert cli.main(["--list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in SCENARIOS:
        assert name in out
    assert cli.main(["--explain", "tem01_double_slit"]) == 0
    out = capsys.readouterr().out
    for p in SCENARIOS["tem01_double_slit"].all_params:
        assert p.name in out and p.doc in out
    assert cli.main(["--explain", "tem02"]) == cli.EXIT_USAGE


def test_three_crystal_run_files(tmp_path):
    out = tmp_path / "r"
    assert cli.main(["run", "three_crystal", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "summary.json", "three_crystal_A_analytic.csv", "three_crystal_D_analytic.csv"
    ]
    lines = (out / "three_crystal_A_analytic.csv").read_text().splitlines()
    assert lines[0] == "scan_parameter,rate,stderr"
    assert len(lines) == 34 and all(line.endswith(",") for line in lines[1:])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"] == "three_crystal" and summary["seed"] == 0
    assert summary["version"].startswith("v")
    assert summary["parameters"]["gain2"] == 0.1
    assert abs(summary["reports"]["A"]["V"] - 2 / 3) < 1e-11
    assert summary["violations"] == []


def test_numbers_have_twelve_significant_digits(tmp_path):
    cli.main(["run", "three_crystal", "--out", str(tmp_path)])
    row = (tmp_path / "three_crystal_A_analytic.csv").read_text().splitlines()[5]
    x, rate, _ = row.split(",")
    assert x == f"{float(x):.12g}" and len(x.replace(".", "").replace("-", "").lstrip("0")) <= 12


def test_rerun_is_byte_identical(tmp_path):
    args = ["run", "three_crystal", "--mode", "mc", "--trials", "2000", "--seed", "11"]
    cli.main(args + ["--out", str(tmp_path / "a")])
    cli.main(args + ["--out", str(tmp_path / "b")])
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
    row = (tmp_path / "a" / "three_crystal_A_mc.csv").read_text().splitlines()[1]
    assert row.split(",")[2] != ""


def test_tem01_writes_vd_scan(tmp_path):
    assert cli.main(["run", "tem01_double_slit", "--out", str(tmp_path), "--set", "idler_points=11"]) == 0
    lines = (tmp_path / "vd_scan.csv").read_text().splitlines()
    assert lines[0] == "idler_position,V,D,duality_sum"
    assert len(lines) == 12


def test_config_file_and_flags(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(f"scenario = three_crystal\nout = {tmp_path / 'x'}\nformat = json\n[three_crystal]\ngain3 = 0\n")
    assert cli.main(["run", str(path), "--set", "gain1=0.2", "--seed", "5"]) == 0
    summary = json.loads((tmp_path / "x" / "summary.json").read_text())
    assert summary["parameters"]["gain3"] == 0 and summary["parameters"]["gain1"] == 0.2
    assert summary["seed"] == 5
    assert not list((tmp_path / "x").glob("*.csv"))


def test_usage_errors(tmp_path, capsys):
    assert cli.main(["run", "three_crystal", "--set", "gian2=0", "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "nearest valid key: 'gain2'" in capsys.readouterr().err
    assert cli.main(["run", "thre_crystal"]) == cli.EXIT_USAGE
    assert cli.main(["run", "three_crystal", "--format", "xml"]) == cli.EXIT_USAGE
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario = three_crystal\n[three_crystal]\ngain2 = -1\n")
    assert cli.main(["run", str(bad)]) == cli.EXIT_USAGE
    assert "line 3" in capsys.readouterr().err
    assert cli.main([]) == cli.EXIT_USAGE


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "three_crystal", "--out", str(blocker / "sub")]) == cli.EXIT_IO


def test_violation_sets_exit_code(tmp_path, monkeypatch, capsys):
    real = cli.run

    def broken(scenario):
        bundle = real(scenario)
        bundle.reports["A"] = duality_report(1.0, 0.5)
        return bundle

    monkeypatch.setattr(cli, "run", broken)
    assert cli.main(["run", "three_crystal", "--out", str(tmp_path)]) == cli.EXIT_VIOLATION
    assert "duality violation: A" in capsys.readouterr().err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["violations"]
