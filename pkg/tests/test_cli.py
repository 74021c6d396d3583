import csv
import io
from pathlib import Path

import pytest
import yaml

from deweed.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main, run_sweep, sweep_csv
from deweed.scenario import OUTPUT_DIR_ENV, load_scenario, scenario_from_dict
from deweed.sim import MissionMetrics
from deweed.sched import plan_from_csv

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(out))
    return out


def write(tmp_path, doc, name="s.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc) if isinstance(doc, dict) else doc)
    return path


def field_map_33(tmp_path):
    rows = []
    n = 0
    for r in range(7):
        codes = []
        for c in range(15):
            codes.append("W" if n < 33 else "C")
            n += 1
        rows.append(" ".join(codes))
    path = tmp_path / "f33.txt"
    path.write_text("7 15 0.102\n" + "\n".join(rows) + "\n")
    return path


def dwell_batches(plan_text):
    return [
        len(rec["active_source_indices"].split(";"))
        for rec in csv.DictReader(io.StringIO(plan_text))
        if rec["mode"] == "dwell"
    ]


def test_validate_default_prints_dwell(capsys, outdir):
    assert main(["validate", str(SCENARIOS / "phase1_dwell.yaml")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "required dwell 28.86 s" in out
    assert "effective cap 15" in out and "exposure window 5.508 s" in out


def test_validate_negative_irradiance(tmp_path, capsys):
    path = write(tmp_path, {"recipe": {"e_uva_w_m2": -5}})
    assert main(["validate", str(path)]) == EXIT_VALIDATION
    assert "recipe" in capsys.readouterr().err


def test_validate_cap16_without_override(tmp_path, capsys):
    path = write(tmp_path, {"layout": {"max_simultaneous": 16}})
    assert main(["validate", str(path)]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "power budget" in err and "6560" in err
    assert main(["validate", str(path), "--set", "layout.honor_paper_16=true"]) == EXIT_OK


@pytest.mark.parametrize(
    "doc, key",
    [
        ({"layout": {"colums": 3}}, "layout.colums"),
        ({"robot": {"wiggle_sigma": "lots"}}, "robot.wiggle_sigma"),
        ({"mission": {"mode": "hover"}}, "mission.mode"),
        ({"detector": "paper-99"}, "detector"),
        ({"extra": 1}, "extra"),
        ({"field": {"pitch": 0.2}}, "field.pitch"),
        ({"mission": {"target": 0}}, "mission.target"),
    ],
)
def test_malformed_config_names_key(tmp_path, capsys, doc, key):
    path = write(tmp_path, doc)
    assert main(["validate", str(path)]) == EXIT_VALIDATION
    assert key in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert main(["validate", str(tmp_path / "nope.yaml")]) == EXIT_IO


def test_run_perfect_writes_reports(outdir, capsys):
    assert main(["run", str(SCENARIOS / "phase1_dwell.yaml"), "--plot"]) == EXIT_OK
    m = MissionMetrics.from_csv((outdir / "metrics.csv").read_text())
    assert m.weed_kill_fraction == 1.0
    for name in ("plan.csv", "executed.csv", "detections.csv", "metrics.json"):
        assert (outdir / name).exists()
    assert (outdir / "lethality.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_run_33_weeds_cap_15_then_16(tmp_path, outdir):
    fmap = field_map_33(tmp_path)
    path = write(tmp_path, {"field": {"map": fmap.name}})
    assert main(["run", str(path)]) == EXIT_OK
    assert dwell_batches((outdir / "plan.csv").read_text()) == [15, 15, 3]
    assert main(["run", str(path), "--set", "layout.honor_paper_16=true"]) == EXIT_OK
    assert dwell_batches((outdir / "plan.csv").read_text()) == [16, 16, 1]


def test_run_infeasible_continuous_exits_zero(tmp_path, outdir, capsys):
    path = write(tmp_path, {"mission": {"mode": "continuous"}})
    assert main(["run", str(path)]) == EXIT_OK
    assert "Infeasible" in capsys.readouterr().out
    assert MissionMetrics.from_csv((outdir / "metrics.csv").read_text()).verdict == "Infeasible"


def test_run_seed_determines_outputs(tmp_path, outdir):
    path = write(tmp_path, {"detector": "paper-95", "robot": {"wiggle_sigma": 0.04}})
    outputs = []
    for _ in range(2):
        assert main(["run", str(path), "--seed", "7"]) == EXIT_OK
        outputs.append({n: (outdir / n).read_bytes() for n in ("metrics.csv", "plan.csv", "executed.csv", "detections.csv")})
    assert outputs[0] == outputs[1]
    main(["run", str(path), "--seed", "8"])
    assert (outdir / "detections.csv").read_bytes() != outputs[0]["detections.csv"]


def test_exported_csvs_round_trip(tmp_path, outdir):
    path = write(tmp_path, {"detector": "paper-95", "robot": {"wiggle_sigma": 0.04}})
    main(["run", str(path)])
    scen = load_scenario(path)
    plan_text = (outdir / "plan.csv").read_text()
    assert plan_from_csv(plan_text, scen.layout).to_csv() == plan_text
    exe_text = (outdir / "executed.csv").read_text()
    assert plan_from_csv(exe_text, scen.layout).to_csv() == exe_text
    m_text = (outdir / "metrics.csv").read_text()
    assert MissionMetrics.from_csv(m_text).to_csv() == m_text


def test_sweep_speed_feasibility_flips(tmp_path, outdir):
    doc = {
        "field": {"rows": 7, "cols": 25, "weed_fraction": 0.05},
        "recipe": {"preset": "phase2"},
        "mission": {"mode": "continuous", "seeds": 30},
    }
    path = write(tmp_path, doc)
    assert main(["sweep", str(path), "--axis", "speed", "--values", "0.1,0.2778,0.5,1.0,2.0", "--plot"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((outdir / "sweep_speed.csv").read_text())))
    feas = [float(r["feasible_fraction"]) for r in rows]
    # threshold = 15 * 0.102 / 1.7992 s = 0.850 m/s
    assert feas == [1.0, 1.0, 1.0, 0.0, 0.0]
    assert (outdir / "sweep_speed.png").exists()


def test_sweep_detector_missed_increases(tmp_path, outdir):
    path = write(tmp_path, {"mission": {"seeds": 30}})
    assert main(["sweep", str(path), "--axis", "detector", "--values", "perfect,paper-98,paper-95"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO((outdir / "sweep_detector.csv").read_text())))
    missed = [float(r["missed_weeds_mean"]) for r in rows]
    assert missed[0] == 0.0 and missed[0] < missed[1] < missed[2]
    assert all(int(r["n_seeds"]) == 30 for r in rows)


def test_sweep_errors(tmp_path, capsys):
    path = write(tmp_path, {})
    assert main(["sweep", str(path), "--axis", "speed", "--values", ""]) == EXIT_VALIDATION
    assert main(["sweep", str(path), "--axis", "colour", "--values", "1"]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "wiggle_sigma" in err and "detector" in err


def test_sweep_csv_round_trip():
    scen = scenario_from_dict({"mission": {"seeds": 3}})
    rows = run_sweep(scen, "wiggle_sigma", [0.0, 0.05])
    text = sweep_csv(rows)
    back = list(csv.DictReader(io.StringIO(text)))
    for row, rec in zip(rows, back):
        for k, v in row.items():
            if isinstance(v, float):
                assert float(rec[k]) == v


def test_sweep_parallel_matches_serial():
    scen = scenario_from_dict({"mission": {"seeds": 4}, "detector": "paper-95"})
    assert run_sweep(scen, "target", [0.5, 1.0], jobs=2) == run_sweep(scen, "target", [0.5, 1.0], jobs=1)


@pytest.mark.parametrize(
    "doc",
    [
        {},
        {"layout": {"max_simultaneous": 16}},
        {"recipe": {"e_near_ir_w_m2": 0, "e_uva_w_m2": 0}},
        {"robot": {"speed": -1}},
        {"mission": {"mode": "continuous"}, "recipe": {"preset": "phase2"}},
        {"field": {"rows": 0}},
    ],
)
def test_validate_iff_run_loads(tmp_path, outdir, doc):
    path = write(tmp_path, doc)
    assert (main(["validate", str(path)]) == EXIT_OK) == (main(["run", str(path)]) == EXIT_OK)


def test_dar4_field_map_scenario(outdir):
    assert main(["run", str(SCENARIOS / "dar4_underbody.yaml")]) == EXIT_OK
    m = MissionMetrics.from_csv((outdir / "metrics.csv").read_text())
    assert m.total_weeds == 3 and m.weed_kill_fraction == 1.0


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "deweed", "validate", str(SCENARIOS / "phase2_continuous.yaml")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "scenario OK" in proc.stdout
