import csv
import io
import json
import math
import re
import subprocess
import sys

import pytest

from mimo_aoi import cli
from mimo_aoi.errors import ConfigError
from mimo_aoi.experiment import (
    ExperimentConfig,
    db_to_linear,
    linear_to_db,
    load_config,
    run_sweep,
)
from mimo_aoi.report import CSV_HEADER, csv_text, svg_text


def run(argv):
    return cli.main([str(a) for a in argv])


def read_rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


@pytest.mark.parametrize("db", [0, 10, 20, 30])
def test_db_round_trip(db):
    assert linear_to_db(db_to_linear(db)) == pytest.approx(db, abs=1e-12)
    assert db_to_linear(db) == pytest.approx(10 ** (db / 10))


def test_parse_grid():
    assert cli.parse_grid("0:30:5") == [0, 5, 10, 15, 20, 25, 30]
    assert cli.parse_grid("3,5") == [3.0, 5.0]
    assert cli.parse_grid("3:10:1", int) == list(range(3, 11))
    assert cli.parse_grid("2.5") == [2.5]


def test_defaults_follow_numerical_setup():
    cfg = ExperimentConfig().validate()
    assert (cfg.devices, cfg.delta_max, cfg.path_loss_exponent, cfg.snr_threshold) == (3, 50, 2.0, 1.0)
    assert cfg.policies == ["optimal", "greedy", "fixed:1", "fixed:2", "fixed:3"]
    assert ExperimentConfig(devices=1, antennas=[1]).validate().policies == ["optimal", "greedy", "fixed:1"]


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(
        "channel:\n  devices: 2\n  antennas: [2, 3]\n  snr_db: 10\n  distance: [3, 5]\n"
        "mdp:\n  delta_max: 8\n  rvi_tol: 1e-8\n"
        "sim:\n  horizon: 500\n  burn_in: 10\n  seeds: [4]\n"
        "policies: [greedy, fixed:1]\n"
    )
    cfg = load_config(path, {"horizon": 700, "devices": None})
    assert cfg.devices == 2 and cfg.antennas == [2, 3] and cfg.snr_db == [10.0]
    assert cfg.rvi_tol == 1e-8 and cfg.horizon == 700 and cfg.seeds == [4]
    assert cfg.sweep_var == "N"
    assert [p.sweep_var for p in cfg.points()] == ["N@d=3"] * 2 + ["N@d=5"] * 2


@pytest.mark.parametrize("text", [
    "channel:\n  colour: red\n",
    "bogus: 1\n",
    "channel: [1, 2]\n",
    "channel:\n  devices: 4\n  antennas: 3\n",
    "channel:\n  snr_db: []\n",
    "policies: [greedy, greedy]\n",
    "policies: [fixed:9]\n",
    "sim:\n  horizon: 10\n  burn_in: 10\n",
    "- not a mapping\n",
])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_solve_error_free_single_device(tmp_path, capsys):
    rc = run(["solve", "--devices", 1, "--antennas", 1, "--snr-db", 400, "--delta-max", 10, "--out-dir", tmp_path])
    assert rc == 0
    summary = json.loads((tmp_path / "solve.json").read_text())
    assert summary["converged"] and summary["j_star"] == pytest.approx(1.0, abs=1e-9)
    assert (tmp_path / "solution.rvi").exists()
    assert "j_star=1" in capsys.readouterr().out


def test_solve_reference_point(tmp_path, capsys):
    rc = run(["solve", "--snr-db", 20, "--distance", 3, "--antennas", 3, "--out-dir", tmp_path])
    assert rc == 0
    summary = json.loads((tmp_path / "solve.json").read_text())
    assert summary["converged"]
    assert 1 <= summary["j_star"] <= 50
    assert summary["drift_satisfied"] and summary["drift_beta"] < 1
    out = capsys.readouterr().out
    assert "drift: beta=" in out and "iterations=" in out


def test_solve_rejects_overloaded_config(tmp_path, capsys):
    assert run(["solve", "--antennas", 2, "--out-dir", tmp_path]) == 1
    assert "num_antennas >= num_devices" in capsys.readouterr().err
    assert not (tmp_path / "solve.json").exists()


def test_solve_nonconvergence_exit_code(tmp_path):
    assert run(["solve", "--snr-db", 10, "--max-iters", 2, "--delta-max", 10, "--out-dir", tmp_path]) == 2


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(["solve", "--no-such-flag"])
    assert info.value.code == 1
    assert run(["solve", "--snr-db", "0,10", "--out-dir", tmp_path]) == 1


SMALL = ["--delta-max", 12, "--horizon", 3000, "--burn-in", 100, "--seeds", "1,2"]


def test_sweep_row_layout_and_chart(tmp_path):
    rc = run(["sweep", "--snr-db", "0:30:5", "--distance", "3,5", *SMALL, "--out-dir", tmp_path])
    assert rc == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert list(rows[0].keys()) == CSV_HEADER
    assert len(rows) == 2 * 7 * 5
    assert {r["sweep_var"] for r in rows} == {"snr_db@d=3", "snr_db@d=5"}
    for r in rows:
        assert float(r["avg_aoi"]) >= 1 and float(r["stderr"]) >= 0
        if r["policy"] == "optimal":
            assert float(r["j_star"]) >= 1 and int(r["solve_iters"]) > 0
        else:
            assert r["j_star"] == "" and r["solve_iters"] == ""
    keys = [(r["sweep_var"], float(r["value"]), r["policy"]) for r in rows]
    assert keys == sorted(keys)

    svg = (tmp_path / "sweep.svg").read_text()
    assert svg.count("<polyline") == 10
    assert "avg AoI" in svg and ">snr_db<" in svg
    groups = re.findall(r'<g class="series" data-sweep-var="([^"]+)" data-policy="([^"]+)">(.*?)</g>', svg, re.S)
    csv_cells = {(r["sweep_var"], r["policy"], r["value"]): r["avg_aoi"] for r in rows}
    seen = 0
    for var, policy, body in groups:
        for x, y in re.findall(r'data-x="([^"]+)" data-y="([^"]+)"', body):
            assert csv_cells[(var, policy, x)] == y
            seen += 1
    assert seen == len(rows)


def test_sweep_over_antennas_exact_is_monotone(tmp_path):
    rc = run(["sweep", "--antennas", "3:10:1", "--snr-db", "5,15", *SMALL, "--exact", "--out-dir", tmp_path])
    assert rc == 0
    rows = read_rows(tmp_path / "exact.csv")
    assert len(rows) == 8 * 2 * 5
    series = {}
    for r in rows:
        series.setdefault((r["sweep_var"], r["policy"]), []).append((int(float(r["value"])), float(r["exact_avg_aoi"])))
    assert len(series) == 10
    for vals in series.values():
        vals.sort()
        ys = [v for _, v in vals]
        assert all(b <= a + 1e-9 for a, b in zip(ys, ys[1:]))


def test_sweep_single_point(tmp_path):
    rc = run(["sweep", "--snr-db", 20, "--policies", "greedy,fixed:2", *SMALL, "--out-dir", tmp_path])
    assert rc == 0
    assert len(read_rows(tmp_path / "sweep.csv")) == 2


def test_sweep_is_byte_stable_and_parallel_safe(tmp_path):
    args = ["sweep", "--snr-db", "5,15,25", *SMALL]
    assert run([*args, "--out-dir", tmp_path / "a"]) == 0
    assert run([*args, "--out-dir", tmp_path / "b"]) == 0
    assert run([*args, "--out-dir", tmp_path / "b"]) == 0  # served from the solve cache
    assert run([*args, "--jobs", 2, "--out-dir", tmp_path / "c"]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes() == (tmp_path / "c" / "sweep.csv").read_bytes()
    assert (tmp_path / "a" / "sweep.svg").read_bytes() == (tmp_path / "c" / "sweep.svg").read_bytes()
    assert len(list((tmp_path / "b" / "cache").glob("*.rvi"))) == 3


def test_sweep_records_solver_failure_and_continues(tmp_path):
    rc = run(["sweep", "--snr-db", "10,20", "--max-iters", 2, *SMALL, "--out-dir", tmp_path])
    assert rc == 2
    rows = read_rows(tmp_path / "sweep.csv")
    assert len(rows) == 10
    failed = [r for r in rows if r["policy"] == "optimal"]
    assert all(r["avg_aoi"] == "nan" and r["solve_iters"] == "2" for r in failed)
    assert all(math.isfinite(float(r["avg_aoi"])) for r in rows if r["policy"] != "optimal")


def test_compare_ranks_optimal_ahead_of_fixed_one(capsys, tmp_path):
    rc = run(["compare", "--snr-db", 20, "--policies", "optimal,fixed:1", "--horizon", 50_000,
              "--seeds", "1,2,3", "--out-dir", tmp_path])
    assert rc == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert lines[1].split()[1] == "optimal"
    better, worse, diff, se, z = lines[-1].split()
    assert (better, worse) == ("optimal", "fixed:1")
    assert float(diff) > 3 * float(se)


def test_compare_optimal_vs_greedy_are_close(capsys, tmp_path):
    rc = run(["compare", "--snr-db", 20, "--policies", "optimal,greedy", "--horizon", 50_000,
              "--seeds", "1,2", "--out-dir", tmp_path])
    assert rc == 0
    rows = capsys.readouterr().out.splitlines()[1:3]
    a, b = (float(r.split()[2]) for r in rows)
    assert abs(a - b) <= 0.01 * min(a, b)


def test_compare_needs_two_policies(tmp_path, capsys):
    assert run(["compare", "--snr-db", 20, "--policies", "greedy", "--out-dir", tmp_path]) == 1
    assert "at least two policies" in capsys.readouterr().err


def test_report_formatting_is_shared():
    rows = run_sweep(ExperimentConfig(devices=2, antennas=[2], snr_db=[10.0], delta_max=6, horizon=500,
                                      burn_in=0, policies=["greedy", "fixed:1"], out_dir="unused").validate())
    text = csv_text(rows)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    svg = svg_text(rows, "snr_db")
    for r in rows:
        assert f'data-y="{format(r.avg_aoi, ".10g")}"' in svg


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mimo_aoi", "solve", "--antennas", "2",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 1


def test_untruncated_flag_reaches_simulator(tmp_path):
    base = ["sweep", "--snr-db", 0, "--policies", "fixed:1,fixed:2", "--delta-max", 10,
            "--horizon", 20_000, "--burn-in", 0]
    assert run([*base, "--out-dir", tmp_path / "t"]) == 0
    assert run([*base, "--untruncated", "--out-dir", tmp_path / "u"]) == 0
    t = read_rows(tmp_path / "t" / "sweep.csv")
    u = read_rows(tmp_path / "u" / "sweep.csv")
    for a, b in zip(t, u):
        assert float(a["avg_aoi"]) <= 10 < float(b["avg_aoi"])
