import json
from pathlib import Path

import numpy as np
import pytest

from accessalloc import cli, data
from accessalloc.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_SCALE, main, parse_eta
from accessalloc.data import DataError, parse_value, read_table, render_csv

GOLDEN_CSV = "id,population,beta\nA,1000,0.2\nB,1000,0.5\nC,1000,0.8\n"
GOLDEN_N = [2 / 15, 41 / 105, 10 / 21]


@pytest.fixture
def golden_csv(tmp_path):
    path = tmp_path / "golden.csv"
    path.write_text(GOLDEN_CSV)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def read_report(path: Path) -> dict:
    out = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition(": ")
        out[key] = parse_value(value)
    return out


def snapshot(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def assert_round_trip(path: Path):
    header, rows = read_table(path)
    again = render_csv(header, ([parse_value(r[h]) for h in header] for r in rows))
    assert again == path.read_text()


# --- parsing ---------------------------------------------------------------


def test_parse_eta_forms():
    assert parse_eta("0.5").kind == "point"
    assert parse_eta("0.1,0.2").values == (0.1, 0.2)
    d = parse_eta("dist:0.2:0.5,0.8:0.5")
    assert d.values == (0.2, 0.8) and d.weights == (0.5, 0.5)
    with pytest.raises(cli.ConfigError):
        parse_eta("dist:0.2")
    with pytest.raises(cli.ConfigError):
        parse_eta("fast")


def test_fmt_twelve_significant_digits():
    assert data.fmt(1 / 3) == "0.333333333333"
    assert data.fmt(True) == "true"
    assert data.fmt(7) == "7"
    assert data.fmt(-0.0) == "0"


def test_component_columns_compose_beta(tmp_path):
    path = tmp_path / "loc.csv"
    path.write_text(
        "id,population,beta,beta_low,beta_moderate,beta_high,beta_very_high\n"
        "a,100,,0.5,0.1,0.2,0.2\n"
        "b,100,,0.0,0.6,0.4,0.4\n"
        "c,100,0.25,0.5,0.1,0.2,0.2\n"
    )
    locs = data.read_locations(path)
    assert locs[0].beta == pytest.approx(0.4)
    assert locs[1].beta == 1.0  # clipped
    assert locs[2].beta == 0.25


@pytest.mark.parametrize(
    "body,fragment",
    [
        ("id,population,beta\na,10,0.2\na,10,0.3\n", "duplicate id"),
        ("id,population,beta\na,ten,0.2\n", "row 2, column 'population'"),
        ("id,population,beta\na,10,1.5\n", "row 2, column 'beta'"),
        ("id,population,beta\na,10.5,0.2\n", "positive integer"),
        ("id,population\na,10\n", "beta"),
        ("id,population,beta\na,10\n", "wrong number of fields"),
        ("id,population,beta\n", "no data rows"),
    ],
)
def test_malformed_locations(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=fragment):
        data.read_locations(path)


# --- allocate --------------------------------------------------------------


def test_allocate_golden(tmp_path, golden_csv):
    out = tmp_path / "run"
    assert run("allocate", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, "--eta", 0.5, "--out", out) == EXIT_OK
    header, rows = read_table(out / "allocation.csv")
    assert header == ["id", "p", "n", "n_over_p", "rho", "saturated"]
    np.testing.assert_allclose([float(r["n"]) for r in rows], GOLDEN_N, atol=1e-9)
    report = read_report(out / "report.txt")
    assert report["d1"] == pytest.approx(0.4, abs=1e-9)
    assert report["converged"] is True
    assert report["rd_access_aware"] < report["rd_proportional"]
    run_json = json.loads((out / "run.json").read_text())
    np.testing.assert_allclose(run_json["n"], GOLDEN_N, atol=1e-12)
    assert_round_trip(out / "allocation.csv")


def test_allocate_zero_budget(tmp_path, golden_csv):
    out = tmp_path / "run"
    assert run("allocate", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0, "--eta", 0.5, "--out", out) == 0
    header, rows = read_table(out / "allocation.csv")
    np.testing.assert_allclose([float(r["n"]) for r in rows], [1 / 3] * 3, atol=1e-12)
    report = read_report(out / "report.txt")
    assert report["rd_access_aware"] == report["rd_proportional"]


@pytest.mark.parametrize(
    "extra",
    [
        ("--eta", "0.5"),
        ("--eta", "0.5", "--model", "naive"),
        ("--eta", "dist:0.2:0.5,0.8:0.5", "--restarts", "3", "--seed", "9"),
    ],
)
def test_allocate_is_byte_identical(tmp_path, golden_csv, extra):
    args = ("allocate", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, *extra)
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_allocate_minimax_reports_duality(tmp_path, golden_csv):
    out = tmp_path / "mm"
    assert run("allocate", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, "--eta", "0.2,0.8",
               "--out", out) == 0
    report = read_report(out / "report.txt")
    assert report["method"] == "minimax"
    assert report["weak_duality_holds"] is True


def test_naive_model_rejects_distribution(tmp_path, golden_csv):
    code = run("allocate", "--locations", golden_csv, "--alpha", 0.7, "--eta", "0.2,0.8", "--model", "naive",
               "--out", tmp_path)
    assert code == EXIT_CONFIG


def test_exit_codes(tmp_path, golden_csv, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,population,beta\na,10,abc\n")
    assert run("allocate", "--locations", bad, "--alpha", 0.5, "--eta", 0.3, "--out", tmp_path) == EXIT_DATA
    assert "row 2, column 'beta'" in capsys.readouterr().err
    assert run("allocate", "--locations", tmp_path / "missing.csv", "--alpha", 0.5, "--eta", 0.3) == EXIT_DATA
    assert run("allocate", "--locations", golden_csv, "--alpha", 1.2, "--eta", 0.3, "--out", tmp_path) == EXIT_CONFIG
    assert run("allocate", "--locations", golden_csv, "--alpha", 0.5, "--eta", 2, "--out", tmp_path) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        run("allocate", "--locations", golden_csv)
    assert exc.value.code == EXIT_CONFIG


# --- sweep -----------------------------------------------------------------


def test_sweep_outputs(tmp_path, golden_csv):
    out = tmp_path / "sweep"
    assert run("sweep", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, "--out", out, "--svg") == 0
    header, rows = read_table(out / "sweep.csv")
    assert header == ["eta", "rd_aware", "rd_prop", "improvement", "allocation_stable"]
    assert len(rows) == 19
    assert all(float(r["improvement"]) >= -1e-9 for r in rows)
    assert all(r["allocation_stable"] == "true" for r in rows)
    for name in ("sweep.csv", "curves_rd.csv", "behavior.csv"):
        assert_round_trip(out / name)
    assert (out / "sweep.svg").read_text().startswith("<svg")
    first = snapshot(out)
    assert run("sweep", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, "--out", out, "--svg") == 0
    assert snapshot(out) == first


def test_sweep_rows_match_library(tmp_path, golden_csv):
    from accessalloc.engine import sweep_eta
    from accessalloc.model import Scenario

    out = tmp_path / "sweep"
    assert run("sweep", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, "--eta", "0.2,0.6", "--out", out) == 0
    _, rows = read_table(out / "sweep.csv")
    sc = Scenario.from_arrays([1000] * 3, [0.2, 0.5, 0.8], alpha=0.7, epsilon=0.4)
    lib = sweep_eta(sc, etas=[0.2, 0.6])
    for row, ref in zip(rows, lib.rows):
        assert float(row["rd_aware"]) == pytest.approx(ref.rd_access_aware, rel=1e-11)
        assert float(row["rd_prop"]) == pytest.approx(ref.rd_proportional, rel=1e-11)


# --- simulate --------------------------------------------------------------


def test_simulate(tmp_path):
    out = tmp_path / "sim"
    args = ("simulate", "--N", 3, "--P", 4, "--beta", 0.5, "--eta", 0.5, "--trials", 20000,
            "--trajectory-trials", 50, "--time-resolution", 11, "--seed", 1)
    assert run(*args, "--out", out) == 0
    report = read_report(out / "simulate.txt")
    assert report["rng"] == "Philox4x64-10"
    assert report["rho_dp"] == pytest.approx(34 / 81, abs=1e-11)
    assert abs(report["rho_estimate"] - 34 / 81) <= 4 * report["std_error"]
    assert_round_trip(out / "trajectory.csv")
    first = snapshot(out)
    assert run(*args, "--out", out) == 0
    assert snapshot(out) == first


def test_simulate_full_allocation(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--N", 10, "--P", 10, "--beta", 0.3, "--eta", 0.5, "--trials", 1000,
               "--trajectory-trials", 10, "--out", out) == 0
    report = read_report(out / "simulate.txt")
    assert report["rho_estimate"] == pytest.approx(0.3, abs=1e-12)
    assert report["std_error"] == pytest.approx(0.0, abs=1e-15)


def test_simulate_rejects_waste(tmp_path):
    assert run("simulate", "--N", 5, "--P", 4, "--beta", 0.5, "--eta", 0.5, "--out", tmp_path) == EXIT_CONFIG


# --- verify ----------------------------------------------------------------


def test_verify_zero_budget_single_vertex(tmp_path, golden_csv):
    out = tmp_path / "v"
    assert run("verify", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0, "--eta", 0.5, "--out", out) == 0
    report = read_report(out / "verify.txt")
    assert report["vertices"] == 1
    assert report["status"] == "optimal"


def test_verify_random_instance_with_restarts(tmp_path):
    loc = tmp_path / "loc.csv"
    assert run("synth", "--k", 5, "--seed", 21, "--out", loc) == 0
    out = tmp_path / "v"
    assert run("verify", "--locations", loc, "--alpha", 0.5, "--epsilon", 0.1, "--eta", 0.3, "--restarts", 100,
               "--out", out) == 0
    report = read_report(out / "verify.txt")
    assert report["gap"] <= 1e-6
    assert report["status"] == "optimal"
    assert report["heuristic_beats_proportional"] is True
    _, rows = read_table(out / "vertices.csv")
    rds = [float(r["rd"]) for r in rows]
    assert rds == sorted(rds)
    assert any(r["heuristic"] == "true" for r in rows)
    assert_round_trip(out / "vertices.csv")


def test_verify_scale_guard(tmp_path):
    loc = tmp_path / "loc.csv"
    assert run("synth", "--k", 13, "--out", loc) == 0
    assert run("verify", "--locations", loc, "--alpha", 0.5, "--eta", 0.3, "--out", tmp_path) == EXIT_SCALE


def test_verify_status_bands():
    assert cli.verify_status(0.0) == "optimal"
    assert cli.verify_status(1e-4) == "approximately optimal"
    assert cli.verify_status(0.1) == "suboptimal"


# --- synth -----------------------------------------------------------------


def test_synth_reproducible_and_bounded(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("synth", "--k", 50, "--seed", 4, "--profile", "clustered", "--out", a) == 0
    assert run("synth", "--k", 50, "--seed", 4, "--profile", "clustered", "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    locs = data.read_locations(a)
    assert all(0 <= l.beta <= 1 for l in locs)
    assert all(1000 <= l.population <= 1_000_000 for l in locs)
    assert_round_trip(a)


def test_synth_uniform_mean():
    locs = data.synthesize_locations(1000, seed=0, profile="uniform")
    assert abs(np.mean([l.beta for l in locs]) - 0.5) <= 0.05


def test_synth_rejects_bad_k(tmp_path):
    assert run("synth", "--k", 0, "--out", tmp_path / "x.csv") == EXIT_CONFIG


# --- impact / interpolate --------------------------------------------------


def test_impact_cdc_example(tmp_path, golden_csv):
    out = tmp_path / "run"
    assert run("allocate", "--locations", golden_csv, "--alpha", 0.7, "--epsilon", 0.4, "--eta", 0.5, "--out", out) == 0
    assert run("impact", "--run", out, "--x", 0.01, "--delta", 3.19192, "--q", 18 / 99, "--q-prime", 78 / 415) == 0
    report = read_report(out / "impact.txt")
    assert report["threshold"] == pytest.approx((78 / 415 - 18 / 99) / (1 - 78 / 415), rel=1e-11)
    assert report["delta_exceeds_threshold"] is True
    assert report["collinear"] is True
    assert report["slope"] > 0
    assert report["adverse_access_aware"] < report["adverse_proportional"]
    assert_round_trip(out / "impact_segment.csv")


def test_impact_requires_run(tmp_path):
    assert run("impact", "--run", tmp_path, "--x", 0.01, "--delta", 1, "--q", 0.2, "--q-prime", 0.3) == EXIT_DATA


def test_interpolate(tmp_path):
    obs = tmp_path / "obs.csv"
    obs.write_text("beta,y,weight\n0.3,2.5,1\n")
    out = tmp_path / "interp.csv"
    assert run("interpolate", "--observations", obs, "--grid", "0:1:11", "--out", out) == 0
    _, rows = read_table(out)
    assert len(rows) == 11
    assert all(float(r["yhat"]) == pytest.approx(2.5) for r in rows)
    assert_round_trip(out)


def test_interpolate_bad_observations(tmp_path):
    obs = tmp_path / "obs.csv"
    obs.write_text("beta,value\n0.3,2.5\n")
    assert run("interpolate", "--observations", obs, "--out", tmp_path / "x.csv") == EXIT_DATA
