"""End-to-end command-line runs on a tiny station."""

import json

import pytest

from bss_sched.cli import main


@pytest.fixture()
def tiny_files(tmp_path):
    """CSV/JSON inputs for the two-battery, four-hour station."""
    (tmp_path / "prices.csv").write_text(
        "hour,price_usd_per_mwh\n1,10\n2,50\n3,30\n4,80\n")
    (tmp_path / "feeder.csv").write_text(
        "hour,load_mw,solar_mw\n1,1.0,0.0\n2,1.0,0.5\n3,2.0,1.0\n4,2.0,0.0\n")
    (tmp_path / "demand.csv").write_text("hour,swaps\n1,1\n2,0\n3,1\n4,0\n")
    (tmp_path / "config.json").write_text(json.dumps({
        "fleet_size": 2, "horizon": 4, "cap_max": 0.1,
        "p_ch_max": 0.06, "p_dch_max": 0.06, "delta_u": 2.0,
        "init_full": [0],
    }))
    return tmp_path


def data_flags(d):
    return ["--prices", str(d / "prices.csv"), "--feeder", str(d / "feeder.csv"),
            "--demand", str(d / "demand.csv"), "--config", str(d / "config.json")]


def test_run_case_1_writes_report_and_plot_data(tiny_files, capsys):
    out = tiny_files / "out"
    rc = main(["run", "--case", "1", "--solver", "bundled", "--out", str(out),
               *data_flags(tiny_files)])
    assert rc == 0
    report = json.loads((out / "case1_report.json").read_text())
    assert report["case"] == 1
    assert report["status"] == "optimal"
    assert len(report["p_feeder_mw"]) == 4
    assert (out / "fig2.csv").read_text().startswith("hour,p_exchange_mw,p_feeder_mw")
    assert not (out / "fig3.csv").exists()  # needs the case-2 sibling
    assert "case 1: cost $" in capsys.readouterr().out


def test_run_case_2_enables_band_and_fig3(tiny_files):
    out = tiny_files / "out"
    for case in ("1", "2"):
        assert main(["run", "--case", case, "--solver", "bundled",
                     "--out", str(out), *data_flags(tiny_files)]) == 0
    r1 = json.loads((out / "case1_report.json").read_text())
    r2 = json.loads((out / "case2_report.json").read_text())
    assert r2["cost_usd"] >= r1["cost_usd"] - 1e-9
    assert r2["max_feeder_ramp_mw"] <= 2.0 + 1e-6
    assert r2["ramp_violations"] == []
    fig3 = (out / "fig3.csv").read_text().splitlines()
    assert fig3[0] == "hour,p_feeder_case1_mw,p_feeder_case2_mw"
    assert len(fig3) == 5


def test_run_case_3_budget_table(tiny_files):
    out = tiny_files / "out"
    rc = main(["run", "--case", "3", "--solver", "bundled", "--out", str(out),
               "--budget", "0,1,2", "--rel-error", "0.1",
               *data_flags(tiny_files)])
    assert rc == 0
    report = json.loads((out / "case3_report.json").read_text())
    table = report["budget_table"]
    assert [row["budget"] for row in table] == [0, 1, 2]
    costs = [row["cost_usd"] for row in table]
    assert costs == sorted(costs)


def test_export_and_verify_round_trip(tiny_files):
    out = tiny_files / "out"
    mps = tiny_files / "model.mps"
    assert main(["export", "--case", "2", "--mps", str(mps),
                 *data_flags(tiny_files)]) == 0
    assert mps.read_text().startswith("NAME")
    assert mps.with_suffix(".mps.legend").exists()

    assert main(["run", "--case", "2", "--solver", "bundled", "--out", str(out),
                 *data_flags(tiny_files)]) == 0
    rc = main(["verify", "--schedule", str(out / "case2_schedule.json"),
               *data_flags(tiny_files)])
    assert rc == 0


def test_verify_flags_tampered_schedule(tiny_files):
    out = tiny_files / "out"
    assert main(["run", "--case", "2", "--solver", "bundled", "--out", str(out),
                 *data_flags(tiny_files)]) == 0
    path = out / "case2_schedule.json"
    payload = json.loads(path.read_text())
    payload["schedule"]["p_exchange_mw"][0] += 0.5
    path.write_text(json.dumps(payload))
    assert main(["verify", "--schedule", str(path),
                 *data_flags(tiny_files)]) == 1


def test_partial_data_flags_error(tiny_files, capsys):
    rc = main(["run", "--case", "1", "--prices", str(tiny_files / "prices.csv")])
    assert rc == 2
    assert "must be given together" in capsys.readouterr().err


def test_infeasible_run_is_diagnosed(tiny_files, capsys):
    # demand one swap every hour is beyond a two-battery rotation
    (tiny_files / "demand.csv").write_text("hour,swaps\n1,2\n2,2\n3,2\n4,2\n")
    rc = main(["run", "--case", "1", "--solver", "bundled",
               "--out", str(tiny_files / "out"), *data_flags(tiny_files)])
    assert rc == 2
    assert "demand" in capsys.readouterr().err