import json
import math

import numpy as np
import pytest

from subdiff.cli import main
from subdiff.classical_pricing import MarketParams
from subdiff.errors import RegimeError
from subdiff.experiments import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    Figure,
    Method,
    check_relations,
    preset,
    read_csv,
    run_experiment,
    simulate_paths,
    write_csv,
)
from subdiff.sub_pricing import MCConfig
from subdiff.subordinator import LaplaceExponentSpec


def small_cfg(**kw):
    base = dict(
        alpha_grid=[0.6, 1.0],
        mc=MCConfig(200, seed=1),
        pde=(30, 30),
    )
    base.update(kw)
    return ExperimentConfig(Figure.EURO_CALL_SWEEP, **base)


def test_csv_round_trip(tmp_path):
    rows = [
        {"alpha": 0.5, "method": "FD-PDE", "value": 0.1 + 0.2, "std_error": 0.0, "elapsed_ms": 1e-7},
        {"alpha": 1.0, "method": "MC-CRR", "value": math.nan, "std_error": 1 / 3, "elapsed_ms": 12.0},
    ]
    path = tmp_path / "t.csv"
    write_csv(path, SWEEP_COLUMNS, rows)
    back = read_csv(path)
    assert back[0]["value"] == 0.1 + 0.2
    assert back[1]["std_error"] == 1 / 3
    assert math.isnan(back[1]["value"])
    assert back[0]["method"] == "FD-PDE"


def test_empty_alpha_grid_rejected():
    with pytest.raises(ValueError, match="alpha_grid"):
        ExperimentConfig(alpha_grid=[])


def test_method_not_available_for_figure():
    with pytest.raises(ValueError, match="methods"):
        ExperimentConfig(Figure.AMERICAN_PUT_SWEEP, methods=[Method.FD_PDE])


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("fig9")


def test_presets_carry_experiment_parameters():
    assert preset("fig2").market == MarketParams(2.0, 2.0, 0.04, 1.0, 2.0)
    assert preset("fig3").market.z0 == 5.0
    assert preset("fig4").mc.samples == 7000
    assert preset("fig4").path_grid_size == 1000


def test_sweep_rows_and_determinism(tmp_path):
    rows = run_experiment(small_cfg())
    assert [(r["alpha"], r["method"]) for r in rows] == [
        (a, m) for a in (0.6, 1.0) for m in ("MC-closed-form", "MC-CRR", "FD-PDE")
    ]
    again = run_experiment(small_cfg())
    assert [r["value"] for r in rows] == [r["value"] for r in again]
    assert all(r["elapsed_ms"] > 0 for r in rows)


def test_sweep_writes_tables(tmp_path):
    from subdiff.experiments import TableSink

    sink = TableSink(tmp_path / "out" / "fig")
    run_experiment(small_cfg(), sink)
    table = read_csv(sink.csv_path)
    assert len(table) == 6
    records = json.loads(sink.json_path.read_text())
    assert {"method", "alpha", "lambda", "params", "value", "std_error", "samples", "elapsed_ms"} <= set(records[0])


def test_failing_cell_is_reported_not_fatal():
    cfg = small_cfg(market=MarketParams(2.0, 2.0, 5.0, 0.05, 2.0), methods=[Method.MC_CRR, Method.MC_CLOSED_FORM])
    rows = run_experiment(cfg)
    crr = [r for r in rows if r["method"] == "MC-CRR"]
    assert all("error" in r and math.isnan(r["value"]) for r in crr)
    assert all("error" not in r for r in rows if r["method"] == "MC-closed-form")


def test_check_relations_passes_in_regime():
    mp = MarketParams(2.0, 2.0, 0.0, 1.0, 1.0)
    rows = check_relations(LaplaceExponentSpec.stable(0.7), mp, MCConfig(2000))
    assert [r["check"] for r in rows] == ["parity", "gap"]
    assert all(r["passed"] for r in rows)


def test_check_relations_regime_error(fig2_market):
    with pytest.raises(RegimeError):
        check_relations(LaplaceExponentSpec.stable(0.7), fig2_market, MCConfig(10), ["gap"])
    rows = check_relations(LaplaceExponentSpec.stable(0.7), fig2_market, MCConfig(100), ["parity"])
    assert rows[0]["passed"]


def test_simulated_paths_are_flat_with_the_clock(tmp_path):
    files = simulate_paths(LaplaceExponentSpec.stable(0.4), 1.0, 400, 2, 3, tmp_path)
    assert [f.name for f in files] == ["path_000.csv", "path_001.csv"]
    rows = read_csv(files[0])
    s = np.array([r["S_t"] for r in rows])
    gbm = np.array([r["gbm"] for r in rows])
    abm = np.array([r["abm"] for r in rows])
    flat = np.diff(s) == 0
    assert flat.any()
    assert np.all(np.diff(gbm)[flat] == 0)
    assert np.all(np.diff(abm)[flat] == 0)
    assert np.all(np.diff(s) >= 0)


# ---- command line ---------------------------------------------------------


def test_cli_price_identity(capsys):
    assert main(["price", "--family", "identity", "--alpha", "1", "--z0", "2", "--strike", "2",
                 "--rate", "0.04", "--horizon", "2"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == ",".join(SWEEP_COLUMNS)
    assert float(out[1].split(",")[2]) == pytest.approx(1.0792162169, abs=1e-9)


def test_cli_price_json(capsys):
    assert main(["price", "--alpha", "0.7", "--samples", "100", "--format", "json"]) == 0
    rec = json.loads(capsys.readouterr().out)[0]
    assert rec["method"] == "MC-closed-form" and rec["samples"] == 100


def test_cli_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 0.6\nsamples = 50\nseed = 4  # comment\n")
    assert main(["price", "--config", str(cfg), "--format", "json"]) == 0
    rec = json.loads(capsys.readouterr().out)[0]
    assert rec["alpha"] == 0.6 and rec["samples"] == 50
    assert main(["price", "--config", str(cfg), "--alpha", "0.8", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)[0]["alpha"] == 0.8


def test_cli_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["price", "--config", str(cfg)]) == 2
    assert "colour" in capsys.readouterr().err


def test_cli_check_exit_codes(capsys):
    assert main(["check", "--alpha", "0.7", "--rate", "0", "--horizon", "1", "--samples", "500"]) == 0
    assert main(["check", "--alpha", "0.7", "--samples", "500"]) == 2
    assert "regime" in capsys.readouterr().err


def test_cli_sweep_to_files(tmp_path, capsys):
    stem = tmp_path / "sweep"
    code = main(["sweep", "--preset", "fig2", "--alphas", "0.7,1.0", "--samples", "100",
                 "--steps", "20", "--out", str(stem)])
    assert code == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 6


def test_cli_sweep_failing_cell_exit_code(capsys):
    code = main(["sweep", "--alphas", "0.7", "--methods", "MC-CRR", "--rate", "5", "--sigma", "0.05",
                 "--samples", "10", "--steps", "2"])
    assert code == 1


def test_cli_simulate(tmp_path, capsys):
    assert main(["simulate", "--alpha", "0.5", "--horizon", "1", "--grid-size", "50", "--count", "3",
                 "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("path_*.csv"))) == 3


def test_cli_pde(tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert main(["pde", "--alpha", "0.7", "--time-nodes", "40", "--space-nodes", "40", "--out", str(out)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert 0.9 < rec["value"] < 1.0
    assert out.exists()
    assert main(["pde", "--model", "bachelier", "--alpha", "1", "--rate", "0", "--horizon", "1"]) == 0


def test_cli_bad_alpha(capsys):
    assert main(["price", "--alpha", "1.5"]) == 2
