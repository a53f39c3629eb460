"""Experiment sweeps, relation checks and path dumps behind the command line."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO

import numpy as np

from .classical_pricing import (
    AMERICAN_PUT,
    EURO_CALL,
    EURO_PUT,
    MarketParams,
    TreeConfig,
)
from .errors import RegimeError
from .fractional_pde import PdeGrid, solve_frac_bs_call
from .sub_pricing import (
    HorizonSampleSet,
    MCConfig,
    PriceEstimate,
    draw_horizons,
    parity_residual,
    price_european_closed,
    price_lookback_path_mc,
    price_lookback_subordinated_closed,
    price_subordinated_crr,
    bachelier_bs_gap,
    worker_count,
)
from .subordinator import LaplaceExponentSpec, RngStream, sample_inverse_path

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["alpha", "method", "value", "std_error", "elapsed_ms"]
CHECK_COLUMNS = ["check", "alpha", "value", "std_error", "bound", "tolerance", "passed"]


class Figure(str, enum.Enum):
    EURO_CALL_SWEEP = "euro-call"
    AMERICAN_PUT_SWEEP = "american-put"
    LOOKBACK_SWEEP = "lookback"
    CUSTOM = "custom"


class Method(str, enum.Enum):
    MC_CLOSED_FORM = "MC-closed-form"
    MC_CRR = "MC-CRR"
    FD_PDE = "FD-PDE"
    PATH_MC = "PathMC"


# Methods that make sense for each figure, in output order.
FIGURE_METHODS = {
    Figure.EURO_CALL_SWEEP: [Method.MC_CLOSED_FORM, Method.MC_CRR, Method.FD_PDE],
    Figure.AMERICAN_PUT_SWEEP: [Method.MC_CRR, Method.MC_CLOSED_FORM],
    Figure.LOOKBACK_SWEEP: [Method.MC_CLOSED_FORM, Method.PATH_MC],
    Figure.CUSTOM: [Method.MC_CLOSED_FORM, Method.MC_CRR, Method.FD_PDE],
}

DEFAULT_ALPHAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


@dataclass
class ExperimentConfig:
    figure: Figure = Figure.EURO_CALL_SWEEP
    alpha_grid: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    methods: List[Method] = field(default_factory=list)
    market: MarketParams = field(default_factory=lambda: MarketParams(2.0, 2.0, 0.04, 1.0, 2.0))
    mc: MCConfig = field(default_factory=lambda: MCConfig(3000, 0))
    tree: TreeConfig = field(default_factory=lambda: TreeConfig(100))
    pde: tuple = (120, 80)  # (time_nodes, space_nodes); range follows PdeGrid.log_price
    path_grid_size: int = 1000
    lam: float = 0.0
    output_path: Optional[str] = None

    def __post_init__(self):
        self.figure = Figure(self.figure)
        self.methods = [Method(m) for m in (self.methods or FIGURE_METHODS[self.figure])]
        self.validate()

    def validate(self) -> None:
        if not self.alpha_grid:
            raise ValueError("alpha_grid: must contain at least one value")
        for a in self.alpha_grid:
            if not 0.0 < a <= 1.0:
                raise ValueError(f"alpha_grid: {a} outside (0, 1]")
        allowed = FIGURE_METHODS[self.figure]
        bad = [m.value for m in self.methods if m not in allowed]
        if bad:
            raise ValueError(f"methods: {bad} not available for figure {self.figure.value}")
        if self.path_grid_size < 2:
            raise ValueError("path_grid_size: must be at least 2")


def preset(name: str) -> ExperimentConfig:
    """Parameter sets of the three numerical experiments (r = 0.04, sigma = 1)."""
    if name == "fig2":
        return ExperimentConfig(
            Figure.EURO_CALL_SWEEP,
            market=MarketParams(2.0, 2.0, 0.04, 1.0, 2.0),
            mc=MCConfig(3000, 0),
            tree=TreeConfig(100),
            pde=(120, 80),
        )
    if name == "fig3":
        # Expiry is not given for this set; T = 1 is our choice.
        return ExperimentConfig(
            Figure.AMERICAN_PUT_SWEEP,
            market=MarketParams(5.0, 2.0, 0.04, 1.0, 1.0),
            mc=MCConfig(3000, 0),
            tree=TreeConfig(100),
            pde=(170, 200),
        )
    if name == "fig4":
        return ExperimentConfig(
            Figure.LOOKBACK_SWEEP,
            market=MarketParams(2.0, 2.0, 0.04, 1.0, 1.0),
            mc=MCConfig(7000, 0),
            tree=TreeConfig(80),
            path_grid_size=1000,
        )
    raise ValueError(f"unknown preset {name!r}; choose fig2, fig3 or fig4")


def _spec(alpha: float, lam: float) -> LaplaceExponentSpec:
    return LaplaceExponentSpec.from_params(alpha, lam if alpha < 1.0 else 0.0)


def _sub_seed(seed: int, *keys: int) -> int:
    return RngStream(seed).derive(*keys).stream_id


def _run_cell(cfg: ExperimentConfig, alpha: float, ai: int, method: Method, mi: int,
              shared: Optional[HorizonSampleSet]) -> PriceEstimate:
    mp, spec = cfg.market, _spec(alpha, cfg.lam)
    fig = cfg.figure
    t0 = time.perf_counter()
    if method is Method.FD_PDE:
        if fig is Figure.AMERICAN_PUT_SWEEP:
            raise ValueError("FD-PDE prices European calls only")
        grid = PdeGrid.log_price(mp, time_nodes=cfg.pde[0], space_nodes=cfg.pde[1])
        value = solve_frac_bs_call(mp, alpha, grid).interpolate(mp.z0)
        return PriceEstimate(value, 0.0, 0, time.perf_counter() - t0)
    if method is Method.PATH_MC:
        mc = dataclasses.replace(cfg.mc, seed=_sub_seed(cfg.mc.seed, ai, mi))
        est = price_lookback_path_mc(spec, mp, cfg.path_grid_size, mc)
    else:
        hs = shared if shared is not None else draw_horizons(spec, mp.horizon, cfg.mc)
        if method is Method.MC_CRR:
            opt = AMERICAN_PUT if fig is Figure.AMERICAN_PUT_SWEEP else EURO_CALL
            est = price_subordinated_crr(spec, mp, opt, cfg.tree, cfg.mc, hs)
        elif fig is Figure.LOOKBACK_SWEEP:
            est = price_lookback_subordinated_closed(spec, mp, cfg.mc, hs)
        else:
            opt = EURO_PUT if fig is Figure.AMERICAN_PUT_SWEEP else EURO_CALL
            est = price_european_closed(spec, mp, cfg.mc, opt, hs)
    est.elapsed = time.perf_counter() - t0
    return est


def run_experiment(cfg: ExperimentConfig, sink: Optional["TableSink"] = None) -> List[dict]:
    """Price every ``(alpha, method)`` cell; one row per cell.

    Horizon draws come from the configured seed and are shared by all closed-form
    and tree cells (common random numbers across methods and alphas). Path
    simulation streams derive from ``(seed, alpha index, method index)``. A
    failing cell yields a row with ``value = nan`` and an ``error`` entry.
    """
    cfg.validate()
    mp = cfg.market
    cells = [(ai, a, mi, m) for ai, a in enumerate(cfg.alpha_grid) for mi, m in enumerate(cfg.methods)]
    needs_draws = {Method.MC_CLOSED_FORM, Method.MC_CRR}

    shared: dict = {}
    draw_time: dict = {}
    for _, a, _, m in cells:
        if m in needs_draws and a not in shared:
            t0 = time.perf_counter()
            shared[a] = draw_horizons(_spec(a, cfg.lam), mp.horizon, cfg.mc)
            draw_time[a] = time.perf_counter() - t0

    def run(cell):
        ai, a, mi, m = cell
        row = {"alpha": a, "method": m.value}
        try:
            est = _run_cell(cfg, a, ai, m, mi, shared.get(a))
            if m in needs_draws:
                # Every method pays for its own horizon draws in the timing column.
                est.elapsed += draw_time[a]
            row.update(value=est.value, std_error=est.std_error, elapsed_ms=est.elapsed_ms,
                       samples=est.samples)
        except Exception as exc:  # recorded per cell, reported by the caller
            log.error("cell alpha=%s method=%s failed: %s", a, m.value, exc)
            row.update(value=math.nan, std_error=math.nan, elapsed_ms=math.nan, samples=0, error=str(exc))
        if sink is not None:
            sink.write(row, _spec(a, cfg.lam), mp)
        return row

    workers = min(worker_count(), len(cells))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    return rows


# ----------------------------------------------------------------------------
# Output tables
# ----------------------------------------------------------------------------


def market_dict(mp: MarketParams) -> dict:
    return dataclasses.asdict(mp)


class TableSink:
    """Appends sweep rows to CSV and JSON files as cells finish."""

    def __init__(self, stem: str | Path):
        stem = Path(stem)
        if stem.suffix in (".csv", ".json"):
            stem = stem.with_suffix("")
        self.csv_path = stem.with_suffix(".csv")
        self.json_path = stem.with_suffix(".json")
        self.csv_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.csv_path, "w", newline="") as fh:
            csv.writer(fh).writerow(SWEEP_COLUMNS)
        self.records: List[dict] = []
        self._lock = threading.Lock()
        self._flush_json()

    def write(self, row: dict, spec: LaplaceExponentSpec, mp: MarketParams) -> None:
        with self._lock:
            self._write(row, spec, mp)

    def _write(self, row: dict, spec: LaplaceExponentSpec, mp: MarketParams) -> None:
        with open(self.csv_path, "a", newline="") as fh:
            csv.writer(fh).writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
        rec = {
            "method": row["method"],
            "alpha": row["alpha"],
            "lambda": spec.lam,
            "params": market_dict(mp),
            "value": row["value"],
            "std_error": row["std_error"],
            "samples": row.get("samples", 0),
            "elapsed_ms": row["elapsed_ms"],
        }
        if "error" in row:
            rec["error"] = row["error"]
        self.records.append(rec)
        self._flush_json()

    def _flush_json(self) -> None:
        with open(self.json_path, "w") as fh:
            json.dump(self.records, fh, indent=2, allow_nan=True)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(fh: TextIO, columns: Sequence[str], rows: Iterable[dict]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        write_rows(fh, columns, rows)


def read_csv(path: str | Path) -> List[dict]:
    """Read a table written by this module, restoring floats and booleans."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if v in ("true", "false"):
                    row[k] = v == "true"
                else:
                    try:
                        row[k] = float(v)
                    except ValueError:
                        row[k] = v
            out.append(row)
    return out


# ----------------------------------------------------------------------------
# Relation checks
# ----------------------------------------------------------------------------


def check_relations(
    spec: LaplaceExponentSpec,
    mp: MarketParams,
    mc: MCConfig,
    checks: Sequence[str] = ("parity", "gap"),
    parity_tol: float = 1e-9,
    n_se: float = 3.0,
) -> List[dict]:
    """Put-call parity residual and Bachelier/Black-Scholes gap bound on shared draws.

    Raises
    ------
    RegimeError
        If the gap check is requested outside ``z0 == K``, ``r == 0``,
        ``sigma_ba == sigma * z0``.
    """
    unknown = set(checks) - {"parity", "gap"}
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    if "gap" in checks and not mp.in_comparison_regime():
        raise RegimeError(
            "gap check needs z0 == strike, rate == 0 and sigma_ba == sigma * z0 "
            f"(got z0={mp.z0}, strike={mp.strike}, rate={mp.rate}, sigma_ba={mp.sigma_ba})"
        )
    hs = draw_horizons(spec, mp.horizon, mc)
    rows = []
    if "parity" in checks:
        res = parity_residual(hs, mp)
        rows.append(dict(check="parity", alpha=spec.alpha, value=res, std_error=0.0,
                         bound=0.0, tolerance=parity_tol, passed=bool(abs(res) < parity_tol)))
    if "gap" in checks:
        gap, bound = bachelier_bs_gap(hs, mp)
        tol = n_se * gap.std_error
        ok = -tol <= gap.value <= bound + tol
        rows.append(dict(check="gap", alpha=spec.alpha, value=gap.value, std_error=gap.std_error,
                         bound=bound, tolerance=tol, passed=bool(ok)))
    return rows


# ----------------------------------------------------------------------------
# Sample paths
# ----------------------------------------------------------------------------


def simulate_paths(
    spec: LaplaceExponentSpec,
    T: float,
    grid_size: int,
    count: int,
    seed: int,
    output_path: str | Path,
    z0: float = 1.0,
    mu: float = 1.0,
    sigma: float = 1.0,
    delta: Optional[float] = None,
) -> List[Path]:
    """Write ``count`` trajectories of ``S(t)``, subordinated GBM and ABM.

    One file ``path_###.csv`` per trajectory with columns ``t,S_t,gbm,abm``:
    ``gbm = z0 exp(mu S + sigma B(S))`` and ``abm = z0 + mu S + sigma B(S)``
    share the Brownian path, so both are flat wherever ``S`` is.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    out = Path(output_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    grid = np.linspace(0.0, T, grid_size)
    base = RngStream(seed)
    files = []
    for i in range(count):
        clock = sample_inverse_path(spec, grid, delta, base.derive(0, i)).values
        ds = np.diff(clock)
        gen = base.derive(1, i).generator()
        bm = np.concatenate([[0.0], np.cumsum(np.sqrt(ds) * gen.standard_normal(ds.size))])
        level = mu * clock + sigma * bm
        rows = [dict(t=t, S_t=s, gbm=z0 * math.exp(x), abm=z0 + x)
                for t, s, x in zip(grid, clock, level)]
        path = out / f"path_{i:03d}.csv"
        write_csv(path, ["t", "S_t", "gbm", "abm"], rows)
        files.append(path)
    return files
