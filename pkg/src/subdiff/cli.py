"""Command line front end.

Subcommands: ``price``, ``simulate``, ``sweep``, ``check``, ``pde``. Any flag can
also come from a flat ``key = value`` config file given with ``--config``;
flags on the command line win. ``SUBDIFF_THREADS`` caps worker threads.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .classical_pricing import (
    AMERICAN_PUT,
    EURO_CALL,
    EURO_PUT,
    MarketParams,
    TreeConfig,
)
from .errors import RegimeError
from .experiments import (
    CHECK_COLUMNS,
    SWEEP_COLUMNS,
    ExperimentConfig,
    Figure,
    Method,
    TableSink,
    check_relations,
    preset,
    run_experiment,
    simulate_paths,
    write_csv,
    write_rows,
)
from .fractional_pde import PdeGrid, solve_frac_bachelier_call, solve_frac_bs_call
from .sub_pricing import (
    MCConfig,
    PriceEstimate,
    price_european_closed,
    price_lookback_path_mc,
    price_lookback_subordinated_closed,
    price_subordinated_crr,
)
from .subordinator import Family, LaplaceExponentSpec

log = logging.getLogger("subdiff")

OPTIONS = {"euro-call": EURO_CALL, "euro-put": EURO_PUT, "american-put": AMERICAN_PUT}


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def load_config(path: str) -> dict:
    """Parse a flat ``key = value`` file; dashes and underscores are interchangeable."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_string("[config]\n" + fh.read())
    return {k.replace("-", "_"): v for k, v in parser["config"].items()}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file with defaults for any flag")
    p.add_argument("--preset", choices=["fig2", "fig3", "fig4"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--samples", type=int)
    p.add_argument("--steps", type=int, help="binomial tree steps n")
    p.add_argument("--seed", type=int)
    p.add_argument("--delta", type=float, help="operational-time step of the inverse subordinator")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--format", choices=["csv", "json"])
    for name in ("z0", "strike", "rate", "sigma", "horizon", "sigma-ba"):
        p.add_argument(f"--{name}", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subdiff", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one option")
    _common(p)
    p.add_argument("--method", choices=[m.value for m in Method])
    p.add_argument("--option", choices=[*OPTIONS, "lookback"])
    p.add_argument("--grid-size", type=int, help="time grid of path simulation")

    p = sub.add_parser("simulate", help="dump inverse-subordinator, GBM and ABM sample paths")
    _common(p)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--mu", type=float)

    p = sub.add_parser("sweep", help="price-versus-alpha table for a figure preset")
    _common(p)
    p.add_argument("--alphas", help="comma-separated alpha grid")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(m.value for m in Method))

    p = sub.add_parser("check", help="put-call parity and Bachelier/Black-Scholes gap bound")
    _common(p)
    p.add_argument("--checks", help="comma-separated subset of parity,gap")

    p = sub.add_parser("pde", help="solve the fractional pricing equation")
    _common(p)
    p.add_argument("--model", choices=["bs", "bachelier"])
    p.add_argument("--time-nodes", type=int)
    p.add_argument("--space-nodes", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    return ap


# Defaults when neither flag, config file nor preset supplies a value.
DEFAULTS = dict(
    alpha=0.7, lam=0.0, family=None, samples=3000, steps=100, seed=0, delta=None,
    format="csv", z0=2.0, strike=2.0, rate=0.04, sigma=1.0, horizon=2.0, sigma_ba=None,
    method="MC-closed-form", option="euro-call", grid_size=1000, count=1, mu=1.0,
    alphas=None, methods=None, checks="parity,gap", model="bs", time_nodes=120,
    space_nodes=80, theta=0.0, x_min=None, x_max=None,
)
_TYPES = dict(alpha=float, lam=float, samples=int, steps=int, seed=int, delta=float,
              z0=float, strike=float, rate=float, sigma=float, horizon=float, sigma_ba=float,
              grid_size=int, count=int, mu=float, time_nodes=int, space_nodes=int,
              theta=float, x_min=float, x_max=float)


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < preset < config file < command-line flags."""
    opts = dict(DEFAULTS)
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    name = cfg.get("preset") or getattr(args, "preset", None)
    if getattr(args, "preset", None):
        name = args.preset
    if name:
        pre = preset(name)
        mp = pre.market
        opts.update(z0=mp.z0, strike=mp.strike, rate=mp.rate, sigma=mp.sigma, horizon=mp.horizon,
                    samples=pre.mc.samples, steps=pre.tree.steps, time_nodes=pre.pde[0],
                    space_nodes=pre.pde[1], grid_size=pre.path_grid_size)
        opts["preset"] = name
    for k, v in cfg.items():
        if k in ("preset", "config"):
            continue
        if k not in opts:
            raise ValueError(f"config file: unknown key {k!r}")
        opts[k] = _TYPES.get(k, str)(v)
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config", "verbose"):
            opts[k] = v
    return opts


def _spec(o: dict) -> LaplaceExponentSpec:
    fam = o.get("family")
    if fam:
        fam = Family(fam)
        if fam is Family.IDENTITY:
            return LaplaceExponentSpec.identity()
        if fam is Family.ALPHA_STABLE:
            return LaplaceExponentSpec.stable(o["alpha"])
        return LaplaceExponentSpec.tempered(o["alpha"], o["lam"])
    return LaplaceExponentSpec.from_params(o["alpha"], o["lam"])


def _market(o: dict) -> MarketParams:
    return MarketParams(o["z0"], o["strike"], o["rate"], o["sigma"], o["horizon"], o["sigma_ba"])


def _mc(o: dict) -> MCConfig:
    return MCConfig(o["samples"], o["seed"], o["delta"])


def _emit(rows: List[dict], columns: List[str], o: dict) -> None:
    out = o.get("out")
    if o["format"] == "json":
        text = json.dumps(rows, indent=2)
        if out:
            Path(out).write_text(text + "\n")
        else:
            print(text)
    else:
        if out:
            write_csv(out, columns, rows)
        else:
            write_rows(sys.stdout, columns, rows)


def cmd_price(o: dict) -> int:
    spec, mp, mc = _spec(o), _market(o), _mc(o)
    method = Method(o["method"])
    option = o["option"]
    if method is Method.FD_PDE:
        if option != "euro-call":
            raise ValueError("FD-PDE prices European calls only")
        grid = PdeGrid.log_price(mp, o["time_nodes"], o["space_nodes"], theta=o["theta"])
        sol = solve_frac_bs_call(mp, spec.alpha, grid)
        est = PriceEstimate(sol.interpolate(mp.z0), 0.0, 0)
    elif option == "lookback":
        if method is Method.PATH_MC:
            est = price_lookback_path_mc(spec, mp, o["grid_size"], mc)
        elif method is Method.MC_CLOSED_FORM:
            est = price_lookback_subordinated_closed(spec, mp, mc)
        else:
            raise ValueError(f"{method.value} does not price lookbacks")
    elif method is Method.MC_CRR:
        est = price_subordinated_crr(spec, mp, OPTIONS[option], TreeConfig(o["steps"]), mc)
    elif method is Method.MC_CLOSED_FORM:
        est = price_european_closed(spec, mp, mc, OPTIONS[option])
    else:
        raise ValueError("PathMC prices lookbacks only")
    rec = est.to_record(method.value, spec, dataclasses.asdict(mp))
    row = {"alpha": spec.alpha, "method": method.value, "value": est.value,
           "std_error": est.std_error, "elapsed_ms": est.elapsed_ms}
    if o["format"] == "json":
        _emit([rec], [], o)
    else:
        _emit([row], SWEEP_COLUMNS, o)
    return 0


def cmd_simulate(o: dict) -> int:
    spec = _spec(o)
    out = o.get("out") or "paths"
    files = simulate_paths(spec, o["horizon"], o["grid_size"], o["count"], o["seed"], out,
                           z0=o["z0"], mu=o["mu"], sigma=o["sigma"], delta=o["delta"])
    for f in files:
        print(f)
    return 0


def sweep_config(o: dict) -> ExperimentConfig:
    base = preset(o["preset"]) if o.get("preset") else ExperimentConfig(Figure.CUSTOM)
    alphas = _floats(o["alphas"]) if o.get("alphas") is not None else base.alpha_grid
    methods = [m.strip() for m in o["methods"].split(",")] if o.get("methods") else base.methods
    return ExperimentConfig(
        base.figure,
        alpha_grid=alphas,
        methods=methods,
        market=_market(o),
        mc=_mc(o),
        tree=TreeConfig(o["steps"]),
        pde=(o["time_nodes"], o["space_nodes"]),
        path_grid_size=o["grid_size"],
        lam=o["lam"],
        output_path=o.get("out"),
    )


def cmd_sweep(o: dict) -> int:
    cfg = sweep_config(o)
    sink = TableSink(cfg.output_path) if cfg.output_path else None
    rows = run_experiment(cfg, sink)
    if sink is None:
        _emit(rows, SWEEP_COLUMNS, o)
    else:
        print(sink.csv_path)
        print(sink.json_path)
    failed = [r for r in rows if "error" in r]
    return 1 if failed else 0


def cmd_check(o: dict) -> int:
    spec, mp, mc = _spec(o), _market(o), _mc(o)
    checks = [c.strip() for c in o["checks"].split(",") if c.strip()]
    rows = check_relations(spec, mp, mc, checks)
    _emit(rows, CHECK_COLUMNS, o)
    return 0 if all(r["passed"] for r in rows) else 1


def cmd_pde(o: dict) -> int:
    mp = _market(o)
    alpha = o["alpha"]
    if o["model"] == "bs":
        grid = PdeGrid.log_price(mp, o["time_nodes"], o["space_nodes"], theta=o["theta"])
        if o["x_min"] is not None or o["x_max"] is not None:
            grid = dataclasses.replace(grid, x_min=o["x_min"] if o["x_min"] is not None else grid.x_min,
                                       x_max=o["x_max"] if o["x_max"] is not None else grid.x_max)
        sol = solve_frac_bs_call(mp, alpha, grid)
    else:
        grid = PdeGrid.price(mp, o["time_nodes"], o["space_nodes"], theta=o["theta"])
        if o["x_min"] is not None or o["x_max"] is not None:
            grid = dataclasses.replace(grid, x_min=o["x_min"] if o["x_min"] is not None else grid.x_min,
                                       x_max=o["x_max"] if o["x_max"] is not None else grid.x_max)
        sol = solve_frac_bachelier_call(mp, alpha, grid)
    if o.get("out"):
        sol.to_csv(o["out"])
    print(json.dumps({"model": o["model"], "alpha": alpha, "z": mp.z0, "t": mp.horizon,
                      "value": sol.interpolate(mp.z0)}))
    return 0


COMMANDS = {"price": cmd_price, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "check": cmd_check, "pde": cmd_pde}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
