"""Monte Carlo pricing over random operational time.

The subordinated price of a European claim is the classical price evaluated
at the random horizon ``S(T)`` and averaged: ``P_S(T) = E P(S(T))``. The
engine draws ``M`` horizons once (:func:`draw_horizons`) and then averages any
number of classical pricers over the same draws, so relations that hold per
horizon (put-call parity, the Bachelier/Black-Scholes gap) hold exactly in the
estimates.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .classical_pricing import (
    EURO_CALL,
    MarketParams,
    OptionKind,
    OptionSpec,
    TreeConfig,
    bachelier_call,
    bs_call,
    bs_put,
    crr_price,
    lookback_call_closed,
)
from .errors import PricerError, RegimeError, UnsupportedOptionError
from .special_math import SQRT_2PI
from .subordinator import (
    DEFAULT_MAX_STEPS,
    Family,
    LaplaceExponentSpec,
    RngStream,
    default_delta,
    inverse_moment,
    sample_inverse_at,
    sample_inverse_paths,
)

# Horizon draws are generated in fixed blocks, block b from stream (seed, b),
# so results do not depend on how many workers share the blocks.
BLOCK_SIZE = 8192


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SUBDIFF_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class MCConfig:
    samples: int = 3000
    seed: int = 0
    delta: Optional[float] = None
    antithetic: bool = False
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 2:
            raise ValueError(f"need at least 2 samples for a standard error, got {self.samples}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


@dataclass
class PriceEstimate:
    value: float
    std_error: float
    samples: int
    elapsed: float = 0.0  # seconds

    @classmethod
    def from_samples(cls, values, elapsed: float = 0.0) -> "PriceEstimate":
        v = np.asarray(values, dtype=float)
        if v.size and np.all(v == v[0]):
            return cls(float(v[0]), 0.0, int(v.size), elapsed)
        se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(np.mean(v)), se, int(v.size), elapsed)

    @property
    def elapsed_ms(self) -> float:
        return 1e3 * self.elapsed

    def to_record(self, method: str, spec: LaplaceExponentSpec, params: dict) -> dict:
        return {
            "method": method,
            "alpha": spec.alpha,
            "lambda": spec.lam,
            "params": params,
            "value": self.value,
            "std_error": self.std_error,
            "samples": self.samples,
            "elapsed_ms": self.elapsed_ms,
        }


@dataclass
class HorizonSampleSet:
    """Realisations ``S^(i)(T)`` shared across pricers (common random numbers)."""

    spec: LaplaceExponentSpec
    horizon: float
    draws: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if np.any(self.draws < 0):
            raise ValueError("horizon draws must be nonnegative")

    def __len__(self) -> int:
        return self.draws.size


def draw_horizons(spec: LaplaceExponentSpec, T: float, mc: MCConfig) -> HorizonSampleSet:
    """Draw ``mc.samples`` independent staircase values of ``S(T)``."""
    if not T > 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if spec.is_identity:
        return HorizonSampleSet(spec, T, np.full(mc.samples, float(T)))
    delta = mc.delta if mc.delta is not None else default_delta(spec, T)
    starts = range(0, mc.samples, BLOCK_SIZE)

    def block(b: int) -> np.ndarray:
        n = min(BLOCK_SIZE, mc.samples - starts[b])
        return sample_inverse_at(
            spec, T, delta, RngStream(mc.seed, b), size=n,
            max_steps=mc.max_steps, antithetic=mc.antithetic,
        )

    workers = min(worker_count(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, range(len(starts))))
    else:
        parts = [block(b) for b in range(len(starts))]
    return HorizonSampleSet(spec, T, np.concatenate(parts))


def _evaluate(pricer: Callable, draws: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(pricer(draws), dtype=float)
        if vals.ndim == 0:
            vals = np.full(draws.shape, float(vals))
        if vals.shape == draws.shape:
            return vals
    except Exception:
        pass
    # Pricer is scalar-only, or failed somewhere: go draw by draw.
    out = np.empty(draws.size)
    for i, tau in enumerate(draws):
        try:
            out[i] = float(pricer(float(tau)))
        except Exception as exc:
            raise PricerError(i, float(tau), exc) from exc
    return out


def price_subordinated(hs: HorizonSampleSet, pricer: Callable) -> PriceEstimate:
    """Average ``pricer(tau)`` over the horizon draws.

    ``pricer`` may be vectorised (array in, array out) or scalar-only.
    """
    t0 = time.perf_counter()
    vals = _evaluate(pricer, hs.draws)
    return PriceEstimate.from_samples(vals, time.perf_counter() - t0)


def discount_factor_subordinated(hs: HorizonSampleSet, r: float) -> PriceEstimate:
    """Estimate of ``E exp(-r S(T))``."""
    if r == 0:
        return PriceEstimate(1.0, 0.0, len(hs))
    return price_subordinated(hs, lambda tau: np.exp(-r * np.asarray(tau)))


def parity_residual(hs: HorizonSampleSet, mp: MarketParams) -> float:
    """``P_S - C_S - K E exp(-r S(T)) + z0`` on shared draws; zero up to rounding."""
    put = price_subordinated(hs, lambda tau: bs_put(mp, tau)).value
    call = price_subordinated(hs, lambda tau: bs_call(mp, tau)).value
    disc = discount_factor_subordinated(hs, mp.rate).value
    return put - call - mp.strike * disc + mp.z0


def gap_bound_constant(mp: MarketParams) -> float:
    """``z0 sigma**3 / (12 sqrt(2 pi))``, the factor multiplying ``E S(T)**1.5``."""
    return mp.z0 * mp.sigma**3 / (12.0 * SQRT_2PI)


def bachelier_bs_gap(hs: HorizonSampleSet, mp: MarketParams):
    """Bachelier minus Black-Scholes subordinated call, and its upper bound.

    Requires ``z0 == K``, ``r == 0`` and ``sigma_ba == sigma * z0``. The gap
    satisfies ``0 <= gap <= E S(T)**1.5 * z0 sigma**3 / (12 sqrt(2 pi))``; the
    moment is exact for the alpha-stable and identity clocks and estimated from
    the draws otherwise.
    """
    if not mp.in_comparison_regime():
        raise RegimeError(
            "gap bound needs z0 == strike, rate == 0 and sigma_ba == sigma * z0; "
            f"got z0={mp.z0}, strike={mp.strike}, rate={mp.rate}, sigma_ba={mp.sigma_ba}"
        )
    gap = price_subordinated(hs, lambda tau: bachelier_call(mp, tau) - bs_call(mp, tau))
    if hs.spec.family is Family.TEMPERED_STABLE:
        moment = float(np.mean(hs.draws**1.5))
    else:
        moment = inverse_moment(hs.spec.alpha, 1.5, hs.horizon)
    return gap, moment * gap_bound_constant(mp)


def _resolve_horizons(spec, mp: MarketParams, mc: MCConfig, hs: Optional[HorizonSampleSet]):
    if hs is None:
        return draw_horizons(spec, mp.horizon, mc)
    if hs.spec != spec or hs.horizon != mp.horizon:
        raise ValueError("shared horizon draws do not match the requested spec/horizon")
    return hs


def price_subordinated_crr(
    spec: LaplaceExponentSpec,
    mp: MarketParams,
    opt: OptionSpec,
    tc: TreeConfig,
    mc: MCConfig,
    hs: Optional[HorizonSampleSet] = None,
) -> PriceEstimate:
    """Binomial-tree price at each random horizon, averaged over the draws.

    Each tree is recalibrated to its own horizon ``tau = S^(i)(T)``.
    """
    if opt.kind is OptionKind.LOOKBACK_FLOAT_CALL:
        raise UnsupportedOptionError(
            "subordinated CRR does not price lookbacks: their payoff has no linear growth bound"
        )
    t0 = time.perf_counter()
    hs = _resolve_horizons(spec, mp, mc, hs)
    cache: dict = {}
    vals = np.empty(len(hs))
    for i, tau in enumerate(hs.draws):
        key = float(tau)
        if key not in cache:
            try:
                cache[key] = crr_price(mp, opt, tc, key)
            except Exception as exc:
                raise PricerError(i, key, exc) from exc
        vals[i] = cache[key]
    return PriceEstimate.from_samples(vals, time.perf_counter() - t0)


def price_lookback_subordinated_closed(
    spec: LaplaceExponentSpec,
    mp: MarketParams,
    mc: MCConfig,
    hs: Optional[HorizonSampleSet] = None,
) -> PriceEstimate:
    if not mp.rate > 0:
        raise ValueError(f"lookback closed form needs rate > 0, got {mp.rate}")
    t0 = time.perf_counter()
    hs = _resolve_horizons(spec, mp, mc, hs)
    est = price_subordinated(hs, lambda tau: lookback_call_closed(mp, tau))
    est.elapsed = time.perf_counter() - t0
    return est


def lookback_path_payoffs(
    spec: LaplaceExponentSpec,
    mp: MarketParams,
    path_grid_size: int,
    mc: MCConfig,
) -> np.ndarray:
    """Discounted floating-strike lookback payoffs of simulated subordinated GBM paths.

    Paths ``Z(t_j) = z0 exp((r - sigma**2/2) S(t_j) + sigma B(S(t_j)))`` live on a
    uniform grid of ``path_grid_size`` points; the running minimum is tracked
    step by step and the payoff is discounted by ``exp(-r S(T))``.
    """
    if path_grid_size < 2:
        raise ValueError("path grid needs at least 2 points")
    grid = np.linspace(0.0, mp.horizon, path_grid_size)
    base = RngStream(mc.seed)
    delta = mc.delta if mc.delta is not None else (
        default_delta(spec, mp.horizon) if not spec.is_identity else None
    )
    out = np.empty(mc.samples)
    drift = mp.rate - 0.5 * mp.sigma**2
    for b, lo in enumerate(range(0, mc.samples, BLOCK_SIZE)):
        n = min(BLOCK_SIZE, mc.samples - lo)
        clock = sample_inverse_paths(spec, grid, delta, base.derive(0, b), n, mc.max_steps)
        ds = np.diff(clock, axis=1)
        gen = base.derive(1, b).generator()
        dlog = drift * ds + mp.sigma * np.sqrt(ds) * gen.standard_normal(ds.shape)
        log_z = np.empty_like(clock)
        log_z[:, 0] = 0.0
        np.cumsum(dlog, axis=1, out=log_z[:, 1:])
        z = mp.z0 * np.exp(log_z)
        running_min = np.minimum.accumulate(z, axis=1)[:, -1]
        out[lo:lo + n] = np.exp(-mp.rate * clock[:, -1]) * (z[:, -1] - running_min)
    return out


def price_lookback_path_mc(
    spec: LaplaceExponentSpec,
    mp: MarketParams,
    path_grid_size: int = 1000,
    mc: MCConfig = MCConfig(),
) -> PriceEstimate:
    t0 = time.perf_counter()
    vals = lookback_path_payoffs(spec, mp, path_grid_size, mc)
    est = PriceEstimate.from_samples(vals)
    est.elapsed = time.perf_counter() - t0
    return est


def price_european_closed(
    spec: LaplaceExponentSpec,
    mp: MarketParams,
    mc: MCConfig,
    opt: OptionSpec = EURO_CALL,
    hs: Optional[HorizonSampleSet] = None,
) -> PriceEstimate:
    """Subordinated European call/put from the Black-Scholes closed form."""
    pricers = {OptionKind.EURO_CALL: bs_call, OptionKind.EURO_PUT: bs_put}
    if opt.kind not in pricers:
        raise UnsupportedOptionError(f"no closed form for {opt.kind.value}")
    t0 = time.perf_counter()
    hs = _resolve_horizons(spec, mp, mc, hs)
    f = pricers[opt.kind]
    est = price_subordinated(hs, lambda tau: f(mp, tau))
    est.elapsed = time.perf_counter() - t0
    return est
