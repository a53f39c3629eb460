"""Classical Black-Scholes, Bachelier and Cox-Ross-Rubinstein pricers.

Every pricer takes the expiry ``tau`` separately from the market parameters so
it can be evaluated at random operational horizons. The closed forms accept a
scalar or an array of horizons.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import binom

from .errors import CalibrationError, RegimeError, UnsupportedOptionError
from .special_math import SQRT_2PI, normal_cdf, normal_pdf


@dataclass(frozen=True)
class MarketParams:
    """Spot ``z0``, strike, rate, B-S volatility and Bachelier volatility.

    ``sigma_ba`` defaults to ``sigma * z0``, the matching under which the two
    models are compared.
    """

    z0: float
    strike: float
    rate: float
    sigma: float
    horizon: float = 1.0
    sigma_ba: Optional[float] = None

    def __post_init__(self):
        if not self.z0 > 0:
            raise ValueError(f"z0 must be positive, got {self.z0}")
        if not self.strike >= 0:
            raise ValueError(f"strike must be nonnegative, got {self.strike}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.horizon >= 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if self.sigma_ba is None:
            object.__setattr__(self, "sigma_ba", self.sigma * self.z0)
        elif not self.sigma_ba > 0:
            raise ValueError(f"sigma_ba must be positive, got {self.sigma_ba}")

    def in_comparison_regime(self, tol: float = 1e-12) -> bool:
        """At the money, zero rate and ``sigma_ba == sigma * z0``."""
        return (
            abs(self.z0 - self.strike) <= tol * self.z0
            and self.rate == 0.0
            and abs(self.sigma_ba - self.sigma * self.z0) <= tol * self.sigma_ba
        )


class OptionKind(str, enum.Enum):
    EURO_CALL = "euro-call"
    EURO_PUT = "euro-put"
    AMERICAN_PUT = "american-put"
    LOOKBACK_FLOAT_CALL = "lookback-float-call"
    CUSTOM_EUROPEAN = "custom-european"


# Spot-check points for the linear growth bound of custom payoffs.
_GROWTH_PROBE = 10.0 ** np.arange(-3, 7)


@dataclass(frozen=True)
class OptionSpec:
    kind: OptionKind
    payoff_fn: Optional[Callable] = None
    growth_bound_c: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", OptionKind(self.kind))
        if self.kind is OptionKind.CUSTOM_EUROPEAN:
            if self.payoff_fn is None or self.growth_bound_c is None:
                raise ValueError("custom payoff needs payoff_fn and growth_bound_c")
            c = float(self.growth_bound_c)
            if not c > 0:
                raise ValueError("growth bound c must be positive")
            vals = np.array([self.payoff_fn(x) for x in _GROWTH_PROBE], dtype=float)
            bad = vals > c * _GROWTH_PROBE
            if np.any(bad):
                x = _GROWTH_PROBE[np.argmax(bad)]
                raise ValueError(f"payoff violates f(x) <= {c}|x| at x={x:g}")

    @classmethod
    def custom(cls, payoff_fn: Callable, growth_bound_c: float) -> "OptionSpec":
        return cls(OptionKind.CUSTOM_EUROPEAN, payoff_fn, growth_bound_c)

    @property
    def is_american(self) -> bool:
        return self.kind is OptionKind.AMERICAN_PUT

    def payoff(self, z, strike: float):
        """Exercise value at spot ``z`` (vectorised)."""
        z = np.asarray(z, dtype=float)
        if self.kind is OptionKind.EURO_CALL:
            return np.maximum(z - strike, 0.0)
        if self.kind in (OptionKind.EURO_PUT, OptionKind.AMERICAN_PUT):
            return np.maximum(strike - z, 0.0)
        if self.kind is OptionKind.CUSTOM_EUROPEAN:
            return np.asarray(np.vectorize(self.payoff_fn, otypes=[float])(z))
        raise UnsupportedOptionError(f"{self.kind.value} has no spot-only payoff")


EURO_CALL = OptionSpec(OptionKind.EURO_CALL)
EURO_PUT = OptionSpec(OptionKind.EURO_PUT)
AMERICAN_PUT = OptionSpec(OptionKind.AMERICAN_PUT)
LOOKBACK_FLOAT_CALL = OptionSpec(OptionKind.LOOKBACK_FLOAT_CALL)


@dataclass(frozen=True)
class TreeConfig:
    steps: int = 100

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"tree needs a positive integer step count, got {self.steps}")


def _out(tau, value):
    return float(value) if np.ndim(tau) == 0 else value


def _tau(tau) -> np.ndarray:
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("expiry tau must be nonnegative")
    return t


def _bs_d(mp: MarketParams, t: np.ndarray):
    pos = t > 0
    vol = mp.sigma * np.sqrt(np.where(pos, t, 1.0))
    with np.errstate(divide="ignore"):
        d1 = (np.log(np.divide(mp.z0, mp.strike)) + (mp.rate + 0.5 * mp.sigma**2) * np.where(pos, t, 1.0)) / vol
    return pos, d1, d1 - vol


def bs_call(mp: MarketParams, tau):
    t = _tau(tau)
    pos, d1, d2 = _bs_d(mp, t)
    val = mp.z0 * normal_cdf(d1) - mp.strike * np.exp(-mp.rate * t) * normal_cdf(d2)
    val = np.where(pos, np.maximum(val, 0.0), max(mp.z0 - mp.strike, 0.0))
    return _out(tau, val)


def bs_put(mp: MarketParams, tau):
    t = _tau(tau)
    pos, d1, d2 = _bs_d(mp, t)
    val = mp.strike * np.exp(-mp.rate * t) * normal_cdf(-d2) - mp.z0 * normal_cdf(-d1)
    val = np.where(pos, np.maximum(val, 0.0), max(mp.strike - mp.z0, 0.0))
    return _out(tau, val)


def bachelier_call(mp: MarketParams, tau):
    """Zero-rate Bachelier call with normal volatility ``mp.sigma_ba``.

    ``C = (z0 - K) Phi(d) + sigma_ba sqrt(tau) phi(d)``, ``d = (z0 - K) / (sigma_ba sqrt(tau))``.
    At the money this is ``sigma_ba * sqrt(tau / (2 pi))``.
    """
    if mp.rate != 0.0:
        raise RegimeError(f"Bachelier pricer supports rate=0 only, got rate={mp.rate}")
    t = _tau(tau)
    pos = t > 0
    vol = mp.sigma_ba * np.sqrt(np.where(pos, t, 1.0))
    m = mp.z0 - mp.strike
    if m == 0.0:
        val = vol / SQRT_2PI
    else:
        d = m / vol
        val = m * normal_cdf(d) + vol * normal_pdf(d)
    val = np.where(pos, val, max(m, 0.0))
    return _out(tau, val)


def lookback_call_closed(mp: MarketParams, tau):
    """Floating-strike lookback call (pays terminal minus running minimum).

    ``C = z0 (1 + k) Phi(a1) - z0 e^{-r tau} (1 - k) Phi(a2) - z0 k`` with
    ``k = sigma**2 / (2 r)``, ``a1 = (r/sigma + sigma/2) sqrt(tau)``,
    ``a2 = (r/sigma - sigma/2) sqrt(tau)``.
    """
    r, s, z0 = mp.rate, mp.sigma, mp.z0
    if not r > 0:
        raise ValueError(f"lookback closed form needs rate > 0, got {r}")
    t = _tau(tau)
    k = s * s / (2.0 * r)
    rt = np.sqrt(t)
    a1 = (r / s + s / 2.0) * rt
    a2 = (r / s - s / 2.0) * rt
    val = z0 * (1.0 + k) * normal_cdf(a1) - z0 * np.exp(-r * t) * (1.0 - k) * normal_cdf(a2) - z0 * k
    return _out(tau, np.maximum(val, 0.0))


def crr_factors(mp: MarketParams, n: int, tau: float):
    """Per-step ``(u, d, R, q)`` of an ``n``-step CRR tree over ``[0, tau]``.

    Growth uses ``R = exp(r tau / n)`` rather than ``(1 + r)**(1/n)`` so that the
    tree converges to the Black-Scholes price at horizon ``tau`` for any ``tau``.
    """
    dt = tau / n
    u = math.exp(mp.sigma * math.sqrt(dt))
    d = 1.0 / u
    growth = math.exp(mp.rate * dt)
    q = (growth - d) / (u - d)
    if not 0.0 <= q <= 1.0:
        raise CalibrationError(f"risk-neutral probability q={q:.6g} outside [0, 1] for n={n}, tau={tau}")
    return u, d, growth, q


def _terminal_spots(mp: MarketParams, n: int, u: float) -> np.ndarray:
    j = np.arange(n + 1)
    return mp.z0 * np.exp((2 * j - n) * math.log(u))


def crr_backward_induction(mp: MarketParams, opt: OptionSpec, n: int, tau: float) -> float:
    """Roll the payoff back through the tree, exercising early for American kinds."""
    u, d, growth, q = crr_factors(mp, n, tau)
    disc = 1.0 / growth
    spots = _terminal_spots(mp, n, u)
    v = opt.payoff(spots, mp.strike)
    for i in range(n - 1, -1, -1):
        v = disc * (q * v[1:] + (1.0 - q) * v[:-1])
        if opt.is_american:
            spots = spots[1:] * d
            np.maximum(v, opt.payoff(spots, mp.strike), out=v)
    return float(v[0])


def crr_price(mp: MarketParams, opt: OptionSpec, tc: TreeConfig, tau: float) -> float:
    """CRR price with ``tc.steps`` steps over ``[0, tau]``.

    European kinds use the terminal binomial sum
    ``R**-n sum_j C(n, j) q**j (1 - q)**(n - j) f(z0 u**j d**(n - j))``;
    the American put uses backward induction with early exercise.
    """
    if opt.kind is OptionKind.LOOKBACK_FLOAT_CALL:
        raise UnsupportedOptionError(
            "lookback payoffs break the linear growth bound needed for tree convergence"
        )
    tau = float(tau)
    if tau < 0:
        raise ValueError("expiry tau must be nonnegative")
    if tau == 0.0:
        return float(opt.payoff(mp.z0, mp.strike))
    n = int(tc.steps)
    if opt.is_american:
        return crr_backward_induction(mp, opt, n, tau)
    u, _, growth, q = crr_factors(mp, n, tau)
    weights = binom.pmf(np.arange(n + 1), n, q)
    pay = opt.payoff(_terminal_spots(mp, n, u), mp.strike)
    return float(np.dot(weights, pay) / growth**n)
