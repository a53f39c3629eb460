"""Finite differences for time-fractional call-price equations.

Solves, in time-to-expiry ``t`` with Caputo derivative of order ``alpha``,

    D_t^alpha v = 1/2 sigma**2 z**2 v_zz + r z v_z - r v      (Black-Scholes)
    D_t^alpha w = 1/2 sigma_ba**2 w_zz + r z w_z - r w        (Bachelier)

with ``v(z, 0) = max(z - K, 0)``, zero at the low boundary and linear growth
at the high boundary. The Caputo derivative uses the L1 scheme,

    D^alpha v(t_{n+1}) ~ dt**-alpha / Gamma(2 - alpha) * sum_j b_j (v^{n+1-j} - v^{n-j}),
    b_j = (j + 1)**(1 - alpha) - j**(1 - alpha),

and the spatial operator is weighted ``(1 - theta)`` at the new level and
``theta`` at the old one (``theta = 0`` is fully implicit).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy.interpolate import CubicSpline

from .classical_pricing import MarketParams
from .errors import PdeInstabilityError
from .special_math import gamma_fn


class Coordinate(str, enum.Enum):
    LOG_PRICE = "log-price"
    PRICE = "price"


@dataclass(frozen=True)
class PdeGrid:
    """Space interval, node counts and theta weight.

    ``time_nodes`` counts time levels including ``t = 0``; the step is
    ``T / (time_nodes - 1)``. In log-price coordinates ``x_min``/``x_max`` are
    bounds on ``ln z``.
    """

    x_min: float
    x_max: float
    space_nodes: int
    time_nodes: int
    theta: float = 0.0
    coordinate: Coordinate = Coordinate.LOG_PRICE

    def __post_init__(self):
        object.__setattr__(self, "coordinate", Coordinate(self.coordinate))
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.space_nodes < 3:
            raise ValueError("need at least 3 space nodes")
        if self.time_nodes < 2:
            raise ValueError("need at least 2 time nodes")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")

    @classmethod
    def log_price(cls, mp: MarketParams, time_nodes: int = 120, space_nodes: int = 80,
                  half_width: float | None = None, theta: float = 0.0) -> "PdeGrid":
        """Log-price grid centred on ``ln K`` spanning ``half_width`` each side.

        The default half width is ``max(4.5 sigma sqrt(T), 1.5)``.
        """
        hw = half_width if half_width is not None else max(4.5 * mp.sigma * math.sqrt(max(mp.horizon, 1e-12)), 1.5)
        c = math.log(mp.strike) if mp.strike > 0 else math.log(mp.z0)
        return cls(c - hw, c + hw, space_nodes, time_nodes, theta, Coordinate.LOG_PRICE)

    @classmethod
    def price(cls, mp: MarketParams, time_nodes: int = 120, space_nodes: int = 80,
              half_width: float | None = None, theta: float = 0.0) -> "PdeGrid":
        """Raw-price grid centred on the strike; half width ``8 sigma_ba sqrt(T)`` by default.

        The lower end may be negative: Bachelier prices have Gaussian support.
        """
        hw = half_width if half_width is not None else 8.0 * mp.sigma_ba * math.sqrt(max(mp.horizon, 1e-12))
        return cls(mp.strike - hw, mp.strike + hw, space_nodes, time_nodes, theta, Coordinate.PRICE)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.space_nodes)

    def to_price(self, x):
        return np.exp(x) if self.coordinate is Coordinate.LOG_PRICE else np.asarray(x, dtype=float)

    def from_price(self, z):
        z = np.asarray(z, dtype=float)
        return np.log(z) if self.coordinate is Coordinate.LOG_PRICE else z


@dataclass
class PdeSolution:
    grid: PdeGrid
    times: np.ndarray
    values: np.ndarray = field(repr=False)  # shape (time_nodes, space_nodes)

    @property
    def prices(self) -> np.ndarray:
        return self.grid.to_price(self.grid.nodes)

    def interpolate(self, z: float, t: float | None = None) -> float:
        """Value at spot ``z`` and time-to-expiry ``t`` (default: the last level).

        Cubic spline in space, linear in time.
        """
        x = float(self.grid.from_price(z))
        if not self.grid.x_min <= x <= self.grid.x_max:
            raise ValueError(f"z={z} lies outside the solved domain")
        t = self.times[-1] if t is None else float(t)
        if not self.times[0] <= t <= self.times[-1]:
            raise ValueError(f"t={t} lies outside [0, {self.times[-1]}]")
        k = min(int(np.searchsorted(self.times, t, side="right")) - 1, self.times.size - 2)
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        nodes = self.grid.nodes
        lo = float(CubicSpline(nodes, self.values[k])(x))
        hi = float(CubicSpline(nodes, self.values[k + 1])(x))
        return float((1.0 - w) * lo + w * hi)

    def to_csv(self, path: Union[str, Path]) -> None:
        z = self.prices
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["t", "z", "value"])
            for t, row in zip(self.times, self.values):
                for zi, v in zip(z, row):
                    out.writerow([repr(float(t)), repr(float(zi)), repr(float(v))])


def l1_weights(alpha: float, n: int) -> np.ndarray:
    """``b_j = (j + 1)**(1 - alpha) - j**(1 - alpha)`` for ``j = 0..n-1``."""
    j = np.arange(n, dtype=float)
    b = (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)
    if n:
        b[0] = 1.0  # 0**0 would give 0 at alpha = 1
    return b


def thomas_solve(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"fractional order must lie in (0, 1], got {alpha}")
    return alpha


def _solve(mp: MarketParams, alpha: float, grid: PdeGrid, diffusion, drift) -> PdeSolution:
    """Shared L1 time stepping for ``D^alpha u = diffusion u_xx + drift u_x - r u``."""
    alpha = _check_alpha(alpha)
    T = mp.horizon
    if not T > 0:
        raise ValueError("horizon must be positive")
    x = grid.nodes
    z = grid.to_price(x)
    h = x[1] - x[0]
    steps = grid.time_nodes - 1
    dt = T / steps
    times = np.linspace(0.0, T, grid.time_nodes)
    r, K = mp.rate, mp.strike

    b = l1_weights(alpha, steps)
    mem = dt**-alpha / gamma_fn(2.0 - alpha)

    # Interior operator A u_i = lo u_{i-1} + mid u_i + up u_{i+1}.
    a_i = diffusion[1:-1] / h**2
    c_i = drift[1:-1] / (2.0 * h)
    lo, mid, up = a_i - c_i, -2.0 * a_i - r, a_i + c_i
    th = grid.theta
    sys_lo = -(1.0 - th) * lo
    sys_mid = mem - (1.0 - th) * mid
    sys_up = -(1.0 - th) * up

    def far(t: float) -> float:
        if alpha == 1.0 or r == 0.0:
            return z[-1] - K * math.exp(-r * t)
        return z[-1]

    u = np.empty((grid.time_nodes, x.size))
    u[0] = np.maximum(z - K, 0.0)
    u[0, 0] = 0.0
    diffs = np.empty((steps, x.size))
    for n in range(steps):
        t_new = times[n + 1]
        prev = u[n]
        rhs = mem * prev[1:-1]
        if n:
            # L1 memory: mem * sum_{j=1..n} b_j (u^{n+1-j} - u^{n-j}).
            rhs -= mem * (b[n:0:-1] @ diffs[:n, 1:-1])
        if th:
            rhs += th * (lo * prev[:-2] + mid * prev[1:-1] + up * prev[2:])
        right = far(t_new)
        # lower boundary value is 0
        rhs[-1] -= sys_up[-1] * right
        interior = thomas_solve(sys_lo, sys_mid, sys_up, rhs)
        u[n + 1, 0] = 0.0
        u[n + 1, 1:-1] = interior
        u[n + 1, -1] = right
        diffs[n] = u[n + 1] - prev
        if not np.all(np.isfinite(u[n + 1])) or np.max(np.abs(u[n + 1])) > 10.0 * abs(right):
            raise PdeInstabilityError(
                f"solution blew up at t={t_new:.4g} (|u| > 10x far boundary {right:.4g}); "
                "try theta=0 or a finer time grid"
            )
    return PdeSolution(grid, times, u)


def solve_frac_bs_call(mp: MarketParams, alpha: float, grid: PdeGrid | None = None) -> PdeSolution:
    """Call price under the fractional Black-Scholes equation."""
    if grid is None:
        grid = PdeGrid.log_price(mp)
    x = grid.nodes
    if grid.coordinate is Coordinate.LOG_PRICE:
        s2 = 0.5 * mp.sigma**2
        diffusion = np.full(x.size, s2)
        drift = np.full(x.size, mp.rate - s2)
    else:
        if grid.x_min < 0:
            raise ValueError("Black-Scholes price grid must start at z >= 0")
        diffusion = 0.5 * mp.sigma**2 * x**2
        drift = mp.rate * x
    return _solve(mp, alpha, grid, diffusion, drift)


def solve_frac_bachelier_call(mp: MarketParams, alpha: float, grid: PdeGrid | None = None) -> PdeSolution:
    """Call price under the fractional Bachelier equation (raw price coordinate)."""
    if grid is None:
        grid = PdeGrid.price(mp)
    if grid.coordinate is not Coordinate.PRICE:
        raise ValueError("the Bachelier equation is solved in the price coordinate")
    x = grid.nodes
    diffusion = np.full(x.size, 0.5 * mp.sigma_ba**2)
    drift = mp.rate * x
    return _solve(mp, alpha, grid, diffusion, drift)
