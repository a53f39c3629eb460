"""Subordinators and their first-passage inverses.

A subordinator ``U`` is a strictly increasing Levy process with
``E exp(-u U(t)) = exp(-t psi(u))``. Its inverse ``S(t) = inf{tau > 0 : U(tau) > t}``
is the random operational clock driving the subordinated market models.

Two Laplace exponents are supported, plus the degenerate clock ``S(t) = t``:

* alpha-stable: ``psi(u) = u**alpha``
* tempered stable: ``psi(u) = (u + lam)**alpha - lam**alpha``

Inverse values are approximated on an operational-time lattice of step ``delta``
by the staircase ``S_delta(t) = delta * (min{k >= 1 : U(k delta) > t} - 1)``,
which satisfies ``S_delta(t) <= S(t) <= S_delta(t) + delta`` pathwise.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ResourceError
from .special_math import gamma_fn

DEFAULT_MAX_STEPS = 10**8
DEFAULT_TARGET_STEPS = 10_000
# Minimum acceptance probability of one tempering rejection round.
_MIN_ACCEPT = 0.1
# Upper bound on elements in one block of simulated increments.
_BLOCK_ELEMS = 1 << 21


class Family(str, enum.Enum):
    ALPHA_STABLE = "alpha-stable"
    TEMPERED_STABLE = "tempered-stable"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LaplaceExponentSpec:
    """Parametric Laplace exponent identifying a subordinator.

    ``alpha = 1`` is only reachable through the identity family; use
    :meth:`from_params` to map ``alpha == 1`` there automatically. A tempered
    spec with ``lam == 0`` is normalised to the alpha-stable family.
    """

    family: Family
    alpha: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        alpha, lam = float(self.alpha), float(self.lam)
        if fam is Family.IDENTITY:
            if alpha != 1.0 or lam != 0.0:
                raise ValueError("identity family requires alpha=1 and lam=0")
        else:
            if not 0.0 < alpha < 1.0:
                raise ValueError(
                    f"{fam.value} subordinator needs alpha in (0, 1), got {alpha}; "
                    "use the identity family for alpha=1"
                )
            if not lam >= 0.0 or not math.isfinite(lam):
                raise ValueError(f"tempering lam must be finite and >= 0, got {lam}")
            if fam is Family.ALPHA_STABLE and lam != 0.0:
                raise ValueError("alpha-stable family takes no tempering parameter")
            if fam is Family.TEMPERED_STABLE and lam == 0.0:
                object.__setattr__(self, "family", Family.ALPHA_STABLE)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def identity(cls) -> "LaplaceExponentSpec":
        return cls(Family.IDENTITY)

    @classmethod
    def stable(cls, alpha: float) -> "LaplaceExponentSpec":
        return cls(Family.ALPHA_STABLE, alpha)

    @classmethod
    def tempered(cls, alpha: float, lam: float) -> "LaplaceExponentSpec":
        return cls(Family.TEMPERED_STABLE, alpha, lam)

    @classmethod
    def from_params(cls, alpha: float, lam: float = 0.0) -> "LaplaceExponentSpec":
        if alpha == 1.0:
            if lam != 0.0:
                raise ValueError("tempering is meaningless at alpha=1")
            return cls.identity()
        if lam > 0.0:
            return cls.tempered(alpha, lam)
        return cls.stable(alpha)

    @property
    def is_identity(self) -> bool:
        return self.family is Family.IDENTITY

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        if self.family is Family.IDENTITY:
            out = u
        elif self.family is Family.ALPHA_STABLE:
            out = u**self.alpha
        else:
            out = (u + self.lam) ** self.alpha - self.lam**self.alpha
        return float(out) if out.ndim == 0 else out

    def mean_inverse_hint(self, t: float) -> float:
        """Rough size of ``E S(t)``; used only to pick default step sizes."""
        if self.is_identity:
            return t
        stable_mean = t**self.alpha / gamma_fn(1.0 + self.alpha)
        if self.family is Family.TEMPERED_STABLE:
            # Long-time renewal rate 1 / psi'(0).
            return max(stable_mean, t / (self.alpha * self.lam ** (self.alpha - 1.0)))
        return stable_mean


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Every call to :meth:`generator` restarts the same sequence, so sampling
    functions are pure given the stream value.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def derive(self, *keys: int) -> "RngStream":
        """Child stream for a tuple of integer keys, stable across runs."""
        ss = np.random.SeedSequence([int(self.stream_id), *map(int, keys)])
        sid = int(ss.generate_state(1, np.uint64)[0])
        return RngStream(self.seed, sid)


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


# ----------------------------------------------------------------------------
# Increment samplers
# ----------------------------------------------------------------------------


def kanter_stable(alpha: float, u_angle, u_exp):
    """Unit positive stable variate from two uniforms on (0, 1).

    Kanter's representation (the skewed Chambers-Mallows-Stuck case): with
    ``V = pi * u_angle`` and ``E = -log(u_exp)``,

        X = sin(alpha V) / sin(V)**(1/alpha) * (sin((1 - alpha) V) / E)**((1 - alpha)/alpha)

    has Laplace transform ``exp(-u**alpha)``.
    """
    v = np.pi * np.asarray(u_angle, dtype=float)
    e = -np.log(np.asarray(u_exp, dtype=float))
    a = alpha
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        x = (
            np.sin(a * v)
            / np.sin(v) ** (1.0 / a)
            * (np.sin((1.0 - a) * v) / e) ** ((1.0 - a) / a)
        )
    return x


def _centred_uniform(gen: np.random.Generator, size) -> np.ndarray:
    # Midpoints of the 2**-53 lattice: symmetric under u -> 1 - u, never 0 or 1.
    return (np.floor(gen.random(size) * 2.0**53) + 0.5) / 2.0**53


def _unit_stable(alpha: float, gen: np.random.Generator, size) -> np.ndarray:
    return kanter_stable(alpha, _centred_uniform(gen, size), _centred_uniform(gen, size))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"stable sampler needs alpha in (0, 1), got {alpha}")


def sample_stable_subordinator_increment(alpha: float, dt: float, rng: RngLike, size=None):
    """Draw ``U(dt)`` for the alpha-stable subordinator, i.e. ``dt**(1/alpha) * U(1)``."""
    _check_alpha(alpha)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    gen = as_generator(rng)
    x = dt ** (1.0 / alpha) * _unit_stable(alpha, gen, size)
    return float(x) if size is None else x


def sample_tempered_increment(alpha: float, lam: float, dt: float, rng: RngLike, size=None):
    """Draw ``U(dt)`` for the tempered stable subordinator.

    Stable draws ``X`` are accepted with probability ``exp(-lam X)``. The step is
    split into ``p`` equal pieces so that each piece is accepted with probability
    ``exp(-dt/p * lam**alpha) >= 0.1``; the accepted pieces are summed.
    """
    _check_alpha(alpha)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not lam > 0.0:
        raise ValueError(f"tempering lam must be positive, got {lam}")
    gen = as_generator(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    x = _tempered(alpha, lam, dt, gen, shape)
    return float(x) if size is None else x


def _tempered(alpha: float, lam: float, dt: float, gen: np.random.Generator, shape: tuple) -> np.ndarray:
    pieces = max(1, math.ceil(dt * lam**alpha / -math.log(_MIN_ACCEPT)))
    sub_dt = dt / pieces
    scale = sub_dt ** (1.0 / alpha)
    n = int(np.prod(shape, dtype=np.int64)) * pieces
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        cand = scale * _unit_stable(alpha, gen, pending.size)
        ok = gen.random(pending.size) < np.exp(-lam * cand)
        out[pending[ok]] = cand[ok]
        pending = pending[~ok]
    return out.reshape(*shape, pieces).sum(axis=-1) if shape else out.sum()


def _increments(spec: LaplaceExponentSpec, dt: float, gen: np.random.Generator, shape) -> np.ndarray:
    if spec.family is Family.ALPHA_STABLE:
        return dt ** (1.0 / spec.alpha) * _unit_stable(spec.alpha, gen, shape)
    if spec.family is Family.TEMPERED_STABLE:
        return _tempered(spec.alpha, spec.lam, dt, gen, shape)
    return np.full(shape, dt)


# ----------------------------------------------------------------------------
# Paths
# ----------------------------------------------------------------------------


@dataclass
class SubordinatorPath:
    """Values ``U(k * step)`` for ``k = 0, 1, ...`` with ``values[0] == 0``."""

    step: float
    values: np.ndarray

    def first_passage(self, t):
        """Staircase inverse ``step * (min{k >= 1 : U(k step) > t} - 1)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t > self.values[-1]):
            raise ValueError("path does not reach the requested time")
        k = np.searchsorted(self.values, t, side="right")
        out = self.step * (k - 1)
        return float(out) if out.ndim == 0 else out

    def inverse(self, times: Sequence[float]) -> "InversePath":
        times = np.asarray(times, dtype=float)
        return InversePath(times, self.first_passage(times))


@dataclass
class InversePath:
    times: np.ndarray
    values: np.ndarray = field(repr=False)

    def to_csv(self, path: Union[str, Path]) -> None:
        write_path_csv(path, self.times, self.values)


def write_path_csv(path: Union[str, Path], times, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "S_t"])
        for t, s in zip(times, values):
            w.writerow([repr(float(t)), repr(float(s))])


def default_delta(spec: LaplaceExponentSpec, t: float, target_steps: int = DEFAULT_TARGET_STEPS) -> float:
    """Operational-time step giving about ``target_steps`` steps up to ``S(t)``."""
    return spec.mean_inverse_hint(t) / target_steps


def sample_subordinator_path(
    spec: LaplaceExponentSpec,
    horizon: float,
    delta: float,
    rng: RngLike,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> SubordinatorPath:
    """Simulate ``U`` on the lattice ``k * delta`` until it first exceeds ``horizon``."""
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    gen = as_generator(rng)
    if spec.is_identity:
        n = math.floor(horizon / delta) + 1
        return SubordinatorPath(delta, delta * np.arange(n + 1, dtype=float))
    chunk = int(min(max(64, 1.25 * spec.mean_inverse_hint(horizon) / delta), _BLOCK_ELEMS))
    parts = [np.zeros(1)]
    total, steps = 0.0, 0
    while total <= horizon:
        if steps >= max_steps:
            raise ResourceError(f"subordinator walk exceeded {max_steps} steps before reaching t={horizon}")
        take = min(chunk, max_steps - steps)
        inc = _increments(spec, delta, gen, (take,))
        cum = total + np.cumsum(inc)
        hit = np.searchsorted(cum, horizon, side="right")
        if hit < take:
            cum = cum[: hit + 1]
        parts.append(cum)
        total = cum[-1]
        steps += cum.size
    return SubordinatorPath(delta, np.concatenate(parts))


def _walk_first_passage(
    spec: LaplaceExponentSpec,
    t: float,
    delta: float,
    gen: np.random.Generator,
    n: int,
    max_steps: int,
) -> np.ndarray:
    """Vectorised staircase walk for ``n`` independent samples of ``S_delta(t)``."""
    steps_hint = spec.mean_inverse_hint(t) / delta
    level = np.zeros(n)
    count = np.zeros(n, dtype=np.int64)
    out = np.empty(n)
    active = np.arange(n)
    while active.size:
        if count[active].max() >= max_steps:
            raise ResourceError(f"first-passage walk exceeded {max_steps} steps at t={t}")
        chunk = int(min(max(16, 1.25 * steps_hint), max(1, _BLOCK_ELEMS // active.size)))
        chunk = min(chunk, max_steps - int(count[active].max()))
        cum = level[active, None] + np.cumsum(_increments(spec, delta, gen, (active.size, chunk)), axis=1)
        crossed = cum > t
        done = crossed[:, -1]
        first = np.argmax(crossed, axis=1)
        idx = active[done]
        # Index k of the first lattice point above t is count + first + 1.
        out[idx] = delta * (count[idx] + first[done])
        level[active] = cum[:, -1]
        count[active] += chunk
        active = active[~done]
    return out


def sample_inverse_at(
    spec: LaplaceExponentSpec,
    t: float,
    delta: float | None,
    rng: RngLike,
    size=None,
    *,
    method: str = "auto",
    max_steps: int = DEFAULT_MAX_STEPS,
    antithetic: bool = False,
):
    """Draw the staircase inverse ``S_delta(t)``.

    ``method="walk"`` runs the explicit first-passage walk on the lattice.
    ``method="auto"`` uses it for the tempered family; for the alpha-stable
    family it draws ``S(t) = (t / U(1))**alpha`` exactly and floors to the
    lattice, which has the same law as the walk because
    ``P(S_delta(t) >= k delta) = P(U(k delta) <= t) = P(S(t) >= k delta)``.
    ``antithetic`` pairs the uniforms ``u`` and ``1 - u`` (exact route only).
    """
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    if method not in ("auto", "walk", "exact"):
        raise ValueError(f"unknown method {method!r}")
    n = 1 if size is None else int(size)
    if spec.is_identity:
        out = np.full(n, float(t))
        return float(t) if size is None else out
    if delta is None:
        delta = default_delta(spec, t)
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    gen = as_generator(rng)
    exact = spec.family is Family.ALPHA_STABLE and method != "walk"
    if method == "exact" and not exact:
        raise ValueError("exact inversion is available for the alpha-stable family only")
    if antithetic and not exact:
        raise ValueError("antithetic sampling needs the exact alpha-stable route")
    if exact:
        if antithetic:
            half = (n + 1) // 2
            ua, ue = _centred_uniform(gen, half), _centred_uniform(gen, half)
            ua = np.concatenate([ua, 1.0 - ua])[:n]
            ue = np.concatenate([ue, 1.0 - ue])[:n]
            x = kanter_stable(spec.alpha, ua, ue)
        else:
            x = _unit_stable(spec.alpha, gen, n)
        s = (t / x) ** spec.alpha
        if np.any(s / delta >= max_steps):
            raise ResourceError(f"inverse value needs more than {max_steps} lattice steps at t={t}")
        out = delta * np.floor(s / delta)
    else:
        out = _walk_first_passage(spec, t, delta, gen, n, max_steps)
    return float(out[0]) if size is None else out


def sample_inverse_path(
    spec: LaplaceExponentSpec,
    grid: Sequence[float],
    delta: float | None,
    rng: RngLike,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> InversePath:
    """One inverse-subordinator trajectory on ``grid``, driven by a single subordinator path."""
    grid = _check_grid(grid)
    if spec.is_identity:
        return InversePath(grid, grid.copy())
    horizon = float(grid[-1])
    if delta is None:
        delta = default_delta(spec, max(horizon, 1e-12))
    path = sample_subordinator_path(spec, horizon, delta, rng, max_steps)
    return path.inverse(grid)


def sample_inverse_paths(
    spec: LaplaceExponentSpec,
    grid: Sequence[float],
    delta: float | None,
    rng: RngLike,
    count: int,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> np.ndarray:
    """``count`` independent trajectories on ``grid`` as a ``(count, len(grid))`` array."""
    grid = _check_grid(grid)
    if spec.is_identity:
        return np.tile(grid, (count, 1))
    horizon = float(grid[-1])
    if delta is None:
        delta = default_delta(spec, max(horizon, 1e-12))
    gen = as_generator(rng)
    out = np.empty((count, grid.size))
    hint = spec.mean_inverse_hint(horizon) / delta
    width = int(max(32, 1.3 * hint + 8 * math.sqrt(hint)))
    rows = max(1, _BLOCK_ELEMS // width)
    for lo in range(0, count, rows):
        hi = min(count, lo + rows)
        cum = np.cumsum(_increments(spec, delta, gen, (hi - lo, width)), axis=1)
        for i in range(hi - lo):
            row = cum[i]
            if row[-1] <= horizon:
                tail = sample_subordinator_path(spec, horizon - row[-1], delta, gen, max_steps - width)
                row = np.concatenate([row, row[-1] + tail.values[1:]])
            # row[j] = U((j + 1) delta), so j crossings below t give S = j delta.
            out[lo + i] = delta * np.searchsorted(row, grid, side="right")
    return out


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if g[0] < 0.0 or np.any(np.diff(g) <= 0.0):
        raise ValueError("grid must be strictly increasing and start at t >= 0")
    return g


def inverse_moment(alpha: float, k: float, t: float) -> float:
    """``E S(t)**k = t**(k alpha) Gamma(k + 1) / Gamma(k alpha + 1)`` for the inverse alpha-stable clock."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not k > 0.0:
        raise ValueError(f"moment order must be positive, got {k}")
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    return t ** (k * alpha) * gamma_fn(k + 1.0) / gamma_fn(k * alpha + 1.0)
