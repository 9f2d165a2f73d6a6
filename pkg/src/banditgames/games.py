"""Core game types: action sets, strategy profiles, cost oracles and noise.

A game is a tuple of per-player compact convex action sets together with a
cost oracle ``cost(i, x)`` over full strategy profiles. Profiles are tuples of
1-d float arrays, one per player. Optional exact gradients feed the baselines
and the metrics; the bandit algorithms only ever call :func:`observe_bandit_cost`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateRangeError, DomainError, UnsupportedError, UsageError

SET_TOL = 1e-12

Profile = tuple  # tuple[np.ndarray, ...], one vector per player


# ---------------------------------------------------------------------------
# Action sets
# ---------------------------------------------------------------------------


class ActionSet(ABC):
    """A compact convex subset of R^d with projection and sampling."""

    kind: str = ""

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @property
    @abstractmethod
    def diameter(self) -> float: ...

    @abstractmethod
    def contains(self, x: np.ndarray, tol: float = SET_TOL) -> bool: ...

    @abstractmethod
    def project(self, y: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the set."""

    @abstractmethod
    def center(self) -> np.ndarray:
        """Analytic center of the set's natural barrier."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` points from the set, returned with shape (size, dim)."""

    def vertices(self) -> Optional[np.ndarray]:
        """Extreme points when the set is a polytope with few of them."""
        return None


@dataclass(frozen=True, eq=False)
class Box(ActionSet):
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray
    kind = "box"

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise UsageError("box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise UsageError("box requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x, tol=SET_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.shape == self.lower.shape and np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def project(self, y):
        return np.clip(np.asarray(y, dtype=float), self.lower, self.upper)

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng, size):
        return self.lower + (self.upper - self.lower) * rng.random((size, self.dim))

    def vertices(self):
        if self.dim > 10:
            return None
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
        return self.lower + corners * (self.upper - self.lower)


@dataclass(frozen=True, eq=False)
class Ball(ActionSet):
    """Euclidean ball of a given center and radius."""

    center_point: np.ndarray
    radius: float = 1.0
    kind = "ball"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center_point, dtype=float))
        if c.ndim != 1:
            raise UsageError("ball center must be a vector")
        if not self.radius > 0:
            raise UsageError("ball radius must be positive")
        object.__setattr__(self, "center_point", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center_point.size

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x, tol=SET_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.shape == self.center_point.shape and np.linalg.norm(x - self.center_point) <= self.radius + tol)

    def project(self, y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y - self.center_point)
        if r <= self.radius:
            return y.copy()
        return self.center_point + (y - self.center_point) * (self.radius / r)

    def center(self):
        return self.center_point.copy()

    def sample(self, rng, size):
        g = rng.standard_normal((size, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = self.radius * rng.random(size) ** (1.0 / self.dim)
        return self.center_point + g * r[:, None]


@dataclass(frozen=True)
class Simplex(ActionSet):
    """Probability simplex in R^d, optionally clipped to ``x_a >= floor``."""

    size: int
    floor: float = 0.0
    kind = "simplex"

    def __post_init__(self):
        if int(self.size) < 1:
            raise UsageError("simplex needs at least one action")
        object.__setattr__(self, "size", int(self.size))
        if self.floor < 0 or self.floor * self.size > 1 + SET_TOL:
            raise UsageError("simplex floor must satisfy 0 <= floor * dim <= 1")

    @property
    def dim(self) -> int:
        return self.size

    @property
    def free_mass(self) -> float:
        return 1.0 - self.floor * self.size

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) * self.free_mass if self.size > 1 else 0.0

    def contains(self, x, tol=SET_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.shape == (self.size,) and abs(x.sum() - 1.0) <= tol and np.all(x >= self.floor - tol))

    def project(self, y):
        y = np.asarray(y, dtype=float)
        return self.floor + project_scaled_simplex(y - self.floor, self.free_mass)

    def center(self):
        return np.full(self.size, 1.0 / self.size)

    def sample(self, rng, size):
        return self.floor + self.free_mass * rng.dirichlet(np.ones(self.size), size)

    def vertices(self):
        return self.floor + self.free_mass * np.eye(self.size)


def project_scaled_simplex(v: np.ndarray, mass: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x >= 0, sum(x) = mass}`` by sorting."""
    if mass <= 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - mass
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


NOISE_KINDS = ("none", "uniform", "gaussian-truncated")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean additive noise on observed costs, bounded by ``sigma``.

    ``uniform`` draws from U(-sigma, sigma). ``gaussian-truncated`` draws a
    normal with standard deviation sigma/2 and redraws anything beyond sigma.
    """

    sigma: float = 0.0
    distribution: str = "uniform"

    def __post_init__(self):
        if self.sigma < 0:
            raise UsageError("noise sigma must be nonnegative")
        if self.distribution not in NOISE_KINDS:
            raise UsageError(f"unknown noise distribution {self.distribution!r}")

    @property
    def active(self) -> bool:
        return self.sigma > 0 and self.distribution != "none"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if not self.active:
            return np.zeros(size)
        if self.distribution == "uniform":
            return rng.uniform(-self.sigma, self.sigma, size)
        eps = rng.normal(0.0, 0.5 * self.sigma, size)
        bad = np.abs(eps) > self.sigma
        while np.any(bad):
            eps[bad] = rng.normal(0.0, 0.5 * self.sigma, int(bad.sum()))
            bad = np.abs(eps) > self.sigma
        return eps


# ---------------------------------------------------------------------------
# Games
# ---------------------------------------------------------------------------


class Game(ABC):
    """An n-player continuous game with per-player cost oracles.

    Subclasses provide ``sets`` and ``cost``; exact gradients are optional.
    ``cost_batch`` evaluates one player's cost along a whole trajectory and
    may be overridden with a vectorized version.
    """

    name: str = "game"
    monotone: bool = False

    @property
    @abstractmethod
    def sets(self) -> tuple: ...

    @property
    def n(self) -> int:
        return len(self.sets)

    @property
    def smoothness(self) -> tuple:
        return tuple(math.inf for _ in self.sets)

    @property
    def gradient_bound(self) -> float:
        return math.inf

    @property
    def cost_range(self) -> Optional[tuple]:
        return None

    @property
    def has_gradient(self) -> bool:
        return False

    @abstractmethod
    def cost(self, i: int, x: Profile) -> float: ...

    def gradient(self, i: int, x: Profile) -> np.ndarray:
        raise UnsupportedError(f"{self.name} has no exact gradient oracle")

    def cost_batch(self, i: int, xs: Sequence[np.ndarray]) -> np.ndarray:
        """Player ``i``'s cost at each row of the stacked profiles ``xs[j]`` of shape (T, d_j)."""
        T = xs[0].shape[0]
        return np.array([self.cost(i, tuple(x[t] for x in xs)) for t in range(T)])

    def gradient_batch(self, i: int, xs: Sequence[np.ndarray]) -> np.ndarray:
        T = xs[0].shape[0]
        return np.array([self.gradient(i, tuple(x[t] for x in xs)) for t in range(T)])

    def kernel_model(self):
        """Compiled cost description for the fast loop, or None."""
        return None

    def is_feasible(self, x: Profile, tol: float = SET_TOL) -> bool:
        return len(x) == self.n and all(s.contains(xi, tol) for s, xi in zip(self.sets, x))

    def center_profile(self) -> Profile:
        return tuple(s.center() for s in self.sets)

    def sample_profiles(self, rng: np.random.Generator, size: int) -> list:
        return [s.sample(rng, size) for s in self.sets]


@dataclass(frozen=True, eq=False)
class FunctionGame(Game):
    """A game built from plain Python callables.

    ``cost_fn(i, x)`` returns player i's cost at profile ``x``; the optional
    ``gradient_fn(i, x)`` returns the gradient in player i's own action.
    """

    action_sets: tuple
    cost_fn: Callable
    gradient_fn: Optional[Callable] = None
    name: str = "custom"
    monotone: bool = False
    ell: Optional[tuple] = None
    grad_bound: float = math.inf
    range_record: Optional[tuple] = None

    @property
    def sets(self):
        return tuple(self.action_sets)

    @property
    def smoothness(self):
        return self.ell if self.ell is not None else super().smoothness

    @property
    def gradient_bound(self):
        return self.grad_bound

    @property
    def cost_range(self):
        return self.range_record

    @property
    def has_gradient(self):
        return self.gradient_fn is not None

    def cost(self, i, x):
        return float(self.cost_fn(i, x))

    def gradient(self, i, x):
        if self.gradient_fn is None:
            return super().gradient(i, x)
        return np.asarray(self.gradient_fn(i, x), dtype=float)


@dataclass(frozen=True, eq=False)
class NormalizedGame(Game):
    """Affine rescaling ``(c - lo) / (hi - lo)`` of another game's costs."""

    base: Game
    lo: float
    hi: float
    provenance: str = "declared"

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DegenerateRangeError("cost range must be finite")
        if not self.hi > self.lo:
            raise DegenerateRangeError(f"degenerate cost range lo={self.lo}, hi={self.hi}")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def name(self):
        return self.base.name

    @property
    def monotone(self):
        return self.base.monotone

    @property
    def sets(self):
        return self.base.sets

    @property
    def smoothness(self):
        return tuple(l / self.width for l in self.base.smoothness)

    @property
    def gradient_bound(self):
        return self.base.gradient_bound / self.width

    @property
    def cost_range(self):
        return (0.0, 1.0)

    @property
    def has_gradient(self):
        return self.base.has_gradient

    @property
    def kappa(self):
        k = getattr(self.base, "kappa", None)
        return None if k is None else k / self.width

    def cost(self, i, x):
        return (self.base.cost(i, x) - self.lo) / self.width

    def gradient(self, i, x):
        return self.base.gradient(i, x) / self.width

    def cost_batch(self, i, xs):
        return (self.base.cost_batch(i, xs) - self.lo) / self.width

    def gradient_batch(self, i, xs):
        return self.base.gradient_batch(i, xs) / self.width

    def to_original(self, value):
        """Map a normalized cost back to original units."""
        return self.lo + self.width * np.asarray(value)

    def kernel_model(self):
        model = self.base.kernel_model()
        return None if model is None else model.rescaled(self.lo, self.hi)

    def __getattr__(self, item):
        # expose library-specific attributes (params, A, nash, ...) of the base
        if item.startswith("__") or item == "base":
            raise AttributeError(item)
        return getattr(self.base, item)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def as_profile(x) -> Profile:
    """Coerce a sequence of vectors into a profile of float arrays."""
    return tuple(np.atleast_1d(np.asarray(xi, dtype=float)) for xi in x)


def _checked(game: Game, i: int, x) -> Profile:
    if not 0 <= i < game.n:
        raise UsageError(f"player index {i} out of range for {game.n} players")
    x = as_profile(x)
    if not game.is_feasible(x):
        raise DomainError("strategy profile is not feasible")
    return x


def evaluate_cost(game: Game, i: int, x) -> float:
    """Exact cost of player ``i`` at the feasible profile ``x``."""
    return game.cost(i, _checked(game, i, x))


def evaluate_gradient(game: Game, i: int, x) -> np.ndarray:
    """Exact gradient of player ``i``'s cost in its own action."""
    x = _checked(game, i, x)
    if not game.has_gradient:
        raise UnsupportedError(f"{game.name} has no exact gradient oracle")
    return game.gradient(i, x)


def observe_bandit_cost(game: Game, i: int, x, noise: NoiseSpec, rng: np.random.Generator) -> float:
    """The scalar cost a player sees after playing ``x``: exact cost plus noise."""
    c = evaluate_cost(game, i, x)
    if not noise.active:
        return c
    return c + float(noise.sample(rng, 1)[0])


def operator(game: Game, x: Profile) -> np.ndarray:
    """Stacked gradient operator F(x) = [grad_i c_i(x)]_i as one flat vector."""
    return np.concatenate([game.gradient(i, x) for i in range(game.n)])


def check_monotonicity(game: Game, samples: int, rng: np.random.Generator) -> float:
    """Minimum of <F(x) - F(y), x - y> over ``samples`` random feasible pairs."""
    if not game.has_gradient:
        raise UnsupportedError(f"{game.name} has no exact gradient oracle")
    xs = game.sample_profiles(rng, samples)
    ys = game.sample_profiles(rng, samples)
    fx = np.concatenate([game.gradient_batch(i, xs) for i in range(game.n)], axis=1)
    fy = np.concatenate([game.gradient_batch(i, ys) for i in range(game.n)], axis=1)
    diff = np.concatenate(xs, axis=1) - np.concatenate(ys, axis=1)
    return float(np.min(np.sum((fx - fy) * diff, axis=1)))


def estimate_cost_range(game: Game, rng: np.random.Generator, samples: int = 20000) -> tuple:
    """Sampled (lo, hi) over random profiles and set vertices."""
    xs = game.sample_profiles(rng, samples)
    vals = [game.cost_batch(i, xs) for i in range(game.n)]
    lo = min(float(np.min(v)) for v in vals)
    hi = max(float(np.max(v)) for v in vals)
    return lo, hi


def normalize_costs(game: Game, cost_range: Optional[tuple] = None, rng: Optional[np.random.Generator] = None) -> NormalizedGame:
    """Wrap ``game`` so its costs land in [0, 1].

    The range comes from the argument, then from the game's own record, and
    is otherwise estimated by sampling (``provenance='sampled'``).
    """
    provenance = "declared"
    if cost_range is None:
        cost_range = game.cost_range
    if cost_range is None:
        cost_range = estimate_cost_range(game, rng if rng is not None else np.random.default_rng(0))
        provenance = "sampled"
    lo, hi = (float(v) for v in cost_range)
    return NormalizedGame(game, lo, hi, provenance)
