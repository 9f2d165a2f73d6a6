"""Self-concordant barriers, regularizers, Bregman divergences and sphere sampling.

Barriers are evaluated in the coordinates the bandit loop works in. For boxes
and balls these are the ambient coordinates; for a simplex with ``d`` actions
the barrier lives on the first ``d - 1`` coordinates and :class:`PlayerGeometry`
maps between the two.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, UsageError
from .games import ActionSet, Ball, Box, Simplex

EIG_FLOOR = 1e-12


class Barrier(ABC):
    """A nu-self-concordant barrier on the interior of a convex body."""

    nu: float
    dim: int

    @abstractmethod
    def interior(self, x: np.ndarray) -> bool: ...

    @abstractmethod
    def value(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, x: np.ndarray) -> np.ndarray: ...

    def hessian_factor(self, x: np.ndarray) -> np.ndarray:
        """A matrix ``J`` with ``J^T J = hess h(x)``.

        Subclasses return the factor in closed form so the smallest curvature
        directions keep full relative accuracy near the boundary.
        """
        return _factor_from_hessian(self.hessian(x))

    @abstractmethod
    def center(self) -> np.ndarray:
        """Minimizer of the barrier."""

    @abstractmethod
    def minkowski(self, x: np.ndarray) -> float:
        """Minkowski functional of the body about its analytic center."""

    def _require_interior(self, x):
        if not self.interior(x):
            raise DomainError("point is not in the interior of the barrier domain")


@dataclass(frozen=True, eq=False)
class BoxLogBarrier(Barrier):
    """``-sum(log(x - lower)) - sum(log(upper - x))`` with nu = 2d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.atleast_1d(np.asarray(self.lower, dtype=float)))
        object.__setattr__(self, "upper", np.atleast_1d(np.asarray(self.upper, dtype=float)))

    @property
    def dim(self):
        return self.lower.size

    @property
    def nu(self):
        return 2.0 * self.dim

    def interior(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def value(self, x):
        self._require_interior(x)
        return float(-np.sum(np.log(x - self.lower)) - np.sum(np.log(self.upper - x)))

    def gradient(self, x):
        self._require_interior(x)
        return -1.0 / (x - self.lower) + 1.0 / (self.upper - x)

    def hessian(self, x):
        self._require_interior(x)
        return np.diag(1.0 / (x - self.lower) ** 2 + 1.0 / (self.upper - x) ** 2)

    def hessian_factor(self, x):
        self._require_interior(x)
        return np.vstack([np.diag(1.0 / (x - self.lower)), np.diag(1.0 / (self.upper - x))])

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def minkowski(self, x):
        half = 0.5 * (self.upper - self.lower)
        return float(np.max(np.abs(np.asarray(x) - self.center()) / half))


@dataclass(frozen=True, eq=False)
class BallBarrier(Barrier):
    """``-log(1 - |x - c|^2 / r^2)`` with nu = 1."""

    center_point: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center_point", np.atleast_1d(np.asarray(self.center_point, dtype=float)))

    @property
    def dim(self):
        return self.center_point.size

    nu = 1.0

    def _slack(self, x):
        u = (np.asarray(x, dtype=float) - self.center_point) / self.radius
        return u, 1.0 - float(u @ u)

    def interior(self, x):
        return self._slack(x)[1] > 0

    def value(self, x):
        self._require_interior(x)
        return -math.log(self._slack(x)[1])

    def gradient(self, x):
        self._require_interior(x)
        u, s = self._slack(x)
        return 2.0 * u / (s * self.radius)

    def hessian(self, x):
        self._require_interior(x)
        u, s = self._slack(x)
        r2 = self.radius**2
        return 2.0 * np.eye(self.dim) / (s * r2) + 4.0 * np.outer(u, u) / (s * s * r2)

    def hessian_factor(self, x):
        self._require_interior(x)
        u, s = self._slack(x)
        r = self.radius
        return np.vstack([math.sqrt(2.0 / s) / r * np.eye(self.dim), 2.0 * u / (s * r)])

    def center(self):
        return self.center_point.copy()

    def minkowski(self, x):
        return float(np.linalg.norm(np.asarray(x) - self.center_point) / self.radius)


@dataclass(frozen=True)
class SimplexBarrier(Barrier):
    """Log barrier of the (floored) simplex on its first ``size - 1`` coordinates.

    ``h(u) = -sum(log(u_a - floor)) - log(1 - sum(u) - floor)`` with nu = size.
    """

    size: int
    floor: float = 0.0

    @property
    def dim(self):
        return self.size - 1

    @property
    def nu(self):
        return float(self.size)

    def _slacks(self, u):
        u = np.asarray(u, dtype=float)
        return u - self.floor, 1.0 - u.sum() - self.floor

    def interior(self, u):
        s, last = self._slacks(u)
        return bool(np.all(s > 0) and last > 0)

    def value(self, u):
        self._require_interior(u)
        s, last = self._slacks(u)
        return float(-np.sum(np.log(s)) - math.log(last))

    def gradient(self, u):
        self._require_interior(u)
        s, last = self._slacks(u)
        return -1.0 / s + 1.0 / last

    def hessian(self, u):
        self._require_interior(u)
        s, last = self._slacks(u)
        return np.diag(1.0 / s**2) + 1.0 / last**2

    def hessian_factor(self, u):
        self._require_interior(u)
        s, last = self._slacks(u)
        return np.vstack([np.diag(1.0 / s), np.full(self.dim, 1.0 / last)])

    def center(self):
        return np.full(self.dim, 1.0 / self.size)

    def minkowski(self, u):
        full = embed_inverse(np.asarray(u, dtype=float))
        c = 1.0 / self.size
        return float(np.max((c - full) / (c - self.floor)))


def embed_inverse(u: np.ndarray) -> np.ndarray:
    """Full simplex coordinates from the first ``d - 1`` coordinates."""
    return np.append(u, 1.0 - np.sum(u))


# ---------------------------------------------------------------------------
# Regularizers
# ---------------------------------------------------------------------------


class Regularizer(ABC):
    """Convex regularizer with curvature bounds ``mu I <= hess <= zeta I``."""

    mu: float
    zeta: float

    @abstractmethod
    def value(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, x: np.ndarray) -> np.ndarray: ...

    def hessian_factor(self, x: np.ndarray) -> np.ndarray:
        """A matrix ``J`` with ``J^T J = hess p(x)``."""
        return _factor_from_hessian(self.hessian(x))

    def bregman_bound(self, action_set: ActionSet) -> float:
        """Upper bound on the divergence between two points of the set."""
        raise NotImplementedError


@dataclass(frozen=True)
class SquaredEuclidean(Regularizer):
    """``0.5 * weight * |x|^2``."""

    weight: float = 1.0

    @property
    def mu(self):
        return self.weight

    @property
    def zeta(self):
        return self.weight

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.weight * float(x @ x)

    def gradient(self, x):
        return self.weight * np.asarray(x, dtype=float)

    def hessian(self, x):
        return self.weight * np.eye(np.asarray(x).size)

    def hessian_factor(self, x):
        return math.sqrt(self.weight) * np.eye(np.asarray(x).size)

    def bregman_bound(self, action_set):
        return 0.5 * self.weight * action_set.diameter**2


@dataclass(frozen=True)
class LinearRegularizer(Regularizer):
    """``<1, x>``; flat, so only usable where no curvature from p is needed."""

    mu = 0.0
    zeta = 0.0

    def value(self, x):
        return float(np.sum(x))

    def gradient(self, x):
        return np.ones(np.asarray(x).size)

    def hessian(self, x):
        n = np.asarray(x).size
        return np.zeros((n, n))

    def hessian_factor(self, x):
        return np.zeros((0, np.asarray(x).size))

    def bregman_bound(self, action_set):
        return 0.0


@dataclass(frozen=True)
class NegativeEntropy(Regularizer):
    """``sum(x log x)`` on the positive orthant; its divergence on the simplex is KL."""

    mu = 1.0
    zeta = math.inf

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("negative entropy needs nonnegative arguments")
        return float(np.sum(x[x > 0] * np.log(x[x > 0])))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("negative entropy gradient needs positive arguments")
        return np.log(x) + 1.0

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("negative entropy hessian needs positive arguments")
        return np.diag(1.0 / x)

    def hessian_factor(self, x):
        return np.diag(np.sqrt(self.hessian(x).diagonal()))

    def bregman_bound(self, action_set):
        if isinstance(action_set, Simplex) and action_set.floor > 0:
            return math.log(1.0 / action_set.floor)
        return math.inf


def bregman(f, x, y) -> float:
    """``D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(f.value(x) - f.value(y) - f.gradient(y) @ (x - y))


# ---------------------------------------------------------------------------
# Local geometry of the bandit loop
# ---------------------------------------------------------------------------


def local_metric(h: Barrier, p: Regularizer, x: np.ndarray, eta: float, scale: float) -> np.ndarray:
    """``hess h(x) + eta * scale * hess p(x)``."""
    w = eta * scale
    if w < 0:
        raise UsageError("eta * scale must be nonnegative")
    H = h.hessian(x)
    if w > 0:
        H = H + w * p.hessian(x)
    return H


def inverse_sqrt_pair(M: np.ndarray) -> tuple:
    """``(M^{-1/2}, M^{1/2})`` of a symmetric positive definite matrix."""
    if not np.all(np.isfinite(M)):
        raise NumericError("non-finite entries in the local metric")
    lam, V = np.linalg.eigh(M)
    if lam[0] < EIG_FLOOR:
        raise DomainError(f"local metric not positive definite (min eigenvalue {lam[0]:.3e})")
    root = np.sqrt(lam)
    return (V / root) @ V.T, (V * root) @ V.T


def _factor_from_hessian(H: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(H)
    return (V * np.sqrt(np.maximum(lam, 0.0))).T


def metric_factor(h: Barrier, p: Regularizer, x: np.ndarray, eta: float, scale: float) -> np.ndarray:
    """``J`` with ``J^T J`` equal to :func:`local_metric`, stacked from the two factors."""
    w = eta * scale
    if w < 0:
        raise UsageError("eta * scale must be nonnegative")
    J = h.hessian_factor(x)
    if w > 0:
        J = np.vstack([J, math.sqrt(w) * p.hessian_factor(x)])
    return J


def inverse_sqrt_pair_from_factor(J: np.ndarray) -> tuple:
    """``(M^{-1/2}, M^{1/2})`` for ``M = J^T J`` from the SVD of ``J``.

    Squaring the factor would square its condition number; near a face of a
    polytope the barrier curvature spans many orders of magnitude and the
    small eigenvalues of ``M`` would be lost to roundoff.
    """
    if not np.all(np.isfinite(J)):
        raise NumericError("non-finite entries in the local metric")
    if J.shape[0] < J.shape[1]:
        raise DomainError("local metric not positive definite (rank deficient factor)")
    _, sv, Vt = np.linalg.svd(J, full_matrices=False)
    if sv[-1] ** 2 < EIG_FLOOR:
        raise DomainError(f"local metric not positive definite (min eigenvalue {sv[-1] ** 2:.3e})")
    return (Vt.T / sv) @ Vt, (Vt.T * sv) @ Vt


def precondition_pair(h: Barrier, p: Regularizer, x: np.ndarray, eta: float, scale: float) -> tuple:
    """``(A, A^{-1})`` with ``A = (hess h(x) + eta * scale * hess p(x))^{-1/2}``."""
    return inverse_sqrt_pair_from_factor(metric_factor(h, p, x, eta, scale))


def precondition_matrix(h: Barrier, p: Regularizer, x: np.ndarray, eta: float, scale: float) -> np.ndarray:
    """Perturbation shape ``A = (hess h(x) + eta * scale * hess p(x))^{-1/2}``."""
    return precondition_pair(h, p, x, eta, scale)[0]


def sample_unit_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform direction on the unit sphere of R^d via a normalized Gaussian."""
    if d < 1:
        raise UsageError("sphere dimension must be at least 1")
    g = rng.standard_normal(d)
    return g / np.linalg.norm(g)


def dikin_point(x: np.ndarray, A: np.ndarray, z: np.ndarray, delta: float) -> np.ndarray:
    """The played point ``x + delta * A z``."""
    if not 0 < delta <= 1:
        raise UsageError("delta must lie in (0, 1]")
    return np.asarray(x, dtype=float) + delta * (A @ z)


@dataclass(frozen=True)
class PlayerGeometry:
    """Barrier and regularizer of one player, plus the coordinate embedding.

    ``embedded`` is true for simplex sets, where the loop works on the first
    ``d - 1`` coordinates and reports full probability vectors.
    """

    barrier: Barrier
    regularizer: Regularizer
    embedded: bool = False

    @classmethod
    def default_for(cls, action_set: ActionSet, regularizer: Regularizer | None = None) -> "PlayerGeometry":
        reg = regularizer if regularizer is not None else SquaredEuclidean()
        if isinstance(action_set, Box):
            return cls(BoxLogBarrier(action_set.lower, action_set.upper), reg)
        if isinstance(action_set, Ball):
            return cls(BallBarrier(action_set.center_point, action_set.radius), reg)
        if isinstance(action_set, Simplex):
            if action_set.size < 2:
                raise UsageError("a one-action simplex has no interior to learn on")
            return cls(SimplexBarrier(action_set.size, action_set.floor), reg, embedded=True)
        raise UsageError(f"no default barrier for {type(action_set).__name__}")

    @property
    def dim(self) -> int:
        return self.barrier.dim

    def to_local(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x[:-1].copy() if self.embedded else x.copy()

    def to_full(self, u: np.ndarray) -> np.ndarray:
        return embed_inverse(u) if self.embedded else np.asarray(u, dtype=float).copy()

    def to_full_batch(self, U: np.ndarray) -> np.ndarray:
        """Row-wise :meth:`to_full` for an array of shape (T, dim)."""
        U = np.asarray(U, dtype=float)
        if not self.embedded:
            return U.copy()
        return np.column_stack([U, 1.0 - U.sum(axis=1)])

    def is_diagonal_box(self) -> bool:
        """True when the loop can run coordinatewise (log barrier, diagonal p)."""
        diag_barrier = isinstance(self.barrier, BoxLogBarrier) or (
            isinstance(self.barrier, SimplexBarrier) and self.barrier.size == 2
        )
        return diag_barrier and isinstance(self.regularizer, SquaredEuclidean)

    def box_bounds(self) -> tuple:
        """Coordinate bounds used by the coordinatewise kernel."""
        b = self.barrier
        if isinstance(b, BoxLogBarrier):
            return b.lower, b.upper
        return np.array([b.floor]), np.array([1.0 - b.floor])
