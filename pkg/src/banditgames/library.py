"""Concrete games with certified constants and equilibrium oracles.

Cournot competition: firm i produces ``x_i`` in ``[0, C_i]`` at marginal cost
``d_i`` and sells at its own linear price ``a_i - b_i * sum(x)``, so that

    c_i(x) = d_i x_i - x_i (a_i - b_i x_tot).

Matrix games: the row player picks ``x`` on a simplex and pays ``x^T A y``;
the column player picks ``y`` and pays ``-x^T A y``. An optional weight ``w``
adds ``0.5 w |x|^2`` and ``0.5 w |y|^2`` to the respective costs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import COURNOT, MATRIX2, KernelModel
from .errors import NonConvergenceError, UsageError
from .games import Box, Game, NormalizedGame, Simplex, check_monotonicity


# ---------------------------------------------------------------------------
# Cournot
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CournotParams:
    """Marginal costs, price intercepts, price slopes and capacities."""

    cost: np.ndarray
    intercept: np.ndarray
    slope: np.ndarray
    capacity: Optional[np.ndarray] = None

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.intercept, dtype=float))
        n = a.size
        d = np.broadcast_to(np.asarray(self.cost, dtype=float), (n,)).copy()
        b = np.broadcast_to(np.asarray(self.slope, dtype=float), (n,)).copy()
        cap = np.ones(n) if self.capacity is None else np.broadcast_to(np.asarray(self.capacity, dtype=float), (n,)).copy()
        if np.any(b <= 0):
            raise UsageError("price slopes must be positive")
        if np.any(cap <= 0):
            raise UsageError("capacities must be positive")
        object.__setattr__(self, "cost", d)
        object.__setattr__(self, "intercept", a)
        object.__setattr__(self, "slope", b)
        object.__setattr__(self, "capacity", cap)

    @property
    def n(self) -> int:
        return self.intercept.size

    def shifted(self, delta: np.ndarray) -> "CournotParams":
        return CournotParams(self.cost, self.intercept + delta, self.slope, self.capacity)

    def to_dict(self) -> dict:
        return {
            "cost": self.cost.tolist(),
            "intercept": self.intercept.tolist(),
            "slope": self.slope.tolist(),
            "capacity": self.capacity.tolist(),
        }


def default_cournot_params() -> CournotParams:
    """Five firms, marginal cost 40, alternating intercepts and slopes, unit capacity."""
    return CournotParams(
        cost=np.full(5, 40.0),
        intercept=np.array([30.0, 50.0, 30.0, 50.0, 30.0]),
        slope=np.array([50.0, 30.0, 50.0, 30.0, 50.0]),
        capacity=np.ones(5),
    )


def all_active_cournot_params() -> CournotParams:
    """Variant of the default market where every firm produces at equilibrium.

    Lower marginal cost and slopes chosen so ``(a_i - d_i) / b_i`` is the same
    for every firm; the equilibrium is 1/6 each.
    """
    return CournotParams(
        cost=np.full(5, 10.0),
        intercept=np.array([30.0, 50.0, 30.0, 50.0, 30.0]),
        slope=np.array([20.0, 40.0, 20.0, 40.0, 20.0]),
        capacity=np.ones(5),
    )


def cournot_cost_range(params: CournotParams) -> tuple:
    """Exact (lo, hi) of all players' costs over the capacity box.

    For fixed own output the cost is affine in the others' total, and for a
    fixed total it is a convex quadratic in own output, so the extremes are
    at a few candidate points.
    """
    lo, hi = math.inf, -math.inf
    cap = params.capacity
    for i in range(params.n):
        d, a, b, C = params.cost[i], params.intercept[i], params.slope[i], cap[i]
        others = cap.sum() - C
        for s in (0.0, others):
            cands = [0.0, C]
            vertex = (a - d - b * s) / (2 * b)
            if 0 < vertex < C:
                cands.append(vertex)
            for q in cands:
                c = d * q - q * (a - b * (q + s))
                lo, hi = min(lo, c), max(hi, c)
    return float(lo), float(hi)


@dataclass(frozen=True, eq=False)
class CournotGame(Game):
    """Cournot market with per-firm linear prices."""

    params: CournotParams
    name: str = "cournot"
    monotone = True

    @property
    def sets(self):
        return tuple(Box([0.0], [c]) for c in self.params.capacity)

    @property
    def has_gradient(self):
        return True

    @property
    def smoothness(self):
        return tuple(2.0 * self.params.slope)

    @property
    def gradient_bound(self):
        p = self.params
        tot = p.capacity.sum()
        worst = np.maximum(np.abs(p.cost - p.intercept), np.abs(p.cost - p.intercept + p.slope * (tot + p.capacity)))
        return float(np.linalg.norm(worst))

    @property
    def cost_range(self):
        return cournot_cost_range(self.params)

    @property
    def kappa(self) -> float:
        """Curvature certified against p = 0.5 |x|^2; c_i has own curvature 2 b_i >= kappa."""
        return float(np.min(self.params.slope))

    def cost(self, i, x):
        p = self.params
        xi = float(x[i][0])
        tot = float(sum(xj[0] for xj in x))
        return p.cost[i] * xi - xi * (p.intercept[i] - p.slope[i] * tot)

    def gradient(self, i, x):
        p = self.params
        tot = float(sum(xj[0] for xj in x))
        return np.array([p.cost[i] - p.intercept[i] + p.slope[i] * tot + p.slope[i] * float(x[i][0])])

    def cost_batch(self, i, xs):
        p = self.params
        tot = sum(x[:, 0] for x in xs)
        xi = xs[i][:, 0]
        return p.cost[i] * xi - xi * (p.intercept[i] - p.slope[i] * tot)

    def gradient_batch(self, i, xs):
        p = self.params
        tot = sum(x[:, 0] for x in xs)
        return (p.cost[i] - p.intercept[i] + p.slope[i] * (tot + xs[i][:, 0]))[:, None]

    def kernel_model(self):
        p = self.params
        return KernelModel(COURNOT, np.concatenate([p.cost, p.intercept, p.slope]))

    def nash(self, tol: float = 1e-13) -> tuple:
        return tuple(np.array([v]) for v in cournot_nash(self.params, tol))


def make_cournot(params: Optional[CournotParams] = None, normalize: bool = True) -> Game:
    """Cournot game over ``[0, C_i]``; normalized to [0, 1] costs by default."""
    game = CournotGame(params if params is not None else default_cournot_params())
    if not normalize:
        return game
    lo, hi = cournot_cost_range(game.params)
    return NormalizedGame(game, lo, hi, "exact")


def cournot_best_response(params: CournotParams, i: int, others_total) -> np.ndarray:
    """Projected best response of firm i to the others' total output."""
    p = params
    return np.clip((p.intercept[i] - p.cost[i] - p.slope[i] * others_total) / (2 * p.slope[i]), 0.0, p.capacity[i])


@dataclass(frozen=True, eq=False)
class NashSolution:
    x: np.ndarray
    sweeps: int
    contraction: float
    kkt_residual: float


def cournot_kkt_residual(params: CournotParams, x: np.ndarray) -> float:
    """Largest violation of the first-order equilibrium conditions."""
    p = params
    g = p.cost - p.intercept + p.slope * (x.sum() + x)
    lower = x <= 0
    upper = x >= p.capacity
    viol = np.where(lower, np.maximum(-g, 0.0), np.where(upper, np.maximum(g, 0.0), np.abs(g)))
    return float(np.max(viol / p.slope))


def cournot_nash_solve(params: CournotParams, tol: float = 1e-13, x0=None, max_sweeps: int = 1000000) -> NashSolution:
    """Projected best-response iteration in Gauss-Seidel order.

    Simultaneous (Jacobi) best responses are not a contraction once three or
    more firms are active, while sequential sweeps converge because the
    equilibrium conditions form a symmetric positive definite system.
    """
    p = params
    x = np.zeros(p.n) if x0 is None else np.clip(np.asarray(x0, dtype=float), 0.0, p.capacity)
    prev_change = None
    ratio = 0.0
    for sweep in range(1, max_sweeps + 1):
        old = x.copy()
        for i in range(p.n):
            x[i] = cournot_best_response(p, i, x.sum() - x[i])
        change = float(np.max(np.abs(x - old)))
        if prev_change and change > 0:
            ratio = max(ratio, change / prev_change) if sweep > 2 else ratio
        prev_change = change
        if change <= tol:
            return NashSolution(x, sweep, ratio, cournot_kkt_residual(p, x))
    raise NonConvergenceError("best-response iteration did not converge")


def cournot_nash(params: CournotParams, tol: float = 1e-13, x0=None) -> np.ndarray:
    return cournot_nash_solve(params, tol, x0).x


def cournot_nash_batch(params: CournotParams, intercept_shift: np.ndarray, tol: float = 1e-13, max_sweeps: int = 100000) -> np.ndarray:
    """Equilibria of many intercept-shifted markets at once, shape (T, n)."""
    p = params
    a = p.intercept + intercept_shift
    x = np.zeros_like(a)
    for _ in range(max_sweeps):
        old = x.copy()
        tot = x.sum(axis=1)
        for i in range(p.n):
            others = tot - x[:, i]
            new = np.clip((a[:, i] - p.cost[i] - p.slope[i] * others) / (2 * p.slope[i]), 0.0, p.capacity[i])
            tot += new - x[:, i]
            x[:, i] = new
        if np.max(np.abs(x - old)) <= tol:
            return x
    raise NonConvergenceError("batched best-response iteration did not converge")


# ---------------------------------------------------------------------------
# Time-varying Cournot
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeVaryingCournot:
    """Cournot markets whose intercepts drift with time.

    ``decaying``: ``a_i(t) = a_i + k * t^-(1 - alpha)``. ``sinusoidal``:
    ``a_i(t) = a_i + amplitude * sin(2 pi t / period)``. Costs are normalized
    with one range that covers every step, so the scale never changes.
    """

    base: CournotParams
    drift: str
    alpha: float = 0.5
    k: Optional[float] = None
    amplitude: float = 0.0
    period: float = 1.0
    normalize: bool = True

    def __post_init__(self):
        if self.drift not in ("decaying", "sinusoidal"):
            raise UsageError(f"unknown drift {self.drift!r}")
        if self.drift == "decaying" and not 0 <= self.alpha < 1:
            raise UsageError("decaying drift needs 0 <= alpha < 1")
        if self.drift == "sinusoidal" and self.period <= 0:
            raise UsageError("period must be positive")
        if self.drift == "decaying" and self.k is None:
            # calibrate so the summed gradient drift is about T^alpha
            width = np.subtract(*cournot_cost_range(self.base)[::-1]) if self.normalize else 1.0
            object.__setattr__(self, "k", self.alpha * width / self.base.n if self.alpha > 0 else 1.0)
        lo, hi = self._range() if self.normalize else (0.0, 1.0)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def _shift_bounds(self) -> tuple:
        if self.drift == "sinusoidal":
            m = abs(self.amplitude)
            return -m, m
        return min(0.0, self.k), max(0.0, self.k)

    def _range(self) -> tuple:
        # costs are monotone in the intercept, so the extreme shifts bound them
        lo_s, hi_s = self._shift_bounds()
        lo1, hi1 = cournot_cost_range(self.base.shifted(np.full(self.base.n, lo_s)))
        lo2, hi2 = cournot_cost_range(self.base.shifted(np.full(self.base.n, hi_s)))
        return min(lo1, lo2), max(hi1, hi2)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def shift(self, t: np.ndarray) -> np.ndarray:
        """Intercept shift per step, shape (len(t), n)."""
        t = np.asarray(t, dtype=float)
        if self.drift == "decaying":
            s = self.k * t ** (-(1.0 - self.alpha))
        else:
            s = self.amplitude * np.sin(2.0 * np.pi * t / self.period)
        return np.repeat(s[:, None], self.base.n, axis=1)

    def game_at(self, t: int) -> Game:
        params = self.base.shifted(self.shift(np.array([t]))[0])
        g = CournotGame(params)
        return NormalizedGame(g, self.lo, self.hi, "time-varying") if self.normalize else g

    def limit_game(self) -> Game:
        """The static game the sequence settles to (or oscillates around)."""
        g = CournotGame(self.base)
        return NormalizedGame(g, self.lo, self.hi, "time-varying") if self.normalize else g

    def gradient_path(self, i: int, xs, t: np.ndarray) -> np.ndarray:
        """Player i's gradient of the step-``t`` game at rows of ``xs``, shape (len(t), 1)."""
        p = self.base
        a = p.intercept[i] + self.shift(t)[:, i]
        tot = sum(x[:, 0] for x in xs)
        g = p.cost[i] - a + p.slope[i] * (tot + xs[i][:, 0])
        return (g / self.width if self.normalize else g)[:, None]

    def nash_path(self, t: np.ndarray) -> np.ndarray:
        return cournot_nash_batch(self.base, self.shift(t))

    def gradient_drift(self, T: int) -> float:
        """``sum_t sum_i max_x |grad_i c_i(x) - grad_i c_i^t(x)|`` in game units."""
        s = np.abs(self.shift(np.arange(1, T + 1))).sum()
        return float(s / (self.width if self.normalize else 1.0))

    def variation_path(self, T: int) -> float:
        path = self.nash_path(np.arange(1, T + 2))
        return float(np.sum(np.linalg.norm(np.diff(path, axis=0), axis=1)))

    def kernel_model(self) -> KernelModel:
        model = CournotGame(self.base).kernel_model()
        if self.normalize:
            model = model.rescaled(self.lo, self.hi)
        return model


def make_time_varying_cournot(
    base: Optional[CournotParams] = None,
    drift: str = "sinusoidal",
    *,
    alpha: float = 0.5,
    k: Optional[float] = None,
    amplitude: float = 5.0,
    period: float = 1e5,
    normalize: bool = True,
) -> TimeVaryingCournot:
    base = base if base is not None else default_cournot_params()
    return TimeVaryingCournot(base, drift, alpha=alpha, k=k, amplitude=amplitude, period=period, normalize=normalize)


# ---------------------------------------------------------------------------
# Matrix games
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatrixGameSpec:
    """Payoff matrix, who minimizes, and optional regularization levels.

    ``orientation='row_min'`` means the row player minimizes ``x^T A y``;
    ``'row_max'`` flips the roles.
    """

    A: np.ndarray
    orientation: str = "row_min"
    tau: Optional[float] = None
    weight: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if not np.all(np.isfinite(A)):
            raise UsageError("payoff matrix must be finite")
        if self.orientation not in ("row_min", "row_max"):
            raise UsageError(f"unknown orientation {self.orientation!r}")
        if self.weight < 0:
            raise UsageError("regularization weight must be nonnegative")
        object.__setattr__(self, "A", A)

    @property
    def cost_matrix(self) -> np.ndarray:
        """Matrix whose bilinear form the row player minimizes."""
        return self.A if self.orientation == "row_min" else -self.A

    @property
    def entry_range(self) -> tuple:
        return float(self.A.min()), float(self.A.max())


@dataclass(frozen=True, eq=False)
class MatrixGame(Game):
    spec: MatrixGameSpec
    name: str = "matrix"
    monotone = True

    @property
    def A(self) -> np.ndarray:
        return self.spec.cost_matrix

    @property
    def weight(self) -> float:
        return self.spec.weight

    @property
    def sets(self):
        m, k = self.A.shape
        return (Simplex(m), Simplex(k))

    @property
    def has_gradient(self):
        return True

    @property
    def smoothness(self):
        s = float(np.linalg.norm(self.A, 2))
        return (s + self.weight, s + self.weight)

    @property
    def gradient_bound(self):
        return float(np.abs(self.A).max() * math.sqrt(sum(self.A.shape)) + self.weight)

    @property
    def cost_range(self):
        lo, hi = float(self.A.min()), float(self.A.max())
        m, k = self.A.shape
        w = self.weight
        return min(lo + 0.5 * w / m, -hi + 0.5 * w / k), max(hi + 0.5 * w, -lo + 0.5 * w)

    @property
    def kappa(self) -> float:
        return self.weight

    def cost(self, i, x):
        f = float(x[0] @ self.A @ x[1])
        own = x[i]
        return (f if i == 0 else -f) + 0.5 * self.weight * float(own @ own)

    def gradient(self, i, x):
        if i == 0:
            return self.A @ x[1] + self.weight * x[0]
        return -self.A.T @ x[0] + self.weight * x[1]

    def cost_batch(self, i, xs):
        f = np.einsum("ta,ab,tb->t", xs[0], self.A, xs[1])
        own = xs[i]
        return (f if i == 0 else -f) + 0.5 * self.weight * np.sum(own * own, axis=1)

    def gradient_batch(self, i, xs):
        if i == 0:
            return xs[1] @ self.A.T + self.weight * xs[0]
        return -xs[0] @ self.A + self.weight * xs[1]

    def kernel_model(self):
        if self.A.shape != (2, 2):
            return None
        return KernelModel(MATRIX2, np.concatenate([self.A.ravel(), [self.weight]]))

    def nash(self) -> tuple:
        if self.weight > 0:
            return regularized_matrix_nash(self.A, self.weight)
        x, y, _ = matrix_nash(self.A)
        return (x, y)

    def value(self) -> float:
        return matrix_nash(self.A)[2]


def make_matrix_game(spec: MatrixGameSpec | np.ndarray, normalize: bool = False) -> Game:
    if not isinstance(spec, MatrixGameSpec):
        spec = MatrixGameSpec(np.asarray(spec, dtype=float))
    game = MatrixGame(spec)
    if normalize:
        return NormalizedGame(game, *game.cost_range, "exact")
    return game


def _solve_square(M: np.ndarray, rhs: np.ndarray):
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None


def matrix_nash(A: np.ndarray, tol: float = 1e-10) -> tuple:
    """An equilibrium ``(x, y, value)`` of ``min_x max_y x^T A y`` by support enumeration.

    Tries supports of equal size in increasing order; for each pair solves the
    indifference equations and keeps the first candidate with no profitable
    deviation.
    """
    A = np.asarray(A, dtype=float)
    m, k = A.shape
    for s in range(1, min(m, k) + 1):
        for I in itertools.combinations(range(m), s):
            for J in itertools.combinations(range(k), s):
                sub = A[np.ix_(I, J)]
                # row mix x_I makes the column player indifferent on J
                Mx = np.zeros((s + 1, s + 1))
                Mx[:s, :s] = sub.T
                Mx[:s, s] = -1.0
                Mx[s, :s] = 1.0
                sx = _solve_square(Mx, np.r_[np.zeros(s), 1.0])
                My = np.zeros((s + 1, s + 1))
                My[:s, :s] = sub
                My[:s, s] = -1.0
                My[s, :s] = 1.0
                sy = _solve_square(My, np.r_[np.zeros(s), 1.0])
                if sx is None or sy is None:
                    continue
                if np.any(sx[:s] < -tol) or np.any(sy[:s] < -tol):
                    continue
                x = np.zeros(m)
                y = np.zeros(k)
                x[list(I)] = np.maximum(sx[:s], 0.0)
                y[list(J)] = np.maximum(sy[:s], 0.0)
                x /= x.sum()
                y /= y.sum()
                v = float(x @ A @ y)
                if np.max(x @ A) <= v + tol and np.min(A @ y) >= v - tol:
                    return x, y, v
    raise NonConvergenceError("support enumeration found no equilibrium")


def regularized_matrix_nash(A: np.ndarray, weight: float, iters: int = 200000, tol: float = 1e-13) -> tuple:
    """Equilibrium of the quadratically regularized game by projected extragradient."""
    A = np.asarray(A, dtype=float)
    m, k = A.shape
    Sx, Sy = Simplex(m), Simplex(k)
    x, y = Sx.center(), Sy.center()
    L = float(np.linalg.norm(A, 2)) + weight
    step = 0.5 / L
    for _ in range(iters):
        xh = Sx.project(x - step * (A @ y + weight * x))
        yh = Sy.project(y - step * (-A.T @ x + weight * y))
        xn = Sx.project(x - step * (A @ yh + weight * xh))
        yn = Sy.project(y - step * (-A.T @ xh + weight * yh))
        done = max(np.max(np.abs(xn - x)), np.max(np.abs(yn - y))) <= tol
        x, y = xn, yn
        if done:
            break
    return (x, y)


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


def certify(game: Game, samples: int = 10000, seed: int = 0) -> dict:
    """Monotonicity, smoothness and kappa-convexity checks on random samples.

    Smoothness compares the declared per-player constant against finite
    difference second derivatives of each cost in its own action. The kappa
    sweep checks that ``c_i - kappa * 0.5 |x_i|^2`` has nonnegative own
    curvature.
    """
    rng = np.random.default_rng(seed)
    out = {"game": game.name, "players": game.n, "monotone_declared": bool(game.monotone)}
    out["monotonicity_min"] = check_monotonicity(game, samples, rng)
    kappa = getattr(game, "kappa", None)
    ell = game.smoothness
    worst_curv = []
    min_curv = []
    probes = game.sample_profiles(rng, min(samples, 500))
    h = 1e-4
    for i in range(game.n):
        d = game.sets[i].dim
        hi_c, lo_c = 0.0, math.inf
        for t in range(probes[0].shape[0]):
            x = [p[t].copy() for p in probes]
            for a in range(d):
                e = np.zeros(d)
                e[a] = h
                xp = list(x)
                xm = list(x)
                xp[i] = x[i] + e
                xm[i] = x[i] - e
                c2 = (game.cost(i, tuple(xp)) - 2 * game.cost(i, tuple(x)) + game.cost(i, tuple(xm))) / h**2
                hi_c = max(hi_c, abs(c2))
                lo_c = min(lo_c, c2)
        worst_curv.append(hi_c)
        min_curv.append(lo_c)
    out["smoothness_declared"] = [float(v) for v in ell]
    out["smoothness_sampled"] = [float(v) for v in worst_curv]
    out["smoothness_ok"] = all(s <= l * (1 + 1e-6) + 1e-6 for s, l in zip(worst_curv, ell))
    if kappa is not None:
        out["kappa"] = float(kappa)
        out["kappa_min_curvature"] = [float(c - kappa) for c in min_curv]
        out["kappa_ok"] = all(c - kappa >= -1e-5 * max(1.0, abs(c)) for c in min_curv)
    return out
