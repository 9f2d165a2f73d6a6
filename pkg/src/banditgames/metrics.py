"""Convergence and regret measurements on recorded trajectories."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import kl_div
from scipy.stats import theilslopes

from .errors import DomainError, UsageError
from .games import Box, Game, Simplex

GRID_PER_DECADE = 40


@dataclass(frozen=True)
class MetricSample:
    t: int
    name: str
    value: float
    seed: Optional[int] = None


def log_grid(T: int, per_decade: int = GRID_PER_DECADE) -> np.ndarray:
    """Integer times spaced ``per_decade`` per factor of ten, always with 1 and T."""
    if T < 1:
        raise UsageError("T must be positive")
    if per_decade < 1:
        raise UsageError("grid density must be positive")
    k = int(math.ceil(per_decade * math.log10(T))) if T > 1 else 0
    pts = np.round(10.0 ** (np.arange(k + 1) / per_decade)).astype(np.int64)
    return np.unique(np.concatenate([[1], pts[pts <= T], [T]]))


# ---------------------------------------------------------------------------
# Equilibrium gaps and divergences
# ---------------------------------------------------------------------------


def duality_gap(A: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """``max_b (x^T A)_b - min_a (A y)_a`` for a row player minimizing ``x^T A y``."""
    A = np.asarray(A, dtype=float)
    return float(np.max(np.asarray(x) @ A) - np.min(A @ np.asarray(y)))


def duality_gap_batch(A: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise :func:`duality_gap` for stacked profiles."""
    return np.max(X @ A, axis=1) - np.min(Y @ A.T, axis=1)


def gap_function(game: Game, x: Sequence[np.ndarray], ref: Sequence[np.ndarray]) -> float:
    """``sum_i <grad_i c_i(x), x_i - ref_i>``."""
    if not game.has_gradient:
        raise UsageError("the gap function needs exact gradients")
    x = tuple(np.asarray(v, dtype=float) for v in x)
    return float(sum(game.gradient(i, x) @ (x[i] - np.asarray(ref[i], dtype=float)) for i in range(game.n)))


def gap_function_batch(game: Game, xs: Sequence[np.ndarray], ref: Sequence[np.ndarray]) -> np.ndarray:
    """Row-wise :func:`gap_function` over stacked profiles of shape (T, d_i)."""
    if not game.has_gradient:
        raise UsageError("the gap function needs exact gradients")
    return sum(np.sum(game.gradient_batch(i, xs) * (xs[i] - np.asarray(ref[i])), axis=1) for i in range(game.n))


DIVERGENCES = ("euclid2", "bregman_p", "kl")


def divergence_to(reference: Sequence[np.ndarray], profile: Sequence[np.ndarray], kind: str = "euclid2", weight: float = 1.0) -> float:
    """Sum over players of ``D(reference_i, profile_i)``.

    ``euclid2`` is the squared distance, ``bregman_p`` the Bregman divergence
    of ``0.5 * weight * |x|^2`` (half the weighted squared distance) and
    ``kl`` the natural-log relative entropy ``sum r log(r / x)``.
    """
    out = 0.0
    for r, x in zip(reference, profile):
        out += float(np.sum(divergence_batch(np.asarray(r), np.atleast_2d(x), kind, weight)))
    return out


def divergence_batch(reference: np.ndarray, X: np.ndarray, kind: str = "euclid2", weight: float = 1.0) -> np.ndarray:
    """One player's divergence from ``reference`` to each row of ``X``."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(reference, dtype=float)
    if kind == "euclid2":
        return np.sum((X - r) ** 2, axis=1)
    if kind == "bregman_p":
        return 0.5 * weight * np.sum((X - r) ** 2, axis=1)
    if kind == "kl":
        if np.any(r < 0) or abs(r.sum() - 1) > 1e-9 or np.any(np.abs(X.sum(axis=1) - 1) > 1e-9):
            raise DomainError("kl needs probability vectors")
        if np.any(X[:, r > 0] <= 0):
            raise DomainError("kl is infinite where the profile vanishes on the reference's support")
        # termwise r log(r/x) - r + x is nonnegative, so roundoff cannot push the sum below 0
        return np.sum(kl_div(r, X), axis=1)
    raise UsageError(f"unknown divergence {kind!r}")


# ---------------------------------------------------------------------------
# Regret
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegretSeries:
    """Cumulative regret of one player at selected play counts.

    ``comparator[k]`` is the best fixed action found for the first ``t[k]``
    plays and ``resolution`` the grid used to find it (0 when the search is
    exact).
    """

    t: np.ndarray
    regret: np.ndarray
    comparator: np.ndarray
    resolution: int

    def envelope(self) -> np.ndarray:
        """Running maximum of the regret."""
        return np.maximum.accumulate(self.regret)


def _candidate_actions(action_set, resolution: int) -> np.ndarray:
    verts = action_set.vertices()
    if isinstance(action_set, Simplex):
        d = action_set.dim
        pts = [np.array(c, dtype=float) / resolution for c in itertools.product(range(resolution + 1), repeat=d - 1) if sum(c) <= resolution]
        grid = np.array([np.append(p, 1.0 - p.sum()) for p in pts])
        cands = action_set.floor + action_set.free_mass * grid
    elif isinstance(action_set, Box):
        axes = [np.linspace(lo, hi, resolution + 1) for lo, hi in zip(action_set.lower, action_set.upper)]
        cands = np.array(list(itertools.product(*axes)))
    else:
        # bounding-box grid projected onto the set
        c = action_set.center()
        r = action_set.diameter / 2
        axes = [np.linspace(ci - r, ci + r, resolution + 1) for ci in c]
        cands = np.array([action_set.project(np.array(p)) for p in itertools.product(*axes)])
    if verts is not None:
        cands = np.vstack([verts, cands])
    return np.unique(cands, axis=0)


def individual_regret(
    trajectory,
    game: Game,
    player: int,
    resolution: int = 100,
    times: Optional[np.ndarray] = None,
) -> RegretSeries:
    """Cumulative regret of ``player`` against the best fixed action in hindsight.

    Play ``k`` costs ``c_i(played_i[k], means_{-i}[k])``: the player's actual
    action against the opponents' mixed strategies at that play. The
    comparator minimizes the same sum over the first ``t`` plays, separately
    for every ``t`` in ``times`` (default: the log grid over all plays).
    One-dimensional boxes use a bounded scalar search (to 1e-10) plus both
    endpoints; other sets take the best of the vertices and a grid with
    ``resolution`` steps per axis.
    """
    if resolution < 2:
        raise UsageError("comparator resolution must be at least 2")
    means = trajectory.play_means
    played = trajectory.played
    P = played[player].shape[0]
    times = log_grid(P) if times is None else np.asarray(times, dtype=np.int64)
    if times.size == 0 or times.min() < 1 or times.max() > P:
        raise UsageError("regret times must lie in [1, number of plays]")
    n = len(means)
    prof = [played[player] if j == player else means[j] for j in range(n)]
    incurred = np.cumsum(game.cost_batch(player, prof))[times - 1]

    def hindsight(omega: np.ndarray, upto: int) -> float:
        xs = [np.broadcast_to(omega, (upto, omega.size)) if j == player else means[j][:upto] for j in range(n)]
        return float(np.sum(game.cost_batch(player, xs)))

    aset = game.sets[player]
    best = np.empty(times.size)
    comp = np.empty((times.size, aset.dim))
    if isinstance(aset, Box) and aset.dim == 1:
        lo, hi = float(aset.lower[0]), float(aset.upper[0])
        for k, t in enumerate(times):
            f = lambda w, t=t: hindsight(np.array([w]), int(t))
            res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
            cands = [(f(lo), lo), (f(hi), hi), (float(res.fun), float(res.x))]
            v, w = min(cands)
            best[k], comp[k] = v, w
        used = 0
    else:
        cands = _candidate_actions(aset, resolution)
        sums = np.empty((cands.shape[0], times.size))
        for c, omega in enumerate(cands):
            xs = [np.broadcast_to(omega, (P, omega.size)) if j == player else means[j] for j in range(n)]
            sums[c] = np.cumsum(game.cost_batch(player, xs))[times - 1]
        idx = np.argmin(sums, axis=0)
        best = sums[idx, np.arange(times.size)]
        comp = cands[idx]
        used = resolution
    return RegretSeries(times, incurred - best, comp, used)


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------


def fit_rate(t, values, window: Optional[tuple] = None) -> float:
    """Theil-Sen slope of ``log(value)`` against ``log(t)`` inside ``window``.

    Accepts arrays or a list of :class:`MetricSample`.
    """
    if values is None:
        samples = list(t)
        t = np.array([s.t for s in samples], dtype=float)
        values = np.array([s.value for s in samples], dtype=float)
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if t.size < 10:
        raise UsageError(f"need at least 10 samples in the window, got {t.size}")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError("rate fitting needs positive finite values")
    return float(theilslopes(np.log(v), np.log(t))[0])


# ---------------------------------------------------------------------------
# Recording on the log grid
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class MetricContext:
    """What the metrics need besides the trajectory.

    Attributes:
        game: Game the costs and gradients refer to.
        reference: Equilibrium profile for distances and the gap function.
        matrix: Row player's loss matrix for duality gaps.
        tau_reference: Regularized equilibrium for the ``kl_tau`` metric.
        sequence: Time-varying game for the tracking gap.
        nash_path: Per-step equilibria, shape (T, n), for the tracking gap.
        weight: Weight of ``p`` for ``bregman_p``.
        regret_resolution: Comparator grid resolution.
    """

    game: Optional[Game] = None
    reference: Optional[tuple] = None
    matrix: Optional[np.ndarray] = None
    tau_reference: Optional[tuple] = None
    sequence: object = None
    nash_path: Optional[np.ndarray] = None
    weight: float = 1.0
    regret_resolution: int = 100
    extras: dict = field(default_factory=dict)


def _iterate_rows(traj, grid):
    return [X[grid] for X in traj.iterates]


def _need(value, what: str, metric: str):
    if value is None:
        raise UsageError(f"metric {metric!r} needs {what}")
    return value


def _running_average(X: np.ndarray) -> np.ndarray:
    return np.cumsum(X, axis=0) / np.arange(1, X.shape[0] + 1)[:, None]


def metric_sq_dist(traj, ctx, grid):
    ref = _need(ctx.reference, "an equilibrium reference", "sq_dist")
    return sum(divergence_batch(r, X, "euclid2") for r, X in zip(ref, _iterate_rows(traj, grid)))


def metric_bregman_p(traj, ctx, grid):
    ref = _need(ctx.reference, "an equilibrium reference", "bregman_p")
    return sum(divergence_batch(r, X, "bregman_p", ctx.weight) for r, X in zip(ref, _iterate_rows(traj, grid)))


def metric_kl_tau(traj, ctx, grid):
    ref = _need(ctx.tau_reference, "the regularized equilibrium", "kl_tau")
    return sum(divergence_batch(r, X, "kl") for r, X in zip(ref, _iterate_rows(traj, grid)))


def metric_duality_gap(traj, ctx, grid):
    A = _need(ctx.matrix, "a payoff matrix", "duality_gap")
    X, Y = _iterate_rows(traj, grid)
    return duality_gap_batch(A, X, Y)


def metric_duality_gap_avg(traj, ctx, grid):
    A = _need(ctx.matrix, "a payoff matrix", "duality_gap_avg")
    # average of the strategies actually updated, x^1 .. x^{t+1}
    X, Y = (_running_average(M)[grid] for M in traj.iterates)
    return duality_gap_batch(A, X, Y)


def metric_gap_function(traj, ctx, grid):
    game = _need(ctx.game, "a game", "gap_function")
    ref = _need(ctx.reference, "an equilibrium reference", "gap_function")
    return gap_function_batch(game, _iterate_rows(traj, grid), ref)


def metric_social_cost(traj, ctx, grid):
    game = _need(ctx.game, "a game", "social_cost")
    rows = _iterate_rows(traj, grid)
    return sum(game.cost_batch(i, rows) for i in range(game.n))


def tracking_gaps(traj, ctx) -> np.ndarray:
    """Per-step ``sum_i <grad_i c_i^t(xhat^t), xhat_i^t - x_i^{t,*}>``."""
    seq = _need(ctx.sequence, "a game sequence", "tracking_gap")
    path = _need(ctx.nash_path, "the per-step equilibrium path", "tracking_gap")
    T = traj.T
    t = np.arange(1, T + 1)
    xs = traj.played
    out = np.zeros(T)
    for i in range(len(xs)):
        g = seq.gradient_path(i, xs, t)
        out += np.sum(g * (xs[i] - path[:, i:i + 1]), axis=1)
    return out


def metric_tracking_gap_avg(traj, ctx, grid):
    gaps = ctx.extras.get("tracking_gaps")
    if gaps is None:
        gaps = tracking_gaps(traj, ctx)
        ctx.extras["tracking_gaps"] = gaps
    avg = np.cumsum(gaps) / np.arange(1, gaps.size + 1)
    # the gap at grid time t refers to the t-th step
    return avg[np.maximum(grid, 1) - 1]


METRICS = {
    "sq_dist": metric_sq_dist,
    "bregman_p": metric_bregman_p,
    "kl_tau": metric_kl_tau,
    "duality_gap": metric_duality_gap,
    "duality_gap_avg": metric_duality_gap_avg,
    "gap_function": metric_gap_function,
    "social_cost": metric_social_cost,
    "tracking_gap_avg": metric_tracking_gap_avg,
    "regret": None,
}


def record_metrics(traj, names: Sequence[str], ctx: MetricContext, per_decade: int = GRID_PER_DECADE) -> dict:
    """Evaluate named metrics on the log grid and store them in ``traj.metrics``.

    Time ``t`` on the grid means the strategy after ``t`` updates. ``regret``
    adds one series per player, ``regret_<i>``, indexed by the number of
    plays; loops with several plays per round also get
    ``regret_<i>_per_round``.
    """
    grid = log_grid(traj.T, per_decade)
    for name in names:
        if name not in METRICS:
            raise UsageError(f"unknown metric {name!r}")
        if name == "regret":
            game = _need(ctx.game, "a game", "regret")
            P = traj.played[0].shape[0]
            per = P // traj.T
            pgrid = log_grid(P, per_decade)
            for i in range(game.n):
                rs = individual_regret(traj, game, i, ctx.regret_resolution, pgrid)
                traj.metrics[f"regret_{i}"] = (pgrid, rs.regret)
                if per > 1:
                    rr = individual_regret(traj, game, i, ctx.regret_resolution, grid * per)
                    traj.metrics[f"regret_{i}_per_round"] = (grid, rr.regret)
            continue
        values = np.asarray(METRICS[name](traj, ctx, grid), dtype=float)
        if not np.all(np.isfinite(values)):
            raise DomainError(f"metric {name!r} produced non-finite values")
        traj.metrics[name] = (grid, values)
    return traj.metrics


def samples(traj, name: Optional[str] = None) -> list:
    """Flatten recorded series into :class:`MetricSample` records."""
    out = []
    for key, (t, v) in sorted(traj.metrics.items()):
        if name is not None and key != name:
            continue
        out.extend(MetricSample(int(a), key, float(b), traj.seed) for a, b in zip(t, v))
    return out
