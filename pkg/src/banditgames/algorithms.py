"""Learning loops.

Every loop returns a :class:`Trajectory`. Randomness comes from the named
streams in :mod:`banditgames.rng`, drawn in blocks, so the compiled kernels,
the pure-Python kernels and the step-by-step reference loops consume exactly
the same numbers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as rngmod
from ._kernels import INFEASIBLE, NONFINITE, OK, get_backend
from .errors import InvariantViolation, NonConvergenceError, NumericError, UsageError
from .estimators import ellipsoidal_estimate, momentum_update, simplex_importance_estimate
from .games import SET_TOL, Ball, Box, Game, NoiseSpec, Simplex
from .geometry import PlayerGeometry, dikin_point, precondition_pair
from .prox import (
    barrier_prox_step,
    kl_prox_clipped_simplex,
    scale_to_floor,
)
from .schedules import Schedule, make_schedule

CHUNK = 8192
ENGINES = ("auto", "kernel", "reference")


@dataclass(eq=False)
class Trajectory:
    """Recorded run.

    ``iterates[i][t]`` is player i's strategy after ``t`` updates (row 0 is
    the starting point). ``played[i][k]`` is the k-th action actually played
    and ``play_means[i][k]`` the strategy it was drawn around; for the
    optimistic loop there are two plays per round. ``costs[k]`` holds the
    observed costs of play ``k`` (noise included, in the units the learner
    sees).
    """

    algorithm: str
    seed: Optional[int]
    iterates: list
    played: list
    play_means: list
    costs: np.ndarray
    half_iterates: Optional[list] = None
    metrics: dict = field(default_factory=dict)
    schedule_fingerprint: str = ""
    wall_clock: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.iterates[0].shape[0] - 1

    @property
    def n(self) -> int:
        return len(self.iterates)

    @property
    def plays_per_round(self) -> int:
        return self.costs.shape[0] // max(self.T, 1)

    def profile(self, t: int) -> tuple:
        """Strategy profile after ``t`` updates."""
        return tuple(x[t] for x in self.iterates)

    def final_profile(self) -> tuple:
        return self.profile(self.T)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _check_T(T: int) -> None:
    if int(T) != T or T < 1:
        raise UsageError("T must be a positive integer")


def _assert_feasible(sets: Sequence, arrays: Sequence[np.ndarray], what: str) -> None:
    """Vectorized contains() over every recorded row."""
    tol = SET_TOL
    for i, (s, X) in enumerate(zip(sets, arrays)):
        X = np.asarray(X)
        if isinstance(s, Box):
            ok = np.all(X >= s.lower - tol, axis=1) & np.all(X <= s.upper + tol, axis=1)
        elif isinstance(s, Simplex):
            ok = np.all(X >= s.floor - tol, axis=1) & (np.abs(X.sum(axis=1) - 1.0) <= 1e-9)
        elif isinstance(s, Ball):
            ok = np.linalg.norm(X - s.center_point, axis=1) <= s.radius + tol
        else:
            ok = np.array([s.contains(row) for row in X], dtype=bool)
        if not np.all(ok):
            bad = int(np.argmin(ok))
            raise InvariantViolation(f"{what} of player {i} infeasible at row {bad}")


def _resolve_kappa(schedule: Schedule, game) -> float:
    if schedule.kappa is not None:
        return float(schedule.kappa)
    return float(getattr(game, "kappa", 0.0) or 0.0)


def _geometries(sets, geometry) -> list:
    if geometry is None:
        return [PlayerGeometry.default_for(s) for s in sets]
    geometry = list(geometry)
    if len(geometry) != len(sets):
        raise UsageError("need one geometry per player")
    return geometry


class _Static:
    """Adapter that presents a single game as a constant sequence."""

    def __init__(self, game: Game):
        self.game = game

    def game_at(self, t: int) -> Game:
        return self.game


class _FromCallable:
    def __init__(self, fn: Callable[[int], Game]):
        self.fn = fn

    def game_at(self, t: int) -> Game:
        return self.fn(t)


def _kernel_eligible(geoms, sequence) -> bool:
    if not all(g.is_diagonal_box() for g in geoms):
        return False
    if isinstance(sequence, _Static):
        return sequence.game.kernel_model() is not None
    return hasattr(sequence, "kernel_model") and hasattr(sequence, "shift")


# ---------------------------------------------------------------------------
# Barrier mirror descent with ellipsoidal estimates
# ---------------------------------------------------------------------------


def run_bandit_mirror_descent(
    game: Game,
    schedule: Schedule,
    T: int,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    geometry: Optional[Sequence[PlayerGeometry]] = None,
    *,
    engine: str = "auto",
    backend: Optional[str] = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    chunk: int = CHUNK,
    name: str = "bandit_md",
) -> Trajectory:
    """Barrier-regularized mirror descent with one-point bandit feedback.

    Each player starts at the analytic center of its barrier ``h``. At step
    ``t`` it shapes its exploration by
    ``A = (hess h(x) + eta_t s_t hess p(x))^{-1/2}``, plays
    ``x + delta_t A z`` for a uniform unit direction ``z``, turns the
    observed cost into an ellipsoidal gradient estimate and takes one
    barrier prox step. The schedule's mode sets ``s_t`` and the ``D_p``
    weight (see :mod:`banditgames.schedules`).

    Args:
        game: The game; simplex players are handled in ``d - 1`` embedded
            coordinates and reported in full coordinates.
        schedule: Step sizes, exploration radii and regularization mode.
        T: Number of rounds.
        noise: Additive noise on the observed costs.
        seed: Seed of the run's random streams.
        geometry: Barrier and regularizer per player; defaults per set.
        engine: ``"kernel"`` for the coordinatewise compiled loop,
            ``"reference"`` for the step-by-step numpy loop, ``"auto"`` to
            use the kernel whenever every player is a 1-d-per-coordinate box.
        backend: Kernel backend name (``"compiled"`` or ``"python"``).
        tol: Stationarity tolerance of the prox step.
        max_iter: Newton iterations allowed per prox step.

    Raises:
        NonConvergenceError: A prox step failed; the message carries the step.
        InvariantViolation: A played or recorded point left its set.
    """
    return _run_barrier_loop(
        _Static(game), game.sets, schedule, T, noise, seed, geometry, engine, backend, tol, max_iter, chunk, name, game
    )


def run_linear_variant(
    game: Game,
    T: int,
    seed: int = 0,
    geometry: Optional[Sequence[PlayerGeometry]] = None,
    *,
    tau: Optional[float] = None,
    noise: Optional[NoiseSpec] = None,
    schedule: Optional[Schedule] = None,
    **kwargs,
) -> Trajectory:
    """Mirror descent for linear costs with the strongly convex ``p`` weighted by ``tau (t + 1)``.

    The horizon fixes ``tau = T^(-1/6)`` unless ``tau`` is given.
    """
    _check_T(T)
    geoms = _geometries(game.sets, geometry)
    for g in geoms:
        if getattr(g.regularizer, "mu", 0.0) <= 0:
            raise UsageError("the linear variant needs a strongly convex regularizer")
    d = max(g.dim for g in geoms)
    if schedule is None:
        schedule = make_schedule("linear_tau", d=d, T=T)
    if tau is not None:
        schedule = schedule.with_overrides(tau=float(tau))
    if schedule.mode != "linear":
        raise UsageError("run_linear_variant needs a linear-mode schedule")
    kwargs.setdefault("name", "linear_md")
    return run_bandit_mirror_descent(game, schedule, T, noise, seed, geoms, **kwargs)


def run_time_varying(
    game_sequence,
    mode: str,
    schedule: Schedule,
    T: int,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    geometry: Optional[Sequence[PlayerGeometry]] = None,
    **kwargs,
) -> Trajectory:
    """Mirror descent on a sequence of games, one per step.

    ``game_sequence`` is either an object with ``game_at(t)`` (and, for the
    compiled loop, ``shift`` and ``kernel_model``) or a callable ``t -> Game``.
    ``mode="converging"`` runs the usual update; ``mode="tracking"`` needs a
    tracking-mode schedule, which drops the ``D_p`` term.
    """
    if mode not in ("converging", "tracking"):
        raise UsageError(f"unknown time-varying mode {mode!r}")
    if (mode == "tracking") != (schedule.mode == "tracking"):
        raise UsageError(f"mode {mode!r} does not match schedule mode {schedule.mode!r}")
    seq = game_sequence if hasattr(game_sequence, "game_at") else _FromCallable(game_sequence)
    first = seq.game_at(1)
    engine = kwargs.pop("engine", "auto")
    backend = kwargs.pop("backend", None)
    tol = kwargs.pop("tol", 1e-10)
    max_iter = kwargs.pop("max_iter", 100)
    chunk = kwargs.pop("chunk", CHUNK)
    name = kwargs.pop("name", "tracking_md" if mode == "tracking" else "converging_md")
    if kwargs:
        raise UsageError(f"unexpected arguments {sorted(kwargs)}")
    traj = _run_barrier_loop(seq, first.sets, schedule, T, noise, seed, geometry, engine, backend, tol, max_iter, chunk, name, first)
    traj.info["mode"] = mode
    return traj


def _run_barrier_loop(seq, sets, schedule, T, noise, seed, geometry, engine, backend, tol, max_iter, chunk, name, game0):
    _check_T(T)
    if engine not in ENGINES:
        raise UsageError(f"unknown engine {engine!r}")
    noise = noise if noise is not None else NoiseSpec()
    geoms = _geometries(sets, geometry)
    d = max(g.dim for g in geoms)
    kappa = _resolve_kappa(schedule, game0)
    eligible = _kernel_eligible(geoms, seq)
    if engine == "kernel" and not eligible:
        raise UsageError("the compiled loop needs coordinatewise box geometry and a kernel cost model")
    use_kernel = eligible and engine != "reference"
    start = time.perf_counter()
    if use_kernel:
        local_x, local_hat, costs, info = _barrier_kernel(seq, geoms, schedule, kappa, T, noise, seed, backend, tol, max_iter, chunk)
    else:
        local_x, local_hat, costs, info = _barrier_reference(seq, sets, geoms, schedule, kappa, T, noise, seed, tol, max_iter, chunk)
    iterates = [g.to_full_batch(X) for g, X in zip(geoms, local_x)]
    played = [g.to_full_batch(X) for g, X in zip(geoms, local_hat)]
    _assert_feasible(sets, iterates, "iterate")
    _assert_feasible(sets, played, "played point")
    info.update(kappa=kappa, d=d, engine="kernel" if use_kernel else "reference", safe_steps=schedule.is_safe(d))
    return Trajectory(
        algorithm=name,
        seed=seed,
        iterates=iterates,
        played=played,
        play_means=[X[:-1] for X in iterates],
        costs=costs,
        schedule_fingerprint=schedule.fingerprint(),
        wall_clock=time.perf_counter() - start,
        info=info,
    )


def _schedule_arrays(schedule: Schedule, kappa: float, t: np.ndarray) -> tuple:
    eta = schedule.eta(t)
    delta = schedule.delta(t)
    if np.any(delta <= 0) or np.any(delta > 1):
        raise UsageError("exploration radius must lie in (0, 1]")
    return eta, delta, schedule.shape_scale(t), schedule.prox_curvature(kappa) * (t + 1.0)


def _barrier_kernel(seq, geoms, schedule, kappa, T, noise, seed, backend, tol, max_iter, chunk):
    core = get_backend(backend)
    n = len(geoms)
    dims = [g.dim for g in geoms]
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(np.int64)
    D = int(offsets[-1])
    lower = np.concatenate([g.box_bounds()[0] for g in geoms]).astype(float)
    upper = np.concatenate([g.box_bounds()[1] for g in geoms]).astype(float)
    # the kernel applies one p weight to every coordinate
    weights = {float(g.regularizer.weight) for g in geoms}
    if len(weights) != 1:
        raise UsageError("the compiled loop needs the same regularizer weight for every player")
    pweight = weights.pop()
    static = isinstance(seq, _Static)
    model = seq.game.kernel_model() if static else seq.kernel_model()
    params = np.ascontiguousarray(model.params, dtype=float)
    x = np.concatenate([g.barrier.center() for g in geoms]).astype(float)
    out_x = np.empty((T + 1, D))
    out_x[0] = x
    out_hat = np.empty((T, D))
    out_cost = np.empty((T, n))
    r_dir = rngmod.stream(seed, rngmod.PERTURB)
    r_noise = rngmod.stream(seed, rngmod.NOISE)
    no_noise = np.empty((0, n))
    no_shift = np.empty((0, n))
    newton = 0
    worst = 0.0
    t_all = np.arange(1, T + 1, dtype=float)
    eta, delta, sscale, pscale = _schedule_arrays(schedule, kappa, t_all)
    aw = np.ascontiguousarray(eta * sscale * pweight)
    pw = np.ascontiguousarray(eta * pscale * pweight)
    for lo in range(0, T, chunk):
        hi = min(T, lo + chunk)
        c = hi - lo
        normals = r_dir.standard_normal((c, D))
        eps = np.ascontiguousarray(noise.sample(r_noise, (c, n))) if noise.active else no_noise
        shift = no_shift if static else np.ascontiguousarray(seq.shift(t_all[lo:hi]), dtype=float)
        status, step, nw, wr = core.box_md_chunk(
            x, lower, upper, offsets, eta[lo:hi], delta[lo:hi], aw[lo:hi], pw[lo:hi],
            normals, eps, model.code, params, shift, model.lo, model.width,
            out_x[lo + 1:hi + 1], out_hat[lo:hi], out_cost[lo:hi], tol, max_iter,
        )
        newton += nw
        worst = max(worst, wr)
        if status != OK:
            at = lo + step + 1
            if status == INFEASIBLE:
                raise InvariantViolation(f"played point left the set at step {at}")
            if status == NONFINITE:
                raise NumericError(f"non-finite prox residual at step {at}")
            raise NonConvergenceError(f"prox step did not converge at step {at}")
    local_x = [out_x[:, offsets[i]:offsets[i + 1]] for i in range(n)]
    local_hat = [out_hat[:, offsets[i]:offsets[i + 1]] for i in range(n)]
    info = {"backend": core.__name__.rsplit(".", 1)[-1], "newton_iterations": int(newton), "worst_residual": float(worst)}
    return local_x, local_hat, out_cost, info


def _barrier_reference(seq, sets, geoms, schedule, kappa, T, noise, seed, tol, max_iter, chunk):
    n = len(geoms)
    dims = [g.dim for g in geoms]
    r_dir = rngmod.stream(seed, rngmod.PERTURB)
    r_noise = rngmod.stream(seed, rngmod.NOISE)
    xs = [g.barrier.center().astype(float) for g in geoms]
    out_x = [np.empty((T + 1, d)) for d in dims]
    out_hat = [np.empty((T, d)) for d in dims]
    for i in range(n):
        out_x[i][0] = xs[i]
    costs = np.empty((T, n))
    t_all = np.arange(1, T + 1, dtype=float)
    eta_a, delta_a, sscale_a, pscale_a = _schedule_arrays(schedule, kappa, t_all)
    curv = schedule.prox_curvature(kappa)
    newton = 0
    worst = 0.0
    # draw directions in the same blocks as the kernel so both see one stream
    normals = None
    for s in range(T):
        if s % chunk == 0:
            c = min(chunk, T - s)
            normals = r_dir.standard_normal((c, sum(dims)))
            eps = noise.sample(r_noise, (c, n)) if noise.active else None
        row = normals[s % chunk]
        eta, delta = float(eta_a[s]), float(delta_a[s])
        shapes, zs, hats = [], [], []
        off = 0
        for i, g in enumerate(geoms):
            raw = row[off:off + dims[i]]
            off += dims[i]
            z = raw / np.linalg.norm(raw)
            A, A_inv = precondition_pair(g.barrier, g.regularizer, xs[i], eta, float(sscale_a[s]))
            hat = dikin_point(xs[i], A, z, delta)
            if not sets[i].contains(g.to_full(hat)):
                raise InvariantViolation(f"played point left the set at step {s + 1}")
            shapes.append((A, A_inv))
            zs.append(z)
            hats.append(hat)
            out_hat[i][s] = hat
        game_t = seq.game_at(s + 1)
        profile = tuple(g.to_full(h) for g, h in zip(geoms, hats))
        for i, g in enumerate(geoms):
            c = game_t.cost(i, profile)
            if eps is not None:
                c = c + float(eps[s % chunk, i])
            costs[s, i] = c
            est = ellipsoidal_estimate(c, shapes[i][0], zs[i], dims[i], delta, A_inv=shapes[i][1])
            res = barrier_prox_step(g.barrier, g.regularizer, xs[i], est.g, eta, curv, float(t_all[s] + 1.0), tol, max_iter)
            if not res.converged:
                raise NonConvergenceError(f"prox step did not converge at step {s + 1} ({res.status})")
            newton += res.newton_iterations
            worst = max(worst, res.stationarity_residual)
            xs[i] = res.x_next
            out_x[i][s + 1] = xs[i]
    info = {"backend": "numpy", "newton_iterations": int(newton), "worst_residual": float(worst)}
    return out_x, out_hat, costs, info


# ---------------------------------------------------------------------------
# Matrix-game simplex dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScaledMatrix:
    """Row player's loss matrix rescaled to [0, 1] and the map back."""

    loss: np.ndarray
    lo: float
    width: float


def scaled_loss_matrix(game_or_matrix, normalize: bool = True) -> ScaledMatrix:
    """Loss matrix of the minimizing row player, optionally mapped onto [0, 1].

    Accepts a matrix game, a matrix-game spec, or a raw array (row player
    minimizes). A constant matrix maps to all zeros.
    """
    A = _cost_matrix(game_or_matrix)
    if not normalize:
        return ScaledMatrix(A, 0.0, 1.0)
    lo, hi = float(A.min()), float(A.max())
    width = hi - lo
    if width <= 0:
        return ScaledMatrix(np.zeros_like(A), lo, 1.0)
    return ScaledMatrix((A - lo) / width, lo, width)


def _cost_matrix(obj) -> np.ndarray:
    base = getattr(obj, "base", None)
    if base is not None and hasattr(base, "A"):
        obj = base
    if hasattr(obj, "cost_matrix"):
        return np.asarray(obj.cost_matrix, dtype=float)
    if hasattr(obj, "A"):
        return np.asarray(obj.A, dtype=float)
    A = np.atleast_2d(np.asarray(obj, dtype=float))
    if A.ndim != 2:
        raise UsageError("payoff matrix must be two-dimensional")
    return A


def _beta_split(beta: float, beta_mode: str) -> tuple:
    if beta_mode == "clip":
        return beta, 0.0
    if beta_mode == "offset":
        return 0.0, beta
    if beta_mode == "both":
        return beta, beta
    raise UsageError(f"unknown beta mode {beta_mode!r}")


def _simplex_checks(m: int, k: int, eta: float, tau: float, beta_clip: float) -> None:
    if eta < 0 or tau < 0:
        raise UsageError("eta and tau must be nonnegative")
    if eta * tau >= 1:
        raise UsageError("need eta * tau < 1")
    if beta_clip * max(m, k) > 1 + 1e-12:
        raise UsageError("floor beta too large for the simplex")


def _one_hot(idx: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((idx.size, size))
    out[np.arange(idx.size), idx] = 1.0
    return out


def _draw_index(p: np.ndarray, u: float) -> int:
    return int(np.searchsorted(np.cumsum(p)[:-1], u, side="right"))


def run_entropy_bandit_omd(
    game,
    eta: float,
    tau: float,
    beta: float,
    T: int,
    seed: int = 0,
    *,
    beta_mode: str = "clip",
    noise: Optional[NoiseSpec] = None,
    normalize: bool = True,
    engine: str = "kernel",
    backend: Optional[str] = None,
    chunk: int = CHUNK,
) -> Trajectory:
    """Entropy-regularized bandit mirror descent on a clipped simplex.

    Both players sample an action from their current mixed strategy, see
    only the entry of the (rescaled) loss matrix, build an importance
    weighted estimate plus ``tau log x`` and take a KL prox step onto
    ``{x >= beta}``. ``beta_mode`` chooses whether ``beta`` is the floor of
    the domain (``clip``), the offset in the estimate denominator
    (``offset``) or both.
    """
    _check_T(T)
    if engine not in ("kernel", "reference"):
        raise UsageError(f"unknown engine {engine!r}")
    noise = noise if noise is not None else NoiseSpec()
    S = scaled_loss_matrix(game, normalize)
    A = np.ascontiguousarray(S.loss)
    m, k = A.shape
    b_clip, b_off = _beta_split(beta, beta_mode)
    _simplex_checks(m, k, eta, tau, b_clip)
    r_u = rngmod.stream(seed, rngmod.SAMPLE)
    r_n = rngmod.stream(seed, rngmod.NOISE)
    x = scale_to_floor(np.full(m, 1.0 / m), b_clip)
    y = scale_to_floor(np.full(k, 1.0 / k), b_clip)
    X = np.empty((T + 1, m))
    Y = np.empty((T + 1, k))
    X[0], Y[0] = x, y
    a_idx = np.empty(T, dtype=np.int64)
    b_idx = np.empty(T, dtype=np.int64)
    pays = np.empty(T)
    start = time.perf_counter()
    core = get_backend(backend) if engine == "kernel" else None
    for lo in range(0, T, chunk):
        hi = min(T, lo + chunk)
        c = hi - lo
        u = r_u.random((c, 2))
        eps = np.ascontiguousarray(noise.sample(r_n, c)) if noise.active else np.empty(0)
        if core is not None:
            core.entropy_chunk(x, y, A, float(eta), float(tau), float(b_clip), float(b_off), u, eps,
                               X[lo + 1:hi + 1], Y[lo + 1:hi + 1], a_idx[lo:hi], b_idx[lo:hi])
        else:
            for s in range(c):
                a = _draw_index(x, u[s, 0])
                b = _draw_index(y, u[s, 1])
                pay = A[a, b] + (eps[s] if eps.size else 0.0)
                gx = simplex_importance_estimate(a, pay, x, b_off, tau).g
                gy = simplex_importance_estimate(b, -pay, y, b_off, tau).g
                x = kl_prox_clipped_simplex(x, gx, eta, b_clip)
                y = kl_prox_clipped_simplex(y, gy, eta, b_clip)
                X[lo + s + 1], Y[lo + s + 1] = x, y
                a_idx[lo + s], b_idx[lo + s] = a, b
    pays[:] = A[a_idx, b_idx]
    if noise.active:
        pays += _replay_noise(noise, seed, T, chunk)
    sets = (Simplex(m), Simplex(k))
    _assert_feasible(sets, [X, Y], "iterate")
    return Trajectory(
        algorithm="entropy_omd",
        seed=seed,
        iterates=[X, Y],
        played=[_one_hot(a_idx, m), _one_hot(b_idx, k)],
        play_means=[X[:-1], Y[:-1]],
        costs=np.column_stack([pays, -pays]),
        wall_clock=time.perf_counter() - start,
        schedule_fingerprint=_fingerprint(eta=eta, tau=tau, beta=beta, beta_mode=beta_mode),
        info={"loss_matrix": A, "loss_lo": S.lo, "loss_width": S.width, "tau": tau, "eta": eta, "beta": beta,
              "beta_mode": beta_mode, "engine": engine, "actions": (a_idx, b_idx)},
    )


def _replay_noise(noise: NoiseSpec, seed: int, T: int, chunk: int, per_step: int = 1) -> np.ndarray:
    r_n = rngmod.stream(seed, rngmod.NOISE)
    parts = []
    for lo in range(0, T, chunk):
        c = min(T, lo + chunk) - lo
        parts.append(noise.sample(r_n, (c, per_step) if per_step > 1 else c))
    return np.concatenate(parts)


def _fingerprint(**kw) -> str:
    import hashlib
    import json

    return hashlib.sha256(json.dumps(kw, sort_keys=True, default=float).encode()).hexdigest()[:16]


def run_optimistic_regularized_ew(
    game,
    eta: float,
    tau: float,
    beta: float,
    rho: float,
    T: int,
    seed: int = 0,
    *,
    beta_mode: str = "offset",
    noise: Optional[NoiseSpec] = None,
    normalize: bool = True,
    engine: str = "kernel",
    backend: Optional[str] = None,
    chunk: int = CHUNK,
) -> Trajectory:
    """Optimistic entropy-regularized exponentiated weights with bandit feedback.

    Each round plays twice: once at ``z_t = (x_t, y_t)`` and once at the
    half point. Both updates start from the same base
    ``(1 - eta tau) log x_t``; the half point uses the estimate from the
    first play and the next iterate the estimate from the second. Estimates
    pass through the momentum smoother with weight ``rho`` (``rho = 1``
    switches it off).

    The trajectory records ``2 T`` plays; ``half_iterates`` holds the half
    points.
    """
    _check_T(T)
    if engine not in ("kernel", "reference"):
        raise UsageError(f"unknown engine {engine!r}")
    if not 0 < rho <= 1:
        raise UsageError("rho must lie in (0, 1]")
    noise = noise if noise is not None else NoiseSpec()
    S = scaled_loss_matrix(game, normalize)
    A = np.ascontiguousarray(S.loss)
    m, k = A.shape
    b_clip, b_off = _beta_split(beta, beta_mode)
    _simplex_checks(m, k, eta, tau, b_clip)
    r_u = rngmod.stream(seed, rngmod.SAMPLE)
    r_n = rngmod.stream(seed, rngmod.NOISE)
    x = scale_to_floor(np.full(m, 1.0 / m), b_clip)
    y = scale_to_floor(np.full(k, 1.0 / k), b_clip)
    X = np.empty((T + 1, m))
    Y = np.empty((T + 1, k))
    XH = np.empty((T, m))
    YH = np.empty((T, k))
    X[0], Y[0] = x, y
    plays = np.empty((T, 4), dtype=np.int64)
    mom_x = np.zeros(m)
    mom_y = np.zeros(k)
    start = time.perf_counter()
    core = get_backend(backend) if engine == "kernel" else None
    for lo in range(0, T, chunk):
        hi = min(T, lo + chunk)
        c = hi - lo
        u = r_u.random((c, 4))
        eps = noise.sample(r_n, (c, 2)) if noise.active else np.zeros((c, 2))
        eps = np.ascontiguousarray(eps)
        if core is not None:
            core.optimistic_chunk(x, y, A, float(eta), float(tau), float(b_clip), float(b_off), float(rho),
                                  mom_x, mom_y, u, eps if noise.active else np.empty((0, 2)),
                                  X[lo + 1:hi + 1], Y[lo + 1:hi + 1], XH[lo:hi], YH[lo:hi], plays[lo:hi])
            continue
        for s in range(c):
            keep = 1.0 - eta * tau
            with np.errstate(divide="ignore"):
                lx = keep * np.log(x)
                ly = keep * np.log(y)
            px, py = x, y
            for half in range(2):
                a = _draw_index(px, u[s, 2 * half])
                b = _draw_index(py, u[s, 2 * half + 1])
                pay = A[a, b] + eps[s, half]
                plays[lo + s, 2 * half:2 * half + 2] = a, b
                mom_x = momentum_update(mom_x, simplex_importance_estimate(a, pay, px, b_off).g, rho)
                mom_y = momentum_update(mom_y, simplex_importance_estimate(b, -pay, py, b_off).g, rho)
                nx = _tilt(lx, mom_x, eta, b_clip)
                ny = _tilt(ly, mom_y, eta, b_clip)
                if half == 0:
                    px, py = nx, ny
                    XH[lo + s], YH[lo + s] = nx, ny
                else:
                    x, y = nx, ny
            X[lo + s + 1], Y[lo + s + 1] = x, y
    a_all = plays[:, [0, 2]].ravel()
    b_all = plays[:, [1, 3]].ravel()
    pays = A[a_all, b_all]
    if noise.active:
        pays = pays + _replay_noise(noise, seed, T, chunk, per_step=2).ravel()
    sets = (Simplex(m), Simplex(k))
    _assert_feasible(sets, [X, Y], "iterate")
    _assert_feasible(sets, [XH, YH], "half iterate")
    means_x = np.empty((2 * T, m))
    means_y = np.empty((2 * T, k))
    means_x[0::2], means_x[1::2] = X[:-1], XH
    means_y[0::2], means_y[1::2] = Y[:-1], YH
    return Trajectory(
        algorithm="optimistic_ew",
        seed=seed,
        iterates=[X, Y],
        played=[_one_hot(a_all, m), _one_hot(b_all, k)],
        play_means=[means_x, means_y],
        costs=np.column_stack([pays, -pays]),
        half_iterates=[XH, YH],
        wall_clock=time.perf_counter() - start,
        schedule_fingerprint=_fingerprint(eta=eta, tau=tau, beta=beta, rho=rho, beta_mode=beta_mode),
        info={"loss_matrix": A, "loss_lo": S.lo, "loss_width": S.width, "tau": tau, "eta": eta, "beta": beta,
              "rho": rho, "beta_mode": beta_mode, "engine": engine, "actions": (a_all, b_all)},
    )


def _tilt(base_log: np.ndarray, g: np.ndarray, eta: float, beta_clip: float) -> np.ndarray:
    z = base_log - eta * g
    w = np.exp(z - np.max(z))
    w = w / w.sum()
    return scale_to_floor(w, beta_clip) if beta_clip > 0 else w


# ---------------------------------------------------------------------------
# Exact-gradient baselines
# ---------------------------------------------------------------------------


def run_exact_gradient_baseline(
    game: Game,
    method: str,
    eta: float,
    T: int,
    *,
    x0: Optional[Sequence[np.ndarray]] = None,
    game_sequence=None,
) -> Trajectory:
    """Simultaneous full-information updates with exact gradients.

    ``gd_projected`` takes a Euclidean projected gradient step on every
    player's set; ``omd_entropy`` takes a multiplicative-weights step and
    needs simplex sets. Players start at the centers of their sets unless
    ``x0`` is given.
    """
    _check_T(T)
    if method not in ("gd_projected", "omd_entropy"):
        raise UsageError(f"unknown baseline method {method!r}")
    if eta < 0:
        raise UsageError("eta must be nonnegative")
    if not game.has_gradient:
        raise UsageError("exact baselines need a gradient oracle")
    sets = game.sets
    if method == "omd_entropy" and not all(isinstance(s, Simplex) and s.floor == 0 for s in sets):
        raise UsageError("omd_entropy needs unclipped simplex action sets")
    seq = game_sequence if game_sequence is not None else _Static(game)
    xs = [np.asarray(v, dtype=float).copy() for v in (x0 if x0 is not None else game.center_profile())]
    n = len(xs)
    iters = [np.empty((T + 1, x.size)) for x in xs]
    costs = np.empty((T, n))
    for i in range(n):
        iters[i][0] = xs[i]
    start = time.perf_counter()
    for s in range(T):
        g_t = seq.game_at(s + 1)
        prof = tuple(xs)
        grads = [g_t.gradient(i, prof) for i in range(n)]
        if method == "gd_projected":
            xs = [sets[i].project(xs[i] - eta * grads[i]) for i in range(n)]
        else:
            new = []
            for i in range(n):
                z = np.log(xs[i]) - eta * grads[i]
                w = np.exp(z - z.max())
                new.append(w / w.sum())
            xs = new
        for i in range(n):
            iters[i][s + 1] = xs[i]
    _assert_feasible(sets, iters, "iterate")
    if game_sequence is None:
        rows = [X[:-1] for X in iters]
        for i in range(n):
            costs[:, i] = game.cost_batch(i, rows)
    else:
        for s in range(T):
            prof = tuple(X[s] for X in iters)
            g_t = seq.game_at(s + 1)
            costs[s] = [g_t.cost(i, prof) for i in range(n)]
    return Trajectory(
        algorithm=f"exact_{method}",
        seed=None,
        iterates=iters,
        played=[X[:-1] for X in iters],
        play_means=[X[:-1] for X in iters],
        costs=costs,
        wall_clock=time.perf_counter() - start,
        schedule_fingerprint=_fingerprint(method=method, eta=eta),
        info={"method": method, "eta": eta},
    )
