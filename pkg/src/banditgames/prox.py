"""Inner solvers: barrier prox step, clipped-simplex KL prox, optimistic pair,
and the softmax fixed point of an entropy-regularized matrix game."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DomainError, NumericError, UsageError
from .geometry import Barrier, Regularizer

CONVERGED = "converged"
MAX_ITERS = "max_iters"
BOUNDARY_ESCAPE = "boundary_escape"
EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class ProxResult:
    x_next: np.ndarray
    newton_iterations: int
    stationarity_residual: float
    status: str

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def barrier_prox_step(
    h: Barrier,
    p: Regularizer,
    x_t: np.ndarray,
    g: np.ndarray,
    eta: float,
    kappa: float,
    scale: float,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> ProxResult:
    """Minimize ``eta <x, g> + eta kappa scale D_p(x, x_t) + D_h(x, x_t)``.

    Damped Newton from ``x_t``: steps are shrunk by ``1 / (1 + lam)`` while the
    Newton decrement ``lam`` exceeds 1/4 and taken in full afterwards. A step
    that leaves the domain is halved (fallback; the damped step provably stays
    inside the Dikin ellipsoid, so this only guards against rounding).

    Convergence means the stationarity residual
    ``|eta g + w (grad p(x) - grad p(x_t)) + grad h(x) - grad h(x_t)|``
    is at most ``tol``, or at most what floating point allows when that is
    larger. Near the boundary the barrier gradient and curvature are huge:
    the residual cannot be evaluated more accurately than a few ulps of its
    largest term, and a one-ulp move of ``x`` changes it by about
    ``eps |x| |H|``.
    """
    if tol <= 0:
        raise UsageError("tolerance must be positive")
    x_t = np.asarray(x_t, dtype=float)
    g = np.asarray(g, dtype=float)
    if not h.interior(x_t):
        raise DomainError("prox anchor is not interior")
    w = eta * kappa * scale
    if w < 0:
        raise UsageError("eta * kappa * scale must be nonnegative")
    gh_t = h.gradient(x_t)
    gp_t = p.gradient(x_t) if w > 0 else 0.0
    lin = eta * g - gh_t - w * gp_t
    root_d = math.sqrt(x_t.size)

    def residual_vec(x):
        gh = h.gradient(x)
        r = lin + gh
        size = np.abs(lin) + np.abs(gh)
        if w > 0:
            wgp = w * p.gradient(x)
            r = r + wgp
            size = size + np.abs(wgp)
        return r, max(tol, 8.0 * EPS * root_d * float(np.max(size)))

    x = x_t.copy()
    r, sum_level = residual_vec(x)
    res = float(np.linalg.norm(r))
    if not math.isfinite(res):
        raise NumericError("non-finite residual in prox step")
    it = 0
    floor = 0.0
    while True:
        H = h.hessian(x)
        if w > 0:
            H = H + w * p.hessian(x)
        # a one-ulp move of x changes the residual by about this much
        thresh = max(sum_level, EPS * root_d * (float(np.max(np.abs(x))) + 1.0) * float(np.max(np.abs(H))))
        if res <= thresh or it >= max_iter:
            break
        try:
            step = -np.linalg.solve(H, r)
        except np.linalg.LinAlgError as exc:
            raise NumericError("singular Newton system") from exc
        lam = math.sqrt(max(float(-r @ step), 0.0))
        t = 1.0 / (1.0 + lam) if lam > 0.25 else 1.0
        it += 1
        for _ in range(60):
            cand = x + t * step
            if h.interior(cand):
                break
            t *= 0.5
        else:
            return ProxResult(x, it, res, BOUNDARY_ESCAPE)
        if np.array_equal(cand, x):
            # no representable progress: the residual is at roundoff level
            floor = 4.0 * EPS * (float(np.max(np.abs(x))) + 1.0) * float(np.max(np.abs(H)))
            break
        x = cand
        r, sum_level = residual_vec(x)
        res = float(np.linalg.norm(r))
        if not math.isfinite(res):
            raise NumericError("non-finite residual in prox step")
    status = CONVERGED if res <= max(thresh, floor) else MAX_ITERS
    return ProxResult(x, it, res, status)


def kl_prox_clipped_simplex(x_t: np.ndarray, g: np.ndarray, eta: float, beta: float = 0.0) -> np.ndarray:
    """``argmin_{x >= beta, sum x = 1} <x, g> + KL(x, x_t) / eta``.

    The unconstrained solution is ``x_t * exp(-eta g)`` normalized. Every pass
    pins all coordinates that fall below ``beta`` and rescales the free ones to
    the remaining mass; at most ``d`` passes are needed.
    """
    x_t = np.asarray(x_t, dtype=float)
    d = x_t.size
    if beta * d > 1 + 1e-12:
        raise UsageError("floor too large for the simplex")
    with np.errstate(divide="ignore"):
        logw = np.log(x_t) - eta * np.asarray(g, dtype=float)
    logw -= np.max(logw)
    return scale_to_floor(np.exp(logw), beta)


def scale_to_floor(w: np.ndarray, beta: float = 0.0) -> np.ndarray:
    """KL projection of positive weights onto ``{x >= beta, sum x = 1}``.

    Minimizing ``KL(x, w)`` over the clipped simplex gives ``x = c * w`` on
    the free coordinates and ``beta`` on the pinned ones.
    """
    w = np.asarray(w, dtype=float)
    d = w.size
    if beta <= 0:
        return w / w.sum()
    pinned = np.zeros(d, dtype=bool)
    x = np.full(d, beta)
    for _ in range(d + 1):
        free = ~pinned
        x = np.full(d, beta)
        total = w[free].sum()
        if total > 0:
            x[free] = w[free] * ((1.0 - beta * pinned.sum()) / total)
        low = free & (x < beta)
        if not low.any():
            return x
        pinned |= low
    return x


def optimistic_exponentiated_pair(
    x_t: np.ndarray, g_prev: np.ndarray, g_half: np.ndarray, eta: float, tau: float
) -> tuple:
    """Two regularized multiplicative-weights steps from the same base point.

    ``x_half ∝ x_t^(1 - eta tau) exp(-eta g_prev)`` and
    ``x_next ∝ x_t^(1 - eta tau) exp(-eta g_half)``, with ``g`` a cost
    gradient (ascent on payoffs is descent on their negation).
    """
    x_t = np.asarray(x_t, dtype=float)
    if eta * tau > 1 + 1e-15:
        raise UsageError("need eta * tau <= 1")
    if np.any(x_t <= 0):
        raise DomainError("optimistic update needs a strictly positive base point")
    base = (1.0 - eta * tau) * np.log(x_t)
    out = []
    for g in (g_prev, g_half):
        z = base - eta * np.asarray(g, dtype=float)
        out.append(np.exp(z - logsumexp(z)))
    return out[0], out[1]


class FixedPoint(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    residual: float
    iterations: int
    converged: bool


def softmax_residual(A: np.ndarray, tau: float, x: np.ndarray, y: np.ndarray) -> float:
    rx = np.max(np.abs(x - softmax(A @ y / tau)))
    ry = np.max(np.abs(y - softmax(-A.T @ x / tau)))
    return float(max(rx, ry))


def regularized_ne_softmax_fixed_point(
    A: np.ndarray,
    tau: float,
    tol: float = 1e-12,
    max_iters: int = 100000,
    damping: float = 1.0,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
) -> FixedPoint:
    """Fixed point of ``x = softmax(A y / tau)``, ``y = softmax(-A^T x / tau)``.

    In this orientation x maximizes ``x^T A y`` and y minimizes it; pass ``-A``
    for a game whose row player minimizes. Iterates
    ``x <- (1 - damping) x + damping softmax(...)`` jointly for both players.
    """
    if tau <= 0:
        raise UsageError("tau must be positive")
    if not 0 < damping <= 1:
        raise UsageError("damping must lie in (0, 1]")
    A = np.asarray(A, dtype=float)
    m, k = A.shape
    x = np.full(m, 1.0 / m) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = np.full(k, 1.0 / k) if y0 is None else np.asarray(y0, dtype=float).copy()
    res = softmax_residual(A, tau, x, y)
    it = 0
    while res > tol and it < max_iters:
        bx = softmax(A @ y / tau)
        by = softmax(-A.T @ x / tau)
        x = (1.0 - damping) * x + damping * bx
        y = (1.0 - damping) * y + damping * by
        it += 1
        res = softmax_residual(A, tau, x, y)
    return FixedPoint(x, y, res, it, res <= tol)


def solve_regularized_ne(A: np.ndarray, tau: float, tol: float = 1e-12) -> FixedPoint:
    """Softmax fixed point, retrying with smaller damping until it converges."""
    best = None
    for damping in (1.0, 0.5, 0.2, 0.05, 0.01):
        fp = regularized_ne_softmax_fixed_point(A, tau, tol=tol, max_iters=200000, damping=damping)
        if fp.converged:
            return fp
        if best is None or fp.residual < best.residual:
            best = fp
    return best
