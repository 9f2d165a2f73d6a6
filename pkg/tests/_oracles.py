"""Independent reference computations used to derive expected values.

Nothing here calls the package's solvers; each oracle uses a different
method from the implementation it checks.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def clipped_kl_prox_kkt(x_t, g, eta, beta):
    """Enumerate every pinned set and return the one satisfying the KKT conditions.

    The minimizer of ``<x, g> + KL(x, x_t) / eta`` over ``{x >= beta, sum = 1}``
    has ``x_F = c w_F`` on the free set with ``w = x_t exp(-eta g)`` and
    ``x_P = beta`` on the pinned set, where ``c w_i <= beta`` on ``P``.
    """
    x_t = np.asarray(x_t, dtype=float)
    w = x_t * np.exp(-eta * (np.asarray(g) - np.min(g)))
    d = w.size
    found = []
    for k in range(d):
        for P in itertools.combinations(range(d), k):
            F = [i for i in range(d) if i not in P]
            c = (1.0 - beta * k) / w[F].sum()
            x = np.full(d, beta)
            x[F] = c * w[F]
            if np.all(x[F] >= beta - 1e-15) and all(c * w[i] <= beta + 1e-15 for i in P):
                found.append(x)
    if beta * d >= 1 - 1e-15:
        found.append(np.full(d, 1.0 / d))
    assert found, "no KKT point"
    return found[0]


def cournot_nash_kkt(cost, intercept, slope, capacity):
    """Cournot equilibrium by enumerating which firms sit at 0, interior or capacity.

    For a fixed pattern the interior outputs solve a linear system; the
    pattern is accepted when the first-order conditions hold with the right
    signs at the bounds.
    """
    d, a, b, C = (np.asarray(v, dtype=float) for v in (cost, intercept, slope, capacity))
    n = a.size
    for pattern in itertools.product((0, 1, 2), repeat=n):
        x = np.zeros(n)
        I = [i for i in range(n) if pattern[i] == 1]
        U = [i for i in range(n) if pattern[i] == 2]
        x[U] = C[U]
        if I:
            # d_i - a_i + b_i (S + x_i) = 0 with S = sum x
            M = np.zeros((len(I), len(I)))
            rhs = np.zeros(len(I))
            for r, i in enumerate(I):
                M[r, :] = b[i]
                M[r, r] += b[i]
                rhs[r] = a[i] - d[i] - b[i] * C[U].sum()
            x[I] = np.linalg.solve(M, rhs)
        S = x.sum()
        grad = d - a + b * (S + x)
        ok = True
        for i in range(n):
            if pattern[i] == 0:
                ok &= grad[i] >= -1e-12
            elif pattern[i] == 2:
                ok &= grad[i] <= 1e-12
            else:
                ok &= -1e-12 <= x[i] <= C[i] + 1e-12
        if ok:
            return x
    raise AssertionError("no equilibrium pattern")


def matrix_game_lp(A):
    """Row minimizer's equilibrium strategy and the value via linear programming."""
    A = np.asarray(A, dtype=float)
    m, k = A.shape
    # min v  s.t.  (x^T A)_j <= v, sum x = 1, x >= 0
    c = np.r_[np.zeros(m), 1.0]
    A_ub = np.c_[A.T, -np.ones(k)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=np.r_[np.ones(m), 0.0][None, :], b_eq=[1.0],
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    return res.x[:m], res.x[m]


def duality_gap_grid(A, x, y, step=1e-3):
    """Duality gap of a 2x2 game by scanning both players' mixed strategies on a grid."""
    p = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    Y = np.column_stack([p, 1 - p])
    best_y = np.max(Y @ (np.asarray(x) @ A))
    best_x = np.min(Y @ (A @ np.asarray(y)))
    return best_y - best_x


def smoothed_cost_ball_quadrature(cost, x, A, delta, n_r=40, n_theta=256):
    """``E_u c(x + delta A u)`` for u uniform on the 2-d unit disk, by product quadrature.

    Gauss-Legendre in the radius (weight r) and the trapezoid rule in the
    angle; exact for polynomial costs of modest degree.
    """
    r, wr = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (r + 1.0)
    wr = 0.5 * wr
    th = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    R, TH = np.meshgrid(r, th, indexing="ij")
    U = np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1).reshape(-1, 2)
    W = (wr[:, None] * R).reshape(-1) * (2 * np.pi / n_theta)
    pts = x + delta * U @ A.T
    vals = np.array([cost(p) for p in pts])
    return float(np.sum(W * vals) / np.pi)


def projected_gradient_zero_sum(A, eta, T):
    """Plain projected gradient play on a 2x2 zero-sum game, written from scratch."""
    A = np.asarray(A, dtype=float)
    p, q = 0.5, 0.5  # probability of the first action of each player
    for _ in range(T):
        x = np.array([p, 1 - p])
        y = np.array([q, 1 - q])
        gx = A @ y
        gy = -(A.T @ x)
        # the simplex projection of (p, 1-p) - eta g in 2-d moves p by -eta (g0 - g1) / 2
        p = min(1.0, max(0.0, p - eta * (gx[0] - gx[1]) / 2))
        q = min(1.0, max(0.0, q - eta * (gy[0] - gy[1]) / 2))
    return np.array([p, 1 - p]), np.array([q, 1 - q])
