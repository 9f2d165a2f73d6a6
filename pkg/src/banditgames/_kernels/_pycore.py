"""Pure-Python implementation of the hot loops.

This module mirrors ``_core.pyx`` operation by operation so both backends
produce the same floating-point results. It is used when the compiled
extension is unavailable or when ``BANDITGAMES_PURE=1`` is set.
"""

import math

COURNOT = 0
MATRIX2 = 1

OK = 0
PROX_FAILED = 1
INFEASIBLE = 2
NONFINITE = 3


EPS = 2.220446049250313e-16


def _model_costs(model, params, shift_row, xh, lo, width, out):
    if model == COURNOT:
        n = len(out)
        tot = 0.0
        for i in range(n):
            tot += xh[i]
        for i in range(n):
            xi = xh[i]
            a = params[n + i] if shift_row is None else params[n + i] + shift_row[i]
            c = params[i] * xi - xi * (a - params[2 * n + i] * tot)
            out[i] = (c - lo) / width
    else:
        u = xh[0]
        v = xh[1]
        x0 = u
        x1 = 1.0 - u
        y0 = v
        y1 = 1.0 - v
        r0 = x0 * params[0] + x1 * params[2]
        r1 = x0 * params[1] + x1 * params[3]
        f = r0 * y0 + r1 * y1
        w = params[4]
        out[0] = ((f + 0.5 * w * (x0 * x0 + x1 * x1)) - lo) / width
        out[1] = ((-f + 0.5 * w * (y0 * y0 + y1 * y1)) - lo) / width


def box_md_chunk(
    x, lower, upper, offsets, eta, delta, a_weight, p_weight,
    normals, noise, model, params, shift, lo, width,
    out_x, out_xhat, out_cost, tol, max_iter,
):
    """Run ``len(eta)`` steps of the coordinatewise bandit mirror-descent loop.

    ``x`` (all players' coordinates, concatenated) is updated in place. Each
    coordinate carries a log barrier on ``[lower, upper]`` and the quadratic
    ``p``; ``a_weight`` is the multiple of ``hess p`` inside the perturbation
    shape and ``p_weight`` the multiple of ``D_p`` inside the prox step.

    Returns ``(status, step, newton_iterations, worst_residual)``.
    """
    steps = eta.shape[0]
    D = x.shape[0]
    n = offsets.shape[0] - 1
    sqrt_h = [0.0] * D
    zs = [0.0] * D
    xh = [0.0] * D
    cost = [0.0] * n
    newton = 0
    worst = 0.0
    use_noise = noise.shape[0] > 0
    for s in range(steps):
        et = eta[s]
        dl = delta[s]
        aw = a_weight[s]
        pw = p_weight[s]
        for i in range(n):
            nrm = 0.0
            for k in range(offsets[i], offsets[i + 1]):
                nrm += normals[s, k] * normals[s, k]
            nrm = math.sqrt(nrm)
            for k in range(offsets[i], offsets[i + 1]):
                z = normals[s, k] / nrm
                xk = x[k]
                a = xk - lower[k]
                b = upper[k] - xk
                hk = 1.0 / (a * a) + 1.0 / (b * b) + aw
                r = math.sqrt(hk)
                sqrt_h[k] = r
                zs[k] = z
                v = xk + dl * ((1.0 / r) * z)
                if not (lower[k] <= v <= upper[k]):
                    return INFEASIBLE, s, newton, worst
                xh[k] = v
                out_xhat[s, k] = v
        _model_costs(model, params, shift[s] if shift.shape[0] else None, xh, lo, width, cost)
        for i in range(n):
            c = cost[i]
            if use_noise:
                c = c + noise[s, i]
            out_cost[s, i] = c
            dim = offsets[i + 1] - offsets[i]
            for k in range(offsets[i], offsets[i + 1]):
                g = dim / dl * c * (sqrt_h[k] * zs[k])
                xk = x[k]
                lk = lower[k]
                uk = upper[k]
                hp0 = -1.0 / (xk - lk) + 1.0 / (uk - xk)
                c0 = et * g - hp0 - pw * xk
                y = xk
                it = 0
                while True:
                    hp = -1.0 / (y - lk) + 1.0 / (uk - y)
                    phi = c0 + hp + pw * y
                    if not math.isfinite(phi):
                        return NONFINITE, s, newton, worst
                    a = y - lk
                    b = uk - y
                    d2 = 1.0 / (a * a) + 1.0 / (b * b) + pw
                    # tol, or what rounding of the sum and a one-ulp move of y allow
                    thresh = max(tol, 8.0 * EPS * (abs(c0) + abs(hp) + pw * abs(y)), EPS * (abs(y) + 1.0) * d2)
                    if abs(phi) <= thresh:
                        break
                    if it >= max_iter:
                        return PROX_FAILED, s, newton, worst
                    step = -phi / d2
                    lam = math.sqrt(max(-phi * step, 0.0))
                    damp = 1.0 / (1.0 + lam) if lam > 0.25 else 1.0
                    it += 1
                    for _ in range(60):
                        yn = y + damp * step
                        if lk < yn < uk:
                            break
                        damp *= 0.5
                    else:
                        return PROX_FAILED, s, newton, worst
                    if yn == y:
                        # no representable progress: accept at roundoff level
                        if abs(phi) > 4.0 * EPS * (abs(y) + 1.0) * d2:
                            return PROX_FAILED, s, newton, worst
                        break
                    y = yn
                newton += it
                if abs(phi) > worst:
                    worst = abs(phi)
                x[k] = y
        for k in range(D):
            out_x[s, k] = x[k]
    return OK, steps, newton, worst


def _sample(p, u):
    c = 0.0
    last = p.shape[0] - 1
    for i in range(last):
        c += p[i]
        if u < c:
            return i
    return last


def _safe_log(v):
    return math.log(v) if v > 0 else -math.inf


def _pin_floor(w, beta, out, pinned):
    """Scale ``w`` onto the simplex with every coordinate at least ``beta``."""
    d = w.shape[0]
    if beta <= 0:
        s = 0.0
        for i in range(d):
            s += w[i]
        for i in range(d):
            out[i] = w[i] / s
        return
    for i in range(d):
        pinned[i] = 0
    for _ in range(d + 1):
        npin = 0
        s = 0.0
        for i in range(d):
            if pinned[i]:
                npin += 1
            else:
                s += w[i]
        scale = (1.0 - beta * npin) / s if s > 0 else 0.0
        new = 0
        for i in range(d):
            if pinned[i]:
                out[i] = beta
            else:
                out[i] = w[i] * scale
                if out[i] < beta:
                    new += 1
        if new == 0:
            return
        for i in range(d):
            if not pinned[i] and out[i] < beta:
                pinned[i] = 1
                out[i] = beta


def _kl_prox(x, g, eta, beta, out, w, pinned):
    d = x.shape[0]
    mx = -math.inf
    for i in range(d):
        w[i] = _safe_log(x[i]) - eta * g[i]
        if w[i] > mx:
            mx = w[i]
    for i in range(d):
        w[i] = math.exp(w[i] - mx)
    _pin_floor(w, beta, out, pinned)


def entropy_chunk(
    x, y, A, eta, tau, beta_clip, beta_off, u, noise,
    out_x, out_y, out_a, out_b,
):
    """Clipped-simplex KL mirror descent with importance-weighted estimates.

    ``A`` is the row player's loss matrix scaled to [0, 1]; the column player
    descends on its negation. ``u`` holds two uniforms per step for sampling.
    """
    steps = u.shape[0]
    m = x.shape[0]
    k = y.shape[0]
    gx = x.copy()
    gy = y.copy()
    wx = x.copy()
    wy = y.copy()
    px = [0] * m
    py = [0] * k
    nx = x.copy()
    ny = y.copy()
    use_noise = noise.shape[0] > 0
    for s in range(steps):
        a = _sample(x, u[s, 0])
        b = _sample(y, u[s, 1])
        pay = A[a, b]
        if use_noise:
            pay = pay + noise[s]
        for i in range(m):
            gx[i] = tau * _safe_log(x[i]) if tau != 0 else 0.0
        gx[a] = gx[a] + pay / (x[a] + beta_off)
        for j in range(k):
            gy[j] = tau * _safe_log(y[j]) if tau != 0 else 0.0
        gy[b] = gy[b] + (-pay) / (y[b] + beta_off)
        _kl_prox(x, gx, eta, beta_clip, nx, wx, px)
        _kl_prox(y, gy, eta, beta_clip, ny, wy, py)
        for i in range(m):
            x[i] = nx[i]
            out_x[s, i] = nx[i]
        for j in range(k):
            y[j] = ny[j]
            out_y[s, j] = ny[j]
        out_a[s] = a
        out_b[s] = b


def _tilted(base_log, g, eta, out):
    d = out.shape[0]
    mx = -math.inf
    for i in range(d):
        out[i] = base_log[i] - eta * g[i]
        if out[i] > mx:
            mx = out[i]
    s = 0.0
    for i in range(d):
        out[i] = math.exp(out[i] - mx)
        s += out[i]
    for i in range(d):
        out[i] = out[i] / s


def _estimate(p, played, pay, beta_off, g):
    for i in range(p.shape[0]):
        g[i] = 0.0
    g[played] = pay / (p[played] + beta_off)


def _smooth(buf, g, rho):
    if rho == 1.0:
        for i in range(g.shape[0]):
            buf[i] = g[i]
    else:
        for i in range(g.shape[0]):
            buf[i] = (1.0 - rho) * buf[i] + rho * g[i]


def optimistic_chunk(
    x, y, A, eta, tau, beta_clip, beta_off, rho, mom_x, mom_y, u, noise,
    out_x, out_y, out_xh, out_yh, out_plays,
):
    """Optimistic regularized exponentiated weights with two plays per round.

    Per round: play at ``(x, y)`` and estimate, move both players to the
    half point from the shared base ``(1 - eta tau) log x``, play again there,
    estimate, and move to the next point from the same base. ``u`` holds
    four uniforms per round and ``noise`` two noise draws per round.
    """
    steps = u.shape[0]
    m = x.shape[0]
    k = y.shape[0]
    lx = x.copy()
    ly = y.copy()
    gx = x.copy()
    gy = y.copy()
    xh = x.copy()
    yh = y.copy()
    px = [0] * m
    py = [0] * k
    use_noise = noise.shape[0] > 0
    keep = 1.0 - eta * tau
    for s in range(steps):
        for i in range(m):
            lx[i] = keep * _safe_log(x[i])
        for j in range(k):
            ly[j] = keep * _safe_log(y[j])
        for half in range(2):
            px_now = x if half == 0 else xh
            py_now = y if half == 0 else yh
            a = _sample(px_now, u[s, 2 * half])
            b = _sample(py_now, u[s, 2 * half + 1])
            pay = A[a, b]
            if use_noise:
                pay = pay + noise[s, half]
            out_plays[s, 2 * half] = a
            out_plays[s, 2 * half + 1] = b
            _estimate(px_now, a, pay, beta_off, gx)
            _estimate(py_now, b, -pay, beta_off, gy)
            _smooth(mom_x, gx, rho)
            _smooth(mom_y, gy, rho)
            if half == 0:
                _tilted(lx, mom_x, eta, xh)
                _tilted(ly, mom_y, eta, yh)
                if beta_clip > 0:
                    _pin_floor(xh.copy(), beta_clip, xh, px)
                    _pin_floor(yh.copy(), beta_clip, yh, py)
                for i in range(m):
                    out_xh[s, i] = xh[i]
                for j in range(k):
                    out_yh[s, j] = yh[j]
            else:
                _tilted(lx, mom_x, eta, x)
                _tilted(ly, mom_y, eta, y)
                if beta_clip > 0:
                    _pin_floor(x.copy(), beta_clip, x, px)
                    _pin_floor(y.copy(), beta_clip, y, py)
        for i in range(m):
            out_x[s, i] = x[i]
        for j in range(k):
            out_y[s, j] = y[j]
