# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors ``_pycore.py`` operation by operation."""

from libc.math cimport sqrt, log, exp, fabs, fmax, isfinite, INFINITY

import numpy as np

cdef enum:
    COURNOT = 0
    MATRIX2 = 1

cdef enum:
    OK = 0
    PROX_FAILED = 1
    INFEASIBLE = 2
    NONFINITE = 3

cdef double EPS = 2.220446049250313e-16


cdef void _model_costs(int model, const double[::1] params, const double[:, ::1] shift, Py_ssize_t s,
                       bint has_shift, double[::1] xh, double lo, double width, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n
    cdef double tot, xi, a, c, u, v, x0, x1, y0, y1, r0, r1, f, w
    if model == COURNOT:
        n = out.shape[0]
        tot = 0.0
        for i in range(n):
            tot += xh[i]
        for i in range(n):
            xi = xh[i]
            if has_shift:
                a = params[n + i] + shift[s, i]
            else:
                a = params[n + i]
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


def box_md_chunk(double[::1] x, const double[::1] lower, const double[::1] upper, const long[::1] offsets,
                 const double[::1] eta, const double[::1] delta, const double[::1] a_weight,
                 const double[::1] p_weight, const double[:, ::1] normals, const double[:, ::1] noise,
                 int model, const double[::1] params, const double[:, ::1] shift, double lo, double width,
                 double[:, ::1] out_x, double[:, ::1] out_xhat, double[:, ::1] out_cost,
                 double tol, int max_iter):
    cdef Py_ssize_t steps = eta.shape[0]
    cdef Py_ssize_t D = x.shape[0]
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef double[::1] sqrt_h = np.zeros(D)
    cdef double[::1] zs = np.zeros(D)
    cdef double[::1] xh = np.zeros(D)
    cdef double[::1] cost = np.zeros(n)
    cdef long newton = 0
    cdef double worst = 0.0
    cdef bint use_noise = noise.shape[0] > 0
    cdef bint has_shift = shift.shape[0] > 0
    cdef Py_ssize_t s, i, k
    cdef int it, tries, status = OK
    cdef double et, dl, aw, pw, nrm, z, xk, a, b, hk, r, v, c, g, lk, uk, hp0, hp, c0, thresh
    cdef double y, phi, d2, step, lam, yn, damp
    cdef int inside
    cdef long dim
    with nogil:
        for s in range(steps):
            et = eta[s]
            dl = delta[s]
            aw = a_weight[s]
            pw = p_weight[s]
            for i in range(n):
                nrm = 0.0
                for k in range(offsets[i], offsets[i + 1]):
                    nrm += normals[s, k] * normals[s, k]
                nrm = sqrt(nrm)
                for k in range(offsets[i], offsets[i + 1]):
                    z = normals[s, k] / nrm
                    xk = x[k]
                    a = xk - lower[k]
                    b = upper[k] - xk
                    hk = 1.0 / (a * a) + 1.0 / (b * b) + aw
                    r = sqrt(hk)
                    sqrt_h[k] = r
                    zs[k] = z
                    v = xk + dl * ((1.0 / r) * z)
                    if not (lower[k] <= v and v <= upper[k]):
                        with gil:
                            return INFEASIBLE, s, newton, worst
                    xh[k] = v
                    out_xhat[s, k] = v
            _model_costs(model, params, shift, s, has_shift, xh, lo, width, cost)
            for i in range(n):
                c = cost[i]
                if use_noise:
                    c = c + noise[s, i]
                out_cost[s, i] = c
                dim = offsets[i + 1] - offsets[i]
                for k in range(offsets[i], offsets[i + 1]):
                    g = <double>dim / dl * c * (sqrt_h[k] * zs[k])
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
                        if not isfinite(phi):
                            with gil:
                                return NONFINITE, s, newton, worst
                        a = y - lk
                        b = uk - y
                        d2 = 1.0 / (a * a) + 1.0 / (b * b) + pw
                        # tol, or what rounding of the sum and a one-ulp move of y allow
                        thresh = fmax(fmax(tol, 8.0 * EPS * (fabs(c0) + fabs(hp) + pw * fabs(y))), EPS * (fabs(y) + 1.0) * d2)
                        if fabs(phi) <= thresh:
                            break
                        if it >= max_iter:
                            with gil:
                                return PROX_FAILED, s, newton, worst
                        step = -phi / d2
                        lam = sqrt(fmax(-phi * step, 0.0))
                        damp = 1.0 / (1.0 + lam) if lam > 0.25 else 1.0
                        it += 1
                        inside = 0
                        for tries in range(60):
                            yn = y + damp * step
                            if lk < yn and yn < uk:
                                inside = 1
                                break
                            damp = damp * 0.5
                        if not inside:
                            with gil:
                                return PROX_FAILED, s, newton, worst
                        if yn == y:
                            if fabs(phi) > 4.0 * EPS * (fabs(y) + 1.0) * d2:
                                with gil:
                                    return PROX_FAILED, s, newton, worst
                            break
                        y = yn
                    newton += it
                    if fabs(phi) > worst:
                        worst = fabs(phi)
                    x[k] = y
            for k in range(D):
                out_x[s, k] = x[k]
    return OK, steps, newton, worst


cdef inline Py_ssize_t _sample(double[::1] p, double u) noexcept nogil:
    cdef double c = 0.0
    cdef Py_ssize_t i, last = p.shape[0] - 1
    for i in range(last):
        c += p[i]
        if u < c:
            return i
    return last


cdef inline double _safe_log(double v) noexcept nogil:
    if v > 0:
        return log(v)
    return -INFINITY


cdef void _pin_floor(double[::1] w, double beta, double[::1] out, int[::1] pinned) noexcept nogil:
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t i, rep
    cdef long npin, new
    cdef double s, scale
    if beta <= 0:
        s = 0.0
        for i in range(d):
            s += w[i]
        for i in range(d):
            out[i] = w[i] / s
        return
    for i in range(d):
        pinned[i] = 0
    for rep in range(d + 1):
        npin = 0
        s = 0.0
        for i in range(d):
            if pinned[i]:
                npin += 1
            else:
                s += w[i]
        if s > 0:
            scale = (1.0 - beta * npin) / s
        else:
            scale = 0.0
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


cdef void _kl_prox(double[::1] x, double[::1] g, double eta, double beta, double[::1] out,
                   double[::1] w, int[::1] pinned) noexcept nogil:
    cdef Py_ssize_t d = x.shape[0]
    cdef Py_ssize_t i
    cdef double mx = -INFINITY
    for i in range(d):
        w[i] = _safe_log(x[i]) - eta * g[i]
        if w[i] > mx:
            mx = w[i]
    for i in range(d):
        w[i] = exp(w[i] - mx)
    _pin_floor(w, beta, out, pinned)


def entropy_chunk(double[::1] x, double[::1] y, const double[:, ::1] A, double eta, double tau,
                  double beta_clip, double beta_off, const double[:, ::1] u, const double[::1] noise,
                  double[:, ::1] out_x, double[:, ::1] out_y, long[::1] out_a, long[::1] out_b):
    cdef Py_ssize_t steps = u.shape[0]
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t k = y.shape[0]
    cdef double[::1] gx = np.zeros(m)
    cdef double[::1] gy = np.zeros(k)
    cdef double[::1] wx = np.zeros(m)
    cdef double[::1] wy = np.zeros(k)
    cdef double[::1] nx = np.zeros(m)
    cdef double[::1] ny = np.zeros(k)
    cdef int[::1] px = np.zeros(m, dtype=np.intc)
    cdef int[::1] py = np.zeros(k, dtype=np.intc)
    cdef bint use_noise = noise.shape[0] > 0
    cdef Py_ssize_t s, i, j, a, b
    cdef double pay
    with nogil:
        for s in range(steps):
            a = _sample(x, u[s, 0])
            b = _sample(y, u[s, 1])
            pay = A[a, b]
            if use_noise:
                pay = pay + noise[s]
            for i in range(m):
                if tau != 0:
                    gx[i] = tau * _safe_log(x[i])
                else:
                    gx[i] = 0.0
            gx[a] = gx[a] + pay / (x[a] + beta_off)
            for j in range(k):
                if tau != 0:
                    gy[j] = tau * _safe_log(y[j])
                else:
                    gy[j] = 0.0
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


cdef void _tilted(double[::1] base_log, double[::1] g, double eta, double[::1] out) noexcept nogil:
    cdef Py_ssize_t d = out.shape[0]
    cdef Py_ssize_t i
    cdef double mx = -INFINITY
    cdef double s = 0.0
    for i in range(d):
        out[i] = base_log[i] - eta * g[i]
        if out[i] > mx:
            mx = out[i]
    for i in range(d):
        out[i] = exp(out[i] - mx)
        s += out[i]
    for i in range(d):
        out[i] = out[i] / s


cdef void _estimate(double[::1] p, Py_ssize_t played, double pay, double beta_off, double[::1] g) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(p.shape[0]):
        g[i] = 0.0
    g[played] = pay / (p[played] + beta_off)


cdef void _smooth(double[::1] buf, double[::1] g, double rho) noexcept nogil:
    cdef Py_ssize_t i
    if rho == 1.0:
        for i in range(g.shape[0]):
            buf[i] = g[i]
    else:
        for i in range(g.shape[0]):
            buf[i] = (1.0 - rho) * buf[i] + rho * g[i]


def optimistic_chunk(double[::1] x, double[::1] y, const double[:, ::1] A, double eta, double tau,
                     double beta_clip, double beta_off, double rho, double[::1] mom_x, double[::1] mom_y,
                     const double[:, ::1] u, const double[:, ::1] noise,
                     double[:, ::1] out_x, double[:, ::1] out_y, double[:, ::1] out_xh, double[:, ::1] out_yh,
                     long[:, ::1] out_plays):
    cdef Py_ssize_t steps = u.shape[0]
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t k = y.shape[0]
    cdef double[::1] lx = np.zeros(m)
    cdef double[::1] ly = np.zeros(k)
    cdef double[::1] gx = np.zeros(m)
    cdef double[::1] gy = np.zeros(k)
    cdef double[::1] xh = np.zeros(m)
    cdef double[::1] yh = np.zeros(k)
    cdef double[::1] cx = np.zeros(m)
    cdef double[::1] cy = np.zeros(k)
    cdef int[::1] px = np.zeros(m, dtype=np.intc)
    cdef int[::1] py = np.zeros(k, dtype=np.intc)
    cdef double[::1] px_now
    cdef double[::1] py_now
    cdef bint use_noise = noise.shape[0] > 0
    cdef double keep = 1.0 - eta * tau
    cdef Py_ssize_t s, i, j, a, b
    cdef int half
    cdef double pay
    for s in range(steps):
        for i in range(m):
            lx[i] = keep * _safe_log(x[i])
        for j in range(k):
            ly[j] = keep * _safe_log(y[j])
        for half in range(2):
            if half == 0:
                px_now = x
                py_now = y
            else:
                px_now = xh
                py_now = yh
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
                    cx[:] = xh
                    cy[:] = yh
                    _pin_floor(cx, beta_clip, xh, px)
                    _pin_floor(cy, beta_clip, yh, py)
                for i in range(m):
                    out_xh[s, i] = xh[i]
                for j in range(k):
                    out_yh[s, j] = yh[j]
            else:
                _tilted(lx, mom_x, eta, x)
                _tilted(ly, mom_y, eta, y)
                if beta_clip > 0:
                    cx[:] = x
                    cy[:] = y
                    _pin_floor(cx, beta_clip, x, px)
                    _pin_floor(cy, beta_clip, y, py)
        for i in range(m):
            out_x[s, i] = x[i]
        for j in range(k):
            out_y[s, j] = y[j]
