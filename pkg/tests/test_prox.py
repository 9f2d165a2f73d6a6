import math

import numpy as np
import pytest
from scipy.optimize import brentq

from banditgames.errors import DomainError, UsageError
from banditgames.games import Ball
from banditgames.geometry import BallBarrier, BoxLogBarrier, SimplexBarrier, SquaredEuclidean, bregman
from banditgames.prox import (
    CONVERGED,
    barrier_prox_step,
    kl_prox_clipped_simplex,
    optimistic_exponentiated_pair,
    regularized_ne_softmax_fixed_point,
    softmax_residual,
    solve_regularized_ne,
)

from ._oracles import clipped_kl_prox_kkt

A22 = np.array([[1.0, 2.0], [3.0, 4.0]])


def prox_objective(h, p, x_t, g, eta, w, x):
    return eta * g @ x + w * bregman(p, x, x_t) + bregman(h, x, x_t)


def test_zero_gradient_is_fixed():
    h = BallBarrier(np.zeros(2))
    x = np.array([0.3, 0.1])
    res = barrier_prox_step(h, SquaredEuclidean(), x, np.zeros(2), 0.1, 2.0, 5.0)
    np.testing.assert_allclose(res.x_next, x)
    assert res.newton_iterations <= 1 and res.status == CONVERGED


def test_one_dimensional_box_step():
    h = BoxLogBarrier(np.array([0.0]), np.array([1.0]))
    res = barrier_prox_step(h, SquaredEuclidean(), np.array([0.5]), np.array([1.0]), 0.1, 0.0, 1.0, tol=1e-14)
    root = brentq(lambda x: -1 / x + 1 / (1 - x) + 0.1, 0.01, 0.99, xtol=1e-15)
    assert res.x_next[0] == pytest.approx(root, abs=1e-13)
    assert root == pytest.approx(0.4875, abs=1e-4)


def test_prox_residual_on_ball_instances():
    rng = np.random.default_rng(31)
    h = BallBarrier(np.zeros(3))
    p = SquaredEuclidean()
    for _ in range(200):
        x_t = Ball(np.zeros(3), 0.9).sample(rng, 1)[0]
        g = rng.standard_normal(3) * rng.uniform(0.1, 20)
        eta, kappa, scale = rng.uniform(0.01, 0.5), rng.uniform(0, 2), rng.uniform(1, 100)
        res = barrier_prox_step(h, p, x_t, g, eta, kappa, scale)
        assert res.converged and h.interior(res.x_next)
        assert res.stationarity_residual <= 1e-8


def test_prox_errors():
    h = BoxLogBarrier(np.array([0.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        barrier_prox_step(h, SquaredEuclidean(), np.array([1.0]), np.array([1.0]), 0.1, 0.0, 1.0)
    with pytest.raises(UsageError):
        barrier_prox_step(h, SquaredEuclidean(), np.array([0.5]), np.array([1.0]), 0.1, 0.0, 1.0, tol=0.0)


def test_prox_max_iters_reports_best_iterate():
    h = BoxLogBarrier(np.array([0.0]), np.array([1.0]))
    res = barrier_prox_step(h, SquaredEuclidean(), np.array([0.5]), np.array([500.0]), 1.0, 0.0, 1.0, max_iter=1)
    assert res.status == "max_iters" and h.interior(res.x_next)


def test_prox_on_simplex_embedding_beats_probes(rng):
    h = SimplexBarrier(3)
    p = SquaredEuclidean()
    for _ in range(50):
        u = rng.dirichlet(np.ones(3))[:2] * 0.98 + 0.005
        g = rng.standard_normal(2) * 5
        res = barrier_prox_step(h, p, u, g, 0.2, 1.0, 3.0)
        best = prox_objective(h, p, u, g, 0.2, 0.6, res.x_next)
        for probe in rng.dirichlet(np.ones(3), 50)[:, :2]:
            if h.interior(probe):
                assert best <= prox_objective(h, p, u, g, 0.2, 0.6, probe) + 1e-12


def test_kl_prox_examples():
    x = np.array([0.5, 0.5])
    np.testing.assert_allclose(kl_prox_clipped_simplex(x, np.zeros(2), 1.0, 0.2), x)
    np.testing.assert_allclose(kl_prox_clipped_simplex(x, np.array([math.log(3), 0.0]), 1.0), [0.25, 0.75], atol=1e-15)
    np.testing.assert_allclose(kl_prox_clipped_simplex(x, np.array([math.log(3), 0.0]), 1.0, 0.3), [0.3, 0.7], atol=1e-15)


def test_kl_prox_matches_kkt_and_closed_form(rng):
    for _ in range(500):
        d = rng.integers(2, 6)
        beta = rng.uniform(0, 0.9 / d)
        x_t = beta + (1 - d * beta) * rng.dirichlet(np.ones(d))
        g = rng.standard_normal(d) * 3
        eta = rng.uniform(0.01, 2)
        out = kl_prox_clipped_simplex(x_t, g, eta, beta)
        np.testing.assert_allclose(out, clipped_kl_prox_kkt(x_t, g, eta, beta), atol=1e-12)
        w = x_t * np.exp(-eta * g)
        np.testing.assert_allclose(kl_prox_clipped_simplex(x_t, g, eta, 0.0), w / w.sum(), atol=1e-12)


def test_kl_prox_floor_too_large():
    with pytest.raises(UsageError):
        kl_prox_clipped_simplex(np.array([0.5, 0.5]), np.zeros(2), 1.0, 0.6)


def test_optimistic_pair_examples():
    x = np.array([0.8, 0.2])
    xh, xn = optimistic_exponentiated_pair(x, np.zeros(2), np.zeros(2), 0.5, 0.0)
    np.testing.assert_allclose(xh, x)
    np.testing.assert_allclose(xn, x)
    xh, xn = optimistic_exponentiated_pair(x, np.zeros(2), np.zeros(2), 1.0, 1.0)
    np.testing.assert_allclose(xn, [0.5, 0.5])
    xh, xn = optimistic_exponentiated_pair(x, np.zeros(2), np.zeros(2), 0.5, 0.4)
    w = np.array([0.8**0.8, 0.2**0.8])
    np.testing.assert_allclose(w, [0.8365, 0.2759], atol=1e-4)
    np.testing.assert_allclose(xn, w / w.sum(), atol=1e-15)
    np.testing.assert_allclose(xn, [0.7519, 0.2481], atol=1e-4)


def test_optimistic_pair_uses_same_base(rng):
    x = rng.dirichlet(np.ones(4))
    g1, g2 = rng.standard_normal(4), rng.standard_normal(4)
    xh, xn = optimistic_exponentiated_pair(x, g1, g2, 0.3, 0.5)
    for g, out in ((g1, xh), (g2, xn)):
        w = x ** (1 - 0.15) * np.exp(-0.3 * g)
        np.testing.assert_allclose(out, w / w.sum(), atol=1e-14)


def test_optimistic_pair_reduces_to_kl_prox(rng):
    x = rng.dirichlet(np.ones(3))
    g = rng.standard_normal(3)
    xh, xn = optimistic_exponentiated_pair(x, g, g, 0.7, 0.0)
    np.testing.assert_allclose(xh, kl_prox_clipped_simplex(x, g, 0.7), atol=1e-14)
    np.testing.assert_allclose(xn, xh, atol=0)


def test_optimistic_pair_errors():
    with pytest.raises(DomainError):
        optimistic_exponentiated_pair(np.array([1.0, 0.0]), np.zeros(2), np.zeros(2), 0.1, 0.1)
    with pytest.raises(UsageError):
        optimistic_exponentiated_pair(np.array([0.5, 0.5]), np.zeros(2), np.zeros(2), 2.0, 1.0)


def test_softmax_fixed_point_trivial():
    fp = regularized_ne_softmax_fixed_point(np.zeros((2, 3)), 0.5)
    np.testing.assert_allclose(fp.x, [0.5, 0.5])
    np.testing.assert_allclose(fp.y, [1 / 3] * 3)
    fp = regularized_ne_softmax_fixed_point(A22, 1e6)
    np.testing.assert_allclose(fp.x, [0.5, 0.5], atol=1e-5)
    np.testing.assert_allclose(fp.y, [0.5, 0.5], atol=1e-5)


def test_softmax_fixed_point_against_bisection():
    fp = regularized_ne_softmax_fixed_point(A22, 1.0, tol=1e-14)
    assert fp.converged and softmax_residual(A22, 1.0, fp.x, fp.y) <= 1e-10

    # 2x2: y1 = sigmoid(-(A^T x)_0 + (A^T x)_1), and x1 solves x1 = sigmoid((A y)_0 - (A y)_1)
    def y_of(x1):
        x = np.array([x1, 1 - x1])
        s = -(A22.T @ x)
        return 1 / (1 + math.exp(s[1] - s[0]))

    def f(x1):
        y1 = y_of(x1)
        a = A22 @ np.array([y1, 1 - y1])
        return x1 - 1 / (1 + math.exp(a[1] - a[0]))

    x1 = brentq(f, 1e-12, 1 - 1e-12, xtol=1e-15)
    assert fp.x[0] == pytest.approx(x1, abs=1e-12)
    assert fp.y[0] == pytest.approx(y_of(x1), abs=1e-12)


def test_softmax_fixed_point_unique_from_random_starts(rng):
    A = rng.standard_normal((3, 4))
    ref = regularized_ne_softmax_fixed_point(A, 1.0, tol=1e-13, damping=0.5)
    assert ref.converged
    for _ in range(20):
        x0, y0 = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
        fp = regularized_ne_softmax_fixed_point(A, 1.0, tol=1e-13, damping=0.5, x0=x0, y0=y0)
        assert fp.converged
        np.testing.assert_allclose(fp.x, ref.x, atol=1e-8)
        np.testing.assert_allclose(fp.y, ref.y, atol=1e-8)


def test_undamped_iteration_can_cycle():
    A = np.random.default_rng(12345).standard_normal((3, 4))
    plain = regularized_ne_softmax_fixed_point(A, 1.0, tol=1e-12, max_iters=2000)
    assert not plain.converged
    fp = solve_regularized_ne(A, 1.0)
    assert fp.converged and softmax_residual(A, 1.0, fp.x, fp.y) <= 1e-12


def test_softmax_errors():
    with pytest.raises(UsageError):
        regularized_ne_softmax_fixed_point(A22, 0.0)
    with pytest.raises(UsageError):
        regularized_ne_softmax_fixed_point(A22, 1.0, damping=0.0)
