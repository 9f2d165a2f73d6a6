import itertools
import math

import numpy as np
import pytest

from banditgames.errors import NumericError, UsageError
from banditgames.estimators import ellipsoidal_estimate, momentum_update, simplex_importance_estimate
from banditgames.geometry import BallBarrier, SquaredEuclidean, precondition_matrix

from ._oracles import smoothed_cost_ball_quadrature


def test_zero_cost_gives_zero():
    est = ellipsoidal_estimate(0.0, 0.5 * np.eye(2), np.array([0.6, 0.8]), 2, 0.3)
    np.testing.assert_array_equal(est.g, 0.0)


def test_ellipsoidal_arithmetic():
    est = ellipsoidal_estimate(1.0, 0.5 * np.eye(2), np.array([1.0, 0.0]), 2, 1.0)
    np.testing.assert_allclose(est.g, [4.0, 0.0])
    assert est.delta == 1.0 and est.cost == 1.0


def test_ellipsoidal_parallel_and_norm_bound(rng):
    B = rng.standard_normal((3, 3))
    A = B @ B.T + np.eye(3)
    for _ in range(50):
        z = rng.standard_normal(3)
        z /= np.linalg.norm(z)
        c = rng.uniform(-1, 1)
        est = ellipsoidal_estimate(c, A, z, 3, 0.2)
        w = np.linalg.solve(A, z)
        assert abs(abs(est.g @ w) - np.linalg.norm(est.g) * np.linalg.norm(w)) <= 1e-9 * np.linalg.norm(est.g) * np.linalg.norm(w) + 1e-300
        assert np.linalg.norm(est.g) <= (3 / 0.2) * abs(c) * np.linalg.norm(w) * (1 + 1e-12)


def test_ellipsoidal_errors():
    with pytest.raises(NumericError):
        ellipsoidal_estimate(1.0, np.zeros((2, 2)), np.array([1.0, 0.0]), 2, 0.5)
    with pytest.raises(UsageError):
        ellipsoidal_estimate(1.0, np.eye(2), np.array([1.0, 0.0]), 2, 0.0)


def test_ellipsoidal_unbiased_small_sample():
    # quadratic cost on the unit ball; the smoothed gradient comes from quadrature
    rng = np.random.default_rng(21)
    x = np.array([0.3, -0.2])
    A = precondition_matrix(BallBarrier(np.zeros(2)), SquaredEuclidean(), x, 0.0, 1.0)
    delta = 0.5
    cost = lambda v: float(v @ v)
    h = 1e-4
    target = np.array([
        (smoothed_cost_ball_quadrature(cost, x + h * e, A, delta) - smoothed_cost_ball_quadrature(cost, x - h * e, A, delta)) / (2 * h)
        for e in np.eye(2)
    ])
    N = 10**5
    Z = rng.standard_normal((N, 2))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    Xh = x + delta * Z @ A.T
    C = np.sum(Xh * Xh, axis=1)
    G = (2 / delta) * C[:, None] * np.linalg.solve(A, Z.T).T
    se = G.std(axis=0) / math.sqrt(N)
    assert np.all(np.abs(G.mean(axis=0) - target) <= 4 * se)
    # the batch arithmetic above is the estimator itself
    np.testing.assert_allclose(ellipsoidal_estimate(C[0], A, Z[0], 2, delta).g, G[0], rtol=1e-12)


def test_smoothing_bias_bound():
    # for c = |x|^2 (ell = 2) the smoothed gradient equals 2x exactly
    x = np.array([0.1, 0.4])
    A = precondition_matrix(BallBarrier(np.zeros(2)), SquaredEuclidean(), x, 0.5, 3.0)
    delta = 0.7
    cost = lambda v: float(v @ v)
    h = 1e-4
    sm = np.array([
        (smoothed_cost_ball_quadrature(cost, x + h * e, A, delta) - smoothed_cost_ball_quadrature(cost, x - h * e, A, delta)) / (2 * h)
        for e in np.eye(2)
    ])
    bound = 2 * math.sqrt(np.linalg.norm(delta * A, 2) ** 2)
    assert np.linalg.norm(sm - 2 * x) <= bound


def test_importance_two_actions():
    est = simplex_importance_estimate(0, 1.0, np.array([0.5, 0.5]))
    np.testing.assert_allclose(est.g, [2.0, 0.0])
    assert est.played == 0 and not est.has_entropy_term


@pytest.mark.parametrize("k", [2, 3, 4])
def test_importance_unbiased_by_enumeration(k, rng):
    for _ in range(20):
        x = rng.dirichlet(np.ones(k))
        payoff = rng.uniform(-1, 1, k)
        mean = sum(x[a] * simplex_importance_estimate(a, payoff[a], x).g for a in range(k))
        np.testing.assert_allclose(mean, payoff, atol=1e-12)


def test_importance_entropy_term_and_sign():
    x = np.array([0.2, 0.8])
    est = simplex_importance_estimate(1, 0.4, x, tau=0.3, sign=-1)
    np.testing.assert_allclose(est.g, [-0.3 * math.log(0.2), 0.4 / 0.8 - 0.3 * math.log(0.8)])
    off = simplex_importance_estimate(0, 1.0, x, beta=0.05)
    assert off.g[0] == pytest.approx(1 / 0.25)


def test_importance_zero_probability_guard():
    with pytest.raises(ZeroDivisionError):
        simplex_importance_estimate(0, 1.0, np.array([0.0, 1.0]))


def test_importance_second_moment_bound():
    rng = np.random.default_rng(5)
    for k, beta, tau in [(2, 0.1, 0.2), (4, 0.05, 0.5), (3, 0.2, 0.0)]:
        x = beta + (1 - k * beta) * rng.dirichlet(np.ones(k))
        payoffs = rng.uniform(0, 1, k)
        played = rng.choice(k, 20000, p=x)
        sq = np.mean([np.sum(simplex_importance_estimate(a, payoffs[a], x, tau=tau).g ** 2) for a in played])
        assert sq <= 2 * k / beta + 2 * tau**2 * k * math.log(k) ** 2


def test_momentum_examples():
    np.testing.assert_array_equal(momentum_update(np.ones(2), np.array([3.0, 5.0]), 1.0), [3.0, 5.0])
    np.testing.assert_allclose(momentum_update(np.ones(2), np.array([3.0, 5.0]), 0.5), [2.0, 3.0])
    for rho in (0.0, 1.5):
        with pytest.raises(UsageError):
            momentum_update(np.ones(2), np.ones(2), rho)


def test_momentum_closed_form():
    prev0, v, rho = np.array([4.0, -1.0]), np.array([1.0, 2.0]), 0.3
    m = prev0
    for k in itertools.count(1):
        m = momentum_update(m, v, rho)
        np.testing.assert_allclose(m, prev0 * (1 - rho) ** k + v * (1 - (1 - rho) ** k), rtol=1e-12)
        if k == 40:
            break
    assert np.linalg.norm(m - v) <= (1 - rho) ** 40 * np.linalg.norm(prev0 - v) * (1 + 1e-9)
