import math

import numpy as np
import pytest
from scipy.stats import chisquare

from banditgames.errors import DomainError, NumericError, UsageError
from banditgames.games import Ball, Box, Simplex
from banditgames.geometry import (
    BallBarrier,
    BoxLogBarrier,
    LinearRegularizer,
    NegativeEntropy,
    PlayerGeometry,
    SimplexBarrier,
    SquaredEuclidean,
    bregman,
    dikin_point,
    embed_inverse,
    inverse_sqrt_pair,
    precondition_matrix,
    precondition_pair,
    sample_unit_sphere,
)

BARRIERS = [
    BoxLogBarrier(np.array([0.0, -1.0]), np.array([1.0, 3.0])),
    BallBarrier(np.array([0.2, -0.1, 0.0]), 1.5),
    SimplexBarrier(4),
    SimplexBarrier(3, 0.1),
]


class _Fixed:
    """Barrier stand-in with a constant Hessian, for checking the matrix algebra alone."""

    def __init__(self, H):
        self.H = np.asarray(H, dtype=float)

    def hessian(self, x):
        return self.H

    def hessian_factor(self, x):
        return np.linalg.cholesky(self.H).T


def _interior_points(b, rng, k):
    if isinstance(b, BoxLogBarrier):
        return b.lower + (b.upper - b.lower) * rng.uniform(0.02, 0.98, (k, b.dim))
    if isinstance(b, BallBarrier):
        return Ball(b.center_point, 0.95 * b.radius).sample(rng, k)
    full = Simplex(b.size, b.floor + 0.02).sample(rng, k)
    return full[:, :-1]


def test_bregman_self_is_zero():
    x = np.array([0.3, 0.4])
    for f in (SquaredEuclidean(), NegativeEntropy(), BARRIERS[0]):
        assert bregman(f, x, x) == 0.0


def test_bregman_quadratic():
    assert bregman(SquaredEuclidean(), np.array([1.0, 0.0]), np.zeros(2)) == 0.5


def test_bregman_kl():
    x, y = np.array([0.5, 0.5]), np.array([0.25, 0.75])
    direct = sum(a * math.log(a / b) for a, b in zip(x, y))
    assert bregman(NegativeEntropy(), x, y) == pytest.approx(direct, abs=1e-15)
    assert direct == pytest.approx(0.14384, abs=1e-5)


def test_bregman_barrier_outside_domain():
    b = BoxLogBarrier(np.array([0.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        bregman(b, np.array([1.0]), np.array([0.5]))


def test_precondition_trivial_cases():
    np.testing.assert_allclose(precondition_matrix(_Fixed(np.eye(2)), SquaredEuclidean(), np.zeros(2), 3.0, 1.0), 0.5 * np.eye(2))
    np.testing.assert_allclose(precondition_matrix(_Fixed(np.diag([4.0, 9.0])), SquaredEuclidean(), np.zeros(2), 0.0, 5.0), np.diag([0.5, 1 / 3]))


def test_ball_center_hessian_and_precondition():
    b = BallBarrier(np.zeros(2))
    h = 1e-5
    fd = np.array([(b.gradient(h * e) - b.gradient(-h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(fd, 2 * np.eye(2), rtol=1e-8)
    A = precondition_matrix(b, SquaredEuclidean(), np.zeros(2), 2.0, 1.0)
    np.testing.assert_allclose(A, 0.5 * np.eye(2), atol=1e-15)


def test_inverse_sqrt_pair_consistency(rng):
    B = rng.standard_normal((4, 4))
    M = B @ B.T + 0.1 * np.eye(4)
    A, Ainv = inverse_sqrt_pair(M)
    np.testing.assert_allclose(A @ Ainv, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(A @ A @ M, np.eye(4), atol=1e-10)
    np.testing.assert_allclose(A, A.T, atol=1e-14)


def test_precondition_errors():
    with pytest.raises(NumericError):
        inverse_sqrt_pair(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        inverse_sqrt_pair(np.diag([1.0, 0.0]))
    with pytest.raises(UsageError):
        precondition_matrix(_Fixed(np.eye(1)), SquaredEuclidean(), np.zeros(1), -1.0, 1.0)


@pytest.mark.parametrize("b", BARRIERS, ids=lambda b: type(b).__name__)
def test_hessian_factor_reproduces_hessian(b, rng):
    for x in _interior_points(b, rng, 10):
        J = b.hessian_factor(x)
        np.testing.assert_allclose(J.T @ J, b.hessian(x), rtol=1e-12)
    for f in (SquaredEuclidean(2.0), NegativeEntropy(), LinearRegularizer()):
        x = rng.uniform(0.1, 1.0, 3)
        np.testing.assert_allclose(f.hessian_factor(x).T @ f.hessian_factor(x), f.hessian(x), rtol=1e-12)


def test_precondition_near_a_simplex_face():
    # the last slack is 2e-9: the explicit Hessian has entries near 2e17 and its
    # small eigenvalues (order 1) are below its roundoff, the factor keeps them
    u = np.array([0.6, 0.4 - 2e-9])
    h = SimplexBarrier(3)
    A, A_inv = precondition_pair(h, SquaredEuclidean(), u, 0.5, 10.0)
    # A has condition number near 1e9 here, so the product is only good to about 1e-7
    np.testing.assert_allclose(A @ A_inv, np.eye(2), atol=1e-6)
    # smallest eigenvalue of diag(a, b) + c 11^T as det / lambda_max, free of cancellation
    a, b = 1 / u[0] ** 2 + 5.0, 1 / u[1] ** 2 + 5.0
    c = 1 / (1 - u.sum()) ** 2
    tr, det = a + b + 2 * c, a * b + c * (a + b)
    lam_min = det / (0.5 * (tr + math.sqrt(tr * tr - 4 * det)))
    assert np.linalg.eigvalsh(A @ A).max() == pytest.approx(1 / lam_min, rel=1e-6)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        assert Simplex(3).contains(embed_inverse(dikin_point(u, A, sample_unit_sphere(rng, 2), 1.0)))


def test_precondition_shrinks_with_scale(rng):
    b = BARRIERS[1]
    for x in _interior_points(b, rng, 20):
        A1 = precondition_matrix(b, SquaredEuclidean(), x, 0.1, 1.0)
        A2 = precondition_matrix(b, SquaredEuclidean(), x, 0.1, 50.0)
        assert np.linalg.eigvalsh(A1 - A2).min() >= -1e-12


def test_sphere_d1_symmetric():
    r = np.random.default_rng(3)
    z = np.array([sample_unit_sphere(r, 1)[0] for _ in range(10**4)])
    assert set(np.unique(z)) == {-1.0, 1.0}
    assert chisquare([np.sum(z > 0), np.sum(z < 0)]).pvalue > 1e-3


def test_sphere_d3_mean_and_norm():
    r = np.random.default_rng(4)
    Z = np.array([sample_unit_sphere(r, 3) for _ in range(10**5)])
    assert np.all(np.abs(np.linalg.norm(Z, axis=1) - 1) <= 1e-14)
    assert np.all(np.abs(Z.mean(axis=0)) <= 4 / math.sqrt(1e5 / 3))
    np.testing.assert_allclose(np.cov(Z.T), np.eye(3) / 3, atol=0.01)


def test_sphere_rejects_zero_dim(rng):
    with pytest.raises(UsageError):
        sample_unit_sphere(rng, 0)


def test_dikin_point_examples():
    b = BoxLogBarrier(np.array([0.0]), np.array([1.0]))
    x = np.array([0.5])
    assert b.hessian(x)[0, 0] == 8.0
    A = precondition_matrix(b, SquaredEuclidean(), x, 0.0, 1.0)
    xh = dikin_point(x, A, np.array([1.0]), 1.0)
    assert xh[0] == pytest.approx(0.5 + 1 / math.sqrt(8), abs=1e-15)
    assert xh[0] == pytest.approx(0.8536, abs=1e-4)
    np.testing.assert_allclose(dikin_point(x, A, np.array([1.0]), 1e-300), x)
    for bad in (0.0, 1.5):
        with pytest.raises(UsageError):
            dikin_point(x, A, np.array([1.0]), bad)


def test_dikin_ball_feasibility():
    rng = np.random.default_rng(9)
    s = Ball(np.array([0.3, -0.2, 0.1]), 1.2)
    b = BallBarrier(s.center_point, s.radius)
    X = Ball(s.center_point, s.radius * (1 - 1e-6)).sample(rng, 10**5)
    Z = rng.standard_normal((10**5, 3))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    D = rng.uniform(1e-6, 1.0, 10**5)
    for x, z, d in zip(X, Z, D):
        A = precondition_matrix(b, SquaredEuclidean(), x, 0.0, 1.0)
        assert s.contains(dikin_point(x, A, z, d))


@pytest.mark.parametrize("b", BARRIERS, ids=lambda b: type(b).__name__)
def test_barrier_derivatives_match_finite_differences(b, rng):
    h = 1e-6
    for x in _interior_points(b, rng, 20):
        E = np.eye(b.dim)
        g = np.array([(b.value(x + h * e) - b.value(x - h * e)) / (2 * h) for e in E])
        H = np.array([(b.gradient(x + h * e) - b.gradient(x - h * e)) / (2 * h) for e in E])
        np.testing.assert_allclose(b.gradient(x), g, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(b.hessian(x), H, rtol=1e-5, atol=1e-6)
        assert np.linalg.eigvalsh(b.hessian(x)).min() > 0


@pytest.mark.parametrize("b", BARRIERS, ids=lambda b: type(b).__name__)
def test_barrier_center_and_blowup(b, rng):
    c = b.center()
    assert np.linalg.norm(b.gradient(c)) <= 1e-8
    for x in _interior_points(b, rng, 20):
        # walk along the ray from the center to within 1e-8 of the boundary
        u = x - c
        lo, hi = 0.0, 1e6
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if b.interior(c + mid * u) else (lo, mid)
        edge = c + lo * u
        near = edge - 1e-8 * u / np.linalg.norm(u)
        assert b.value(near) - b.value(c) >= 10


@pytest.mark.parametrize("b", BARRIERS, ids=lambda b: type(b).__name__)
def test_barrier_level_bound(b, rng):
    c = b.center()
    for x in _interior_points(b, rng, 200):
        pi = b.minkowski(x)
        assert 0 <= pi < 1
        assert b.value(x) - b.value(c) <= b.nu * math.log(1 / (1 - pi)) + 1e-10


@pytest.mark.parametrize("f", [SquaredEuclidean(), SquaredEuclidean(2.5), NegativeEntropy(), BARRIERS[3]], ids=str)
def test_three_point_identity(f, rng):
    for _ in range(50):
        if isinstance(f, SimplexBarrier):
            a, b, c = Simplex(3, 0.12).sample(rng, 3)[:, :-1]
        else:
            a, b, c = Simplex(4, 0.01).sample(rng, 3)
        lhs = bregman(f, a, c)
        rhs = bregman(f, a, b) + bregman(f, b, c) + (f.gradient(b) - f.gradient(c)) @ (a - b)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_regularizer_curvature_bounds(rng):
    for p in (SquaredEuclidean(), SquaredEuclidean(0.3), LinearRegularizer()):
        for x in rng.standard_normal((20, 3)):
            ev = np.linalg.eigvalsh(p.hessian(x))
            assert p.mu - 1e-12 <= ev.min() and ev.max() <= p.zeta + 1e-12


def test_regularizer_bregman_bound(rng):
    s = Box(np.zeros(3), np.ones(3))
    p = SquaredEuclidean()
    X, Y = s.sample(rng, 500), s.sample(rng, 500)
    assert max(bregman(p, x, y) for x, y in zip(X, Y)) <= p.bregman_bound(s)
    sim = Simplex(3, 0.05)
    ent = NegativeEntropy()
    X, Y = sim.sample(rng, 500), sim.sample(rng, 500)
    assert max(bregman(ent, x, y) for x, y in zip(X, Y)) <= ent.bregman_bound(sim)


def test_player_geometry_embedding():
    g = PlayerGeometry.default_for(Simplex(3))
    assert g.embedded and g.dim == 2
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(g.to_full(g.to_local(x)), x)
    np.testing.assert_allclose(g.to_full_batch(np.array([[0.2, 0.3]])), [[0.2, 0.3, 0.5]])
    assert not PlayerGeometry.default_for(Box([0.0], [1.0])).embedded
    with pytest.raises(UsageError):
        PlayerGeometry.default_for(Simplex(1))
