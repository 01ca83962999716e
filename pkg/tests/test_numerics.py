import numpy as np
import pytest

from robmiss.numerics import (
    RngStream,
    gauss_legendre_normal_expectation,
    minimize,
    newton_root,
    normal_cdf,
    numerical_jacobian,
    quadrature_normal_expectation,
    sample_mvnormal,
)


def test_streams_reproducible_and_distinct():
    a = RngStream(5, (1, 2)).standard_normal(5)
    b = RngStream(5, (1, 2)).standard_normal(5)
    c = RngStream(5, (1, 3)).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert np.array_equal(RngStream(5, 3).random(3), RngStream(5, (3,)).random(3))


def test_mvnormal_moments():
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    x = sample_mvnormal([1.0, -1.0], cov, RngStream(0), size=200_000)
    assert np.allclose(x.mean(axis=0), [1, -1], atol=0.02)
    assert np.allclose(np.cov(x.T), cov, atol=0.02)


def test_mvnormal_degenerate_covariance():
    cov = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = sample_mvnormal(np.zeros(2), cov, RngStream(1), size=1000)
    assert np.allclose(x[:, 0], x[:, 1], atol=1e-8)


def test_mvnormal_rejects_bad_covariance():
    with pytest.raises(np.linalg.LinAlgError):
        sample_mvnormal(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]), RngStream(0))
    with pytest.raises(np.linalg.LinAlgError):
        sample_mvnormal(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), RngStream(0))


def test_minimize_quadratic():
    target = np.array([1.5, -2.0, 0.3])
    rep = minimize(lambda v: np.sum((v - target) ** 2 * [1, 4, 9]), np.zeros(3), tolerance=1e-9)
    assert rep.converged
    assert np.allclose(rep.argmin, target, atol=1e-7)
    assert rep.iterations < 2000


def test_minimize_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        minimize(lambda v: np.nan, np.zeros(2))


def test_max_iter_reports_not_converged():
    rep = minimize(lambda v: np.sum((v - 3) ** 2), np.zeros(4), tolerance=1e-14, max_iter=5, restarts=0)
    assert not rep.converged


def test_normal_expectations():
    assert quadrature_normal_expectation(lambda v: v ** 2) == pytest.approx(1.0, abs=1e-12)
    val = quadrature_normal_expectation(lambda v: np.clip(v, -1.0, 1.0) ** 2, tol=1e-10)
    closed = 2 * normal_cdf(1.0) - 1 - 2 * np.exp(-0.5) / np.sqrt(2 * np.pi) + 2 * (1 - normal_cdf(1.0))
    assert val == pytest.approx(closed, abs=1e-9)


def test_gauss_legendre_rowwise():
    shifts = np.array([-1.0, 0.0, 2.0])
    bp = np.column_stack([-1 - shifts, 1 - shifts])  # kinks of clip(s + nu, -1, 1)
    got = gauss_legendre_normal_expectation(lambda nu: np.clip(shifts[:, None] + nu, -1, 1), bp)
    ref = [quadrature_normal_expectation(lambda v, s=s: np.clip(s + v, -1, 1)) for s in shifts]
    assert np.allclose(got, ref, atol=1e-9)


def test_jacobian_linear_map():
    A = np.array([[1.0, 2.0], [-3.0, 0.5], [0.0, 4.0]])
    assert np.allclose(numerical_jacobian(lambda x: A @ x, np.array([0.3, -2.0])), A, atol=1e-8)


def test_newton_root():
    x, norm, _, ok = newton_root(lambda v: np.array([v[0] ** 2 - 2, v[1] - v[0]]), np.array([1.0, 0.0]))
    assert ok and np.allclose(x, np.sqrt(2), atol=1e-10)
