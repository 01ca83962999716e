import numpy as np
import pytest

from robmiss.estimators import LocationScaleEstimator, estimate_ipw_classical
from robmiss.sandwich import StackedSystem, build_system, sandwich_covariance

FAMILIES = [("ipw", False), ("ipw", True), ("aipw", False), ("aipw", True), ("or", False), ("or", True)]


def test_full_data_collapse():
    z = np.random.default_rng(0).normal(2.0, 3.0, 10_000)
    est = estimate_ipw_classical(z, np.ones_like(z), np.ones_like(z))

    def ev(t):
        mu, s = t
        return np.column_stack([z - mu, (z - mu) ** 2 - s ** 2])

    V = sandwich_covariance(StackedSystem([est.mu, est.sigma], (("beta", 2),), ev))
    assert np.sqrt(V[0, 0]) == pytest.approx(est.sigma / np.sqrt(z.size), rel=0.02)


@pytest.mark.parametrize("family,robust", FAMILIES)
def test_stacked_systems_solved_and_psd(clean_replicate, family, robust):
    X, y = clean_replicate.covariates(), clean_replicate.observed
    kw = dict(c_mu=3.0, c_sigma=3.1) if family == "or" and robust else {}
    est = LocationScaleEstimator(family=family, robust=robust, propensity_columns=[0, 1, 2],
                                 standard_errors=True, **kw).fit(X, y)
    sys = build_system(est.estimate_, y, np.isfinite(y).astype(float),
                       np.column_stack([np.ones(len(X)), X[:, :3]]), np.column_stack([np.ones(len(X)), X]),
                       est.propensity_model_, est.outcome_model_, est.outcome_model_sigma_,
                       est.get_params() and __import__("robmiss").tukey(est.c_mu),
                       __import__("robmiss").tukey(est.c_sigma))
    assert np.linalg.norm(sys.mean()) < 1e-5
    V = sandwich_covariance(sys)
    assert np.allclose(V, V.T, atol=1e-12)
    assert np.linalg.eigvalsh(V).min() > -1e-10
    assert 0.05 < est.se_mu_ < 0.3 and 0.05 < est.se_sigma_ < 0.3


def test_inert_block_does_not_change_result():
    z = np.random.default_rng(1).normal(size=500)

    def ev(t):
        return np.column_stack([z - t[0], (z - t[0]) ** 2 - t[1] ** 2])

    def ev2(t):
        return np.column_stack([ev(t[:2]), np.full(z.size, 0.0) + (t[2] - 0.5)])

    theta = [z.mean(), z.std()]
    a = sandwich_covariance(StackedSystem(theta, (("beta", 2),), ev))
    b = sandwich_covariance(StackedSystem(theta + [0.5], (("beta", 2), ("gamma", 1)), ev2))
    assert np.allclose(a, b[:2, :2], atol=1e-12)


def test_errors():
    z = np.random.default_rng(2).normal(size=100)
    with pytest.raises(ValueError):
        StackedSystem([0.0, 1.0], (("beta", 3),), lambda t: None)
    with pytest.raises(ValueError):
        sandwich_covariance(StackedSystem([5.0, 1.0], (("beta", 2),),
                                          lambda t: np.column_stack([z - t[0], z ** 2 - t[1] ** 2])))
    bad = StackedSystem([z.mean(), 0.0], (("beta", 2),),
                        lambda t: np.column_stack([z - t[0], np.zeros_like(z)]))
    with pytest.raises(np.linalg.LinAlgError, match="beta\\[1\\]"):
        sandwich_covariance(bad)
    wrong = StackedSystem([z.mean(), 1.0], (("beta", 2),), lambda t: np.column_stack([z - t[0]]))
    with pytest.raises(ValueError):
        wrong.values()
