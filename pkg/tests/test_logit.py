import numpy as np
import pytest
from scipy import optimize
from scipy.special import expit

from robmiss.logit import (
    ConvergenceError,
    RobustLogisticRegression,
    _expected_psi,
    count_clamped,
    fit_logistic,
    predict_propensity,
    propensity_score_function,
)
from robmiss.psi import huber, identity


def data(seed, n=500):
    rng = np.random.default_rng(seed)
    Z = np.column_stack([np.ones(n), rng.normal(size=(n, 2))])
    g = np.array([0.4, rng.uniform(-1, 1), rng.uniform(-1, 1)])
    R = (rng.random(n) < expit(Z @ g)).astype(float)
    return Z, R, g


def ml_reference(Z, R):
    def nll(g):
        eta = Z @ g
        return np.sum(np.logaddexp(0, eta) - R * eta)

    def grad(g):
        return Z.T @ (expit(Z @ g) - R)

    return optimize.minimize(nll, np.zeros(Z.shape[1]), jac=grad, method="BFGS",
                             options={"gtol": 1e-12}).x


def test_identity_matches_ml():
    Z, R, _ = data(1)
    m = fit_logistic(R, Z, identity())
    assert np.allclose(m.gamma, ml_reference(Z, R), atol=1e-6)
    assert m.fit_converged


def test_robust_close_to_ml_on_clean_data():
    Z, R, g = data(2, n=4000)
    rob = fit_logistic(R, Z, huber(1.345)).gamma
    assert np.allclose(rob, fit_logistic(R, Z, identity()).gamma, atol=0.1)
    assert np.allclose(rob, g, atol=0.2)


def test_score_zero_at_fit():
    Z, R, _ = data(3)
    m = fit_logistic(R, Z, huber(1.345))
    assert np.linalg.norm(propensity_score_function(m, R, Z).mean(axis=0)) < 1e-9


def test_fisher_consistency_two_point():
    # averaging the robust score over R in {0, 1} at fixed p gives zero
    psi = huber(1.345)
    for p in [0.05, 0.3, 0.5, 0.9]:
        epsi, r1, r0, _ = _expected_psi(psi, p)
        assert p * psi(r1) + (1 - p) * psi(r0) - epsi == pytest.approx(0.0, abs=1e-14)


def test_separation_raises():
    x = np.linspace(-1, 1, 50)
    Z = np.column_stack([np.ones(50), x])
    with pytest.raises(ConvergenceError):
        fit_logistic((x > 0).astype(float), Z, identity())


def test_rank_deficient_raises():
    Z, R, _ = data(4)
    with pytest.raises(ValueError):
        fit_logistic(R, np.column_stack([Z, Z[:, 1]]))


def test_clamp_and_scalar_predict():
    Z, R, _ = data(5)
    m = fit_logistic(R, Z, identity())
    extreme = np.array([1.0, 1e4, 0.0])
    assert predict_propensity(m, extreme) in (1e-6, 1 - 1e-6)
    assert count_clamped(m, np.vstack([Z, extreme])) == 1


def test_estimator_api():
    Z, R, _ = data(6)
    clf = RobustLogisticRegression(c=1.345).fit(Z[:, 1:], R.astype(int))
    assert clf.predict_proba(Z[:, 1:]).shape == (len(R), 2)
    assert set(np.unique(clf.predict(Z[:, 1:]))) <= {0, 1}
    assert clf.get_params()["c"] == 1.345
    ml = RobustLogisticRegression(c=None).fit(Z[:, 1:], R.astype(int))
    assert np.allclose(np.r_[ml.intercept_, ml.coef_], ml_reference(Z, R), atol=1e-6)
