import numpy as np
import pytest

from robmiss.linreg import RobustLinearRegression, fit_outcome_model, outcome_score_function
from robmiss.psi import huber_psi_sq_expectation, identity


def data(seed, n=300, outliers=0):
    rng = np.random.default_rng(seed)
    Z = np.column_stack([np.ones(n), rng.normal(size=(n, 3))])
    y = Z @ np.array([1.0, 2.0, -1.0, 0.5]) + rng.normal(scale=1.5, size=n)
    y[:outliers] = 50.0
    return Z, y


def test_identity_is_ols():
    Z, y = data(0)
    m = fit_outcome_model(y, Z, psi_reg=identity(), psi_scale=identity())
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    assert np.allclose(m.xi1, coef, atol=1e-10)
    assert m.xi2 == pytest.approx(np.sqrt(np.mean((y - Z @ coef) ** 2)), abs=1e-10)


def test_robust_resists_outliers():
    Z, y = data(1, outliers=20)
    rob = fit_outcome_model(y, Z)
    assert np.allclose(rob.xi1, [1.0, 2.0, -1.0, 0.5], atol=0.35)
    assert rob.xi2 == pytest.approx(1.5, rel=0.2)
    assert rob.fit_converged


def test_scores_vanish_at_fit():
    Z, y = data(2)
    m = fit_outcome_model(y, Z)
    assert np.linalg.norm(outcome_score_function(m, y, Z).mean(axis=0)) < 1e-6


def test_consistency_constant():
    Z, y = data(3)
    assert fit_outcome_model(y, Z).a_xi == pytest.approx(huber_psi_sq_expectation(1.345), abs=1e-12)


@pytest.mark.parametrize("c1", [None, 4.685])
def test_shift_equivariance(c1):
    Z, y = data(4)
    c2 = None if c1 is None else 1.345
    a = fit_outcome_model(y, Z, c1=c1, c2=c2)
    b = fit_outcome_model(y + 7.0, Z, c1=c1, c2=c2)
    assert b.xi1[0] - a.xi1[0] == pytest.approx(7.0, abs=1e-6)
    assert np.allclose(a.xi1[1:], b.xi1[1:], atol=1e-6)
    assert a.xi2 == pytest.approx(b.xi2, abs=1e-6)


def test_missing_rows_ignored_and_zero_score():
    Z, y = data(5)
    y2 = y.copy()
    y2[:40] = np.nan
    a = fit_outcome_model(y2, Z)
    b = fit_outcome_model(y[40:], Z[40:])
    assert np.allclose(a.xi1, b.xi1) and a.xi2 == pytest.approx(b.xi2)
    assert np.all(outcome_score_function(a, y2, Z)[:40] == 0)


def test_errors():
    Z, y = data(6, n=5)
    with pytest.raises(ValueError):
        fit_outcome_model(y, Z)
    Z, y = data(7)
    with pytest.raises(ValueError):
        fit_outcome_model(y, np.column_stack([Z, Z[:, 1]]))


def test_estimator_api():
    Z, y = data(8)
    y[:10] = np.nan
    reg = RobustLinearRegression().fit(Z[:, 1:], y)
    assert reg.predict(Z[:, 1:]).shape == (len(y),)
    assert reg.scale_ > 0 and reg.coef_.shape == (3,)
    assert RobustLinearRegression(c1=None, c2=None).get_params()["c1"] is None
