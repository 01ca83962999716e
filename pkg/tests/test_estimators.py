import numpy as np
import pytest

from robmiss.estimators import (
    EstimationError,
    LocationScaleEstimate,
    LocationScaleEstimator,
    compute_constant_A_model,
    compute_constant_B_model,
    estimate_aipw_classical,
    estimate_ipw_classical,
    estimate_or_classical,
    estimate_raipw,
    estimate_ripw,
    estimate_ror,
    raipw_moments,
    working_model_h,
)
from robmiss.linreg import fit_outcome_model, predict_mean
from robmiss.logit import fit_logistic, predict_propensity
from robmiss.numerics import RngStream
from robmiss.psi import huber, identity, tukey

from conftest import design, random_missing_data


def aux(X, y, r, robust=False):
    Z = design(X)
    if robust:
        pm, om = fit_logistic(r, Z, huber(1.345)), fit_outcome_model(y, Z, r == 1)
    else:
        pm = fit_logistic(r, Z, identity())
        om = fit_outcome_model(y, Z, r == 1, psi_reg=identity(), psi_scale=identity())
    return predict_propensity(pm, Z), predict_mean(om, Z), om.xi2


def test_ipw_full_data_is_sample_moments():
    z = np.random.default_rng(0).normal(3, 2, 500)
    est = estimate_ipw_classical(z, np.ones(500), np.ones(500))
    assert est.mu == pytest.approx(z.mean()) and est.sigma == pytest.approx(z.std())


def test_or_closed_form():
    h = np.array([1.0, 2.0, 3.0])
    est = estimate_or_classical(h, 0.5)
    assert est.mu == 2.0 and est.sigma == pytest.approx(np.sqrt(2 / 3 + 0.25))


def test_ror_reduces_to_or():
    h = np.array([1.0, 2.0, 4.0])
    a, b = estimate_ror(h, h, 0.7), estimate_or_classical(h, 0.7)
    assert (a.mu, a.sigma) == pytest.approx((b.mu, b.sigma))


def test_non_positive_scale_rejected():
    with pytest.raises(EstimationError):
        LocationScaleEstimate(0.0, 0.0)


def test_working_model_identity_closed_form():
    h = np.array([-1.0, 0.5, 3.0])
    h1, h2 = working_model_h(h, 0.8, 1.0, 2.0, identity(), identity(), 0.0, 1.0)
    assert np.allclose(h1, (h - 1.0) / 2.0, atol=1e-12)
    assert np.allclose(h2, ((h - 1.0) ** 2 + 0.64) / 4.0 - 1.0, atol=1e-12)


def test_working_model_symmetry():
    h1, _ = working_model_h(np.array([1.3]), 1.1, 1.3, 2.0, tukey(3.9), tukey(5.4))
    assert abs(h1[0]) < 1e-14


def test_working_model_degenerate_noise():
    h1, h2 = working_model_h(np.array([0.0, 2.0]), 0.0, 1.0, 1.0, huber(1.0), huber(1.0))
    assert np.allclose(h1, [-1.0, 1.0]) and np.allclose(h2, [1.0, 1.0])


def test_constants_quadrature_vs_monte_carlo():
    h = np.random.default_rng(1).normal(1.5, 2.0, 300)
    kw = dict(h=h, xi2=1.2, mu=1.4, sigma=2.6)
    bq = compute_constant_B_model(psi_sigma=tukey(5.4), **kw)
    bm = compute_constant_B_model(psi_sigma=tukey(5.4), mc_draws=2_000_000, rng=RngStream(3), **kw)
    aq = compute_constant_A_model(psi_mu=tukey(3.9), **kw)
    am = compute_constant_A_model(psi_mu=tukey(3.9), mc_draws=2_000_000, rng=RngStream(4), **kw)
    assert bq == pytest.approx(bm, abs=3e-3) and aq == pytest.approx(am, abs=3e-3)


@pytest.mark.parametrize("seed", range(20))
def test_identity_reductions(seed):
    X, y, r = random_missing_data(seed)
    pi, h, xi2 = aux(X, y, r)
    ipw = estimate_ipw_classical(y, r, pi)
    ripw = estimate_ripw(y, r, pi, identity(), identity(), A=0.0, B=1.0)
    assert ripw.mu == pytest.approx(ipw.mu, abs=1e-6) and ripw.sigma == pytest.approx(ipw.sigma, abs=1e-6)
    aipw = estimate_aipw_classical(y, r, pi, h, xi2)
    raipw = estimate_raipw(y, r, pi, h, xi2, identity(), identity(), A=0.0, B=1.0)
    assert raipw.mu == pytest.approx(aipw.mu, abs=1e-5)
    assert raipw.sigma == pytest.approx(aipw.sigma, abs=1e-5)


def test_raipw_solution_and_weights():
    X, y, r = random_missing_data(3, n=800)
    pi, h, xi2 = aux(X, y, r, robust=True)
    est = estimate_raipw(y, r, pi, h, xi2, tukey(3.9), tukey(5.4))
    assert est.converged and est.objective_residual < 1e-10
    m = raipw_moments((est.mu, est.sigma), y, r, pi, h, xi2, tukey(3.9), tukey(5.4),
                      est.constants["A"], est.constants["B"])
    assert np.linalg.norm(m.mean(axis=0)) < 1e-5
    w = est.weights
    assert len(w.index) == int(r.sum())
    assert np.allclose(w.compound_weight, w.inv_propensity * w.psi_weight)


def test_outlier_gets_zero_psi_weight():
    X, y, r = random_missing_data(4, n=800)
    i = int(np.flatnonzero(r == 1)[0])
    y = y.copy()
    y[i] = 1e3
    pi, h, xi2 = aux(X, y, r, robust=True)
    w = estimate_raipw(y, r, pi, h, xi2, tukey(3.9), tukey(5.4)).weights
    k = int(np.flatnonzero(w.index == i)[0])
    assert w.psi_weight[k] == 0.0 and w.compound_weight[k] == 0.0


def test_estimator_api(clean_replicate):
    X, y = clean_replicate.covariates(), clean_replicate.observed
    est = LocationScaleEstimator(family="aipw", propensity_columns=[0, 1, 2]).fit(X, y)
    assert est.converged_ and abs(est.mu_ - 1.775) < 0.5 and abs(est.sigma_ - 3.75) < 0.5
    assert est.get_params()["c_mu"] == 3.9
    assert est.weights_ is not None
    with pytest.raises(ValueError):
        LocationScaleEstimator(family="mle").fit(X, y)


def test_or_has_no_weights(clean_replicate):
    X, y = clean_replicate.covariates(), clean_replicate.observed
    est = LocationScaleEstimator(family="or", robust=False).fit(X, y)
    assert est.weights_ is None
