"""Location-scale estimators for an outcome missing at random.

Classical IPW, AIPW and outcome-regression (OR) estimators have closed
forms. Their bounded-influence counterparts RIPW and RAIPW replace the
moment functions by psi-scores

    ( psi_mu(t) - A,  psi_sigma(t)^2 - B ),   t = (Z2 - mu) / sigma,

and are computed as minimum-distance solutions of the averaged estimating
equations over (mu, log sigma). ROR plugs robust outcome-regression fits
into the OR closed form.

Everything here works on plain arrays: ``pi`` are fitted response
probabilities, ``h`` fitted outcome means and ``xi2`` the residual scale
of the outcome working model. :class:`LocationScaleEstimator` wraps the
whole pipeline (auxiliary fits included) behind a scikit-learn API.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .logit import fit_logistic, predict_propensity
from .linreg import fit_outcome_model, predict_mean
from .numerics import gauss_legendre_normal_expectation, minimize, newton_root
from .psi import gaussian_expectation_psi_sq, huber, identity, tukey

__all__ = [
    "LocationScaleEstimate",
    "WeightDiagnostics",
    "EstimationError",
    "estimate_ipw_classical",
    "estimate_aipw_classical",
    "estimate_or_classical",
    "estimate_ror",
    "estimate_ripw",
    "estimate_raipw",
    "compute_constant_B_marginal",
    "compute_constant_B_model",
    "compute_constant_A_model",
    "working_model_h",
    "ripw_moments",
    "raipw_moments",
    "or_moments",
    "AuxiliaryFits",
    "LocationScaleEstimator",
]

CONVERGENCE_Q = 1e-10
QUAD_ORDER = 8


class EstimationError(ArithmeticError):
    pass


@dataclass
class WeightDiagnostics:
    """Double-weighting record for the observed units."""

    index: np.ndarray
    inv_propensity: np.ndarray
    psi_weight: np.ndarray

    @property
    def compound_weight(self):
        return self.inv_propensity * self.psi_weight


@dataclass
class LocationScaleEstimate:
    mu: float
    sigma: float
    se_mu: float = None
    se_sigma: float = None
    converged: bool = True
    objective_residual: float = 0.0
    weights: WeightDiagnostics = None
    method: str = ""
    n_iter: int = 0
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.sigma > 0:
            raise EstimationError(f"non-positive scale estimate {self.sigma!r}")


def _observed(z2, r):
    r = np.asarray(r, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    return np.where(r == 1, np.nan_to_num(z2), 0.0), r


def estimate_ipw_classical(z2, r, pi):
    """Normalised (Hajek) inverse-probability-weighted mean and sd."""
    z, r = _observed(z2, r)
    w = r / np.asarray(pi, dtype=float)
    total = w.sum()
    if total <= 0:
        raise EstimationError("no observed outcomes to weight")
    mu = np.sum(w * z) / total
    var = np.sum(w * (z - mu) ** 2) / total
    if var <= 0:
        raise EstimationError("degenerate IPW variance")
    return LocationScaleEstimate(float(mu), float(np.sqrt(var)), method="IPW")


def estimate_aipw_classical(z2, r, pi, h, xi2):
    """Augmented IPW closed form with the Gaussian working model (h, xi2)."""
    z, r = _observed(z2, r)
    pi = np.asarray(pi, dtype=float)
    h = np.asarray(h, dtype=float)
    aug = (r - pi) / pi
    mu = np.mean(r * z / pi - aug * h)
    var = np.mean(r * (z - mu) ** 2 / pi - aug * ((h - mu) ** 2 + xi2 ** 2))
    if not var > 0:
        raise EstimationError("degenerate AIPW variance")
    return LocationScaleEstimate(float(mu), float(np.sqrt(var)), method="AIPW")


def estimate_or_classical(h, xi2):
    """Imputation estimator: moments of the fitted working model over all units."""
    h = np.asarray(h, dtype=float)
    mu = h.mean()
    var = np.mean((h - mu) ** 2) + xi2 ** 2
    return LocationScaleEstimate(float(mu), float(np.sqrt(var)), method="OR")


def estimate_ror(h_mu, h_sigma, xi2_sigma):
    """Robust OR: location from the first robust fit, scale from the second."""
    h_mu = np.asarray(h_mu, dtype=float)
    h_sigma = np.asarray(h_sigma, dtype=float)
    mu = h_mu.mean()
    var = np.mean((h_sigma - mu) ** 2) + xi2_sigma ** 2
    return LocationScaleEstimate(float(mu), float(np.sqrt(var)), method="ROR")


def or_moments(beta, h_mu, h_sigma, xi2_sigma):
    """Per-unit OR/ROR estimating functions, shape (n, 2)."""
    mu, sigma = beta
    return np.column_stack([h_mu - mu, (h_sigma - mu) ** 2 + xi2_sigma ** 2 - sigma ** 2])


def compute_constant_B_marginal(psi_sigma):
    """B = E[psi_sigma(Z)^2] for standard normal Z (used by RIPW)."""
    return gaussian_expectation_psi_sq(psi_sigma)


def _breakpoints(h, xi2, mu, sigma, psis):
    cols = []
    for p in psis:
        if p.is_identity:
            continue
        cols.append((mu - p.c * sigma - h) / xi2)
        cols.append((mu + p.c * sigma - h) / xi2)
    if not cols:
        return np.zeros((len(h), 0))
    return np.column_stack(cols)


def working_model_h(h, xi2, mu, sigma, psi_mu, psi_sigma, A=0.0, B=0.0, order=QUAD_ORDER):
    """Conditional expectations of the psi-scores under Z2 | Z1 ~ N(h, xi2^2).

    Returns ``(h1, h2)`` with h1 = E psi_mu(t) - A and h2 = E psi_sigma(t)^2 - B,
    t = (h + xi2 * nu - mu) / sigma. The integrals use piecewise
    Gauss-Legendre rules split where t crosses the psi tuning constants,
    so each piece integrates a smooth function.
    """
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if xi2 == 0:
        t = (h - mu) / sigma
        return psi_mu(t) - A, psi_sigma(t) ** 2 - B
    bp = _breakpoints(h, xi2, mu, sigma, (psi_mu, psi_sigma))

    def f(nu):
        t = (h[:, None] + xi2 * nu - mu) / sigma
        return psi_mu(t), psi_sigma(t) ** 2

    e1, e2 = gauss_legendre_normal_expectation(f, bp, order=order)
    return e1 - A, e2 - B


def compute_constant_B_model(h, xi2, psi_sigma, mu, sigma, mc_draws=None, rng=None):
    """B = E[psi_sigma((Z2 - mu) / sigma)^2] with Z2 drawn from the working model.

    The covariates follow their empirical distribution. With ``rng`` and
    ``mc_draws`` the expectation is a Monte Carlo average over resampled
    units and normal errors; otherwise the average over units is exact and
    the normal error is integrated by quadrature.
    """
    h = np.asarray(h, dtype=float)
    if rng is not None:
        draws = int(mc_draws or 1_000_000)
        idx = rng.integers(0, len(h), size=draws)
        z = h[idx] + xi2 * rng.standard_normal(draws)
        return float(np.mean(psi_sigma((z - mu) / sigma) ** 2))
    _, h2 = working_model_h(h, xi2, mu, sigma, psi_sigma, psi_sigma)
    return float(np.mean(h2))


def compute_constant_A_model(h, xi2, psi_mu, mu, sigma, mc_draws=None, rng=None):
    """A = E[psi_mu((Z2 - mu) / sigma)] under the working model.

    Same conventions as :func:`compute_constant_B_model`.
    """
    h = np.asarray(h, dtype=float)
    if rng is not None:
        draws = int(mc_draws or 1_000_000)
        idx = rng.integers(0, len(h), size=draws)
        z = h[idx] + xi2 * rng.standard_normal(draws)
        return float(np.mean(psi_mu((z - mu) / sigma)))
    h1, _ = working_model_h(h, xi2, mu, sigma, psi_mu, psi_mu)
    return float(np.mean(h1))


def ripw_moments(beta, z2, r, pi, psi_mu, psi_sigma, A, B):
    """Per-unit RIPW estimating functions, shape (n, 2)."""
    mu, sigma = beta
    z, r = _observed(z2, r)
    t = (z - mu) / sigma
    w = r / pi
    return np.column_stack([w * (psi_mu(t) - A), w * (psi_sigma(t) ** 2 - B)])


def raipw_moments(beta, z2, r, pi, h, xi2, psi_mu, psi_sigma, A, B):
    """Per-unit RAIPW estimating functions, shape (n, 2)."""
    mu, sigma = beta
    z, r = _observed(z2, r)
    t = (z - mu) / sigma
    w = r / pi
    aug = (r - pi) / pi
    h1, h2 = working_model_h(h, xi2, mu, sigma, psi_mu, psi_sigma, A, B)
    return np.column_stack([
        w * (psi_mu(t) - A) - aug * h1,
        w * (psi_sigma(t) ** 2 - B) - aug * h2,
    ])


def _solve(mean_moments, starts):
    """Minimum-distance solve of mean_moments(mu, sigma) = 0.

    Works in the standardised coordinates (mu / s0, log sigma). Each start
    gets a step-limited damped Newton run; the first one reaching
    Q = ||mean moments||^2 < CONVERGENCE_Q wins. Otherwise Nelder-Mead on
    Q takes over from the best point seen.
    """
    starts = [s for s in starts if s is not None]
    s0 = starts[0].sigma

    def g(theta):
        sigma = np.exp(theta[1])
        if not (np.isfinite(theta[0]) and 0 < sigma < np.inf):
            return np.full(2, np.inf)
        return mean_moments(theta[0] * s0, sigma)

    def q(theta):
        v = g(theta)
        # out-of-range trial points rank worst without aborting the simplex
        return float(v @ v) if np.all(np.isfinite(v)) else 1e300

    def jac(theta):
        # forward differences suffice for Newton directions and halve the cost
        g0 = g(theta)
        J = np.empty((2, 2))
        for j in range(2):
            step = 1e-7 * max(1.0, abs(theta[j]))
            tp = theta.copy()
            tp[j] += step
            J[:, j] = (g(tp) - g0) / step
        return J

    best, total = None, 0
    for start in starts:
        x0 = np.array([start.mu / s0, np.log(start.sigma)])
        x, _, it, _ = newton_root(g, x0, tol=1e-9, max_iter=50, jac=jac, max_step=0.5)
        total += it
        for cand in (x, x0):
            if best is None or q(cand) < q(best):
                best = cand
        if q(x) < CONVERGENCE_Q:
            break
    if not q(best) < CONVERGENCE_Q:
        rep = minimize(q, best, tolerance=1e-10, max_iter=2000, restarts=3)
        best, total = rep.argmin, total + rep.iterations
    Q = q(best)
    return float(best[0] * s0), float(np.exp(best[1])), Q, Q < CONVERGENCE_Q, total


def _weighted_median(x, w):
    return float(np.quantile(x, 0.5, weights=w, method="inverted_cdf"))


def _robust_start(z2, r, pi):
    """Inverse-probability weighted median and normalised MAD of the observed outcomes."""
    z, r = _observed(z2, r)
    obs = r == 1
    x, w = z[obs], 1.0 / np.asarray(pi, dtype=float)[obs]
    mu = _weighted_median(x, w)
    sigma = 1.4826 * _weighted_median(np.abs(x - mu), w)
    if not sigma > 0:
        return None
    return LocationScaleEstimate(mu, sigma, method="start")


def _weights(z2, r, pi, mu, sigma, psi_mu):
    z, r = _observed(z2, r)
    idx = np.flatnonzero(r == 1)
    return WeightDiagnostics(idx, 1.0 / np.asarray(pi, dtype=float)[idx],
                             np.asarray(psi_mu.weight((z[idx] - mu) / sigma)))


def estimate_ripw(z2, r, pi, psi_mu, psi_sigma, A=0.0, B=None, start=None):
    """Robust IPW estimate of (mu, sigma).

    Without ``start`` the solver starts from the weighted median and MAD,
    then from the classical IPW estimate. ``B`` defaults to E psi_sigma(Z)^2 for standard normal Z, which is only
    exact when the standardised outcome is Gaussian.
    """
    pi = np.asarray(pi, dtype=float)
    B = compute_constant_B_marginal(psi_sigma) if B is None else B
    starts = [start] if start is not None else [_robust_start(z2, r, pi), estimate_ipw_classical(z2, r, pi)]

    def mean_moments(mu, sigma):
        return ripw_moments((mu, sigma), z2, r, pi, psi_mu, psi_sigma, A, B).mean(axis=0)

    mu, sigma, Q, ok, it = _solve(mean_moments, starts)
    return LocationScaleEstimate(
        mu, sigma, converged=ok, objective_residual=Q, method="RIPW", n_iter=it,
        weights=_weights(z2, r, pi, mu, sigma, psi_mu), constants={"A": A, "B": B},
    )


def estimate_raipw(z2, r, pi, h, xi2, psi_mu, psi_sigma, A=None, B=None, start=None,
                   mc_draws=None, rng=None):
    """Robust AIPW estimate of (mu, sigma) with the Gaussian working model.

    ``A`` and ``B`` left as None are computed once from the working model
    at its own implied moments (mean of ``h``, sqrt(var h + xi2^2)), which
    are consistent for the target whenever the outcome model is. The
    working model does not make the marginal outcome law symmetric, so
    A is generally not zero.
    """
    pi = np.asarray(pi, dtype=float)
    h = np.asarray(h, dtype=float)
    if A is None or B is None:
        mu_ref = h.mean()
        sigma_ref = np.sqrt(np.mean((h - mu_ref) ** 2) + xi2 ** 2)
        if A is None:
            A = compute_constant_A_model(h, xi2, psi_mu, mu_ref, sigma_ref, mc_draws, rng)
        if B is None:
            B = compute_constant_B_model(h, xi2, psi_sigma, mu_ref, sigma_ref, mc_draws, rng)
    if start is not None:
        starts = [start]
    else:
        # the working model's own moments are robust when h comes from a robust fit
        starts = [estimate_or_classical(h, xi2), _robust_start(z2, r, pi)]
        try:
            starts.append(estimate_aipw_classical(z2, r, pi, h, xi2))
        except EstimationError:
            pass

    def mean_moments(mu, sigma):
        return raipw_moments((mu, sigma), z2, r, pi, h, xi2, psi_mu, psi_sigma, A, B).mean(axis=0)

    mu, sigma, Q, ok, it = _solve(mean_moments, starts)
    return LocationScaleEstimate(
        mu, sigma, converged=ok, objective_residual=Q, method="RAIPW", n_iter=it,
        weights=_weights(z2, r, pi, mu, sigma, psi_mu), constants={"A": A, "B": B},
    )


FAMILIES = ("ipw", "aipw", "or")


class AuxiliaryFits:
    """Lazily fitted, cached auxiliary models for one dataset.

    Models are keyed by their covariate columns and tuning constants, so
    estimators that share a propensity or outcome specification reuse a
    single fit. Columns index ``X``; an intercept is always added.
    """

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.r = np.isfinite(self.y).astype(float)
        self._cache = {}

    def design(self, cols):
        Xs = self.X if cols is None else self.X[:, list(cols)]
        return np.column_stack([np.ones(len(self.X)), Xs])

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def propensity(self, cols, c=None):
        """Logistic fit on ``cols``; ``c`` is the Huber constant (None = ML)."""
        key = ("propensity", None if cols is None else tuple(cols), c)
        psi = identity() if c is None else huber(c)
        return self._get(key, lambda: fit_logistic(self.r, self.design(cols), psi))

    def outcome(self, cols, c1=None, c2=None):
        """Outcome fit on ``cols``; ``c1 = c2 = None`` gives OLS."""
        key = ("outcome", None if cols is None else tuple(cols), c1, c2)
        return self._get(key, lambda: fit_outcome_model(
            self.y, self.design(cols), self.r == 1, c1, c2))


class LocationScaleEstimator(BaseEstimator):
    """Mean and standard deviation of an outcome that is missing at random.

    ``fit(X, y)`` takes the fully observed covariates ``X`` and the outcome
    ``y`` with NaN for missing units. Auxiliary models are fitted
    internally on the requested covariate columns (an intercept is added).

    Parameters
    ----------
    family : {"ipw", "aipw", "or"}
    robust : bool
        Use RIPW / RAIPW / ROR with robust auxiliary fits instead of the
        classical estimator with ML logistic and OLS fits.
    c_mu, c_sigma : float
        Tukey constants of the location and scale scores (RIPW, RAIPW), or
        the two biweight regression constants producing the location and
        scale fits (ROR).
    propensity_columns, outcome_columns : list of int or None
        Covariate columns for the response and outcome models (None = all).
    logit_c : float
        Huber constant of the robust logistic fit.
    reg_c1, reg_c2 : float
        Biweight and Huber constants of the robust outcome fit (RAIPW).
    standard_errors : bool
        Compute sandwich standard errors.
    """

    def __init__(self, family="aipw", robust=True, c_mu=3.9, c_sigma=5.4,
                 propensity_columns=None, outcome_columns=None, logit_c=1.345,
                 reg_c1=4.685, reg_c2=1.345, standard_errors=False):
        self.family = family
        self.robust = robust
        self.c_mu = c_mu
        self.c_sigma = c_sigma
        self.propensity_columns = propensity_columns
        self.outcome_columns = outcome_columns
        self.logit_c = logit_c
        self.reg_c1 = reg_c1
        self.reg_c2 = reg_c2
        self.standard_errors = standard_errors

    def fit(self, X, y, aux=None):
        """Fit on covariates ``X`` and outcome ``y`` (NaN = missing).

        ``aux`` may be an :class:`AuxiliaryFits` for the same data whose
        cached models are then reused.
        """
        from .sandwich import standard_errors as _se

        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        X = check_array(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(X):
            raise ValueError("X and y have inconsistent lengths")
        if not np.isfinite(y).any():
            raise ValueError("no observed outcomes")
        aux = AuxiliaryFits(X, y) if aux is None else aux
        r = aux.r
        self.n_features_in_ = X.shape[1]
        Zp = aux.design(self.propensity_columns)
        Zo = aux.design(self.outcome_columns)
        self.propensity_model_ = self.outcome_model_ = self.outcome_model_sigma_ = None
        psi_mu, psi_sigma = tukey(self.c_mu), tukey(self.c_sigma)
        pcols, ocols = self.propensity_columns, self.outcome_columns

        if self.family in ("ipw", "aipw"):
            self.propensity_model_ = aux.propensity(pcols, self.logit_c if self.robust else None)
            pi = predict_propensity(self.propensity_model_, Zp)
        if self.family == "aipw" or (self.family == "or" and not self.robust):
            om = aux.outcome(ocols, self.reg_c1, self.reg_c2) if self.robust and self.family == "aipw" \
                else aux.outcome(ocols)
            self.outcome_model_ = om
            h = predict_mean(om, Zo)

        if self.family == "ipw":
            est = estimate_ripw(y, r, pi, psi_mu, psi_sigma) if self.robust \
                else estimate_ipw_classical(y, r, pi)
        elif self.family == "aipw":
            est = estimate_raipw(y, r, pi, h, om.xi2, psi_mu, psi_sigma) if self.robust \
                else estimate_aipw_classical(y, r, pi, h, om.xi2)
        elif self.robust:
            self.outcome_model_ = aux.outcome(ocols, self.c_mu, self.reg_c2)
            self.outcome_model_sigma_ = aux.outcome(ocols, self.c_sigma, self.reg_c2)
            est = estimate_ror(predict_mean(self.outcome_model_, Zo),
                               predict_mean(self.outcome_model_sigma_, Zo),
                               self.outcome_model_sigma_.xi2)
        else:
            est = estimate_or_classical(h, om.xi2)

        if self.standard_errors:
            est.se_mu, est.se_sigma = _se(est, y, r, Zp, Zo, self.propensity_model_,
                                          self.outcome_model_, self.outcome_model_sigma_,
                                          psi_mu, psi_sigma)
        self.estimate_ = est
        self.mu_, self.sigma_ = est.mu, est.sigma
        self.se_mu_, self.se_sigma_ = est.se_mu, est.se_sigma
        self.converged_ = bool(est.converged and all(
            m is None or m.fit_converged
            for m in (self.propensity_model_, self.outcome_model_, self.outcome_model_sigma_)))
        return self

    @property
    def weights_(self):
        check_is_fitted(self, "estimate_")
        return self.estimate_.weights
