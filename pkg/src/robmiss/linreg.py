"""Outcome working model Z2 = Z1'xi1 + xi2 * nu fitted on complete cases.

The robust fit is the joint M-estimator of regression and scale: Tukey's
biweight for the coefficients and Huber's Proposal 2 for the scale,

    sum_i xi2 psi_T(r_i / xi2) z_i = 0
    sum_i xi2^2 [psi_H(r_i / xi2)^2 - a] = 0,   a = E psi_H(Z)^2.

With identity psi functions both reduce to OLS with the mean squared
residual as variance.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import median_abs_deviation
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .psi import PsiFunction, gaussian_expectation_psi_sq, huber, identity, tukey

__all__ = [
    "OutcomeModel",
    "fit_outcome_model",
    "outcome_score_function",
    "predict_mean",
    "RobustLinearRegression",
]

_START_PSI = huber(1.345)


@dataclass(frozen=True)
class OutcomeModel:
    xi1: np.ndarray
    xi2: float
    psi_reg: PsiFunction
    psi_scale: PsiFunction
    a_xi: float
    fit_converged: bool = True
    n_iter: int = 0
    design_columns: tuple = ()

    @property
    def params(self):
        """Stacked (xi1, xi2) vector."""
        return np.append(self.xi1, self.xi2)

    def predict(self, Z1):
        return predict_mean(self, Z1)


def _wls(X, y, w):
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return coef


def _solve_scale(resid, psi_scale, a, s0):
    if psi_scale.is_identity:
        return float(np.sqrt(np.mean(resid ** 2)))

    def f(s):
        return np.mean(psi_scale(resid / s) ** 2) - a

    lo, hi = 1e-8 * s0, 1e3 * s0
    if f(lo) <= 0 or f(hi) >= 0:
        raise ArithmeticError("scale equation is not bracketed; residuals are degenerate")
    return float(optimize.brentq(f, lo, hi, xtol=1e-14 * s0, rtol=4 * np.finfo(float).eps, maxiter=500))


def _huber_start(X, y, max_iter=100):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    scale = 1.0
    for _ in range(max_iter):
        r = y - X @ coef
        scale = median_abs_deviation(r, scale="normal")
        if scale <= 0:
            raise ArithmeticError("zero MAD scale: more than half the residuals vanish")
        new = _wls(X, y, _START_PSI.weight(r / scale))
        if np.max(np.abs(new - coef)) < 1e-10 * (1 + np.max(np.abs(coef))):
            coef = new
            break
        coef = new
    r = y - X @ coef
    return coef, float(median_abs_deviation(r, scale="normal"))


def fit_outcome_model(Z2, Z1, complete_mask=None, c1=4.685, c2=1.345, psi_reg=None,
                      psi_scale=None, tol=1e-9, max_iter=200, design_columns=()):
    """Fit the outcome working model on the rows where ``complete_mask`` is true.

    ``c1``/``c2`` select Tukey and Huber constants; pass ``psi_reg`` /
    ``psi_scale`` explicitly to override (``identity()`` gives OLS).
    """
    psi_reg = psi_reg if psi_reg is not None else (identity() if c1 is None else tukey(c1))
    psi_scale = psi_scale if psi_scale is not None else (identity() if c2 is None else huber(c2))
    Z2 = np.asarray(Z2, dtype=float)
    Z1 = np.asarray(Z1, dtype=float)
    mask = np.isfinite(Z2) if complete_mask is None else np.asarray(complete_mask, dtype=bool)
    X, y = Z1[mask], Z2[mask]
    p = X.shape[1]
    if len(y) < p + 2:
        raise ValueError(f"need at least {p + 2} complete cases, got {len(y)}")
    if np.linalg.matrix_rank(X) < p:
        raise ValueError("outcome design matrix is rank deficient on complete cases")
    a = gaussian_expectation_psi_sq(psi_scale)

    if psi_reg.is_identity:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = y - X @ coef
        s0 = float(np.sqrt(np.mean(r ** 2))) or 1.0
        scale = _solve_scale(r, psi_scale, a, s0)
        return OutcomeModel(coef, scale, psi_reg, psi_scale, a, True, 1, tuple(design_columns))

    coef, s0 = _huber_start(X, y)
    scale = s0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = y - X @ coef
        scale_new = _solve_scale(r, psi_scale, a, s0)
        w = psi_reg.weight(r / scale_new)
        if not np.any(w > 0):
            raise ArithmeticError("all biweight weights are zero; increase c1")
        coef_new = _wls(X, y, w)
        change = max(np.max(np.abs(coef_new - coef)), abs(scale_new - scale)) / (1.0 + scale_new)
        coef, scale = coef_new, scale_new
        if change < tol:
            converged = True
            break
    # final scale consistent with the returned coefficients
    scale = _solve_scale(y - X @ coef, psi_scale, a, s0)
    return OutcomeModel(coef, scale, psi_reg, psi_scale, a, converged, it, tuple(design_columns))


def predict_mean(m, Z1):
    Z1 = np.asarray(Z1, dtype=float)
    if Z1.shape[-1] != m.xi1.size:
        raise ValueError(f"design has {Z1.shape[-1]} columns, model expects {m.xi1.size}")
    return Z1 @ m.xi1


def outcome_score_function(m, z2, Z1, params=None):
    """Per-observation stacked estimating function, shape (n, p + 1).

    Rows for missing ``z2`` (NaN) are zero, which is the R_i m_xi form.
    ``params`` overrides the fitted (xi1, xi2) vector.
    """
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))
    params = m.params if params is None else np.asarray(params, dtype=float)
    if Z1.shape[1] + 1 != params.size:
        raise ValueError(f"design has {Z1.shape[1]} columns, model expects {params.size - 1}")
    xi1, xi2 = params[:-1], params[-1]
    obs = np.isfinite(z2)
    t = np.where(obs, (np.where(obs, z2, 0.0) - Z1 @ xi1) / xi2, 0.0)
    reg = (xi2 * m.psi_reg(t))[:, None] * Z1
    sc = xi2 ** 2 * (m.psi_scale(t) ** 2 - m.a_xi)
    out = np.column_stack([reg, sc])
    out[~obs] = 0.0
    return out


class RobustLinearRegression(RegressorMixin, BaseEstimator):
    """Joint M-estimator of regression (Tukey) and scale (Huber Proposal 2).

    Rows with a missing (NaN) target are ignored in ``fit``.

    Parameters
    ----------
    c1 : float or None
        Tukey constant for the coefficients; ``None`` gives least squares.
    c2 : float or None
        Huber constant for the scale; ``None`` gives the root mean squared
        residual.
    fit_intercept : bool
    """

    def __init__(self, c1=4.685, c2=1.345, fit_intercept=True, tol=1e-9, max_iter=200):
        self.c1 = c1
        self.c2 = c2
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_iter = max_iter

    def _design(self, X):
        X = check_array(X)
        return np.column_stack([np.ones(len(X)), X]) if self.fit_intercept else X

    def fit(self, X, y):
        Z1 = self._design(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(Z1):
            raise ValueError("X and y have inconsistent lengths")
        self.model_ = fit_outcome_model(y, Z1, np.isfinite(y), self.c1, self.c2,
                                        tol=self.tol, max_iter=self.max_iter)
        xi1 = self.model_.xi1
        self.intercept_ = xi1[0] if self.fit_intercept else 0.0
        self.coef_ = xi1[1:] if self.fit_intercept else xi1
        self.scale_ = self.model_.xi2
        self.n_features_in_ = Z1.shape[1] - int(self.fit_intercept)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict_mean(self.model_, self._design(X))
