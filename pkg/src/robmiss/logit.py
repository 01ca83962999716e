"""Propensity (response) model: ML and Mallows-type robust logistic regression.

The robust fit solves the Fisher-consistent quasi-likelihood equations
with Huber's psi applied to Pearson residuals and unit design weights,

    sum_i [psi(r_i) - E psi(r_i)] sqrt(v_i) z_i = 0,
    r_i = (R_i - p_i) / sqrt(v_i),   v_i = p_i (1 - p_i).

Because R_i is Bernoulli the correction E psi(r_i) is a two-point sum and
is computed exactly. With the identity psi the equations are the ML score.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .psi import PsiFunction, huber, identity

__all__ = [
    "PropensityModel",
    "ConvergenceError",
    "fit_logistic",
    "predict_propensity",
    "propensity_score_function",
    "count_clamped",
    "RobustLogisticRegression",
]

CLAMP = 1e-6
DIVERGENCE_NORM = 1e3


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PropensityModel:
    gamma: np.ndarray
    psi: PsiFunction
    design_columns: tuple = ()
    fit_converged: bool = True
    n_iter: int = 0

    def predict(self, Z1):
        return predict_propensity(self, Z1)

    def score(self, r, Z1, gamma=None):
        return propensity_score_function(self, r, Z1, gamma)


def _expected_psi(psi, p):
    sv = np.sqrt(p * (1.0 - p))
    r1 = (1.0 - p) / sv
    r0 = -p / sv
    return p * psi(r1) + (1.0 - p) * psi(r0), r1, r0, sv


def _score_terms(psi, gamma, r, Z1):
    """Per-observation multiplier g_i with score_i = g_i * z_i, and dg_i/deta_i."""
    eta = Z1 @ gamma
    p = np.clip(expit(eta), 1e-12, 1 - 1e-12)
    v = p * (1.0 - p)
    epsi, r1, r0, sv = _expected_psi(psi, p)
    res = (r - p) / sv
    g = (psi(res) - epsi) * sv

    # derivatives with respect to p, then chain through dp/deta = v
    dsv = (1.0 - 2.0 * p) / (2.0 * sv)

    def dres(rv):
        return (-sv - (rv - p) * dsv) / v

    depsi = psi(r1) - psi(r0) + p * psi.deriv(r1) * dres(1.0) + (1.0 - p) * psi.deriv(r0) * dres(0.0)
    dg = (psi.deriv(res) * dres(r) - depsi) * sv + (psi(res) - epsi) * dsv
    return g, dg * v


def propensity_score_function(m, r, Z1, gamma=None):
    """Per-observation estimating function m_gamma, shape (n, p)."""
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    gamma = m.gamma if gamma is None else np.asarray(gamma, dtype=float)
    if Z1.shape[1] != gamma.size:
        raise ValueError(f"design has {Z1.shape[1]} columns, model expects {gamma.size}")
    g, _ = _score_terms(m.psi, gamma, r, Z1)
    return g[:, None] * Z1


def fit_logistic(R, Z1, psi=None, design_columns=(), tol=1e-9, max_iter=100):
    """Fit Pr(R = 1 | Z1) = expit(Z1 gamma) by damped Newton on the corrected score.

    ``psi`` defaults to Huber with c = 1.35; pass ``identity()`` for ML.
    Raises :class:`ConvergenceError` on divergence (e.g. separation) and
    ``ValueError`` on a rank-deficient design.
    """
    psi = huber(1.35) if psi is None else psi
    R = np.asarray(R, dtype=float)
    Z1 = np.asarray(Z1, dtype=float)
    if not np.all((R == 0) | (R == 1)):
        raise ValueError("response indicator must be binary")
    n, p = Z1.shape
    if np.linalg.matrix_rank(Z1) < p:
        raise ValueError("propensity design matrix is rank deficient")

    # ML start, then the robust equations from there
    gamma = np.zeros(p)
    stages = [identity()] if psi.is_identity else [identity(), psi]
    total = 0
    converged = False
    for stage in stages:
        converged = False
        s = _mean(stage, gamma, R, Z1)
        norm = np.linalg.norm(s)
        for _ in range(max_iter):
            if norm < tol:
                converged = True
                break
            total += 1
            _, dg = _score_terms(stage, gamma, R, Z1)
            J = (Z1 * dg[:, None]).T @ Z1 / n
            try:
                step = np.linalg.solve(J, s)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError("singular Jacobian in logistic fit") from exc
            t = 1.0
            for _ in range(20):
                cand = gamma - t * step
                sc = _mean(stage, cand, R, Z1)
                if np.linalg.norm(sc) < norm:
                    break
                t *= 0.5
            gamma, s, norm = cand, sc, np.linalg.norm(sc)
            if np.linalg.norm(gamma) > DIVERGENCE_NORM:
                raise ConvergenceError("logistic coefficients diverged (separation?)")
        else:
            converged = norm < tol
    eta = Z1 @ gamma
    if np.all(eta != 0) and np.all((eta > 0) == (R == 1)):
        raise ConvergenceError("response is completely separated by the design; no finite fit")
    return PropensityModel(
        gamma=gamma, psi=psi, design_columns=tuple(design_columns),
        fit_converged=bool(converged), n_iter=total,
    )


def _mean(psi, gamma, R, Z1):
    g, _ = _score_terms(psi, gamma, R, Z1)
    return Z1.T @ g / Z1.shape[0]


def predict_propensity(m, Z1):
    """expit(Z1 gamma) clamped to [1e-6, 1 - 1e-6]."""
    Z1 = np.asarray(Z1, dtype=float)
    scalar = Z1.ndim == 1
    Z1 = np.atleast_2d(Z1)
    if Z1.shape[1] != m.gamma.size:
        raise ValueError(f"design has {Z1.shape[1]} columns, model expects {m.gamma.size}")
    p = np.clip(expit(Z1 @ m.gamma), CLAMP, 1.0 - CLAMP)
    return float(p[0]) if scalar else p


def count_clamped(m, Z1):
    """Number of rows whose fitted propensity hits the clamp."""
    p = expit(np.atleast_2d(np.asarray(Z1, dtype=float)) @ m.gamma)
    return int(np.sum((p < CLAMP) | (p > 1.0 - CLAMP)))


class RobustLogisticRegression(ClassifierMixin, BaseEstimator):
    """Logistic regression with bounded-influence (Huber) quasi-likelihood.

    Parameters
    ----------
    c : float or None
        Huber constant for the Pearson residuals. ``None`` gives ordinary
        maximum likelihood.
    fit_intercept : bool
        Prepend a column of ones to ``X``.
    tol, max_iter :
        Newton stopping rule on the mean score norm.
    """

    def __init__(self, c=1.35, fit_intercept=True, tol=1e-9, max_iter=100):
        self.c = c
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_iter = max_iter

    def _design(self, X):
        X = check_array(X)
        return np.column_stack([np.ones(len(X)), X]) if self.fit_intercept else X

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if not np.array_equal(self.classes_, [0, 1]):
            raise ValueError("y must contain both classes 0 and 1")
        psi = identity() if self.c is None else huber(self.c)
        self.model_ = fit_logistic(y, self._design(X), psi, tol=self.tol, max_iter=self.max_iter)
        g = self.model_.gamma
        self.intercept_ = g[0] if self.fit_intercept else 0.0
        self.coef_ = g[1:] if self.fit_intercept else g
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = predict_propensity(self.model_, self._design(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
