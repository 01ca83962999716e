"""Sandwich standard errors from stacked estimating functions.

The parameter vector stacks the target (mu, sigma) with the auxiliary
propensity and outcome-model parameters; each block contributes its
per-unit estimating function. With A_n the negative mean Jacobian and
B_n the mean outer product, cov(theta_hat) = A_n^-1 B_n A_n^-T / n.
Consistency constants (A, B of the robust estimators) are held fixed.
"""

from dataclasses import dataclass, replace

import numpy as np

from .estimators import or_moments, raipw_moments, ripw_moments
from .linreg import outcome_score_function, predict_mean
from .logit import predict_propensity, propensity_score_function
from .numerics import numerical_jacobian

__all__ = ["StackedSystem", "sandwich_covariance", "build_system", "standard_errors"]

SOLUTION_TOL = 1e-5


@dataclass
class StackedSystem:
    """Stacked estimating functions evaluated at ``theta_hat``.

    ``blocks`` lists (name, size) pairs in the order of ``theta_hat``;
    ``evaluator(theta)`` returns the (n, len(theta)) per-unit values.
    """

    theta_hat: np.ndarray
    blocks: tuple
    evaluator: object

    def __post_init__(self):
        self.theta_hat = np.asarray(self.theta_hat, dtype=float)
        size = sum(k for _, k in self.blocks)
        if size != self.theta_hat.size:
            raise ValueError(f"blocks cover {size} parameters, theta_hat has {self.theta_hat.size}")

    def values(self, theta=None):
        vals = np.asarray(self.evaluator(self.theta_hat if theta is None else theta), dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.theta_hat.size:
            raise ValueError(f"evaluator returned shape {vals.shape}, expected (n, {self.theta_hat.size})")
        return vals

    def mean(self, theta=None):
        return self.values(theta).mean(axis=0)


def sandwich_covariance(sys, check=True):
    """Covariance matrix of ``sys.theta_hat``."""
    psi = sys.values()
    n = psi.shape[0]
    if check:
        norm = np.linalg.norm(psi.mean(axis=0))
        if norm > SOLUTION_TOL:
            raise ValueError(f"estimating equations not solved at theta_hat (|mean| = {norm:.2e})")
    A = -numerical_jacobian(sys.mean, sys.theta_hat)
    B = psi.T @ psi / n
    u, s, vt = np.linalg.svd(A)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        names = [f"{name}[{j}]" for name, k in sys.blocks for j in range(k)]
        direction = vt[-1]
        lead = np.argsort(-np.abs(direction))[:3]
        desc = ", ".join(f"{names[j]}:{direction[j]:+.3f}" for j in lead)
        raise np.linalg.LinAlgError(f"singular A_n; near-null direction along {desc}")
    Ainv = np.linalg.inv(A)
    V = Ainv @ B @ Ainv.T / n
    return 0.5 * (V + V.T)


def _split(theta, sizes):
    return np.split(theta, np.cumsum(sizes)[:-1])


def build_system(est, y, r, Zp, Zo, pm=None, om=None, om_sigma=None,
                 psi_mu=None, psi_sigma=None):
    """Stacked system for a fitted estimate; the layout follows ``est.method``."""
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    z = np.where(r == 1, np.nan_to_num(y), 0.0)
    ymask = np.where(r == 1, y, np.nan)
    method = est.method
    beta = np.array([est.mu, est.sigma])
    A, B = est.constants.get("A", 0.0), est.constants.get("B", 1.0)

    def pi_of(g):
        return predict_propensity(replace(pm, gamma=g), Zp)

    def m_gamma(g):
        return propensity_score_function(pm, r, Zp, g)

    def m_xi(model, xi):
        return outcome_score_function(model, ymask, Zo, xi)

    if method in ("IPW", "RIPW"):
        sizes = (2, pm.gamma.size)
        theta = np.concatenate([beta, pm.gamma])

        def ev(t):
            (mu, sigma), g = _split(t, sizes)
            pi = pi_of(g)
            if method == "IPW":
                w = r / pi
                phi = np.column_stack([w * (z - mu), w * ((z - mu) ** 2 - sigma ** 2)])
            else:
                phi = ripw_moments((mu, sigma), ymask, r, pi, psi_mu, psi_sigma, A, B)
            return np.column_stack([phi, m_gamma(g)])

        blocks = (("beta", 2), ("gamma", pm.gamma.size))
    elif method in ("AIPW", "RAIPW"):
        sizes = (2, pm.gamma.size, om.params.size)
        theta = np.concatenate([beta, pm.gamma, om.params])

        def ev(t):
            (mu, sigma), g, xi = _split(t, sizes)
            pi = pi_of(g)
            h = Zo @ xi[:-1]
            if method == "AIPW":
                aug = (r - pi) / pi
                phi = np.column_stack([
                    r * z / pi - aug * h - mu,
                    r * (z - mu) ** 2 / pi - aug * ((h - mu) ** 2 + xi[-1] ** 2) - sigma ** 2,
                ])
            else:
                phi = raipw_moments((mu, sigma), ymask, r, pi, h, xi[-1], psi_mu, psi_sigma, A, B)
            return np.column_stack([phi, m_gamma(g), m_xi(om, xi)])

        blocks = (("beta", 2), ("gamma", pm.gamma.size), ("xi", om.params.size))
    elif method == "OR":
        sizes = (2, om.params.size)
        theta = np.concatenate([beta, om.params])

        def ev(t):
            beta_t, xi = _split(t, sizes)
            h = Zo @ xi[:-1]
            return np.column_stack([or_moments(beta_t, h, h, xi[-1]), m_xi(om, xi)])

        blocks = (("beta", 2), ("xi", om.params.size))
    elif method == "ROR":
        k = om.params.size
        sizes = (2, k, k)
        theta = np.concatenate([beta, om.params, om_sigma.params])

        def ev(t):
            beta_t, xa, xb = _split(t, sizes)
            phi = or_moments(beta_t, Zo @ xa[:-1], Zo @ xb[:-1], xb[-1])
            return np.column_stack([phi, m_xi(om, xa), m_xi(om_sigma, xb)])

        blocks = (("beta", 2), ("xi_mu", k), ("xi_sigma", k))
    else:
        raise ValueError(f"no stacked system for method {method!r}")
    return StackedSystem(theta, blocks, ev)


def standard_errors(est, y, r, Zp, Zo, pm=None, om=None, om_sigma=None,
                    psi_mu=None, psi_sigma=None):
    """Return (se_mu, se_sigma) for a fitted estimate."""
    sys = build_system(est, y, r, Zp, Zo, pm, om, om_sigma, psi_mu, psi_sigma)
    V = sandwich_covariance(sys)
    return float(np.sqrt(V[0, 0])), float(np.sqrt(V[1, 1]))
