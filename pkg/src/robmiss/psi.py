"""Score functions for M-estimation of location and scale.

Three families are supported: the identity (classical moments), Huber's
clipped linear function and Tukey's redescending biweight. Every function
here accepts scalars or arrays and is vectorised with numpy.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import ndtr

__all__ = [
    "PsiFunction",
    "identity",
    "huber",
    "tukey",
    "psi_eval",
    "psi_weight",
    "psi_deriv",
    "huber_psi_sq_expectation",
    "gaussian_expectation_psi_sq",
]

KINDS = ("identity", "huber", "tukey")


def _check_finite(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("psi functions require finite input")
    return t


def _out(t, value):
    # return a python float for scalar input
    return float(value) if np.ndim(t) == 0 else value


@dataclass(frozen=True)
class PsiFunction:
    """Tunable odd score function.

    Parameters
    ----------
    kind : {"identity", "huber", "tukey"}
    c : float
        Tuning constant. Ignored for the identity.
    """

    kind: str = "identity"
    c: float = np.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown psi kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "identity" and not (self.c > 0):
            raise ValueError(f"tuning constant must be positive, got {self.c}")

    @property
    def is_identity(self):
        return self.kind == "identity"

    @property
    def support(self):
        """Interval outside of which psi is constant (or zero)."""
        if self.kind == "identity":
            return (-np.inf, np.inf)
        return (-self.c, self.c)

    def __call__(self, t):
        return psi_eval(self, t)

    def weight(self, t):
        return psi_weight(self, t)

    def deriv(self, t):
        return psi_deriv(self, t)

    def __repr__(self):
        if self.kind == "identity":
            return "PsiFunction('identity')"
        return f"PsiFunction({self.kind!r}, c={self.c:g})"


def identity():
    return PsiFunction("identity")


def huber(c=1.345):
    return PsiFunction("huber", float(c))


def tukey(c=4.685):
    return PsiFunction("tukey", float(c))


def psi_eval(p, t):
    """Evaluate psi at ``t``."""
    t = _check_finite(t)
    if p.kind == "identity":
        val = t.copy()
    elif p.kind == "huber":
        val = np.clip(t, -p.c, p.c)
    else:
        u = (np.where(np.abs(t) < p.c, t, 0.0) / p.c) ** 2
        val = np.where(np.abs(t) < p.c, (u - 1.0) ** 2 * t, 0.0)
    return _out(t, val)


def psi_weight(p, t):
    """Weight form psi(t)/t, with its limit 1 at t = 0."""
    t = _check_finite(t)
    if p.kind == "identity":
        val = np.ones_like(t)
    elif p.kind == "huber":
        a = np.abs(t)
        with np.errstate(divide="ignore", over="ignore"):
            val = np.where(a <= p.c, 1.0, p.c / np.where(a == 0, 1.0, a))
    else:
        u = (np.where(np.abs(t) < p.c, t, 0.0) / p.c) ** 2
        val = np.where(np.abs(t) < p.c, (u - 1.0) ** 2, 0.0)
    return _out(t, val)


def psi_deriv(p, t):
    """Derivative of psi. At the Huber kinks |t| = c the outer value 0 is used."""
    t = _check_finite(t)
    if p.kind == "identity":
        val = np.ones_like(t)
    elif p.kind == "huber":
        val = np.where(np.abs(t) < p.c, 1.0, 0.0)
    else:
        u = (np.where(np.abs(t) < p.c, t, 0.0) / p.c) ** 2
        val = np.where(np.abs(t) < p.c, (u - 1.0) * (5.0 * u - 1.0), 0.0)
    return _out(t, val)


def huber_psi_sq_expectation(c):
    """E[psi_c(Z)^2] for Huber's psi and Z ~ N(0, 1), in closed form."""
    phi = np.exp(-0.5 * c * c) / np.sqrt(2.0 * np.pi)
    Phi = ndtr(c)
    return 2.0 * Phi - 1.0 - 2.0 * c * phi + 2.0 * c * c * (1.0 - Phi)


@lru_cache(maxsize=256)
def gaussian_expectation_psi_sq(p):
    """E[psi(Z)^2] for a standard normal Z.

    Huber uses the closed form; Tukey is integrated adaptively over
    [-c, c], the only region where the integrand is non-zero. Results are
    cached per PsiFunction since they are reused by every estimate.
    """
    if p.kind == "identity":
        return 1.0
    if p.kind == "huber":
        return float(huber_psi_sq_expectation(p.c))

    def integrand(z):
        return psi_eval(p, z) ** 2 * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)

    # the normal density is negligible beyond 40
    edge = min(p.c, 40.0)
    val, err = integrate.quad(integrand, -edge, edge, epsabs=1e-12, epsrel=1e-12, limit=200)
    if err > 1e-10:
        raise ArithmeticError(f"quadrature for E[psi^2] did not converge (error estimate {err:.2e})")
    return float(val)
