"""Simulation design: covariates X, V; missing outcomes; contamination.

X3 is Bernoulli; V3 is Bernoulli given X3; (X1, V1, X2, V2) is Gaussian
given X3. The logistic model gives the probability that an outcome is
*missing*, so Pr(R = 1 | X) = 1 - expit(gamma'(1, X1, X2, X3)).
"""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from .numerics import RngStream, sample_mvnormal

__all__ = [
    "ScenarioConfig",
    "SimDataset",
    "generate_replicate",
    "contaminate",
    "true_beta",
    "write_dataset",
    "XI_LEVELS",
    "GAMMA_LEVELS",
    "SIGMA",
]

XI_FIXED = np.array([0.0, -1.0, 1.0, -1.0])  # intercept, X1, X2, X3
XI_LEVELS = {
    "strong": np.array([-1.0, 1.0, 1.0]),
    "moderate": np.array([-0.5, 0.5, 0.5]),
    "none": np.array([0.0, 0.0, 0.0]),
}
GAMMA_LEVELS = {
    "strong": np.array([0.0, 0.6, -0.6, 0.6]),
    "moderate": np.array([0.0, 0.3, -0.3, 0.3]),
}
# covariance and stratum means of (X1, V1, X2, V2) given X3
SIGMA = np.array([
    [1.0, 0.5, -0.5, -0.5],
    [0.5, 1.0, -0.5, -0.5],
    [-0.5, -0.5, 1.0, 0.5],
    [-0.5, -0.5, 0.5, 1.0],
])
TAU = {1: np.array([1.0, 1.0, -1.0, -1.0]), 0: np.array([-1.0, -1.0, 1.0, 1.0])}
P_X3 = 0.2
NOISE_SD = 1.0

CONTAMINATIONS = ("clean", "c_asym", "c_sym", "c_hidden")

# stream purposes
_COVARIATES, _MISSINGNESS, _NOISE, _SELECT, _VALUES = range(5)


@dataclass(frozen=True)
class ScenarioConfig:
    xi_level: str = "moderate"
    gamma_level: str = "moderate"
    n: int = 1000
    contamination: str = "clean"
    contamination_rate: float = 0.05
    seed: int = 0
    replicate_index: int = 0
    hidden_scale: str = "variance"  # how to read the 0.4 in N(-10, 0.4)

    def __post_init__(self):
        if self.xi_level not in XI_LEVELS:
            raise ValueError(f"xi_level must be one of {sorted(XI_LEVELS)}")
        if self.gamma_level not in GAMMA_LEVELS:
            raise ValueError(f"gamma_level must be one of {sorted(GAMMA_LEVELS)}")
        if self.contamination not in CONTAMINATIONS:
            raise ValueError(f"contamination must be one of {CONTAMINATIONS}")
        if not 0.0 <= self.contamination_rate < 0.5:
            raise ValueError("contamination_rate must lie in [0, 0.5)")
        if self.hidden_scale not in ("variance", "sd"):
            raise ValueError("hidden_scale must be 'variance' or 'sd'")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def xi1(self):
        """Full coefficient vector (intercept, X1, X2, X3, V1, V2, V3)."""
        return np.concatenate([XI_FIXED, XI_LEVELS[self.xi_level]])

    @property
    def gamma(self):
        return GAMMA_LEVELS[self.gamma_level]

    def stream(self, purpose):
        return RngStream(self.seed, (self.replicate_index, purpose))


@dataclass(frozen=True)
class SimDataset:
    X: np.ndarray
    V: np.ndarray
    R: np.ndarray
    Z2: np.ndarray  # full outcome vector; use ``observed`` for the masked view
    contaminated_mask: np.ndarray
    contamination_skipped: bool = False

    @property
    def n(self):
        return len(self.R)

    @property
    def observed(self):
        """Outcome with NaN for missing units."""
        return np.where(self.R == 1, self.Z2, np.nan)

    def covariates(self):
        """Columns in the order x1, x2, x3, v1, v2, v3."""
        return np.column_stack([self.X, self.V])


def generate_replicate(cfg):
    """Draw one replicate (contaminated according to ``cfg``)."""
    n = cfg.n
    rng = cfg.stream(_COVARIATES)
    x3 = (rng.random(n) < P_X3).astype(float)
    v3 = (rng.random(n) < np.where(x3 == 1, 0.75, 0.25)).astype(float)
    base = sample_mvnormal(np.zeros(4), SIGMA, rng, size=n)
    means = np.where(x3[:, None] == 1, TAU[1], TAU[0])
    x1, v1, x2, v2 = (base + means).T
    X = np.column_stack([x1, x2, x3])
    V = np.column_stack([v1, v2, v3])

    eta = cfg.gamma[0] + X @ cfg.gamma[1:]
    p_missing = expit(eta)
    R = (cfg.stream(_MISSINGNESS).random(n) >= p_missing).astype(int)

    design = np.column_stack([np.ones(n), X, V])
    Z2 = design @ cfg.xi1 + NOISE_SD * cfg.stream(_NOISE).standard_normal(n)
    data = SimDataset(X, V, R, Z2, np.zeros(n, dtype=bool))
    if cfg.contamination != "clean":
        data = contaminate(data, cfg.contamination, cfg.contamination_rate,
                           (cfg.stream(_SELECT), cfg.stream(_VALUES)), cfg.hidden_scale)
    return data


def contaminate(d, scheme, rate, rng, hidden_scale="variance"):
    """Replace round(rate * #observed) observed outcomes by contamination draws.

    ``rng`` is either one stream or a (selection, values) pair of streams.
    """
    if scheme == "clean" or rate == 0:
        return d
    if scheme not in CONTAMINATIONS:
        raise ValueError(f"unknown contamination scheme {scheme!r}")
    sel_rng, val_rng = rng if isinstance(rng, tuple) else (rng, rng)
    observed = np.flatnonzero(d.R == 1)
    k = int(np.floor(rate * len(observed) + 0.5))
    if k < 1:
        warnings.warn("contamination rate too small for this sample; dataset unchanged")
        return replace(d, contamination_skipped=True)
    idx = np.sort(sel_rng.choice(observed, size=k, replace=False))
    if scheme == "c_asym":
        values = val_rng.uniform(-20.0, -12.0, size=k)
    elif scheme == "c_sym":
        u = val_rng.uniform(-20.0, -12.0, size=k)
        b = val_rng.random(k) < 0.5
        values = np.where(b, u, -u)
    else:
        sd = np.sqrt(0.4) if hidden_scale == "variance" else 0.4
        values = val_rng.normal(-10.0, sd, size=k)
    Z2 = d.Z2.copy()
    Z2[idx] = values
    mask = np.zeros(d.n, dtype=bool)
    mask[idx] = True
    return replace(d, Z2=Z2, contaminated_mask=mask)


def true_beta(cfg):
    """Return (mu0, sigma0) of the clean outcome law for the scenario."""
    xi = cfg.xi1
    xi10, xi11, xi12, xi13, xi14, xi15, xi16 = xi
    xt = np.array([xi11, xi14, xi12, xi15])  # matches (X1, V1, X2, V2)
    m1, m0 = TAU[1] @ xt, TAU[0] @ xt
    mu = xi10 + P_X3 * m1 + (1 - P_X3) * m0 + P_X3 * (xi13 + 0.5 * xi16) + 0.25 * xi16
    # law of total variance over X3; V3 | X3 has variance 0.75 * 0.25 in both strata
    gap = m1 - m0 + xi13 + 0.5 * xi16
    var = (P_X3 * (1 - P_X3) * gap ** 2 + xt @ SIGMA @ xt
           + 0.25 * 0.75 * xi16 ** 2 + NOISE_SD ** 2)
    return float(mu), float(np.sqrt(var))


def write_dataset(d, path):
    """Dump a replicate as CSV; missing outcomes are written as empty fields."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "x3", "v1", "v2", "v3", "r", "z2", "contaminated"])
        for i in range(d.n):
            z = repr(float(d.Z2[i])) if d.R[i] == 1 else ""
            w.writerow([*(repr(float(v)) for v in d.X[i]), *(repr(float(v)) for v in d.V[i]),
                        int(d.R[i]), z, int(d.contaminated_mask[i])])
