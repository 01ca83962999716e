"""Grid calibration of tuning constants to a target efficiency on clean data.

Efficiency is var(classical) / var(robust) over common replicates. The
location constant is chosen first (scale constant at a large
placeholder), then the scale constant with the location constant fixed.
"""

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..estimators import (
    AuxiliaryFits,
    estimate_aipw_classical,
    estimate_or_classical,
    estimate_raipw,
    estimate_ror,
)
from ..linreg import predict_mean
from ..logit import predict_propensity
from ..psi import tukey
from .roster import COVARIATE_SETS

__all__ = ["CalibrationResult", "calibrate_tuning", "efficiency_curve"]

TARGET_EFFICIENCY = 0.95
PLACEHOLDER = 1e3


@dataclass
class CalibrationResult:
    family: str
    c_mu: float
    c_sigma: float
    efficiency_mu: float
    efficiency_sigma: float
    curve_mu: dict = field(default_factory=dict)
    curve_sigma: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _replicate_estimates(args):
    """(classical (mu, sigma), robust (mu, sigma) per grid value) for one replicate."""
    from ..simulation import generate_replicate

    scenario, index, family, stage, grid, fixed, aux_c = args
    data = generate_replicate(replace(scenario, replicate_index=index))
    aux = AuxiliaryFits(data.covariates(), data.observed)
    y, r = aux.y, aux.r
    xs, xv = COVARIATE_SETS["X"], COVARIATE_SETS["XV"]
    Zp, Zo = aux.design(xs), aux.design(xv)
    logit_c, reg_c1, reg_c2 = aux_c
    rows = []
    if family == "raipw":
        ols = aux.outcome(xv)
        classical = estimate_aipw_classical(
            y, r, predict_propensity(aux.propensity(xs), Zp), predict_mean(ols, Zo), ols.xi2)
        pi = predict_propensity(aux.propensity(xs, logit_c), Zp)
        om = aux.outcome(xv, reg_c1, reg_c2)
        h = predict_mean(om, Zo)
        start = classical
        for c in grid:
            cm, cs = (c, fixed) if stage == "mu" else (fixed, c)
            try:
                e = estimate_raipw(y, r, pi, h, om.xi2, tukey(cm), tukey(cs), start=start)
                rows.append((e.mu, e.sigma) if e.converged else (math.nan, math.nan))
            except ArithmeticError:
                rows.append((math.nan, math.nan))
    else:
        ols = aux.outcome(xv)
        classical = estimate_or_classical(predict_mean(ols, Zo), ols.xi2)
        for c in grid:
            try:
                if stage == "mu":
                    hm = predict_mean(aux.outcome(xv, c, reg_c2), Zo)
                    rows.append((hm.mean(), math.nan))
                else:
                    hm = predict_mean(aux.outcome(xv, fixed, reg_c2), Zo)
                    ms = aux.outcome(xv, c, reg_c2)
                    e = estimate_ror(hm, predict_mean(ms, Zo), ms.xi2)
                    rows.append((e.mu, e.sigma))
            except (ArithmeticError, ValueError):
                rows.append((math.nan, math.nan))
    return (classical.mu, classical.sigma), rows


def efficiency_curve(scenario, family, stage, grid, reps, fixed=PLACEHOLDER, threads=1,
                     aux_c=(1.345, 4.685, 1.345)):
    """Efficiency of the robust estimator of mu (stage "mu") or sigma at each grid value."""
    grid = [float(c) for c in grid]
    tasks = [(scenario, i, family, stage, grid, fixed, aux_c) for i in range(reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(_replicate_estimates, tasks, chunksize=max(1, reps // (4 * threads))))
    else:
        out = [_replicate_estimates(t) for t in tasks]
    k = 0 if stage == "mu" else 1
    classical = np.array([o[0][k] for o in out])
    robust = np.array([[row[k] for row in o[1]] for o in out])
    curve = {}
    for j, c in enumerate(grid):
        ok = np.isfinite(robust[:, j]) & np.isfinite(classical)
        if ok.sum() < 2:
            curve[c] = math.nan
            continue
        curve[c] = float(np.var(classical[ok], ddof=1) / np.var(robust[ok, j], ddof=1))
    return curve


def _select(curve, target, what, notes):
    finite = {c: e for c, e in curve.items() if np.isfinite(e)}
    if not finite:
        raise ArithmeticError(f"no usable grid value for {what}")
    best = min(finite, key=lambda c: (abs(finite[c] - target), c))
    effs = list(finite.values())
    if not (min(effs) <= target <= max(effs)):
        msg = f"{what}: target efficiency {target} not bracketed by the grid; returning nearest value {best}"
        warnings.warn(msg)
        notes.append(msg)
    return best, finite[best]


def calibrate_tuning(scenario, family, grid, reps, threads=1, target=TARGET_EFFICIENCY,
                     aux_c=(1.345, 4.685, 1.345)):
    """Choose (c_mu, c_sigma) for "raipw" or "ror" on clean replicates of ``scenario``.

    ``grid`` is one sequence used for both constants or a mapping with
    keys "mu" and "sigma". RIPW reuses the RAIPW constants.
    """
    if family not in ("raipw", "ror"):
        raise ValueError("family must be 'raipw' or 'ror'")
    if scenario.contamination != "clean":
        raise ValueError("calibration uses clean data")
    grid_mu, grid_sigma = (grid["mu"], grid["sigma"]) if isinstance(grid, dict) else (grid, grid)
    notes = []
    curve_mu = efficiency_curve(scenario, family, "mu", grid_mu, reps, PLACEHOLDER, threads, aux_c)
    c_mu, eff_mu = _select(curve_mu, target, "c_mu", notes)
    curve_sigma = efficiency_curve(scenario, family, "sigma", grid_sigma, reps, c_mu, threads, aux_c)
    c_sigma, eff_sigma = _select(curve_sigma, target, "c_sigma", notes)
    return CalibrationResult(family, c_mu, c_sigma, eff_mu, eff_sigma, curve_mu, curve_sigma, notes)
