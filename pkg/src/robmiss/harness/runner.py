"""Replicate loop, summaries and result files."""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..estimators import AuxiliaryFits
from ..simulation import generate_replicate, true_beta

__all__ = [
    "ReplicateResult",
    "SummaryRow",
    "run_replicate",
    "run_replicates",
    "run_experiment",
    "summarize",
    "summarize_results",
    "boxplot_stats",
    "write_replicates",
    "write_summary",
]

# failures that mark a replicate as non-converged rather than aborting the run
RECOVERABLE = (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class ReplicateResult:
    label: str
    replicate: int
    mu: float
    sigma: float
    se_mu: float = None
    se_sigma: float = None
    converged: bool = True


@dataclass(frozen=True)
class SummaryRow:
    label: str
    bias_mu: float
    sd_mu: float
    rmse_mu: float
    bias_sigma: float
    sd_sigma: float
    rmse_sigma: float
    n_converged: int

    def scaled(self, factor=10.0):
        return {k: factor * getattr(self, k) for k in
                ("bias_mu", "sd_mu", "rmse_mu", "bias_sigma", "sd_sigma", "rmse_sigma")}


def _stats(values, truth):
    values = np.asarray(values, dtype=float)
    err = values - truth
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(err.mean()), sd, float(np.sqrt(np.mean(err ** 2)))


def summarize(estimates, truth, label=""):
    """Bias, sample sd (divisor reps - 1) and root mean squared error."""
    est = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if len(est) == 0:
        raise ValueError("cannot summarize an empty list of estimates")
    bm, sm, rm = _stats(est[:, 0], truth[0])
    bs, ss, rs = _stats(est[:, 1], truth[1])
    return SummaryRow(label, bm, sm, rm, bs, ss, rs, len(est))


def run_replicate(config, index):
    """Fit every roster entry on replicate ``index``; auxiliary fits are shared."""
    data = generate_replicate(config.replicate(index))
    X, y = data.covariates(), data.observed
    aux = AuxiliaryFits(X, y)
    out = []
    for entry in config.entries():
        est = entry.spec.estimator(config.tuning, config.logit_c, config.reg_c1,
                                   config.reg_c2, config.standard_errors)
        try:
            est.fit(X, y, aux=aux)
            out.append(ReplicateResult(entry.label, index, est.mu_, est.sigma_,
                                       est.se_mu_, est.se_sigma_, est.converged_))
        except RECOVERABLE:
            out.append(ReplicateResult(entry.label, index, math.nan, math.nan, None, None, False))
    return out


def _chunk(args):
    config, indices = args
    return [run_replicate(config, i) for i in indices]


def run_replicates(config, reps=None, threads=None):
    """Results for replicates 0..reps-1, in replicate order for any worker count."""
    reps = config.reps if reps is None else reps
    threads = config.threads if threads is None else threads
    indices = list(range(reps))
    if threads <= 1 or reps <= 1:
        nested = [_chunk((config, indices))]
    else:
        size = max(1, math.ceil(reps / (4 * threads)))
        chunks = [indices[i:i + size] for i in range(0, reps, size)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            nested = list(pool.map(_chunk, [(config, c) for c in chunks]))
    return [row for chunk in nested for rep in chunk for row in rep]


def summarize_results(results, truth, labels):
    """One :class:`SummaryRow` per label over converged replicates."""
    rows = []
    for label in labels:
        est = [(r.mu, r.sigma) for r in results if r.label == label and r.converged]
        if est:
            rows.append(summarize(est, truth, label))
        else:
            rows.append(SummaryRow(label, *([math.nan] * 6), 0))
    return rows


def _fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def write_replicates(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "replicate", "mu_hat", "sigma_hat", "se_mu", "se_sigma", "converged"])
        for r in results:
            w.writerow([r.label, r.replicate, _fmt(r.mu), _fmt(r.sigma), _fmt(r.se_mu),
                        _fmt(r.se_sigma), int(r.converged)])


SUMMARY_FIELDS = ("bias_mu", "sd_mu", "rmse_mu", "bias_sigma", "sd_sigma", "rmse_sigma")


def write_summary(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", *SUMMARY_FIELDS, "n_converged", *(f"{f}_x10" for f in SUMMARY_FIELDS)])
        for r in rows:
            scaled = r.scaled()
            w.writerow([r.label, *(_fmt(getattr(r, f)) for f in SUMMARY_FIELDS), r.n_converged,
                        *(_fmt(scaled[f]) for f in SUMMARY_FIELDS)])


def boxplot_stats(values):
    """Quartiles and 1.5 IQR whiskers (clipped to the data)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return None
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {"q1": float(q1), "median": float(med), "q3": float(q3),
            "whisker_low": float(inside.min()), "whisker_high": float(inside.max()),
            "n_outliers": int(v.size - inside.size), "n": int(v.size)}


def run_experiment(config, out_dir=None, reps=None, threads=None):
    """Run the configured study and write its result files; returns the summary rows."""
    out = Path(out_dir or config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    results = run_replicates(config, reps, threads)
    truth = true_beta(config.scenario)
    labels = [e.label for e in config.entries()]
    rows = summarize_results(results, truth, labels)
    write_replicates(results, out / "replicates.csv")
    write_summary(rows, out / "summary.csv")
    if config.boxplot:
        doc = {"truth": {"mu": truth[0], "sigma": truth[1]}, "estimators": {}}
        for label in labels:
            ok = [r for r in results if r.label == label and r.converged]
            doc["estimators"][label] = {
                "mu": boxplot_stats([r.mu - truth[0] for r in ok]),
                "sigma": boxplot_stats([r.sigma - truth[1] for r in ok]),
            }
        (out / "boxplot.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return rows
