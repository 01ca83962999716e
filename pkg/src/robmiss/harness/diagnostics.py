"""Per-unit double-weighting diagnostics (inverse propensity times psi weight)."""

import csv

import numpy as np

__all__ = ["emit_weight_diagnostics", "read_dataset"]


def emit_weight_diagnostics(estimate, out_path):
    """Write (index, inv_propensity, psi_weight, compound_weight) for observed units."""
    w = getattr(estimate, "weights", None)
    if w is None:
        raise ValueError(f"estimate {getattr(estimate, 'method', '')!r} carries no weights; "
                         "use a robust IPW-type estimator")
    with open(out_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["index", "inv_propensity", "psi_weight", "compound_weight"])
        for i, a, b, c in zip(w.index, w.inv_propensity, w.psi_weight, w.compound_weight):
            out.writerow([int(i), repr(float(a)), repr(float(b)), repr(float(c))])


def read_dataset(path):
    """Read a dataset dump; returns (covariates (n, 6), outcome with NaN for missing)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    cols = ("x1", "x2", "x3", "v1", "v2", "v3")
    missing = [c for c in (*cols, "r", "z2") if c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    X = np.array([[float(row[c]) for c in cols] for row in rows])
    y = np.array([float(row["z2"]) if row["r"] == "1" and row["z2"] != "" else np.nan for row in rows])
    return X, y
