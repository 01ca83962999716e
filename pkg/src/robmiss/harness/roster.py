"""Estimator roster: labels such as ``RAIPW(X_,XV)`` mapped to fit specifications.

Covariate sets index the columns (x1, x2, x3, v1, v2, v3). ``X`` is
(x1, x2, x3), ``XV`` adds (v1, v2, v3), and a trailing underscore on X
drops x1 (the misspecified sets).
"""

import re
from dataclasses import dataclass

from ..estimators import LocationScaleEstimator

__all__ = [
    "COVARIATE_SETS",
    "DEFAULT_ROSTER",
    "TUNING_TABLE",
    "EstimatorSpec",
    "EstimatorRosterEntry",
    "parse_label",
    "build_roster",
    "default_tuning",
]

COVARIATE_NAMES = ("x1", "x2", "x3", "v1", "v2", "v3")
COVARIATE_SETS = {
    "X": (0, 1, 2),
    "X_": (1, 2),
    "XV": (0, 1, 2, 3, 4, 5),
    "X_V": (1, 2, 3, 4, 5),
}

DEFAULT_ROSTER = (
    "IPW(X)", "AIPW(X,X)", "AIPW(X,XV)", "OR(X)", "OR(XV)",
    "RIPW(X)", "RAIPW(X,X)", "RAIPW(X,XV)", "ROR(X)", "ROR(XV)",
    "IPW(X_)", "AIPW(X_,XV)", "AIPW(X,X_V)", "AIPW(X_,X_V)", "OR(X_V)",
    "RIPW(X_)", "RAIPW(X_,XV)", "RAIPW(X,X_V)", "RAIPW(X_,X_V)", "ROR(X_V)",
)

# (gamma_level, xi_level) -> {"raipw": (c_mu, c_sigma), "ror": (c1 for mu, c1 for sigma)}
TUNING_TABLE = {
    ("strong", "strong"): {"raipw": (3.7, 4.5), "ror": (3.3, 3.7)},
    ("strong", "moderate"): {"raipw": (3.9, 4.5), "ror": (3.4, 3.7)},
    ("strong", "none"): {"raipw": (4.0, 4.5), "ror": (3.6, 4.2)},
    ("moderate", "strong"): {"raipw": (3.2, 5.3), "ror": (2.6, 2.8)},
    ("moderate", "moderate"): {"raipw": (3.9, 5.4), "ror": (3.0, 3.1)},
    ("moderate", "none"): {"raipw": (4.2, 5.3), "ror": (3.4, 3.6)},
}

_FAMILY = {
    "IPW": ("ipw", False), "AIPW": ("aipw", False), "OR": ("or", False),
    "RIPW": ("ipw", True), "RAIPW": ("aipw", True), "ROR": ("or", True),
}
_LABEL = re.compile(r"^\s*(R?A?IPW|R?OR)\s*\(\s*([A-Z_]+)\s*(?:,\s*([A-Z_]+)\s*)?\)\s*$")


@dataclass(frozen=True)
class EstimatorSpec:
    family: str  # ipw | aipw | or
    robust: bool
    propensity_columns: tuple = None
    outcome_columns: tuple = None

    def estimator(self, tuning, logit_c=1.345, reg_c1=4.685, reg_c2=1.345, standard_errors=False):
        """A configured :class:`LocationScaleEstimator`.

        ``tuning`` maps "raipw" and "ror" to their constant pairs; RIPW
        uses the RAIPW pair.
        """
        c_mu, c_sigma = tuning["ror"] if self.family == "or" else tuning["raipw"]
        return LocationScaleEstimator(
            family=self.family, robust=self.robust, c_mu=c_mu, c_sigma=c_sigma,
            propensity_columns=self.propensity_columns, outcome_columns=self.outcome_columns,
            logit_c=logit_c, reg_c1=reg_c1, reg_c2=reg_c2, standard_errors=standard_errors,
        )


@dataclass(frozen=True)
class EstimatorRosterEntry:
    label: str
    spec: EstimatorSpec


def _columns(name, label):
    if name not in COVARIATE_SETS:
        raise ValueError(f"unknown covariate set {name!r} in {label!r}; use one of {sorted(COVARIATE_SETS)}")
    return COVARIATE_SETS[name]


def parse_label(label):
    """Parse a roster label into an :class:`EstimatorRosterEntry`."""
    m = _LABEL.match(label)
    if not m or m.group(1) not in _FAMILY:
        raise ValueError(f"cannot parse estimator label {label!r}")
    name, first, second = m.groups()
    family, robust = _FAMILY[name]
    if family == "aipw":
        if second is None:
            raise ValueError(f"{label!r}: augmented estimators need (propensity, outcome) sets")
        spec = EstimatorSpec(family, robust, _columns(first, label), _columns(second, label))
    else:
        if second is not None:
            raise ValueError(f"{label!r}: {name} takes a single covariate set")
        cols = _columns(first, label)
        spec = EstimatorSpec(family, robust, cols if family == "ipw" else None,
                             cols if family == "or" else None)
    return EstimatorRosterEntry(label.replace(" ", ""), spec)


def build_roster(labels=None):
    """Entries for ``labels`` (default: the full 20-estimator roster)."""
    return [parse_label(lab) for lab in (DEFAULT_ROSTER if labels is None else labels)]


def default_tuning(gamma_level, xi_level):
    return dict(TUNING_TABLE[(gamma_level, xi_level)])
