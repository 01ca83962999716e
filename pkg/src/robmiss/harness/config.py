"""Experiment configuration (YAML).

Schema::

    scenario:
      xi_level: moderate          # strong | moderate | none
      gamma_level: moderate       # strong | moderate
      n: 1000
      contamination: clean        # clean | c_asym | c_sym | c_hidden
      contamination_rate: 0.05
      hidden_scale: variance      # variance | sd
    reps: 1000
    seed: 20240101
    roster: all                   # or a list of labels
    tuning:                       # optional; defaults by scenario
      raipw: [3.9, 5.4]
      ror: [3.0, 3.1]
    auxiliary: {logit_c: 1.345, reg_c1: 4.685, reg_c2: 1.345}
    standard_errors: false
    threads: 1
    output:
      dir: results
      boxplot: true
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from ..simulation import ScenarioConfig
from .roster import DEFAULT_ROSTER, build_roster, default_tuning

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    reps: int = 1000
    roster: tuple = DEFAULT_ROSTER
    tuning: dict = field(default_factory=dict)
    logit_c: float = 1.345
    reg_c1: float = 4.685
    reg_c2: float = 1.345
    standard_errors: bool = False
    threads: int = 1
    out_dir: str = "results"
    boxplot: bool = True

    @property
    def seed(self):
        return self.scenario.seed

    def replicate(self, index):
        return replace(self.scenario, replicate_index=index)

    def entries(self):
        return build_roster(self.roster)


_TOP = {"scenario", "reps", "seed", "roster", "tuning", "auxiliary", "standard_errors",
        "threads", "output"}
_SCENARIO = {"xi_level", "gamma_level", "n", "contamination", "contamination_rate", "hidden_scale"}


def _require(cond, name, msg):
    if not cond:
        raise ConfigError(f"{name}: {msg}")


def _pair(value, name):
    _require(isinstance(value, (list, tuple)) and len(value) == 2, name, "expected two numbers")
    try:
        a, b = float(value[0]), float(value[1])
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected two numbers") from None
    _require(a > 0 and b > 0, name, "constants must be positive")
    return (a, b)


def parse_config(doc):
    """Validate a parsed YAML mapping and build an :class:`ExperimentConfig`."""
    _require(isinstance(doc, dict), "config", "top level must be a mapping")
    unknown = set(doc) - _TOP
    _require(not unknown, "config", f"unknown fields {sorted(unknown)}")

    sc = doc.get("scenario", {}) or {}
    _require(isinstance(sc, dict), "scenario", "must be a mapping")
    unknown = set(sc) - _SCENARIO
    _require(not unknown, "scenario", f"unknown fields {sorted(unknown)}")
    seed = doc.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed", "must be a non-negative integer")
    try:
        scenario = ScenarioConfig(seed=seed, **sc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from None

    reps = doc.get("reps", 1000)
    _require(isinstance(reps, int) and reps >= 1, "reps", "must be a positive integer")
    threads = doc.get("threads", 1)
    _require(isinstance(threads, int) and threads >= 1, "threads", "must be a positive integer")

    roster = doc.get("roster", "all")
    if roster == "all":
        roster = DEFAULT_ROSTER
    _require(isinstance(roster, (list, tuple)) and roster, "roster", "must be 'all' or a list of labels")
    try:
        build_roster(roster)
    except ValueError as exc:
        raise ConfigError(f"roster: {exc}") from None

    tuning = default_tuning(scenario.gamma_level, scenario.xi_level)
    given = doc.get("tuning") or {}
    _require(isinstance(given, dict), "tuning", "must be a mapping")
    for key, value in given.items():
        _require(key in ("raipw", "ror"), "tuning", f"unknown family {key!r}")
        tuning[key] = _pair(value, f"tuning.{key}")

    aux = doc.get("auxiliary") or {}
    _require(isinstance(aux, dict), "auxiliary", "must be a mapping")
    unknown = set(aux) - {"logit_c", "reg_c1", "reg_c2"}
    _require(not unknown, "auxiliary", f"unknown fields {sorted(unknown)}")
    for key, value in aux.items():
        _require(isinstance(value, (int, float)) and value > 0, f"auxiliary.{key}", "must be positive")

    out = doc.get("output") or {}
    _require(isinstance(out, dict), "output", "must be a mapping")
    se = doc.get("standard_errors", False)
    _require(isinstance(se, bool), "standard_errors", "must be true or false")

    return ExperimentConfig(
        scenario=scenario, reps=reps, roster=tuple(roster), tuning=tuning,
        logit_c=float(aux.get("logit_c", 1.345)), reg_c1=float(aux.get("reg_c1", 4.685)),
        reg_c2=float(aux.get("reg_c2", 1.345)), standard_errors=se, threads=threads,
        out_dir=str(out.get("dir", "results")), boxplot=bool(out.get("boxplot", True)),
    )


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML: {exc}") from None
    return parse_config(doc)
