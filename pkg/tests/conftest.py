import numpy as np
import pytest

from robmiss.simulation import ScenarioConfig, generate_replicate


@pytest.fixture(scope="session")
def clean_replicate():
    return generate_replicate(ScenarioConfig(seed=123))


@pytest.fixture(scope="session")
def asym_replicate():
    return generate_replicate(ScenarioConfig(seed=123, contamination="c_asym"))


def design(X, cols=None):
    Xs = X if cols is None else X[:, list(cols)]
    return np.column_stack([np.ones(len(X)), Xs])


def random_missing_data(seed, n=400, p=2):
    """Linear outcome with logistic response; returns (X, y with NaN, r)."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    pi = 1.0 / (1.0 + np.exp(-(0.5 + X @ rng.uniform(-0.8, 0.8, p))))
    r = (rng.random(n) < pi).astype(float)
    z = 1.0 + X @ rng.uniform(-1, 1, p) + rng.normal(scale=rng.uniform(0.5, 2.0), size=n)
    y = np.where(r == 1, z, np.nan)
    return X, y, r


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
