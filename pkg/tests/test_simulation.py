import math

import numpy as np
import pytest
from scipy.special import expit

from robmiss.harness.diagnostics import read_dataset
from robmiss.numerics import RngStream
from robmiss.simulation import (
    SIGMA,
    ScenarioConfig,
    contaminate,
    generate_replicate,
    true_beta,
    write_dataset,
)


def test_deterministic_per_replicate():
    a = generate_replicate(ScenarioConfig(seed=9, replicate_index=4, contamination="c_asym"))
    b = generate_replicate(ScenarioConfig(seed=9, replicate_index=4, contamination="c_asym"))
    c = generate_replicate(ScenarioConfig(seed=9, replicate_index=5, contamination="c_asym"))
    assert np.array_equal(a.Z2, b.Z2) and np.array_equal(a.R, b.R)
    assert not np.array_equal(a.Z2, c.Z2)


def test_contamination_does_not_touch_covariates_or_response():
    clean = generate_replicate(ScenarioConfig(seed=2))
    dirty = generate_replicate(ScenarioConfig(seed=2, contamination="c_hidden"))
    assert np.array_equal(clean.X, dirty.X) and np.array_equal(clean.R, dirty.R)
    changed = clean.Z2 != dirty.Z2
    assert np.array_equal(changed, dirty.contaminated_mask)


@pytest.mark.parametrize("scheme", ["c_asym", "c_sym", "c_hidden"])
def test_contamination_mask(scheme):
    d = generate_replicate(ScenarioConfig(seed=1, contamination=scheme))
    assert np.all(d.R[d.contaminated_mask] == 1)
    assert d.contaminated_mask.sum() == math.floor(0.05 * d.R.sum() + 0.5)
    if scheme == "c_asym":
        v = d.Z2[d.contaminated_mask]
        assert v.min() >= -20 and v.max() <= -12


def test_c_sym_is_centred():
    d = generate_replicate(ScenarioConfig(seed=3, n=600_000, contamination="c_sym",
                                          contamination_rate=0.4))
    vals = d.Z2[d.contaminated_mask]
    assert vals.size > 1e5 and abs(vals.mean()) < 0.1


def test_rate_zero_and_too_small():
    d = generate_replicate(ScenarioConfig(seed=4, n=20))
    assert contaminate(d, "c_asym", 0.0, RngStream(0)) is d
    with pytest.warns(UserWarning):
        out = contaminate(d, "c_asym", 0.01, RngStream(0))
    assert out.contamination_skipped and np.array_equal(out.Z2, d.Z2)


def test_invalid_config():
    with pytest.raises(ValueError):
        ScenarioConfig(contamination_rate=0.5)
    with pytest.raises(ValueError):
        ScenarioConfig(xi_level="weak")


def test_true_beta_values():
    assert true_beta(ScenarioConfig(xi_level="none"))[0] == pytest.approx(1.0, abs=1e-12)
    mu, sd = true_beta(ScenarioConfig())
    assert mu == pytest.approx(1.775, abs=1e-12)
    assert sd ** 2 == pytest.approx(14.086875, abs=1e-10)


def test_design_moments_large_sample():
    d = generate_replicate(ScenarioConfig(seed=5, n=1_000_000))
    x3 = d.X[:, 2]
    assert abs(x3.mean() - 0.2) < 0.002
    cont = np.column_stack([d.X[:, 0], d.V[:, 0], d.X[:, 1], d.V[:, 1]])
    for s in (0, 1):
        assert np.allclose(np.cov(cont[x3 == s].T), SIGMA, atol=0.01)
    p_missing = expit(ScenarioConfig().gamma[0] + d.X @ ScenarioConfig().gamma[1:])
    assert abs((1 - d.R).mean() - p_missing.mean()) < 0.005


def test_xi_none_has_no_v_effect():
    d = generate_replicate(ScenarioConfig(seed=6, n=200_000, xi_level="none"))
    Z = np.column_stack([np.ones(d.n), d.X, d.V])
    coef, *_ = np.linalg.lstsq(Z, d.Z2, rcond=None)
    assert np.allclose(coef[4:], 0.0, atol=0.02)


def test_dataset_roundtrip(tmp_path):
    d = generate_replicate(ScenarioConfig(seed=7, n=50, contamination="c_asym"))
    path = tmp_path / "d.csv"
    write_dataset(d, path)
    X, y = read_dataset(path)
    assert np.array_equal(X, d.covariates())
    assert np.array_equal(np.isnan(y), d.R == 0)
    assert np.array_equal(y[d.R == 1], d.Z2[d.R == 1])
