import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from medboot.dataset import Dataset
from medboot.errors import AllMissingColumn, AllMissingRow
from medboot.imputer import (
    ImputationConfig,
    conditional_mean,
    em_mvn,
    em_trace,
    impute,
    observed_loglik,
)

from conftest import make_ds, random_mediation

FAST = ImputationConfig(n_imputations=5, burn_in=20, thin=5)


def with_holes(ds, rng, frac=0.2, cols=(1, 2)):
    mask = ds.mask.copy()
    for j in cols:
        mask[rng.random(ds.n_rows) < frac, j] = True
    return ds.with_mask(mask)


def test_em_complete_data_one_iteration(rng):
    ds = random_mediation(rng, 60, n_aux=1)
    p = em_mvn(ds)
    vals, _ = ds.model_arrays()
    assert p.n_iter <= 2
    np.testing.assert_allclose(p.mu, vals.mean(0), atol=1e-12)
    np.testing.assert_allclose(p.sigma, np.cov(vals.T, ddof=0), atol=1e-12)


def test_em_bivariate_recovery():
    rng = np.random.default_rng(11)
    z = rng.multivariate_normal([0, 0], [[1, 0.5], [0.5, 1]], size=10000)
    mask = rng.random(z.shape) < 0.2
    mask[mask.all(1), 0] = False
    ds = Dataset(("x", "m", "y"), np.column_stack([z, rng.standard_normal(10000)]),
                 np.column_stack([mask, np.zeros(10000, bool)]), {"x": "X", "m": "M", "y": "Y"})
    p = em_mvn(ds)
    assert np.max(np.abs(p.mu[:2])) < 0.05
    assert np.max(np.abs(p.sigma[:2, :2] - [[1, 0.5], [0.5, 1]])) < 0.10


def test_em_all_missing_column(rng):
    ds = random_mediation(rng, 20)
    mask = ds.mask.copy()
    mask[:, 1] = True
    with pytest.raises(AllMissingColumn):
        em_mvn(ds.with_mask(mask))


def test_em_all_missing_row(rng):
    ds = random_mediation(rng, 20)
    mask = ds.mask.copy()
    mask[3, :] = True
    with pytest.raises(AllMissingRow):
        em_mvn(ds.with_mask(mask))


@pytest.mark.parametrize("seed", range(5))
def test_em_loglik_monotone(seed):
    rng = np.random.default_rng(seed)
    ds = with_holes(random_mediation(rng, 80, n_aux=2), rng, 0.3, cols=(0, 1, 2, 3))
    mask = ds.mask.copy()
    mask[mask.all(1), 4] = False
    ds = ds.with_mask(mask)
    p, trace = em_trace(ds)
    assert len(trace) >= 2
    assert np.all(np.diff(trace) >= -1e-8)
    assert observed_loglik(ds, p) >= trace[0]


def test_em_is_a_fixed_point(rng):
    ds = with_holes(random_mediation(rng, 150, n_aux=1), rng, 0.25)
    p = em_mvn(ds, tol=1e-12, max_iter=2000)
    # perturbing the estimate lowers the observed-data likelihood
    base = observed_loglik(ds, p)
    for j in range(4):
        mu = p.mu.copy()
        mu[j] += 1e-3
        assert observed_loglik(ds, type(p)(mu, p.sigma)) < base


def test_impute_complete_data_is_identity(rng):
    ds = random_mediation(rng, 15)
    out = impute(ds, FAST, seed=3)
    assert len(out) == FAST.n_imputations
    assert all(o.equals(ds) for o in out)


def test_single_cell_matches_em_conditional_mean():
    rng = np.random.default_rng(5)
    ds = random_mediation(rng, 200, n_aux=1)
    mask = ds.mask.copy()
    mask[7, 1] = True
    ds = ds.with_mask(mask)
    cfg = ImputationConfig(n_imputations=2000, burn_in=200, thin=10)
    draws = np.array([o.values[7, 1] for o in impute(ds, cfg, seed=9)])
    target = conditional_mean(ds, em_mvn(ds), 7)[0]
    mc_se = draws.std(ddof=1) / np.sqrt(len(draws))
    assert abs(draws.mean() - target) < 4 * mc_se


def test_impute_deterministic(rng):
    ds = with_holes(random_mediation(rng, 50, n_aux=2), rng)
    a = impute(ds, FAST, seed=42)
    b = impute(ds, FAST, seed=42)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    c = impute(ds, FAST, seed=43)
    assert not np.array_equal(a[0].values, c[0].values)


def test_prefix_property(rng):
    ds = with_holes(random_mediation(rng, 50), rng)
    short = impute(ds, ImputationConfig(n_imputations=3, burn_in=20, thin=5), seed=1)
    long = impute(ds, ImputationConfig(n_imputations=8, burn_in=20, thin=5), seed=1)
    for s, l in zip(short, long):
        assert np.array_equal(s.values, l.values)


@given(seed=st.integers(0, 10_000), frac=st.floats(0.05, 0.4))
def test_observed_cells_preserved_and_draws_vary(seed, frac):
    rng = np.random.default_rng(seed)
    ds = with_holes(random_mediation(rng, 40, n_aux=1), rng, frac, cols=(1, 2, 3))
    mask = ds.mask.copy()
    mask[mask[:, 1:].all(1), 3] = False
    ds = ds.with_mask(mask)
    out = impute(ds, FAST, seed=seed)
    for o in out:
        assert not o.mask.any()
        np.testing.assert_array_equal(o.values[~ds.mask], ds.values[~ds.mask])
    if ds.mask.any():
        r, c = np.argwhere(ds.mask)[0]
        assert len({o.values[r, c] for o in out}) > 1


def test_masked_values_never_read(rng):
    ds = with_holes(random_mediation(rng, 60, n_aux=1), rng)
    poisoned = Dataset(ds.names, np.where(ds.mask, 1e300, ds.values), ds.mask, ds.roles)
    p1, p2 = em_mvn(ds), em_mvn(poisoned)
    np.testing.assert_array_equal(p1.mu, p2.mu)
    np.testing.assert_array_equal(p1.sigma, p2.sigma)
    a = impute(ds, FAST, seed=1)
    b = impute(poisoned, FAST, seed=1)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


def test_imputed_means_approach_em_means():
    rng = np.random.default_rng(8)
    ds = with_holes(random_mediation(rng, 300, n_aux=1), rng, 0.3)
    out = impute(ds, ImputationConfig(n_imputations=200, burn_in=50, thin=5), seed=2)
    means = np.mean([o.model_arrays()[0].mean(0) for o in out], axis=0)
    em = em_mvn(ds).mu
    # posterior sd of a mean at n = 300 is about 0.06; averaging 200 draws leaves ~0.005
    np.testing.assert_allclose(means, em, atol=0.03)


def test_config_validation():
    with pytest.raises(ValueError):
        ImputationConfig(n_imputations=0)
    with pytest.raises(ValueError):
        ImputationConfig(thin=0)
    with pytest.raises(ValueError):
        ImputationConfig(burn_in=-1)


def test_singular_observed_block_is_repaired():
    # M is an exact copy of X wherever both are observed
    rng = np.random.default_rng(0)
    x = rng.standard_normal(40)
    m = x.copy()
    y = rng.standard_normal(40)
    mask = np.zeros((40, 3), bool)
    mask[:5, 2] = True
    ds = make_ds(x, m, y, mask=mask)
    out = impute(ds, FAST, seed=0)
    assert all(np.isfinite(o.values).all() for o in out)
