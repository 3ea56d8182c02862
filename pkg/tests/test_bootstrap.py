import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import medboot.bootstrap as bootstrap
from medboot.bootstrap import (
    analyze,
    bc_interval,
    bootstrap_resample,
    bootstrap_se,
    percentile_interval,
    resample_indices,
)
from medboot.errors import AllReplicatesFailed, InvalidLevel, SingularDesign, TooFewReplicates
from medboot.estimator import fit_complete
from medboot.imputer import ImputationConfig

from conftest import random_mediation

FAST = ImputationConfig(burn_in=10, thin=3)
N01 = NormalDist()


def bc_reference(estimates, point, level):
    """Straight transcription of the bias-corrected percentile rule."""
    x = sorted(estimates)
    B = len(x)
    below = sum(1 for e in x if e < point)
    p = min(max(below / B, 1 / (2 * B)), 1 - 1 / (2 * B))
    z0 = N01.inv_cdf(p)
    alpha = (1 - level) / 2
    lo_a = N01.cdf(2 * z0 + N01.inv_cdf(alpha))
    hi_a = N01.cdf(2 * z0 + N01.inv_cdf(1 - alpha))
    lo = min(max(int(lo_a * (B + 1)), 1), B)
    hi = min(max(int(hi_a * (B + 1)), 1), B)
    return x[lo - 1], x[hi - 1], (lo_a * (B + 1), hi_a * (B + 1))


def random_triple(rng):
    B = int(rng.integers(2, 300))
    est = np.round(rng.normal(size=B), int(rng.integers(1, 4)))  # rounding creates ties
    point = float(rng.choice(est)) if rng.random() < 0.3 else float(rng.normal())
    level = float(rng.choice([0.8, 0.9, 0.95, 0.99, rng.uniform(0.5, 0.999)]))
    return est, point, level


def test_resample_single_row():
    assert np.array_equal(resample_indices(1, 5), [0])


def test_resample_deterministic_and_carries_mask(rng):
    ds = random_mediation(rng, 30)
    mask = ds.mask.copy()
    mask[::4, 1] = True
    ds = ds.with_mask(mask)
    r1, r2 = bootstrap_resample(ds, 7), bootstrap_resample(ds, 7)
    assert r1.equals(r2)
    idx = resample_indices(30, 7)
    assert np.array_equal(r1.mask, ds.mask[idx])


def test_resample_frequencies():
    counts = np.zeros(5)
    for s in range(10000):
        counts += np.bincount(resample_indices(5, s), minlength=5)
    total = 5 * 10000
    se = math.sqrt(total * 0.2 * 0.8)
    assert np.all(np.abs(counts - total / 5) < 3 * se)


def test_bootstrap_se_examples():
    assert bootstrap_se([0.0, 2.0]) == pytest.approx(math.sqrt(2))
    assert bootstrap_se([3.3] * 10) == 0.0
    x = np.random.default_rng(1).standard_normal(1000)
    assert abs(bootstrap_se(x) - 1) < 0.07
    with pytest.raises(TooFewReplicates):
        bootstrap_se([1.0])


def test_bc_hand_case():
    assert bc_interval(np.arange(1, 101, dtype=float), 50.5, 0.95) == (2.0, 98.0)


def test_bc_point_below_everything_clamps():
    est = np.arange(1.0, 21.0)
    lo, hi = bc_interval(est, 0.0, 0.95)
    assert lo == 1.0
    assert hi <= est[-1]


def test_bc_matches_reference_on_random_triples():
    rng = np.random.default_rng(3)
    for _ in range(10000):
        est, point, level = random_triple(rng)
        lo, hi, _ = bc_reference(est.tolist(), point, level)
        assert bc_interval(est, point, level) == (lo, hi)


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=60), st.integers(-50, 50),
       st.sampled_from([0.8, 0.9, 0.95]))
def test_bc_endpoints_are_replicates(vals, point, level):
    est = np.array(vals, dtype=float)
    lo, hi = bc_interval(est, float(point), level)
    assert lo in est and hi in est
    assert lo <= hi


def test_bc_reduces_to_percentile_when_unbiased():
    est = np.arange(1.0, 201.0)
    point = 100.5  # exactly half below
    assert bc_interval(est, point, 0.9) == percentile_interval(est, 0.9)


@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=80), st.integers(-1000, 1000),
       st.integers(-3, 3).filter(lambda k: k != 0), st.integers(-8, 8))
def test_bc_affine_equivariance(vals, point, scale_exp, shift):
    # power-of-two scale and small integer shift keep all arithmetic exact
    s = 2.0 ** scale_exp
    est = np.array(vals, dtype=float) / 16
    pt = point / 16
    lo, hi = bc_interval(est, pt, 0.95)
    lo2, hi2 = bc_interval(est * s + shift, pt * s + shift, 0.95)
    assert (lo2, hi2) == (lo * s + shift, hi * s + shift)


def test_bc_errors():
    with pytest.raises(TooFewReplicates):
        bc_interval([1.0], 0.0, 0.95)
    with pytest.raises(InvalidLevel):
        bc_interval([1.0, 2.0], 0.0, 1.0)
    with pytest.raises(InvalidLevel):
        bc_interval([1.0, 2.0], 0.0, 0.0)


@pytest.mark.parametrize("K,B", [(1, 5), (3, 20)])
def test_complete_data_point_equals_direct_fit(rng, K, B):
    ds = random_mediation(rng, 40, n_aux=1)
    rep = analyze(ds, B, K, seed=1, cfg=FAST)
    assert rep.point.to_array().tolist() == fit_complete(ds).to_array().tolist()
    assert rep.b_effective == B and rep.dropped == 0


def test_workers_do_not_change_results(rng):
    ds = random_mediation(rng, 40, n_aux=1)
    mask = ds.mask.copy()
    mask[::5, 2] = True
    ds = ds.with_mask(mask)
    r1 = analyze(ds, 12, 3, seed=4, cfg=FAST, workers=1)
    r2 = analyze(ds, 12, 3, seed=4, cfg=FAST, workers=2)
    assert np.array_equal(r1.replicate_estimates, r2.replicate_estimates)
    assert np.array_equal(r1.intervals, r2.intervals)


def test_retries_and_drops(monkeypatch, rng):
    ds = random_mediation(rng, 30)
    real = bootstrap.run_chain
    calls = {"n": 0}

    def flaky(vals, msk, cfg, seed, *a, **kw):
        key = tuple(seed.spawn_key)
        if len(key) == 2 and key[-2] == 2 and key[-1] == 0:
            raise SingularDesign("forced")   # replicate 2 fails once
        if len(key) == 2 and key[-2] == 3:
            raise SingularDesign("forced")   # replicate 3 always fails
        calls["n"] += 1
        return real(vals, msk, cfg, seed, *a, **kw)

    monkeypatch.setattr(bootstrap, "run_chain", flaky)
    rep = analyze(ds, 5, 2, seed=0, cfg=FAST)
    assert rep.b_effective == 4
    assert rep.dropped == 1
    assert rep.retries == 1


def test_all_replicates_failed(monkeypatch, rng):
    ds = random_mediation(rng, 30)
    real = bootstrap.run_chain

    def failing(vals, msk, cfg, seed, *a, **kw):
        if len(seed.spawn_key) == 2:
            raise SingularDesign("forced")
        return real(vals, msk, cfg, seed, *a, **kw)

    monkeypatch.setattr(bootstrap, "run_chain", failing)
    monkeypatch.setattr(bootstrap, "MAX_ATTEMPTS", 3)
    with pytest.raises(AllReplicatesFailed):
        analyze(ds, 4, 2, seed=0, cfg=FAST)


def test_analyze_argument_errors(rng):
    ds = random_mediation(rng, 20)
    with pytest.raises(TooFewReplicates):
        analyze(ds, 1, 2)
    with pytest.raises(InvalidLevel):
        analyze(ds, 10, 2, level=1.5)


def test_interval_contains_point_for_well_behaved_data(rng):
    ds = random_mediation(rng, 200, n_aux=1)
    mask = ds.mask.copy()
    mask[::6, 1] = True
    rep = analyze(ds.with_mask(mask), 60, 3, seed=2, cfg=FAST)
    for name in ("a", "b", "ab"):
        p = rep.param(name)
        assert p["ci_lo"] <= p["estimate"] <= p["ci_hi"]
        assert p["se"] > 0
