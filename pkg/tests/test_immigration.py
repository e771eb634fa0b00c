import math

import numpy as np
import pytest

from conftest import ORACLES
from kingman_erosion.branching import EventBudgetExceeded, total_progeny_pmf_array
from kingman_erosion.immigration import (
    AncestralState,
    ImmigrationParams,
    ProgenyRecord,
    _ancestral_kernel,
    _cdf,
    block_count_mean,
    block_count_stationary_pmf,
    detailed_balance_error,
    rescaled_block_count_check,
    sample_block_count,
    simulate_ancestral,
    simulate_ancestral_batch,
    simulate_block_count,
)
from kingman_erosion.stats import binomial_ci, tv_distance


def test_types_validate():
    with pytest.raises(ValueError):
        ImmigrationParams(0.0)
    with pytest.raises(ValueError):
        AncestralState((2, 1), 2)
    with pytest.raises(ValueError):
        AncestralState((1,), 0)
    assert AncestralState((1, 2), 5).untyped == 2
    assert ProgenyRecord(3, 1.0, immortal=True).size == math.inf


@pytest.mark.parametrize("d", [0.5, 1.0])
def test_pmf_against_bessel_oracle(d):
    nu = block_count_stationary_pmf(d)
    ref = ORACLES["block_count"][str(d)]
    np.testing.assert_allclose(nu[:12], ref["nu"], rtol=1e-12)
    assert block_count_mean(d) == pytest.approx(ref["mean"], rel=1e-12)


def test_pmf_large_rate_mean():
    assert block_count_mean(1e4) == pytest.approx(ORACLES["block_count"]["10000.0"]["mean"], rel=1e-10)


def test_pmf_basic_identities():
    nu = block_count_stationary_pmf(0.5)
    assert nu[1] / nu[0] == pytest.approx(0.5, rel=1e-14)
    assert abs(nu.sum() - 1) < 1e-12
    for d in (0.1, 1.0, 37.0, 1e4):
        assert detailed_balance_error(d, 50) < 1e-12


def test_pmf_tail_check():
    with pytest.raises(ValueError):
        block_count_stationary_pmf(1.0, k_max=3)


def test_block_count_first_move_up(rng):
    for _ in range(100):
        path = simulate_block_count(1.0, 5.0, 1, rng)
        if len(path.values) > 1:
            assert path.values[1] == 2


def test_block_count_occupancy(rng):
    path = simulate_block_count(1.0, 1e5, 1, rng)
    nu = block_count_stationary_pmf(1.0)
    occ = path.occupancy(nu.size)
    assert tv_distance(occ, nu) < 0.02


def test_block_count_up_fraction_matches_rates(rng):
    d = 3.0
    path = simulate_block_count(d, 2e5, 1, rng)
    visits, ups = path.up_step_counts()
    for k in range(2, 6):
        lo, hi = binomial_ci(int(ups[k]), int(visits[k]), z=4.0)
        assert lo < d / (d + k * (k - 1) / 2) < hi


def test_stationary_samples_mean(rng):
    x = sample_block_count(2.0, 200_000, rng)
    assert x.mean() == pytest.approx(block_count_mean(2.0), abs=4 * x.std() / math.sqrt(x.size))


@pytest.mark.parametrize("d, tol", [(0.5, 0.02), (1.0, 0.02), (2.0, 0.03)])
def test_rescaled_block_count(rng, d, tol):
    (row,) = rescaled_block_count_check([10_000], d, 2000, rng)
    assert row.target == pytest.approx(math.sqrt(2 * d))
    assert abs(row.mean_scaled - row.target) < tol


def test_ancestral_records(rng):
    recs = simulate_ancestral(3, 50.0, rng, check_invariants=True)
    assert len(recs) == 3
    assert all(r.deaths >= 1 for r in recs if not r.immortal)
    assert sum(r.immortal for r in recs) <= 1


def test_ancestral_invariant_checks_run(rng):
    # kernel raises on any violated count identity; run many short histories
    deaths = np.zeros(2, np.int64)
    lifetime = np.zeros(2)
    immortal = np.zeros(2, np.bool_)
    cdf = _cdf(5.0, 2)
    for _ in range(2000):
        _ancestral_kernel(2, 5.0, cdf, 10**6, rng, deaths, lifetime, immortal, True)
        assert (deaths[~immortal] >= 1).all()
        assert immortal.sum() <= 1


def test_ancestral_budget(rng):
    with pytest.raises(EventBudgetExceeded):
        for _ in range(100):
            simulate_ancestral(1, 1e4, rng, max_events=1)


def test_ancestral_rejection_rate():
    small = simulate_ancestral_batch(3, 0.5, 5000, np.random.default_rng(1))
    assert small.rejection_rate > 0.1
    big = simulate_ancestral_batch(3, 100.0, 5000, np.random.default_rng(1))
    assert big.rejection_rate < 0.01


def test_ancestral_sizes_near_branching_limit():
    batch = simulate_ancestral_batch(2, 1e4, 20_000, np.random.default_rng(5))
    s = batch.sizes(0)
    counts = np.bincount(np.minimum(s, 13).astype(np.int64), minlength=14)[1:]
    ref = total_progeny_pmf_array(12)
    assert tv_distance(counts / counts.sum(), np.append(ref, 1 - ref.sum())) < 0.03
    # exactly one block of the whole coalescent is infinite, so a sampled one rarely is
    assert np.isinf(s).mean() < 0.02


def test_ancestral_determinism():
    a = simulate_ancestral_batch(2, 300.0, 500, np.random.default_rng(3))
    b = simulate_ancestral_batch(2, 300.0, 500, np.random.default_rng(3))
    assert np.array_equal(a.deaths, b.deaths) and np.array_equal(a.lifetime, b.lifetime)
