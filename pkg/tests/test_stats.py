import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kingman_erosion.stats import (
    EmpiricalPmf,
    binomial_ci,
    chi_square_gof,
    chi_square_two_sample,
    ks_two_sample,
    mean_and_stderr,
    split_rng,
    tv_distance,
    wasserstein1,
)

CASES = settings(max_examples=1000, deadline=None)
FAIR_DIE = {k: 1 / 6 for k in range(6)}


def test_empirical_pmf_validation():
    e = EmpiricalPmf.from_samples([1, 1, 2])
    assert e.total == 3 and e[1] == 2 and e[7] == 0
    assert EmpiricalPmf.from_samples(np.array([3, 3, 4])).counts == {3: 2, 4: 1}
    with pytest.raises(ValueError):
        EmpiricalPmf({1: 2}, total=3)
    with pytest.raises(ValueError):
        EmpiricalPmf({1: -1, 2: 2})


def test_chi_square_exact_fit():
    e = EmpiricalPmf({k: 100 for k in range(6)})
    res = chi_square_gof(e, FAIR_DIE)
    assert res.statistic == 0.0 and res.p_value == 1.0 and res.dof == 5


def test_chi_square_single_cell_is_an_error():
    with pytest.raises(ValueError):
        chi_square_gof(EmpiricalPmf({0: 50}), {0: 1.0})


def test_chi_square_unlisted_outcome_rejects():
    e = EmpiricalPmf({0: 50, 1: 50, 2: 1})
    assert chi_square_gof(e, {0: 0.5, 1: 0.5}).p_value == 0.0


def test_chi_square_calibration():
    rng = np.random.default_rng(11)
    small = 0
    for _ in range(200):
        x = rng.integers(0, 6, size=100_000)
        small += chi_square_gof(EmpiricalPmf.from_samples(x), FAIR_DIE).p_value < 0.05
    assert abs(small / 200 - 0.05) <= 0.04


def test_two_sample_chi_square_detects_shift():
    rng = np.random.default_rng(3)
    a = EmpiricalPmf.from_samples(rng.integers(0, 6, 20_000))
    b = EmpiricalPmf.from_samples(rng.integers(0, 6, 20_000))
    c = EmpiricalPmf.from_samples(rng.integers(0, 5, 20_000))
    assert chi_square_two_sample(a, b).p_value > 1e-4
    assert chi_square_two_sample(a, c).p_value < 1e-10


def test_tv_examples():
    assert tv_distance({0: 1.0}, {0: 1.0}) == 0.0
    assert tv_distance({0: 1.0}, {1: 1.0}) == 1.0
    assert tv_distance([1.0, 0.0], [0.5, 0.5]) == 0.5
    with pytest.raises(ValueError):
        tv_distance([0.5, 0.4], [0.5, 0.5])


def test_ks_examples():
    rng = np.random.default_rng(5)
    x = rng.random(1000)
    assert ks_two_sample(x, x)[0] == 0.0
    assert ks_two_sample(rng.random(10_000), 0.5 + rng.random(10_000))[1] < 1e-6
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])


def test_ks_calibration():
    rng = np.random.default_rng(8)
    small = sum(ks_two_sample(rng.random(2000), rng.random(2000))[1] < 0.05 for _ in range(200))
    assert abs(small / 200 - 0.05) <= 0.04


def test_split_rng_reproducible_and_distinct():
    a = split_rng(42, 0).random(1000)
    assert np.array_equal(a, split_rng(42, 0).random(1000))
    assert not np.array_equal(a, split_rng(43, 0).random(1000))
    assert np.array_equal(split_rng(1, "oracle-check", 3).random(5), split_rng(1, "oracle-check", 3).random(5))


def test_split_rng_streams_independent():
    x = split_rng(7, 0).integers(0, 4, 10_000)
    y = split_rng(7, 1).integers(0, 4, 10_000)
    pairs = EmpiricalPmf.from_samples(list(zip(x.tolist(), y.tolist())))
    expected = {(i, j): 1 / 16 for i in range(4) for j in range(4)}
    assert chi_square_gof(pairs, expected).p_value > 0.01


def test_binomial_ci_and_mean():
    lo, hi = binomial_ci(50, 100)
    assert lo < 0.5 < hi
    m, se = mean_and_stderr([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / np.sqrt(3))


samples = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=30)


@CASES
@given(samples, samples, samples)
def test_wasserstein_triangle(x, y, z):
    assert wasserstein1(x, z) <= wasserstein1(x, y) + wasserstein1(y, z) + 1e-9


@CASES
@given(st.integers(0, 2**63 - 1), st.integers(0, 2**32 - 1))
def test_split_rng_determinism_property(seed, stream):
    assert split_rng(seed, stream).integers(0, 2**62) == split_rng(seed, stream).integers(0, 2**62)
