import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import ORACLES, erosion_oracle
from kingman_erosion.bridges import (
    Bridge,
    _death_count_kernel,
    bridge_eval,
    bridge_inverse,
    compose,
    sample_death_count_from_infinity,
    sample_flow_labels,
    sample_standard_bridge,
    sample_stationary_erosion_via_flow,
)
from kingman_erosion.erosion import ErosionParams, sample_stationary_labels
from kingman_erosion.partitions import Partition, partition_counts, size_of_block_containing_first
from kingman_erosion.stats import EmpiricalPmf, chi_square_gof, chi_square_two_sample, ks_two_sample, tv_distance

CASES = settings(max_examples=1000, deadline=None)


def death_counts(t, size, seed, eps=1e-3, window_sd=10.0):
    rng = np.random.default_rng(seed)
    return np.array([_death_count_kernel(t, eps, window_sd, rng) for _ in range(size)])


# -- bridge algebra --------------------------------------------------


def test_eval_examples():
    ident = Bridge.identity()
    assert bridge_eval(ident, 0.37) == 0.37
    atom = Bridge.single_atom(0.3)
    assert bridge_eval(atom, 0.2) == 0.0 and bridge_eval(atom, 0.3) == 1.0
    mixed = Bridge(np.array([0.5]), np.array([0.5]), 0.5)
    assert bridge_eval(mixed, 0.75) == 0.875
    with pytest.raises(ValueError):
        bridge_eval(ident, 1.5)


def test_inverse_examples():
    assert bridge_inverse(Bridge.identity(), 0.42) == 0.42
    atom = Bridge.single_atom(0.3)
    assert all(bridge_inverse(atom, u) == 0.3 for u in (0.0, 0.5, 0.999))
    assert bridge_inverse(atom, 1.0) == 1.0
    mixed = Bridge(np.array([0.5]), np.array([0.5]), 0.5)
    assert bridge_inverse(mixed, 0.1) == pytest.approx(0.2)
    assert bridge_inverse(mixed, 0.4) == 0.5
    assert bridge_inverse(mixed, 0.9) == pytest.approx(0.8)


def test_invalid_bridges():
    with pytest.raises(ValueError):
        Bridge(np.array([0.2, 0.2]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        Bridge(np.array([0.2]), np.array([0.5]))
    with pytest.raises(ValueError):
        Bridge(np.array([1.2]), np.array([1.0]))


def test_compose_examples(rng):
    b = sample_standard_bridge(0.3, rng)
    one = compose(Bridge.single_atom(0.6), b)
    assert len(one) == 1 and one.masses[0] == 1.0
    with pytest.raises(ValueError):
        compose(Bridge.identity(), b)


def test_compose_pointwise_and_inverse(rng):
    grid = np.linspace(0, 1, 1001)
    for _ in range(20):
        outer = sample_standard_bridge(rng.uniform(0.05, 2.0), rng)
        inner = sample_standard_bridge(rng.uniform(0.05, 2.0), rng)
        c = compose(outer, inner)
        assert np.array_equal(bridge_eval(c, grid), bridge_eval(outer, bridge_eval(inner, grid)))
        inv = bridge_inverse(inner, bridge_inverse(outer, grid))
        assert np.array_equal(bridge_inverse(c, grid), inv)


@st.composite
def step_bridges(draw, max_atoms=8):
    k = draw(st.integers(1, max_atoms))
    loc = draw(st.lists(st.floats(0, 1, exclude_max=True), min_size=k, max_size=k, unique=True))
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)))
    return Bridge(np.array(sorted(loc)), w / w.sum(), 0.0)


@st.composite
def bridges(draw):
    b = draw(step_bridges())
    drift = draw(st.sampled_from([0.0, 0.25, 0.5, 1.0]))
    if drift == 1.0:
        return Bridge.identity()
    return Bridge(b.locations, b.masses * (1 - drift), drift)


@CASES
@given(bridges(), st.lists(st.floats(0, 1), min_size=2, max_size=20))
def test_bridge_invariants(b, us):
    u = np.sort(np.array(us))
    v = bridge_eval(b, u)
    assert (np.diff(v) >= -1e-15).all()
    assert bridge_eval(b, 1.0) == 1.0
    assert abs(b.drift + b.masses.sum() - 1.0) <= 1e-12
    inv = bridge_inverse(b, u)
    assert (np.diff(inv) >= 0).all()
    assert (bridge_eval(b, inv) >= u - 1e-12).all()


@CASES
@given(step_bridges(), step_bridges(), st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_compose_property(outer, inner, us):
    u = np.array(us)
    c = compose(outer, inner)
    assert np.array_equal(bridge_eval(c, u), bridge_eval(outer, bridge_eval(inner, u)))
    # the inverse identity needs inner to cross outer^{-1}(u) rather than land on it
    v = bridge_inverse(outer, u)
    ok = ~np.isin(v, np.concatenate([[0.0], inner.cumulative]))
    assert np.array_equal(bridge_inverse(c, u[ok]), bridge_inverse(inner, v[ok]))


# -- pure-death chain ------------------------------------------------


def test_death_count_absorbed_for_large_t(rng):
    assert all(sample_death_count_from_infinity(100.0, rng=rng) == 1 for _ in range(1000))


def test_death_count_argument_checks(rng):
    with pytest.raises(ValueError):
        sample_death_count_from_infinity(0.0, rng=rng)
    with pytest.raises(ValueError):
        sample_death_count_from_infinity(1.0, eps=2.0, rng=rng)


@pytest.mark.parametrize("t", ["0.05", "0.2", "1.0"])
def test_death_count_matches_exact_law(t):
    ref = ORACLES["death_chain"][t]
    pmf = {int(k): v for k, v in ref["pmf"].items()}
    x = death_counts(float(t), 200_000, seed=hash(t) % 1000)
    assert chi_square_gof(EmpiricalPmf.from_samples(x), pmf).p_value > 0.001


def test_death_count_stable_in_cutoff():
    a = death_counts(1.0, 100_000, 1, eps=1e-3)
    b = death_counts(1.0, 100_000, 2, eps=5e-4)
    pa = np.bincount(a, minlength=30)[:30] / a.size
    pb = np.bincount(b, minlength=30)[:30] / b.size
    assert tv_distance(pa, pb) < 0.005


def test_death_count_aggregation_matches_exact_walk():
    # eps = 0.1 keeps the level-by-level walk affordable
    a = death_counts(0.01, 50_000, 3, eps=0.1)
    b = death_counts(0.01, 50_000, 4, eps=0.1, window_sd=np.inf)
    assert chi_square_two_sample(EmpiricalPmf.from_samples(a), EmpiricalPmf.from_samples(b)).p_value > 0.001


def test_death_count_mean_decreasing():
    means = [death_counts(t, 20_000, 5).mean() for t in (0.5, 1.0, 2.0)]
    assert means[0] > means[1] > means[2]


def test_death_count_tiny_span_is_cheap():
    x = death_counts(1e-12, 20, 6)
    # N_t t / 2 -> 1 as t -> 0, shifted by the cutoff by about eps / 2
    assert np.all(np.abs(x * 1e-12 / 2 - (1 - 5e-4)) < 1e-4)


# -- standard bridges --------------------------------------------------


def test_standard_bridge_invariants(rng):
    for t in (0.01, 0.5, 3.0):
        b = sample_standard_bridge(t, rng)
        assert b.drift == 0.0 and abs(b.masses.sum() - 1) < 1e-12
        assert (np.diff(b.locations) > 0).all()


def test_standard_bridge_two_atoms_uniform(rng):
    w = []
    while len(w) < 5000:
        b = sample_standard_bridge(1.5, rng)
        if len(b) == 2:
            w.append(b.masses[0])
    assert ks_two_sample(w, rng.random(20_000))[1] > 0.01


def test_standard_bridge_atom_cap(rng):
    with pytest.raises(MemoryError):
        sample_standard_bridge(1e-3, rng, max_atoms=10)


# -- flow sampler --------------------------------------------------------


def test_flow_trivial_cases(rng):
    assert sample_stationary_erosion_via_flow(1, 1.0, rng) == Partition([[1]])
    lab = sample_flow_labels(2, 0.5, 100_000, rng)
    assert (lab[:, 1] == 0).mean() == pytest.approx(0.5, abs=0.01)
    with pytest.raises(ValueError):
        sample_stationary_erosion_via_flow(3, 1.0, rng, method="bogus")


def test_flow_n4_oracle_and_coupling():
    flow = sample_flow_labels(4, 1.0, 100_000, np.random.default_rng(7))
    e = EmpiricalPmf(partition_counts(flow))
    assert chi_square_gof(e, erosion_oracle(4, 1.0)).p_value > 0.01
    coup = EmpiricalPmf(partition_counts(sample_stationary_labels(ErosionParams(4, 1.0), 100_000, np.random.default_rng(8))))
    assert chi_square_two_sample(e, coup).p_value > 0.01


def test_flow_materialized_matches_oracle():
    rng = np.random.default_rng(9)
    draws = [sample_stationary_erosion_via_flow(3, 1.0, rng, method="materialized") for _ in range(10_000)]
    assert chi_square_gof(EmpiricalPmf.from_samples(draws), erosion_oracle(3, 1.0)).p_value > 0.01


def test_flow_exchangeable():
    lab = sample_flow_labels(5, 1.0, 100_000, np.random.default_rng(10))
    s1 = size_of_block_containing_first(lab)
    s3 = (lab == lab[:, 2:3]).sum(axis=1)
    assert chi_square_two_sample(EmpiricalPmf.from_samples(s1), EmpiricalPmf.from_samples(s3)).p_value > 0.01


def test_flow_determinism():
    a = sample_flow_labels(20, 1.0, 200, np.random.default_rng(11))
    assert np.array_equal(a, sample_flow_labels(20, 1.0, 200, np.random.default_rng(11)))
