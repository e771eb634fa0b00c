"""Acceptance criteria 1-8 at their stated sample sizes and tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.
"""
import importlib
import inspect
import time

import pytest

from conftest import ACCEPTANCE_LINES
from kingman_erosion.cli import ExperimentConfig, run

SEED = 2024


def report(criterion, ok, detail, t0):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.perf_counter() - t0:.1f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def describe(tests):
    parts = []
    for t in tests:
        p = "" if t["p_value"] is None else f" p={t['p_value']:.3g}"
        parts.append(f"[{t['name']}: {t['statistic']:.4g}{p}]")
    return " ".join(parts)


def test_criterion_1_generator_oracle():
    t0 = time.perf_counter()
    failed, worst = [], 1.0
    for n in (2, 3, 4, 5):
        for d in (0.5, 1.0, 2.0):
            rep = run(ExperimentConfig("oracle-check", n=n, d=d, replicates=100_000, seed=SEED))
            assert len(rep.tests) == 2
            worst = min(worst, *(t["p_value"] for t in rep.tests))
            failed += [(n, d, t["name"]) for t in rep.tests if not t["pass"]]
    ok = not failed and time.perf_counter() - t0 < 300
    assert report(1, ok, f"24 chi-square tests, min p={worst:.3g}, failures={failed}", t0)


def test_criterion_2_block_size_law():
    t0 = time.perf_counter()
    rep = run(ExperimentConfig("block-size-dist", n=20_000, d=1.0, replicates=500, seed=SEED))
    assert len(rep.tests) == 1
    assert report(2, rep.ok, describe(rep.tests), t0)


def test_criterion_3_block_count_scaling():
    t0 = time.perf_counter()
    tests = []
    for d in (0.5, 1.0, 2.0):
        rep = run(ExperimentConfig("block-count-scaling", n=10_000, d=d, replicates=200, seed=SEED))
        assert len(rep.tests) == 2
        tests += [dict(t, name=f"d={d} {t['name']}") for t in rep.tests]
    assert report(3, all(t["pass"] for t in tests), describe(tests), t0)


def test_criterion_4_immigration_stationary_law():
    t0 = time.perf_counter()
    rep = run(ExperimentConfig("immigration-stationary", d=1.0, horizon=1e5, seed=SEED))
    assert len(rep.tests) == 2
    assert report(4, rep.ok, describe(rep.tests), t0)


def test_criterion_5_ancestral_progeny():
    t0 = time.perf_counter()
    rep = run(ExperimentConfig("ancestral-progeny", n=10_000, d=1.0, replicates=100_000, seed=SEED))
    assert len(rep.tests) == 3
    assert report(5, rep.ok, describe(rep.tests), t0)


def test_criterion_6_frequency_representation():
    t0 = time.perf_counter()
    rep = run(
        ExperimentConfig("theorem1-compare", n=5000, d=1.0, replicates=10_000, dt=1e-3, horizon=20.0, K=30, seed=SEED)
    )
    assert len(rep.tests) == 4
    assert report(6, rep.ok, describe(rep.tests), t0)


def test_criterion_7_cross_sampler():
    t0 = time.perf_counter()
    rep = run(ExperimentConfig("cross-validate-samplers", n=50, d=1.0, replicates=10_000, seed=SEED))
    assert len(rep.tests) == 1
    assert report(7, rep.ok, describe(rep.tests), t0)


SUITES = ("test_partitions", "test_stats", "test_erosion", "test_bridges", "test_diffusions")


def property_tests():
    for mod_name in SUITES:
        mod = importlib.import_module(mod_name)
        for name, fn in inspect.getmembers(mod, inspect.isfunction):
            if name.startswith("test_") and hasattr(fn, "hypothesis"):
                yield f"{mod_name}::{name}", fn


def test_criterion_8_invariant_suites():
    t0 = time.perf_counter()
    found = list(property_tests())
    few = [n for n, fn in found if fn._hypothesis_internal_use_settings.max_examples < 1000]
    errors = []
    for name, fn in found:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - any failure counts against the criterion
            errors.append(f"{name}: {type(exc).__name__}")
    names = {n.split("::")[1] for n, _ in found}
    covered = {"test_hierarchy_invariants", "test_bridge_invariants"} <= names and len(found) >= 10
    ok = covered and not few and not errors
    detail = f"{len(found)} property tests at >=1000 cases; under-sized={few}; failures={errors}"
    assert report(8, ok, detail, t0)
