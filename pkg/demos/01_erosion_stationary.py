"""Stationary partitions of the coalescent with erosion.

Blocks merge pairwise at rate 1 while every element leaves its block at
rate d.  The chain is irreducible on partitions of {1..n}; this walk-through
draws from its stationary law in three ways and checks them against each other.
"""
import math

import numpy as np

from kingman_erosion import (
    EmpiricalPmf,
    ErosionParams,
    Partition,
    chi_square_gof,
    sample_flow_labels,
    sample_stationary_labels,
    simulate,
    split_rng,
    stationary_pmf_small_n,
)
from kingman_erosion.partitions import block_counts, partition_counts

SEED = 7

# %% A single trajectory from all singletons.
p = ErosionParams(n=6, d=1.0)
path = simulate(p, Partition.singletons(6), t_end=5.0, rng=split_rng(SEED, "path"))
print(f"{len(path.times) - 1} events by t = 5; final state {path.states[-1]}")

# %% For small n the stationary law comes from solving the generator.
p = ErosionParams(n=3, d=1.0)
pi = stationary_pmf_small_n(p)
for q, w in sorted(pi.items(), key=lambda kv: -kv[1]):
    print(f"  {str(q):<14} {w:.5f}")

# %% The coupling sampler (exponential ages run through Kingman's coalescent)
# and the flow-of-bridges sampler both hit that law exactly.
for name, draw in [("coupling", sample_stationary_labels), ("flow", None)]:
    rng = split_rng(SEED, name)
    labels = draw(p, 50_000, rng) if draw else sample_flow_labels(3, 1.0, 50_000, rng)
    res = chi_square_gof(EmpiricalPmf(partition_counts(labels)), pi)
    print(f"{name:>8}: chi-square {res.statistic:.2f} on {res.dof} dof, p = {res.p_value:.3f}")

# %% Large n: about sqrt(2 d n) blocks.
for d in (0.5, 1.0, 2.0):
    m = block_counts(sample_stationary_labels(ErosionParams(10_000, d), 100, split_rng(SEED, "scale", d)))
    print(f"d = {d}: mean blocks / sqrt(n) = {m.mean() / 100:.4f}   sqrt(2d) = {math.sqrt(2 * d):.4f}")
print("block counts at n = 1e4 range over", np.ptp(m), "for d = 2")
