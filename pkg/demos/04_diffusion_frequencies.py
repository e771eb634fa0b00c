"""Asymptotic block frequencies from a hierarchy of Wright-Fisher diffusions.

Level 1 is the neutral diffusion conditioned to fix, started at 0.  Each
deeper level runs on a clock sped up by the inverse of the mass the earlier
levels leave free.  Averaging the levels against d exp(-d t) gives the limit
frequencies of the largest blocks of the erosion chain.
"""
import numpy as np

from kingman_erosion import (
    ErosionParams,
    build_hierarchy,
    frequencies_from_hierarchy,
    sample_stationary_labels,
    sample_unsorted_frequencies,
    split_rng,
)
from kingman_erosion.partitions import top_frequencies
from kingman_erosion.stats import ks_two_sample, wasserstein1

d = 1.0

# %% One hierarchy with its paths kept.
h = build_hierarchy(5, 0.01, 20.0, split_rng(5, "one"))
print("levels at t = 1:", np.round(h.z_matrix()[:, 100], 4), " residual:", round(h.residual.values[100], 4))
print("frequencies:", np.round(frequencies_from_hierarchy(h, d).weights, 4))

# %% Many hierarchies, integrated on the fly.
z = sample_unsorted_frequencies(30, d, 2000, split_rng(5, "many"))
print(f"mean z_1 = {z[:, 0].mean():.4f}   exact 1/(1+d) = {1 / (1 + d):.4f}")
print(f"mass beyond 30 levels: {1 - z.sum(axis=1).mean():.4f}")

# %% Compare with the largest block of a large erosion partition.
largest = -np.sort(-z, axis=1)[:, 0]
f = top_frequencies(sample_stationary_labels(ErosionParams(5000, d), 2000, split_rng(5, "erosion")), 1)[:, 0]
stat, p = ks_two_sample(largest, f)
print(f"largest frequency: KS p = {p:.3f}, W1 = {wasserstein1(largest, f):.4f}")
