"""Block sizes at stationarity and the critical binary branching limit.

For large n a typical block has the law of the total progeny J of a critical
binary Galton-Watson tree, P(J = k) = Catalan(k-1) / 2^(2k-1).  The same law
shows up in the ancestral process of the coalescent with immigration.
"""
import numpy as np

from kingman_erosion import (
    ErosionParams,
    sample_stationary_labels,
    simulate_ancestral_batch,
    simulate_total_progeny_batch,
    split_rng,
    total_progeny_pmf,
    total_progeny_tail,
    tv_distance,
)
from kingman_erosion.partitions import pooled_block_sizes

SEED = 11
K = 12

exact = np.array([total_progeny_pmf(k) for k in range(1, K + 1)])
exact_tail = np.append(exact, total_progeny_tail(K))
print("P(J = 1..4):", np.round(exact[:4], 5))
print(f"P(J > {K}) = {total_progeny_tail(K):.4f}: heavy tail, infinite mean")

# %% Direct branching simulation, with a cap on events per run.
batch = simulate_total_progeny_batch(1.0, 10_000, 100_000, split_rng(SEED, "gw"))
print(f"over-budget runs: {batch.excluded_fraction:.4%}")

# %% Pooled block sizes of the erosion chain at n = 20000.
labels = sample_stationary_labels(ErosionParams(20_000, 1.0), 200, split_rng(SEED, "erosion"))
hist = pooled_block_sizes(labels)[1:]
mu = hist / hist.sum()
emp = np.append(mu[:K], mu[K:].sum())
print(f"erosion block sizes vs progeny law: TV (k <= {K} plus tail) = {tv_distance(emp, exact_tail):.4f}")

# %% Ancestral process with immigration rate n d: one block never dies and
# is reported with size inf; the others follow the progeny law.
anc = simulate_ancestral_batch(2, 10_000.0, 50_000, split_rng(SEED, "ancestral"))
s1 = anc.sizes(0)
print(f"immortal fraction of type-1 blocks: {np.mean(np.isinf(s1)):.5f}")
c = np.bincount(np.minimum(s1, K + 1).astype(int), minlength=K + 2)[1:]
print(f"ancestral type-1 sizes vs progeny law: TV = {tv_distance(c / c.sum(), exact_tail):.4f}")
