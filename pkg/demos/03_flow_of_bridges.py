"""Bridges, their composition, and a stationary sampler built from them.

A standard bridge over a time span t has N atoms with Dirichlet(1, ..., 1)
weights at uniform locations, where N is the number of Kingman lineages alive
at time t when started from infinity.  Composing bridges along the exponential
ages of the elements builds a stationary erosion partition.
"""
import numpy as np

from kingman_erosion import (
    Bridge,
    bridge_eval,
    bridge_inverse,
    compose,
    sample_death_count_from_infinity,
    sample_standard_bridge,
    sample_stationary_erosion_via_flow,
    split_rng,
)

rng = split_rng(3, "bridges")

# %% A bridge with drift and one atom.
b = Bridge(np.array([0.5]), np.array([0.5]), drift=0.5)
print("B(0.75) =", bridge_eval(b, 0.75), "  B^-1(0.4) =", bridge_inverse(b, 0.4))

# %% Lineage counts from infinity behave like 2 / t for small t and absorb at 1.
for t in (0.01, 0.1, 1.0, 10.0):
    x = [sample_death_count_from_infinity(t, rng=rng) for _ in range(2000)]
    print(f"t = {t:<5} mean N_t = {np.mean(x):9.2f}   2/t = {2 / t:9.2f}")

# %% Composition runs the genealogy over consecutive spans.
outer, inner = sample_standard_bridge(0.5, rng), sample_standard_bridge(0.3, rng)
c = compose(outer, inner)
grid = np.linspace(0, 1, 11)
assert np.array_equal(bridge_eval(c, grid), bridge_eval(outer, bridge_eval(inner, grid)))
print(f"atoms: outer {len(outer)}, inner {len(inner)}, composed {len(c)}")

# %% The flow sampler: elements i and j share a block when their inverse
# images under the flow land on the same atom.
for method in ("lazy", "materialized"):
    q = sample_stationary_erosion_via_flow(12, 1.0, rng, method=method)
    print(f"{method:>12}: {q}")
