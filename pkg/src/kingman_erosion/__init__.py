"""Simulation and exact checks for Kingman's coalescent with erosion and with immigration."""
from .branching import (
    EventBudgetExceeded,
    simulate_total_progeny,
    simulate_total_progeny_batch,
    total_progeny_pmf,
    total_progeny_tail,
)
from .bridges import (
    Bridge,
    bridge_eval,
    bridge_inverse,
    compose,
    sample_death_count_from_infinity,
    sample_flow_labels,
    sample_standard_bridge,
    sample_stationary_erosion_via_flow,
)
from .diffusions import (
    DiffusionPath,
    HierarchyState,
    build_hierarchy,
    frequencies_from_hierarchy,
    sample_frequencies,
    sample_unsorted_frequencies,
    simulate_conditioned_wf,
)
from .erosion import (
    ErosionParams,
    generator_matrix,
    sample_stationary,
    sample_stationary_labels,
    simulate,
    stationary_pmf_small_n,
)
from .immigration import (
    AncestralState,
    ImmigrationParams,
    block_count_stationary_pmf,
    rescaled_block_count_check,
    simulate_ancestral,
    simulate_ancestral_batch,
    simulate_block_count,
)
from .partitions import MassPartition, Partition, empirical_frequencies, paintbox
from .stats import EmpiricalPmf, chi_square_gof, split_rng, tv_distance

__version__ = "0.1.0"
