"""Concrete model families: generators, drives, disorder, initial states."""

from .clock import (
    ClockDisorder,
    ClockParams,
    build_clock_kicked,
    clock_generators,
    clock_ladder,
    global_shift,
    sample_disorder,
    shift_conjugated,
    unroll_clock_four_periods,
)
from .hoti import (
    HotiParams,
    boundary_density,
    build_hoti,
    cell_index,
    corner_cells,
    corner_density,
    default_k_grid,
    densities_by_cell,
    edge_cells,
    edge_density,
    edge_run_cells,
    hoti_bloch_blocks,
    hoti_bloch_sequence,
    hoti_generators,
    hoti_symmetry_check,
    tau_sigma,
)
from .spin import (
    SpinChainParams,
    build_su2_branch,
    build_su2_random,
    build_u1_floquet,
    build_u1_random,
    chain_bonds,
    parity_z,
    spin_generators,
    su2_ladder,
    total_spin,
    u1_generators,
    u1_ladder,
)
from .states import (
    ClockProduct,
    HaarInSector,
    HotiEdgeProduct,
    HotiEigenstate,
    prepare_initial,
    rotate_x_all,
    sector_indices,
)

__all__ = [
    "ClockDisorder",
    "ClockParams",
    "ClockProduct",
    "HaarInSector",
    "HotiEdgeProduct",
    "HotiEigenstate",
    "HotiParams",
    "SpinChainParams",
    "boundary_density",
    "build_clock_kicked",
    "build_hoti",
    "build_su2_branch",
    "build_su2_random",
    "build_u1_floquet",
    "build_u1_random",
    "cell_index",
    "chain_bonds",
    "clock_generators",
    "clock_ladder",
    "corner_cells",
    "corner_density",
    "default_k_grid",
    "densities_by_cell",
    "edge_cells",
    "edge_density",
    "edge_run_cells",
    "global_shift",
    "hoti_bloch_blocks",
    "hoti_bloch_sequence",
    "hoti_generators",
    "hoti_symmetry_check",
    "parity_z",
    "prepare_initial",
    "rotate_x_all",
    "sample_disorder",
    "sector_indices",
    "shift_conjugated",
    "spin_generators",
    "su2_ladder",
    "tau_sigma",
    "total_spin",
    "u1_generators",
    "u1_ladder",
    "unroll_clock_four_periods",
]
