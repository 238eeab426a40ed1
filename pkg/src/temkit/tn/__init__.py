"""Tensor-network engine: transfer-matrix trains, simulators, inverse-noise maps."""

from .ops import (
    BondTruncation,
    CompressionPolicy,
    PtmMpo,
    PtmMps,
    TruncationLog,
    channel_mpo,
    mpo_from_layer,
    mpo_multiply,
    mpo_multiply_compress,
    pauli_mps,
    ptm_state_mps,
    single_qubit_ptm,
    state_mps,
    two_qubit_ptm,
)
from .evolve import (
    heisenberg_evolve,
    heisenberg_expectation,
    initial_state_expectation,
    mps_pauli_expectation,
    schrodinger_evolve,
    schrodinger_expectation,
)
from .tem import (
    ConvergenceReport,
    TemMap,
    build_tem_map,
    component_weights,
    convergence_report,
    light_cone_windows,
    mitigated_estimate,
    modify_observable,
    tem_map_steps,
)
from .snapshots import load_mpo, load_mps, save_mpo, save_mps

__all__ = [
    "BondTruncation",
    "CompressionPolicy",
    "ConvergenceReport",
    "PtmMpo",
    "PtmMps",
    "TemMap",
    "TruncationLog",
    "build_tem_map",
    "channel_mpo",
    "component_weights",
    "convergence_report",
    "heisenberg_evolve",
    "heisenberg_expectation",
    "initial_state_expectation",
    "light_cone_windows",
    "load_mpo",
    "load_mps",
    "mitigated_estimate",
    "modify_observable",
    "mpo_from_layer",
    "mpo_multiply",
    "mpo_multiply_compress",
    "mps_pauli_expectation",
    "pauli_mps",
    "ptm_state_mps",
    "save_mpo",
    "save_mps",
    "schrodinger_evolve",
    "schrodinger_expectation",
    "single_qubit_ptm",
    "state_mps",
    "tem_map_steps",
    "two_qubit_ptm",
]
