"""Matrix-product simulators for brickwork circuits.

Two pictures are provided.  `schrodinger_evolve` pushes a physical-dimension-2
statevector train through the layers; `heisenberg_evolve` pulls an observable
coefficient train backwards through the adjoint layers, optionally threading
Pauli channels, so the expectation value is a single overlap with the initial
state train.  Gates are applied exactly (rank-revealing splits) and every
layer ends with one canonical compression sweep under the active policy.
"""

from __future__ import annotations

import numpy as np

from ..circuits import BrickworkCircuit, InitialState
from ..pauli import PauliString
from .ops import (
    CompressionPolicy,
    PtmMps,
    TruncationLog,
    _apply_single_to_train,
    _apply_two_site_to_train,
    _compress_train,
    _train_overlap,
    channel_mpo,
    pauli_mps,
    ptm_state_mps,
    single_qubit_ptm,
    state_mps,
    two_qubit_ptm,
)

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0 + 0j, -1.0]),
}


def _policy(chi_max: int | None, cutoff: float | None) -> CompressionPolicy:
    return CompressionPolicy(cutoff=cutoff, max_bond=chi_max)


def schrodinger_evolve(
    circuit: BrickworkCircuit,
    init: InitialState | None = None,
    chi_max: int | None = None,
    cutoff: float | None = 1e-12,
    log: TruncationLog | None = None,
) -> PtmMps:
    """Statevector train after all circuit layers."""
    n = circuit.n_qubits
    policy = _policy(chi_max, cutoff)
    ts = [t.copy() for t in state_mps(n, init).tensors]
    for layer in circuit.layers:
        for q, gate in layer.singles:
            _apply_single_to_train(ts, q, np.asarray(gate, dtype=complex))
        for i, j in layer.bonds_for(n):
            if j != i + 1:
                raise ValueError("two-qubit blocks must be nearest-neighbour")
            _apply_two_site_to_train(ts, i, np.asarray(layer.gate, dtype=complex))
        ts, recs = _compress_train(ts, policy)
        if log is not None:
            log.extend(recs)
    return PtmMps(tuple(ts), len(ts) - 1)


def mps_pauli_expectation(state: PtmMps, p: PauliString) -> float:
    """<psi| P |psi> for a physical-dimension-2 train."""
    if state.phys_dim != 2:
        raise ValueError("expected a statevector train")
    if not p.is_hermitian():
        raise ValueError("observable must be Hermitian")
    if p.n != state.n_sites:
        raise ValueError("size mismatch")
    applied = [t.copy() for t in state.tensors]
    for q in range(p.n):
        letter = p.letter(q)
        if letter != "I":
            _apply_single_to_train(applied, q, _PAULI_MATRICES[letter])
    applied[0] = applied[0] * float(np.real(p.sign))
    return float(np.real(_train_overlap(state.tensors, applied)))


def schrodinger_expectation(
    circuit: BrickworkCircuit,
    observable: PauliString,
    init: InitialState | None = None,
    chi_max: int | None = None,
    cutoff: float | None = 1e-12,
) -> float:
    state = schrodinger_evolve(circuit, init, chi_max, cutoff)
    return mps_pauli_expectation(state, observable)


def heisenberg_evolve(
    circuit: BrickworkCircuit,
    observable,
    chi_max: int | None = None,
    cutoff: float | None = 1e-12,
    channels=None,
    log: TruncationLog | None = None,
) -> PtmMps:
    """Backward-evolved observable train (physical dimension 4).

    `observable` is a Hermitian PauliString or an operator coefficient train.
    With `channels` (slot -> model) the result is the noisy-circuit adjoint
    of the observable: Pauli channels are self-adjoint, so each layer applies
    the transposed gate action followed by the channel weights.  The
    expectation value is the overlap with the initial-state train.
    """
    n = circuit.n_qubits
    if isinstance(observable, PauliString):
        if observable.n != n:
            raise ValueError("observable size mismatch")
        start = pauli_mps(observable)
    else:
        start = observable
        if start.n_sites != n:
            raise ValueError("observable size mismatch")
        if start.phys_dim != 4:
            raise ValueError("expected an operator train")
    policy = _policy(chi_max, cutoff)
    ts = [t.copy() for t in start.tensors]
    for layer in reversed(circuit.layers):
        bonds = layer.bonds_for(n)
        if bonds:
            mat = np.ascontiguousarray(two_qubit_ptm(layer.gate).T)
            for i, j in reversed(bonds):
                if j != i + 1:
                    raise ValueError(
                        "two-qubit blocks must be nearest-neighbour"
                    )
                _apply_two_site_to_train(ts, i, mat)
        for q, gate in reversed(layer.singles):
            _apply_single_to_train(ts, q, single_qubit_ptm(gate).T)
        ch = None
        if channels is not None and layer.noise_slot is not None:
            ch = channels.get(layer.noise_slot)
        if ch is not None:
            obs = channel_mpo(ch).apply_to_mps(PtmMps(tuple(ts), None))
            ts = [t.copy() for t in obs.tensors]
        ts, recs = _compress_train(ts, policy)
        if log is not None:
            log.extend(recs)
    return PtmMps(tuple(ts), len(ts) - 1)


def initial_state_expectation(
    obs: PtmMps, init: InitialState | None = None
) -> float:
    """Tr[rho_init O] from an observable coefficient train."""
    if obs.phys_dim != 4:
        raise ValueError("expected an operator train")
    rho = ptm_state_mps(obs.n_sites, init)
    return float(np.real(rho.overlap(obs)))


def heisenberg_expectation(
    circuit: BrickworkCircuit,
    observable: PauliString,
    init: InitialState | None = None,
    chi_max: int | None = None,
    cutoff: float | None = 1e-12,
    channels=None,
) -> float:
    obs = heisenberg_evolve(circuit, observable, chi_max, cutoff, channels)
    return initial_state_expectation(obs, init)
