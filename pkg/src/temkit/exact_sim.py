"""Dense reference simulators and closed-form results for brickwork dynamics.

Everything here trades scale for exactness: statevectors to 14 qubits,
density matrices to 9, Pauli trajectories, symbolic Pauli back-propagation,
and the single-bond transfer map whose powers give the analytic correlator
decay at the self-dual point.  The tensor-network engines are validated
against these routines.

Dense index convention: flat index bit ``n-1-q`` holds qubit ``q`` (qubit 0
is the leftmost/kron-major factor), matching ``PauliString.matrix``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuits import (
    BrickworkCircuit,
    InitialState,
    KickedIsingParams,
    eigenstate_rotation,
    two_qubit_block,
)
from .noise import SparsePauliLindblad, twirl_layer
from .pauli import CliffordLayer, PauliString

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_STATEVECTOR_QUBITS = 14
MAX_DENSITY_QUBITS = 8


def _bit_reverse(mask: int, n: int) -> int:
    out = 0
    for q in range(n):
        out |= ((mask >> q) & 1) << (n - 1 - q)
    return out


def _pauli_phases(p: PauliString, n: int) -> tuple[int, np.ndarray]:
    """Return (xr, phi) with ``P|c> = phi[c] |c ^ xr>`` over dense indices."""
    xr = _bit_reverse(p.x_mask, n)
    zr = _bit_reverse(p.z_mask, n)
    idx = np.arange(1 << n)
    masked = idx & zr
    par = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        par ^= (masked >> b) & 1
    k = (p.phase_k + bin(p.x_mask & p.z_mask).count("1")) % 4
    phi = (1j**k) * np.where(par, -1.0, 1.0)
    return xr, phi.astype(complex)


def apply_pauli_state(vec: np.ndarray, p: PauliString) -> np.ndarray:
    n = p.n
    xr, phi = _pauli_phases(p, n)
    perm = np.arange(len(vec)) ^ xr
    return phi[perm] * vec[perm]


def pauli_expectation_state(vec: np.ndarray, p: PauliString) -> float:
    return float(np.real(np.vdot(vec, apply_pauli_state(vec, p))))


def conjugate_pauli_dm(rho: np.ndarray, p: PauliString) -> np.ndarray:
    """``P rho P^dag`` via index arithmetic (no dense Pauli matrix)."""
    n = p.n
    xr, phi = _pauli_phases(p, n)
    perm = np.arange(rho.shape[0]) ^ xr
    g = phi[perm]
    return g[:, None] * rho[np.ix_(perm, perm)] * g.conj()[None, :]


def trace_pauli_dm(rho: np.ndarray, p: PauliString) -> float:
    """``Tr[rho P]`` (real part; rho Hermitian, P Hermitian)."""
    n = p.n
    xr, phi = _pauli_phases(p, n)
    idx = np.arange(rho.shape[0])
    return float(np.real(np.sum(phi * rho[idx, idx ^ xr])))


def apply_gate_state(
    vec: np.ndarray, gate: np.ndarray, qubits: Sequence[int], n: int
) -> np.ndarray:
    k = len(qubits)
    v = vec.reshape((2,) * n)
    g = np.asarray(gate, dtype=complex).reshape((2,) * (2 * k))
    v = np.tensordot(g, v, axes=(tuple(range(k, 2 * k)), tuple(qubits)))
    v = np.moveaxis(v, tuple(range(k)), tuple(qubits))
    return np.ascontiguousarray(v).reshape(-1)


def apply_gate_dm(
    rho: np.ndarray, gate: np.ndarray, qubits: Sequence[int], n: int
) -> np.ndarray:
    k = len(qubits)
    r = rho.reshape((2,) * (2 * n))
    g = np.asarray(gate, dtype=complex).reshape((2,) * (2 * k))
    r = np.tensordot(g, r, axes=(tuple(range(k, 2 * k)), tuple(qubits)))
    r = np.moveaxis(r, tuple(range(k)), tuple(qubits))
    cols = tuple(n + q for q in qubits)
    r = np.tensordot(g.conj(), r, axes=(tuple(range(k, 2 * k)), cols))
    r = np.moveaxis(r, tuple(range(k)), cols)
    dim = 1 << n
    return np.ascontiguousarray(r).reshape(dim, dim)


def _channel_terms(channel: SparsePauliLindblad, n: int):
    """Per-generator (perm, g, p) tables, cached on the channel object."""
    cache = getattr(channel, "_dense_terms", None)
    if cache is not None and cache[0] == n:
        return cache[1]
    probs = channel.jump_probabilities()
    idx = np.arange(1 << n)
    terms = []
    for gen, p in zip(channel.basis.entries, probs):
        if p == 0.0:
            continue
        xr, phi = _pauli_phases(gen, n)
        perm = idx ^ xr
        terms.append((perm, phi[perm], float(p)))
    channel._dense_terms = (n, terms)
    return terms


def apply_channel_dm(rho: np.ndarray, channel: SparsePauliLindblad) -> np.ndarray:
    """Apply exp(L) exactly, one commuting generator factor at a time."""
    n = channel.basis.n
    if rho.shape[0] != (1 << n):
        raise ValueError("density matrix size mismatch")
    for perm, g, p in _channel_terms(channel, n):
        flipped = g[:, None] * rho[np.ix_(perm, perm)] * g.conj()[None, :]
        rho = (1.0 - p) * rho + p * flipped
    return rho


def initial_statevector(n: int, init: InitialState | None = None) -> np.ndarray:
    init = init or InitialState("zeros")
    if init.kind == "zeros":
        vec = np.zeros(1 << n, dtype=complex)
        vec[0] = 1.0
        return vec
    if init.kind == "plus_bell":
        if n % 2 == 0:
            raise ValueError("plus_bell needs an odd chain")
        out = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
        bell = np.array([1.0, 0, 0, 1.0], dtype=complex) / np.sqrt(2)
        for _ in range((n - 1) // 2):
            out = np.kron(out, bell)
        return out
    if init.kind == "pauli_eigenstate":
        if init.letters is None or len(init.letters) != n:
            raise ValueError("eigenstate letters must cover every qubit")
        vec = np.zeros(1 << n, dtype=complex)
        vec[0] = 1.0
        for q, c in enumerate(init.letters):
            rot = eigenstate_rotation(c)
            vec = apply_gate_state(vec, rot, (q,), n)
        return vec
    raise ValueError(f"unknown initial state {init.kind!r}")


def evolve_statevector(
    circuit: BrickworkCircuit,
    init: InitialState | None = None,
    max_qubits: int = MAX_STATEVECTOR_QUBITS,
) -> np.ndarray:
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"statevector capped at {max_qubits} qubits")
    vec = initial_statevector(n, init)
    for layer in circuit.layers:
        for qubits, gate in layer.blocks(n):
            vec = apply_gate_state(vec, gate, qubits, n)
    return vec


def statevector_expectation(
    circuit: BrickworkCircuit,
    observable: PauliString,
    init: InitialState | None = None,
    max_qubits: int = MAX_STATEVECTOR_QUBITS,
) -> float:
    vec = evolve_statevector(circuit, init, max_qubits)
    return pauli_expectation_state(vec, observable)


def evolve_density_matrix(
    circuit: BrickworkCircuit,
    channels: Mapping[str, SparsePauliLindblad] | None = None,
    init: InitialState | None = None,
    max_qubits: int = MAX_DENSITY_QUBITS,
) -> np.ndarray:
    """Exact noisy state: each layer's channel acts before its gates."""
    n = circuit.n_qubits
    if n > max_qubits:
        raise ValueError(f"density matrix capped at {max_qubits} qubits")
    vec = initial_statevector(n, init)
    rho = np.outer(vec, vec.conj())
    channels = channels or {}
    for layer in circuit.layers:
        ch = channels.get(layer.noise_slot) if layer.noise_slot else None
        if ch is not None:
            rho = apply_channel_dm(rho, ch)
        for qubits, gate in layer.blocks(n):
            rho = apply_gate_dm(rho, gate, qubits, n)
    return rho


def noisy_expectation_dm(
    circuit: BrickworkCircuit,
    channels: Mapping[str, SparsePauliLindblad] | None,
    observable: PauliString,
    init: InitialState | None = None,
    max_qubits: int = MAX_DENSITY_QUBITS,
) -> float:
    rho = evolve_density_matrix(circuit, channels, init, max_qubits)
    return trace_pauli_dm(rho, observable)


def trajectory_expectation(
    circuit: BrickworkCircuit,
    channels: Mapping[str, SparsePauliLindblad] | None,
    observable: PauliString,
    n_trajectories: int,
    rng: np.random.Generator,
    init: InitialState | None = None,
    twirl: bool = False,
) -> tuple[float, float]:
    """Monte-Carlo average over sampled Pauli error insertions.

    Returns (mean, standard error).  With ``twirl`` each noisy layer is
    dressed in a fresh uniform Pauli frame (layers must then be Clifford).
    """
    n = circuit.n_qubits
    channels = channels or {}
    tableaus = {}
    if twirl:
        for i, layer in enumerate(circuit.layers):
            if layer.noise_slot and layer.noise_slot in channels:
                tableaus[i] = layer_tableau(layer, n)
    base = initial_statevector(n, init)
    vals = np.empty(n_trajectories)
    for s in range(n_trajectories):
        vec = base
        for i, layer in enumerate(circuit.layers):
            frame = None
            if i in tableaus:
                frame = twirl_layer(tableaus[i], rng)
                vec = apply_pauli_state(vec, frame.pre)
            ch = channels.get(layer.noise_slot) if layer.noise_slot else None
            if ch is not None:
                err = ch.sample_pauli_error(rng)
                if err.weight:
                    vec = apply_pauli_state(vec, err)
            for qubits, gate in layer.blocks(n):
                vec = apply_gate_state(vec, gate, qubits, n)
            if frame is not None:
                vec = apply_pauli_state(vec, frame.post)
        vals[s] = pauli_expectation_state(vec, observable)
    mean = float(vals.mean())
    err = float(vals.std(ddof=1) / np.sqrt(n_trajectories)) if n_trajectories > 1 else 0.0
    return mean, err


# -- Clifford back-propagation ------------------------------------------------

_TABLEAU_CACHE: dict = {}


def layer_tableau(layer, n: int) -> CliffordLayer:
    """Cached Clifford tableau of a circuit layer (raises if not Clifford)."""
    blocks = layer.blocks(n)
    key = (n, tuple((qubits, gate.tobytes()) for qubits, gate in blocks))
    tab = _TABLEAU_CACHE.get(key)
    if tab is None:
        tab = CliffordLayer.from_blocks(n, blocks)
        _TABLEAU_CACHE[key] = tab
    return tab


def layer_tableau_inverse(layer, n: int) -> CliffordLayer:
    blocks = layer.blocks(n)
    key = (n, tuple((qubits, gate.tobytes()) for qubits, gate in blocks), "inv")
    tab = _TABLEAU_CACHE.get(key)
    if tab is None:
        tab = layer_tableau(layer, n).adjoint()
        _TABLEAU_CACHE[key] = tab
    return tab


@dataclass(frozen=True)
class PathStep:
    """One noisy layer crossed during back-propagation."""

    layer_index: int
    layer_name: str
    slot: str
    pauli: PauliString
    fidelity: float


@dataclass(frozen=True)
class PropagationResult:
    """Outcome of propagating an observable backwards through a circuit.

    ``value`` is the noisy expectation in the all-zeros state;
    ``ideal_value`` drops the fidelities.  ``steps`` lists, newest first,
    the Pauli sitting at each noisy slot and the fidelity it picked up.
    """

    value: float
    ideal_value: float
    initial_pauli: PauliString
    steps: tuple[PathStep, ...]


def pauli_propagation(
    circuit: BrickworkCircuit,
    observable: PauliString,
    channels: Mapping[str, SparsePauliLindblad] | None = None,
) -> PropagationResult:
    """Track a Pauli observable backwards through Clifford layers.

    Each noisy slot multiplies the running value by the fidelity of the
    Pauli present there.  Works at any width since nothing is dense.
    """
    n = circuit.n_qubits
    if observable.n != n or not observable.is_hermitian():
        raise ValueError("observable must be a Hermitian Pauli on the chain")
    channels = channels or {}
    cur = observable
    factor = 1.0
    steps: list[PathStep] = []
    for idx in range(len(circuit.layers) - 1, -1, -1):
        layer = circuit.layers[idx]
        if layer.blocks(n):
            cur = layer_tableau_inverse(layer, n).apply(cur)
        if layer.noise_slot and layer.noise_slot in channels:
            f = channels[layer.noise_slot].fidelity(cur)
            factor *= f
            steps.append(
                PathStep(idx, layer.name, layer.noise_slot, cur.bare(), f)
            )
    if cur.x_mask:
        ideal = 0.0
    else:
        if not cur.is_hermitian():
            raise AssertionError("Hermiticity lost during propagation")
        ideal = 1.0 if cur.phase_k == 0 else -1.0
    return PropagationResult(
        value=factor * ideal,
        ideal_value=ideal,
        initial_pauli=cur,
        steps=tuple(steps),
    )


# -- closed forms --------------------------------------------------------------


def analytic_correlator(params: KickedIsingParams, t: int,
                        site: int | None = None,
                        n_qubits: int | None = None) -> float:
    """Light-cone X correlator after t periods: cos(2h)**t on site t, else 0.

    Exact on the self-dual line for the staggered-Bell start.  ``site``
    defaults to the cone site t.  With ``n_qubits`` given, enforces the
    causality window t <= (n-1)/2 outside which boundaries intrude.
    """
    if not params.dual_unitary:
        raise ValueError("closed form requires the self-dual point |J|=|b|=pi/4")
    if t < 0:
        raise ValueError("need t >= 0")
    if n_qubits is not None and t > (n_qubits - 1) // 2:
        raise ValueError("t exceeds the causal window (n-1)/2")
    if site is not None and site != t:
        return 0.0
    return float(np.cos(2.0 * params.h) ** t)


def transfer_map_mu(params: KickedIsingParams) -> np.ndarray:
    """Single-bond transfer matrix: a -> (1/2) Tr_2 [U (1 x a) U^dag].

    Returned in the (I, X, Y, Z) basis.  On the self-dual line its nonzero
    block rotates X into (cos 2h) X + (sin 2h) Y and kills Z.
    """
    if not params.dual_unitary:
        raise ValueError("transfer map only contracts on the self-dual line")
    U = two_qubit_block(params.J, params.b, params.h)
    letters = "IXYZ"
    M = np.zeros((4, 4))
    for j, cj in enumerate(letters):
        op = np.kron(np.eye(2), _PAULI_1Q[cj])
        out = U @ op @ U.conj().T
        # partial trace over the second (right) qubit; result lives on the left
        red = out.reshape(2, 2, 2, 2)
        red = 0.5 * np.einsum("ikjk->ij", red)
        for i, ci in enumerate(letters):
            M[i, j] = np.real(np.trace(_PAULI_1Q[ci].conj().T @ red)) / 2.0
    return M


def correlator_from_transfer(params: KickedIsingParams, t: int) -> float:
    """Correlator via t powers of the transfer map applied to X.

    Equals ``analytic_correlator`` on the self-dual line; the |+> overlap
    picks out the identity and X components of the evolved operator.
    """
    M = transfer_map_mu(params)
    v = np.zeros(4)
    v[1] = 1.0
    w = np.linalg.matrix_power(M, t) @ v
    return float(w[0] + w[1])
