"""Kicked-Ising brickwork circuits and benchmark circuit families.

Gates are dense 4x4 unitaries attached to bond layers; each layer carries a
noise-slot id ("even" or "odd") so that an injected channel can be keyed to
the layer family it precedes.  Qubit 0 is the leftmost tensor factor; a
two-qubit gate on bond (q, q+1) has row index (bit_q, bit_{q+1}).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOL_DUAL = 1e-12

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SGATE = np.diag([1.0, 1j])
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
BELL_GATE = CNOT @ np.kron(HADAMARD, _I2)  # |00> -> (|00>+|11>)/sqrt(2)


@dataclass(frozen=True)
class KickedIsingParams:
    """Parameters of the kicked-Ising brickwork model.

    The two-qubit block is
    ``exp(-i h Z_1) exp(-i J Z_1 Z_2) exp(-i b (X_1 + X_2)) exp(-i J Z_1 Z_2)
    exp(-i h Z_1)`` with the longitudinal rotation on the left qubit of the
    bond.
    """

    n_qubits: int
    J: float
    b: float
    h: float
    t_steps: int = 0

    def __post_init__(self):
        if self.n_qubits < 3:
            raise ValueError("need at least three qubits")
        if self.t_steps < 0:
            raise ValueError("negative step count")

    @property
    def dual_unitary(self) -> bool:
        q = np.pi / 4
        return (
            abs(abs(self.J) - q) <= TOL_DUAL and abs(abs(self.b) - q) <= TOL_DUAL
        )

    @property
    def clifford(self) -> bool:
        return self.dual_unitary and abs(self.h) <= TOL_DUAL


def two_qubit_block(
    J: float | KickedIsingParams, b: float | None = None, h: float | None = None
) -> np.ndarray:
    """Dense 4x4 kicked-Ising bond gate (exact exponentials, no expm needed).

    Accepts either the three angles or a `KickedIsingParams`.
    """
    if isinstance(J, KickedIsingParams):
        J, b, h = J.J, J.b, J.h
    zz = np.diag(np.exp(-1j * J * np.array([1.0, -1.0, -1.0, 1.0])))
    zrot = np.diag(np.exp(-1j * h * np.array([1.0, 1.0, -1.0, -1.0])))
    xrot = np.cos(b) * _I2 - 1j * np.sin(b) * _X
    kick = np.kron(xrot, xrot)
    return zrot @ zz @ kick @ zz @ zrot


def dual_reshuffle(gate: np.ndarray) -> np.ndarray:
    """Space-time dual of a two-qubit gate.

    With ``gate = sum U_ij^kl |k><i| (x) |l><j|`` the dual is
    ``sum U_ij^kl |j><i| (x) |l><k|`` (legs j and k exchanged); the gate is
    dual-unitary exactly when the reshuffled matrix is unitary.
    """
    g = np.asarray(gate).reshape(2, 2, 2, 2)  # indices (k, l, i, j)
    return np.einsum("klij->jlik", g).reshape(4, 4)


def is_dual_unitary(gate: np.ndarray, tol: float = TOL_DUAL) -> bool:
    gd = dual_reshuffle(gate)
    return bool(np.allclose(gd.conj().T @ gd, np.eye(4), atol=tol))


def bond_range(n: int, parity: str) -> tuple[tuple[int, int], ...]:
    start = 0 if parity == "even" else 1
    return tuple((q, q + 1) for q in range(start, n - 1, 2))


@dataclass(eq=False)
class Layer:
    """One circuit layer: a shared bond gate plus optional single-qubit gates.

    ``bonds`` defaults to all bonds of the layer's parity.  ``noise_slot``
    names the channel applied immediately before this layer (None = clean).
    """

    parity: str
    gate: np.ndarray | None
    noise_slot: str | None
    singles: tuple[tuple[int, np.ndarray], ...] = ()
    name: str = ""
    bonds: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError("parity must be 'even' or 'odd'")
        if self.gate is not None:
            self.gate = np.asarray(self.gate, dtype=complex)
            if self.gate.shape != (4, 4):
                raise ValueError("bond gate must be 4x4")

    def bonds_for(self, n: int) -> tuple[tuple[int, int], ...]:
        if self.bonds is not None:
            return self.bonds
        if self.gate is None:
            return ()
        return bond_range(n, self.parity)

    def blocks(self, n: int) -> list[tuple[tuple[int, ...], np.ndarray]]:
        """All gate blocks of the layer as (qubits, dense matrix) pairs."""
        out: list[tuple[tuple[int, ...], np.ndarray]] = [
            ((q,), np.asarray(g, dtype=complex)) for q, g in self.singles
        ]
        for bond in self.bonds_for(n):
            out.append((bond, self.gate))
        return out

    def dagger(self) -> "Layer":
        return Layer(
            parity=self.parity,
            gate=None if self.gate is None else self.gate.conj().T,
            noise_slot=self.noise_slot,
            singles=tuple((q, g.conj().T) for q, g in self.singles),
            name=self.name + "_dg" if self.name else "",
            bonds=self.bonds,
        )


@dataclass(eq=False)
class BrickworkCircuit:
    n_qubits: int
    layers: list[Layer] = field(default_factory=list)
    params: KickedIsingParams | None = None

    @property
    def noise_slots(self) -> tuple[str, ...]:
        seen = []
        for layer in self.layers:
            if layer.noise_slot and layer.noise_slot not in seen:
                seen.append(layer.noise_slot)
        return tuple(seen)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        def encode_gate(g):
            if g is None:
                return None
            return {"re": np.real(g).tolist(), "im": np.imag(g).tolist()}

        doc = {
            "version": 1,
            "n_qubits": self.n_qubits,
            "params": None
            if self.params is None
            else {
                "n_qubits": self.params.n_qubits,
                "J": self.params.J,
                "b": self.params.b,
                "h": self.params.h,
                "t_steps": self.params.t_steps,
            },
            "layers": [
                {
                    "name": layer.name,
                    "parity": layer.parity,
                    "noise_slot": layer.noise_slot,
                    "gate": encode_gate(layer.gate),
                    "singles": [
                        {"qubit": q, **encode_gate(g)} for q, g in layer.singles
                    ],
                    "bonds": None
                    if layer.bonds is None
                    else [list(b) for b in layer.bonds],
                }
                for layer in self.layers
            ],
        }
        return json.dumps(doc, indent=1)

    @staticmethod
    def from_json(text: str) -> "BrickworkCircuit":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError("unsupported circuit format version")

        def decode_gate(obj):
            if obj is None:
                return None
            return np.asarray(obj["re"]) + 1j * np.asarray(obj["im"])

        params = None
        if doc.get("params") is not None:
            params = KickedIsingParams(**doc["params"])
        layers = [
            Layer(
                parity=item["parity"],
                gate=decode_gate(item["gate"]),
                noise_slot=item["noise_slot"],
                singles=tuple(
                    (s["qubit"], np.asarray(s["re"]) + 1j * np.asarray(s["im"]))
                    for s in item["singles"]
                ),
                name=item.get("name", ""),
                bonds=None
                if item.get("bonds") is None
                else tuple(tuple(b) for b in item["bonds"]),
            )
            for item in doc["layers"]
        ]
        return BrickworkCircuit(doc["n_qubits"], layers, params)


@dataclass(frozen=True)
class InitialState:
    """Initial product/Bell state selector.

    kinds: ``zeros``; ``plus_bell`` (|+> on qubit 0, Bell pairs on bonds
    (1,2), (3,4), ...); ``pauli_eigenstate`` with per-qubit letters, ``I``
    meaning |0>.
    """

    kind: str
    letters: str | None = None

    def __post_init__(self):
        if self.kind not in ("zeros", "plus_bell", "pauli_eigenstate"):
            raise ValueError(f"unknown initial state {self.kind!r}")
        if self.kind == "pauli_eigenstate" and not self.letters:
            raise ValueError("pauli_eigenstate needs per-qubit letters")


def eigenstate_rotation(letter: str) -> np.ndarray:
    """Single-qubit gate mapping |0> to the +1 eigenstate of `letter`."""
    if letter in ("I", "Z"):
        return _I2.copy()
    if letter == "X":
        return HADAMARD.copy()
    if letter == "Y":
        return SGATE @ HADAMARD
    raise ValueError(f"bad letter {letter!r}")


def bell_prep_layer(n: int, noise_slot: str | None = "odd") -> Layer:
    """Bell pairs on odd bonds plus |+> on qubit 0 (applied to |0...0>)."""
    return Layer(
        parity="odd",
        gate=BELL_GATE,
        noise_slot=noise_slot,
        singles=((0, HADAMARD.copy()),),
        name="prep",
    )


def build_brickwork(
    params: KickedIsingParams,
    t: int | None = None,
    include_prep: bool = True,
    noisy_prep_slot: str | None = "odd",
) -> BrickworkCircuit:
    """Brickwork evolution circuit: optional Bell prep, then t bond layers.

    Layer 1 couples even bonds (0,1), (2,3), ...; parities then alternate.
    N must be odd so both parities tile the open chain.  `t` defaults to
    ``params.t_steps``.
    """
    n = params.n_qubits
    if t is None:
        t = params.t_steps
    if n % 2 == 0:
        raise ValueError("brickwork needs an odd qubit count")
    if t < 0:
        raise ValueError("negative layer count")
    gate = two_qubit_block(params.J, params.b, params.h)
    layers: list[Layer] = []
    if include_prep:
        layers.append(bell_prep_layer(n, noise_slot=noisy_prep_slot))
    for k in range(t):
        parity = "even" if k % 2 == 0 else "odd"
        layers.append(
            Layer(parity=parity, gate=gate, noise_slot=parity,
                  name=f"step{k + 1}")
        )
    return BrickworkCircuit(n, layers, params)


def build_cycle_benchmark(
    layer: Layer, n: int, prep_letters, depth: int
) -> BrickworkCircuit:
    """Eigenstate prep + `depth` repetitions of a self-inverse entangling layer.

    `depth` must be even so the ideal circuit is the identity (up to phase)
    and the decay per layer pair is the product of the Pauli fidelity and its
    layer conjugate.  Measurement bases are the prepared letters; `prep_letters`
    may also be a Hermitian PauliString.
    """
    if depth % 2 != 0 or depth < 0:
        raise ValueError("cycle benchmark depth must be a non-negative even count")
    if not isinstance(prep_letters, str):
        prep_letters = "".join(prep_letters.letter(q) for q in range(prep_letters.n))
    if len(prep_letters) != n:
        raise ValueError("need one prep letter per qubit")
    singles = tuple(
        (q, eigenstate_rotation(c)) for q, c in enumerate(prep_letters)
        if c not in ("I", "Z")
    )
    prep = Layer(parity="even", gate=None, noise_slot=None, singles=singles,
                 name="eigenstate_prep", bonds=())
    layers = [prep]
    for k in range(depth):
        layers.append(
            Layer(
                parity=layer.parity,
                gate=layer.gate,
                noise_slot=layer.noise_slot,
                singles=layer.singles,
                name=f"{layer.name or layer.parity}_rep{k + 1}",
                bonds=layer.bonds,
            )
        )
    return BrickworkCircuit(n, layers)


def build_repeated_layer_benchmark(
    params: KickedIsingParams, parity: str, cycles: int
) -> tuple[BrickworkCircuit, InitialState, tuple[int, ...]]:
    """Repeated single-parity layers probing X propagation within bonds.

    Qubits of the chosen parity start in |+>; after `cycles` layers the X
    observables sit on the prepared qubits when `cycles` is even and on their
    bond partners when odd.  Returns (circuit, initial state, measured qubits).
    """
    n = params.n_qubits
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    gate = two_qubit_block(params.J, params.b, params.h)
    start = 0 if parity == "even" else 1
    prepared = tuple(range(start, n, 2))
    letters = "".join("X" if q in prepared else "I" for q in range(n))
    layers = [
        Layer(parity=parity, gate=gate, noise_slot=parity,
              name=f"{parity}_cycle{k + 1}")
        for k in range(cycles)
    ]
    circuit = BrickworkCircuit(n, layers, params)
    coupled = {q for bond in bond_range(n, parity) for q in bond}
    measured = []
    for q in prepared:
        if q not in coupled:
            measured.append(q)  # uncoupled edge qubit keeps its X
        elif cycles % 2 == 0:
            measured.append(q)
        else:
            partner = q + 1 if (q - start) % 2 == 0 else q - 1
            measured.append(partner)
    return circuit, InitialState("pauli_eigenstate", letters), tuple(measured)


def light_cone_restrict(
    circuit: BrickworkCircuit, support: Iterable[int]
) -> BrickworkCircuit:
    """Drop every gate outside the backward light cone of `support`.

    Walking from the final layer, a bond is kept only if it touches a qubit
    that can still influence the observable; kept bonds widen the cone.  The
    restricted circuit gives identical expectations for observables on
    `support`, which the oracles verify.
    """
    n = circuit.n_qubits
    cone = set(support)
    restricted: list[Layer] = []
    for layer in reversed(circuit.layers):
        bonds = tuple(
            bond for bond in layer.bonds_for(n)
            if bond[0] in cone or bond[1] in cone
        )
        for bond in bonds:
            cone.update(bond)
        singles = tuple((q, g) for q, g in layer.singles if q in cone)
        restricted.append(
            Layer(
                parity=layer.parity,
                gate=layer.gate if bonds else None,
                noise_slot=layer.noise_slot,
                singles=singles,
                name=layer.name,
                bonds=bonds,
            )
        )
    restricted.reverse()
    return BrickworkCircuit(n, restricted, circuit.params)


def build_mirror_circuit(params: KickedIsingParams, T: int) -> BrickworkCircuit:
    """Bell prep, T forward steps, the inverse steps reversed, Bell unprep.

    The ideal circuit is the identity on |0...0>, so every <Z_q> is +1; noise
    slots attach to every layer appearance including prep and unprep.  Only
    the Clifford point is accepted: the closed-form noisy prediction this
    family exists to check is stabilizer-based.
    """
    if not params.clifford:
        raise ValueError("mirror benchmark requires the Clifford point")
    forward = build_brickwork(params, T, include_prep=True)
    layers = list(forward.layers)
    for layer in reversed(forward.layers):
        layers.append(layer.dagger())
    return BrickworkCircuit(params.n_qubits, layers, params)
