"""Signed Pauli strings, the sparse generator basis, and Clifford-layer conjugation.

Pauli strings are stored symplectically as a pair of bit masks (``x_mask``,
``z_mask``) plus a global phase from ``{1, i, -1, -i}``.  Bit ``q`` of a mask
refers to qubit ``q``; per qubit the (x, z) bit pair encodes I=(0,0), X=(1,0),
Y=(1,1), Z=(0,1), with the bare string defined Hermitian (the (1,1) case is
``Y`` itself, i.e. ``i*X*Z``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from itertools import product
from typing import Iterable, Sequence

import numpy as np

_PHASES = (1, 1j, -1, -1j)
_PHASE_LABEL = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_LABEL_PHASE = {"+": 0, "-": 2, "+i": 1, "-i": 3, "i": 1}

_MAT_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """A signed n-qubit Pauli operator.

    Attributes
    ----------
    n : int
        Number of qubits.
    x_mask, z_mask : int
        Symplectic bit masks, bit q = qubit q.
    phase_k : int
        Global phase exponent, the operator carries ``i**phase_k``.
    """

    n: int
    x_mask: int
    z_mask: int
    phase_k: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("need at least one qubit")
        top = 1 << self.n
        if not (0 <= self.x_mask < top and 0 <= self.z_mask < top):
            raise ValueError("mask outside qubit range")
        object.__setattr__(self, "phase_k", self.phase_k % 4)

    # -- constructors ------------------------------------------------------

    @staticmethod
    def identity(n: int) -> "PauliString":
        return PauliString(n, 0, 0, 0)

    @staticmethod
    def single(n: int, qubit: int, letter: str) -> "PauliString":
        """Weight-one string with `letter` on `qubit`."""
        if not 0 <= qubit < n:
            raise ValueError("qubit out of range")
        xb, zb = _LETTER_BITS[letter]
        return PauliString(n, xb << qubit, zb << qubit)

    @staticmethod
    def from_label(label: str) -> "PauliString":
        """Parse text such as ``+XIZZ`` or ``-iYX`` (qubit 0 leftmost)."""
        body = label.lstrip("+-i")
        head = label[: len(label) - len(body)]
        if head in ("", "+"):
            k = 0
        elif head in _LABEL_PHASE:
            k = _LABEL_PHASE[head]
        else:
            raise ValueError(f"bad sign prefix in {label!r}")
        if not body or any(c not in "IXYZ" for c in body):
            raise ValueError(f"bad Pauli letters in {label!r}")
        xm = zm = 0
        for q, c in enumerate(body):
            xb, zb = _LETTER_BITS[c]
            xm |= xb << q
            zm |= zb << q
        return PauliString(len(body), xm, zm, k)

    @staticmethod
    def from_letters(n: int, sites: Sequence[int], letters: str,
                     phase_k: int = 0) -> "PauliString":
        xm = zm = 0
        for q, c in zip(sites, letters):
            xb, zb = _LETTER_BITS[c]
            xm |= xb << q
            zm |= zb << q
        return PauliString(n, xm, zm, phase_k)

    # -- views -------------------------------------------------------------

    @property
    def sign(self) -> complex:
        return _PHASES[self.phase_k]

    def letter(self, q: int) -> str:
        return _BITS_LETTER[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    @property
    def support(self) -> tuple[int, ...]:
        m = self.x_mask | self.z_mask
        return tuple(q for q in range(self.n) if (m >> q) & 1)

    def to_label(self) -> str:
        body = "".join(self.letter(q) for q in range(self.n))
        return _PHASE_LABEL[self.phase_k] + body

    def bare(self) -> "PauliString":
        """Same string with the phase dropped."""
        return PauliString(self.n, self.x_mask, self.z_mask, 0)

    def is_hermitian(self) -> bool:
        return self.phase_k in (0, 2)

    def anticommutes(self, other: "PauliString") -> bool:
        return anticommutes(self, other)

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (oracle use; qubit 0 is the leftmost factor)."""
        if self.n > 12:
            raise ValueError("dense matrix capped at 12 qubits")
        mats = [_MAT_1Q[self.letter(q)] for q in range(self.n)]
        return self.sign * reduce(np.kron, mats)

    def __str__(self) -> str:
        return self.to_label()


def multiply(a: PauliString, b: PauliString) -> PauliString:
    """Operator product ``a @ b`` with exact phase tracking."""
    if a.n != b.n:
        raise ValueError("qubit count mismatch")
    xm = a.x_mask ^ b.x_mask
    zm = a.z_mask ^ b.z_mask
    # bare(x,z) = i^{x.z} X^x Z^z per qubit; commuting Z^z1 past X^x2 costs (-1)^{z1.x2}
    k = (
        a.phase_k
        + b.phase_k
        + _popcount(a.x_mask & a.z_mask)
        + _popcount(b.x_mask & b.z_mask)
        - _popcount(xm & zm)
        + 2 * _popcount(a.z_mask & b.x_mask)
    )
    return PauliString(a.n, xm, zm, k % 4)


def anticommutes(a: PauliString, b: PauliString) -> bool:
    """True when the two strings anticommute (symplectic form is odd)."""
    if a.n != b.n:
        raise ValueError("qubit count mismatch")
    return bool(
        (_popcount(a.x_mask & b.z_mask) + _popcount(a.z_mask & b.x_mask)) % 2
    )


class SparseBasis:
    """Weight-one and nearest-neighbour weight-two Pauli basis on a line.

    Ordering is frozen for deterministic matrix layouts: all single-qubit
    entries first (site ascending, X < Y < Z per site), then bond pairs
    (left site ascending, letter pairs lexicographic XX .. ZZ).
    """

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("sparse basis needs at least two qubits")
        self.n = n
        entries: list[PauliString] = []
        for q in range(n):
            for c in "XYZ":
                entries.append(PauliString.single(n, q, c))
        for q in range(n - 1):
            for c1, c2 in product("XYZ", repeat=2):
                entries.append(PauliString.from_letters(n, (q, q + 1), c1 + c2))
        self.entries: tuple[PauliString, ...] = tuple(entries)
        self._index = {(p.x_mask, p.z_mask): i for i, p in enumerate(entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> PauliString:
        return self.entries[i]

    def index_of(self, p: PauliString) -> int:
        """Index of `p` (phase ignored); KeyError when outside the basis."""
        return self._index[(p.x_mask, p.z_mask)]

    def contains(self, p: PauliString) -> bool:
        return (p.x_mask, p.z_mask) in self._index


def build_anticommutation_matrices(
    basis: SparseBasis, conjugated: Sequence[PauliString] | None = None
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Anticommutation indicator matrices used by the generator fit.

    ``M[i, j] = 1`` iff basis entry i anticommutes with basis entry j.  When
    `conjugated` (the layer conjugates of the basis, aligned by index) is
    given, also returns ``M'[i, j] = 1`` iff ``conjugated[i]`` anticommutes
    with basis entry j.
    """
    ents = basis.entries
    M = np.array(
        [[anticommutes(pi, pj) for pj in ents] for pi in ents], dtype=float
    )
    if conjugated is None:
        return M
    if len(conjugated) != len(ents):
        raise ValueError("conjugated list must align with the basis")
    Mp = np.array(
        [[anticommutes(ci, pj) for pj in ents] for ci in conjugated], dtype=float
    )
    return M, Mp


# -- Clifford conjugation ----------------------------------------------------


class CliffordLayer:
    """Symplectic tableau for an n-qubit Clifford unitary U.

    Stores the images ``U X_q U^dag`` and ``U Z_q U^dag`` as signed Pauli
    strings and conjugates arbitrary strings by composing those images.
    Built either from the generator set (h, s, x, z, cx, cz) applied in
    circuit order, or numerically from a layer of dense gate blocks.
    """

    def __init__(self, n: int):
        self.n = n
        self.x_images = [PauliString.single(n, q, "X") for q in range(n)]
        self.z_images = [PauliString.single(n, q, "Z") for q in range(n)]

    # -- generator applications (mutate in circuit order: U <- G U) --------

    def _update(self, rule) -> None:
        self.x_images = [rule(p) for p in self.x_images]
        self.z_images = [rule(p) for p in self.z_images]

    def apply_h(self, q: int) -> "CliffordLayer":
        def rule(p: PauliString) -> PauliString:
            xb = (p.x_mask >> q) & 1
            zb = (p.z_mask >> q) & 1
            # H: X<->Z, Y->-Y
            k = p.phase_k + (2 if (xb and zb) else 0)
            xm = p.x_mask ^ ((xb ^ zb) << q)
            zm = p.z_mask ^ ((xb ^ zb) << q)
            return PauliString(p.n, xm, zm, k)

        self._update(rule)
        return self

    def apply_s(self, q: int) -> "CliffordLayer":
        def rule(p: PauliString) -> PauliString:
            xb = (p.x_mask >> q) & 1
            zb = (p.z_mask >> q) & 1
            # S: X->Y, Y->-X, Z->Z
            k = p.phase_k + (2 if (xb and zb) else 0)
            zm = p.z_mask ^ (xb << q)
            return PauliString(p.n, p.x_mask, zm, k)

        self._update(rule)
        return self

    def apply_x(self, q: int) -> "CliffordLayer":
        def rule(p: PauliString) -> PauliString:
            zb = (p.z_mask >> q) & 1
            return PauliString(p.n, p.x_mask, p.z_mask, p.phase_k + 2 * zb)

        self._update(rule)
        return self

    def apply_z(self, q: int) -> "CliffordLayer":
        def rule(p: PauliString) -> PauliString:
            xb = (p.x_mask >> q) & 1
            return PauliString(p.n, p.x_mask, p.z_mask, p.phase_k + 2 * xb)

        self._update(rule)
        return self

    def apply_cx(self, control: int, target: int) -> "CliffordLayer":
        def rule(p: PauliString) -> PauliString:
            xc = (p.x_mask >> control) & 1
            zc = (p.z_mask >> control) & 1
            xt = (p.x_mask >> target) & 1
            zt = (p.z_mask >> target) & 1
            xm = p.x_mask ^ (xc << target)
            zm = p.z_mask ^ (zt << control)
            # sign flips when the YY-like component appears: x_c z_t (x_t ^ z_c ^ 1)
            k = p.phase_k + 2 * (xc & zt & (xt ^ zc ^ 1))
            return PauliString(p.n, xm, zm, k)

        self._update(rule)
        return self

    def apply_cz(self, a: int, b: int) -> "CliffordLayer":
        def rule(p: PauliString) -> PauliString:
            xa = (p.x_mask >> a) & 1
            za = (p.z_mask >> a) & 1
            xb = (p.x_mask >> b) & 1
            zb = (p.z_mask >> b) & 1
            zm = p.z_mask ^ (xa << b) ^ (xb << a)
            k = p.phase_k + 2 * (xa & xb & (za ^ zb))
            return PauliString(p.n, p.x_mask, zm, k)

        self._update(rule)
        return self

    # -- numeric extraction -------------------------------------------------

    @staticmethod
    def from_blocks(
        n: int,
        blocks: Iterable[tuple[tuple[int, ...], np.ndarray]],
        atol: float = 1e-10,
    ) -> "CliffordLayer":
        """Tableau of a layer of disjoint 1- or 2-qubit dense Clifford gates.

        `blocks` yields ``(qubits, unitary)`` with contiguous qubit tuples.
        Raises ValueError when a block does not map Paulis to signed Paulis
        within `atol` (i.e. is not Clifford).
        """
        layer = CliffordLayer(n)
        seen: set[int] = set()
        for qubits, gate in blocks:
            if set(qubits) & seen:
                raise ValueError("blocks must act on disjoint qubits")
            seen.update(qubits)
            images = clifford_gate_images(np.asarray(gate, dtype=complex),
                                          len(qubits), atol)
            for local_q, q in enumerate(qubits):
                layer.x_images[q] = _embed(images[("X", local_q)], qubits, n)
                layer.z_images[q] = _embed(images[("Z", local_q)], qubits, n)
        return layer

    def apply(self, p: PauliString) -> PauliString:
        """Return ``U p U^dag``."""
        if p.n != self.n:
            raise ValueError("qubit count mismatch")
        # decompose p = i^{sum x_q z_q} * phase * prod_q X_q^{x_q} * prod_q Z_q^{z_q}
        out = PauliString(self.n, 0, 0,
                          (p.phase_k + _popcount(p.x_mask & p.z_mask)) % 4)
        for q in range(self.n):
            if (p.x_mask >> q) & 1:
                out = multiply(out, self.x_images[q])
        for q in range(self.n):
            if (p.z_mask >> q) & 1:
                out = multiply(out, self.z_images[q])
        return out

    def adjoint(self) -> "CliffordLayer":
        """Tableau of U^dag (so that adjoint().apply gives Heisenberg images)."""
        inv = CliffordLayer(self.n)
        # invert the symplectic action by solving for preimages of X_q, Z_q
        # brute force via linear algebra over GF(2) with phase fix-up
        rows = []
        for q in range(self.n):
            for img in (self.x_images[q], self.z_images[q]):
                rows.append(img)
        # basis vectors: generator (x|z) bit layout of images
        mat = np.zeros((2 * self.n, 2 * self.n), dtype=np.uint8)
        for i, img in enumerate(rows):
            for q in range(self.n):
                mat[i, q] = (img.x_mask >> q) & 1
                mat[i, self.n + q] = (img.z_mask >> q) & 1
        inv_mat = _gf2_inverse(mat)
        for q in range(self.n):
            for letter, store in (("X", inv.x_images), ("Z", inv.z_images)):
                target = PauliString.single(self.n, q, letter)
                vec = np.zeros(2 * self.n, dtype=np.uint8)
                for qq in range(self.n):
                    vec[qq] = (target.x_mask >> qq) & 1
                    vec[self.n + qq] = (target.z_mask >> qq) & 1
                coeffs = (inv_mat.T @ vec) % 2
                pre = PauliString.identity(self.n)
                for i, c in enumerate(coeffs):
                    if c:
                        gen_q, is_z = divmod(i, 2)
                        gen = PauliString.single(
                            self.n, gen_q, "Z" if is_z else "X"
                        )
                        pre = multiply(pre, gen)
                # fix phase so that U pre U^dag == target exactly
                fwd = self.apply(pre)
                pre = PauliString(
                    self.n, pre.x_mask, pre.z_mask,
                    pre.phase_k + (target.phase_k - fwd.phase_k),
                )
                store[q] = pre
        return inv


def conjugate(layer: CliffordLayer, p: PauliString) -> PauliString:
    """Signed image of `p` under the layer, ``U p U^dag``."""
    return layer.apply(p)


_GATE_IMAGE_CACHE: dict[tuple[bytes, int], dict[tuple[str, int], PauliString]] = {}


def clifford_gate_images(
    gate: np.ndarray, k: int, atol: float = 1e-10
) -> dict[tuple[str, int], PauliString]:
    """Conjugation images ``U P U^dag`` for the local X/Z generators of a gate.

    Memoized on the gate's byte content; brickwork layers reuse one gate
    across every bond, so signed-Pauli matching runs once per distinct gate.
    """
    if gate.shape != (2**k, 2**k):
        raise ValueError("gate shape does not match qubit count")
    key = (gate.tobytes(), k)
    cached = _GATE_IMAGE_CACHE.get(key)
    if cached is not None:
        return cached
    images: dict[tuple[str, int], PauliString] = {}
    for local_q in range(k):
        for letter in ("X", "Z"):
            local = PauliString.single(k, local_q, letter)
            img = _match_signed_pauli(gate @ local.matrix() @ gate.conj().T, k, atol)
            if img is None:
                raise ValueError("block is not Clifford within tolerance")
            images[(letter, local_q)] = img
    _GATE_IMAGE_CACHE[key] = images
    return images


def _embed(p: PauliString, qubits: Sequence[int], n: int) -> PauliString:
    xm = zm = 0
    for local_q, q in enumerate(qubits):
        xm |= ((p.x_mask >> local_q) & 1) << q
        zm |= ((p.z_mask >> local_q) & 1) << q
    return PauliString(n, xm, zm, p.phase_k)


def _match_signed_pauli(mat: np.ndarray, n: int, atol: float):
    """Match a dense matrix to a signed Pauli string, or None."""
    dim = 2**n
    for xm in range(dim):
        for zm in range(dim):
            cand = PauliString(n, xm, zm, 0)
            ov = np.trace(cand.matrix().conj().T @ mat) / dim
            if abs(ov) > 0.5:
                for k in range(4):
                    if abs(ov - _PHASES[k]) < atol:
                        if np.allclose(mat, _PHASES[k] * cand.matrix(),
                                       atol=atol):
                            return PauliString(n, xm, zm, k)
                return None
    return None


def _gf2_inverse(mat: np.ndarray) -> np.ndarray:
    """Inverse of a square matrix over GF(2); raises if singular."""
    m = mat.copy() % 2
    k = m.shape[0]
    aug = np.concatenate([m, np.eye(k, dtype=np.uint8)], axis=1)
    row = 0
    for col in range(k):
        piv = None
        for r in range(row, k):
            if aug[r, col]:
                piv = r
                break
        if piv is None:
            raise ValueError("singular symplectic matrix")
        aug[[row, piv]] = aug[[piv, row]]
        for r in range(k):
            if r != row and aug[r, col]:
                aug[r] ^= aug[row]
        row += 1
    return aug[:, k:]
