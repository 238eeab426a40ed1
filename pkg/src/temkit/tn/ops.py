"""Matrix-product building blocks in the Pauli transfer-matrix picture.

Operators are expanded over the orthonormal single-site basis
``sigma_a = P_a / sqrt(2)`` (a = I, X, Y, Z), so an n-qubit operator is the
real coefficient train ``c_alpha = Tr[A prod_q sigma_{alpha_q}]`` and
Hilbert-Schmidt inner products are plain dot products of trains.  A `PtmMps`
stores such a coefficient train (physical dimension 4) or an ordinary
statevector train (physical dimension 2); a `PtmMpo` stores a superoperator
acting on coefficient trains.  Site 0 is the slowest (most significant) index
in every dense reshape, matching the dense simulators.

Conjugation superoperators of the gates in scope have real transfer matrices;
builders verify this instead of assuming it, so complex-valued trains keep
working through the same code paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ..noise import PauliDiagonal, SparsePauliLindblad
from ..pauli import PauliString

LETTER_AXIS = "IXYZ"
PTM_REAL_TOL = 1e-12
# relative floor for rank-revealing splits (exact gate decompositions)
RANK_TOL = 1e-13

_P1 = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1.0 + 0j, -1.0]),
)
_SIGMA1 = tuple(p / np.sqrt(2) for p in _P1)
_SIGMA2 = tuple(np.kron(a, b) for a in _SIGMA1 for b in _SIGMA1)


def _real_ptm(t: np.ndarray, what: str) -> np.ndarray:
    if np.abs(t.imag).max() > PTM_REAL_TOL:
        raise ValueError(f"{what} has a non-real transfer matrix")
    return np.ascontiguousarray(t.real)


def single_qubit_ptm(gate: np.ndarray) -> np.ndarray:
    """4x4 transfer matrix of conjugation by a single-qubit unitary."""
    g = np.asarray(gate, dtype=complex)
    t = np.array(
        [[np.trace(sa @ g @ sb @ g.conj().T) for sb in _SIGMA1] for sa in _SIGMA1]
    )
    return _real_ptm(t, "single-qubit gate")


def two_qubit_ptm(gate: np.ndarray) -> np.ndarray:
    """16x16 transfer matrix of conjugation by a two-qubit unitary."""
    g = np.asarray(gate, dtype=complex)
    rot = np.array([g @ sb @ g.conj().T for sb in _SIGMA2])
    t = np.einsum("aij,bji->ab", np.array(_SIGMA2), rot)
    return _real_ptm(t, "two-qubit gate")


# -- compression policies ----------------------------------------------------


@dataclass(frozen=True)
class CompressionPolicy:
    """Bond truncation rule applied during canonical sweeps.

    ``cutoff`` is a relative 2-norm budget for the whole train: each bond may
    discard singular values worth at most ``cutoff / n_bonds`` of the total
    weight, so the accumulated distance to the uncompressed train stays below
    ``cutoff``.  ``max_bond`` is a hard per-bond cap applied afterwards.
    Either field may be None.
    """

    cutoff: float | None = 1e-12
    max_bond: int | None = None

    def __post_init__(self):
        if self.cutoff is not None and self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        if self.max_bond is not None and self.max_bond < 1:
            raise ValueError("max_bond must be at least 1")

    @staticmethod
    def relative(eps: float = 1e-12) -> "CompressionPolicy":
        return CompressionPolicy(cutoff=eps, max_bond=None)

    @staticmethod
    def hard_cap(chi: int) -> "CompressionPolicy":
        return CompressionPolicy(cutoff=None, max_bond=chi)

    def keep_count(self, s: np.ndarray, n_bonds: int) -> int:
        total = float(np.sum(s * s))
        k = len(s)
        if total <= 0.0:
            return 1
        if self.cutoff is not None:
            budget = self.cutoff / max(1, n_bonds)
            tail = np.sqrt(np.cumsum((s * s)[::-1])[::-1] / total)
            ok = np.nonzero(tail <= budget)[0]
            k = int(ok[0]) if len(ok) else len(s)
        if self.max_bond is not None:
            k = min(k, self.max_bond)
        return max(k, 1)


@dataclass(frozen=True)
class BondTruncation:
    """Record of one SVD truncation: weights are 2-norms of singular values."""

    bond: int
    kept: int
    discarded: int
    discarded_weight: float
    total_weight: float

    @property
    def relative_weight(self) -> float:
        if self.total_weight == 0.0:
            return 0.0
        return self.discarded_weight / self.total_weight


@dataclass
class TruncationLog:
    records: list[BondTruncation] = field(default_factory=list)

    def add(self, rec: BondTruncation) -> None:
        self.records.append(rec)

    def extend(self, recs: Iterable[BondTruncation]) -> None:
        self.records.extend(recs)

    def __len__(self) -> int:
        return len(self.records)

    def total_discarded_weight(self) -> float:
        return float(sum(r.discarded_weight for r in self.records))

    def max_relative_weight(self) -> float:
        return max((r.relative_weight for r in self.records), default=0.0)

    def truncated_records(self) -> list[BondTruncation]:
        return [r for r in self.records if r.discarded > 0]


# -- raw train helpers -------------------------------------------------------


def _check_train(tensors: Sequence[np.ndarray], rank: int) -> None:
    if not tensors:
        raise ValueError("empty tensor train")
    for q, t in enumerate(tensors):
        if t.ndim != rank:
            raise ValueError(f"site {q}: expected rank-{rank} tensor")
    if tensors[0].shape[0] != 1 or tensors[-1].shape[-1] != 1:
        raise ValueError("outer bonds must have size 1")
    for q in range(len(tensors) - 1):
        if tensors[q].shape[-1] != tensors[q + 1].shape[0]:
            raise ValueError(f"bond mismatch between sites {q} and {q + 1}")


def _fuse(t: np.ndarray) -> np.ndarray:
    """View a train tensor as (left, fused physical, right)."""
    return t.reshape(t.shape[0], -1, t.shape[-1])


def _right_canonicalize(tensors: list[np.ndarray]) -> list[np.ndarray]:
    """LQ sweep making every site except 0 a right isometry."""
    out = [t for t in tensors]
    for q in range(len(out) - 1, 0, -1):
        t = _fuse(out[q])
        l, p, r = t.shape
        qmat, rmat = np.linalg.qr(t.reshape(l, p * r).conj().T)
        keep = qmat.shape[1]
        out[q] = qmat.conj().T.reshape((keep,) + out[q].shape[1:-1] + (r,))
        prev = _fuse(out[q - 1])
        merged = np.tensordot(prev, rmat.conj().T, axes=(2, 0))
        out[q - 1] = merged.reshape(out[q - 1].shape[:-1] + (keep,))
    return out


def _shift_center_right(tensors: list[np.ndarray], upto: int) -> list[np.ndarray]:
    """QR sweep moving the center from site 0 to `upto` (assumes right-canonical)."""
    out = [t for t in tensors]
    for q in range(upto):
        t = _fuse(out[q])
        l, p, r = t.shape
        qmat, rmat = np.linalg.qr(t.reshape(l * p, r))
        keep = qmat.shape[1]
        out[q] = qmat.reshape(out[q].shape[:-1] + (keep,))
        nxt = _fuse(out[q + 1])
        merged = np.tensordot(rmat, nxt, axes=(1, 0))
        out[q + 1] = merged.reshape((keep,) + out[q + 1].shape[1:])
    return out


def _compress_train(
    tensors: list[np.ndarray], policy: CompressionPolicy
) -> tuple[list[np.ndarray], list[BondTruncation]]:
    """Right-canonicalize, then truncate every bond in one left-to-right sweep.

    The returned train has its orthogonality center on the last site.
    """
    out = _right_canonicalize(tensors)
    n_bonds = len(out) - 1
    records: list[BondTruncation] = []
    for q in range(n_bonds):
        t = _fuse(out[q])
        l, p, r = t.shape
        u, s, vh = np.linalg.svd(t.reshape(l * p, r), full_matrices=False)
        k = policy.keep_count(s, n_bonds)
        total = float(np.linalg.norm(s))
        dropped = float(np.linalg.norm(s[k:]))
        records.append(BondTruncation(q, k, len(s) - k, dropped, total))
        out[q] = u[:, :k].reshape(out[q].shape[:-1] + (k,))
        carry = s[:k, None] * vh[:k]
        nxt = _fuse(out[q + 1])
        merged = np.tensordot(carry, nxt, axes=(1, 0))
        out[q + 1] = merged.reshape((k,) + out[q + 1].shape[1:])
    return out, records


def _train_overlap(a: Sequence[np.ndarray], b: Sequence[np.ndarray]):
    """<a, b> with conjugation on `a`; trains must share physical dims."""
    if len(a) != len(b):
        raise ValueError("train length mismatch")
    env = np.ones((1, 1), dtype=np.result_type(a[0], b[0]))
    for ta, tb in zip(a, b):
        env = np.einsum(
            "xy,xpr,yps->rs", env, _fuse(ta).conj(), _fuse(tb), optimize=True
        )
    return env[0, 0]


def _train_to_dense(tensors: Sequence[np.ndarray]) -> np.ndarray:
    vec = _fuse(tensors[0])[0]
    for t in tensors[1:]:
        vec = np.tensordot(vec, _fuse(t), axes=(-1, 0))
        vec = vec.reshape(-1, vec.shape[-1])
    return vec[:, 0]


def _train_entropies(
    tensors: list[np.ndarray], base: float = 2.0
) -> np.ndarray:
    """Entanglement entropy at every bond: -sum p log_base p, p = s^2 / sum s^2."""
    out = _right_canonicalize(tensors)
    ents = np.zeros(max(len(out) - 1, 0))
    for q in range(len(out) - 1):
        t = _fuse(out[q])
        l, p, r = t.shape
        u, s, vh = np.linalg.svd(t.reshape(l * p, r), full_matrices=False)
        w = s * s
        total = w.sum()
        if total > 0.0:
            w = w / total
            w = w[w > 1e-300]
            ents[q] = float(-(w * np.log(w)).sum() / np.log(base))
        carry = s[:, None] * vh
        nxt = _fuse(out[q + 1])
        merged = np.tensordot(carry, nxt, axes=(1, 0))
        out[q + 1] = merged.reshape((len(s),) + out[q + 1].shape[1:])
    return ents


def _isometry_defect(tensors: Sequence[np.ndarray], center: int) -> float:
    worst = 0.0
    for q, t in enumerate(tensors):
        f = _fuse(t)
        l, p, r = f.shape
        if q < center:
            m = f.reshape(l * p, r)
            worst = max(worst, float(np.abs(m.conj().T @ m - np.eye(r)).max()))
        elif q > center:
            m = f.reshape(l, p * r)
            worst = max(worst, float(np.abs(m @ m.conj().T - np.eye(l)).max()))
    return worst


def _apply_single_to_train(
    tensors: list[np.ndarray], q: int, mat: np.ndarray
) -> None:
    """In-place `mat` action on the physical index of one rank-3 site."""
    tensors[q] = np.einsum("ab,lbr->lar", mat, tensors[q])


def _apply_two_site_to_train(
    tensors: list[np.ndarray],
    q: int,
    mat: np.ndarray,
    policy: CompressionPolicy | None = None,
    log: TruncationLog | None = None,
) -> None:
    """In-place two-site update on a rank-3 train: contract sites q, q+1,
    act with `mat` on the fused physical pair, split back by SVD.

    Without a policy the split is exact up to the rank floor; with one, the
    bond is truncated immediately (records land in `log`).  Singular values
    are absorbed into the right tensor.
    """
    a, b = tensors[q], tensors[q + 1]
    l, p, _ = a.shape
    _, p2, r = b.shape
    blob = np.tensordot(a, b, axes=(2, 0))  # (l, p, p2, r)
    blob = np.einsum("ab,lbr->lar", mat, blob.reshape(l, p * p2, r))
    m = blob.reshape(l * p, p2 * r)
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if policy is None:
        k = max(int(np.sum(s > RANK_TOL * s[0])), 1) if s[0] > 0 else 1
    else:
        k = policy.keep_count(s, max(len(tensors) - 1, 1))
        if log is not None:
            log.add(
                BondTruncation(
                    q,
                    k,
                    len(s) - k,
                    float(np.linalg.norm(s[k:])),
                    float(np.linalg.norm(s)),
                )
            )
    tensors[q] = u[:, :k].reshape(l, p, k)
    tensors[q + 1] = (s[:k, None] * vh[:k]).reshape(k, p2, r)


# -- matrix product state ----------------------------------------------------


@dataclass(eq=False)
class PtmMps:
    """Tensor train with site shapes (left, phys, right).

    Physical dimension 4 holds operator coefficients over sigma = P/sqrt(2);
    physical dimension 2 holds a statevector.  `center` is the orthogonality
    center when known (None after raw constructions).
    """

    tensors: tuple[np.ndarray, ...]
    center: int | None = None

    def __post_init__(self):
        self.tensors = tuple(np.asarray(t) for t in self.tensors)
        _check_train(self.tensors, 3)
        if self.center is not None and not (
            0 <= self.center < len(self.tensors)
        ):
            raise ValueError("center out of range")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dim(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[-1] for t in self.tensors[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def norm(self) -> float:
        return float(np.sqrt(np.real(_train_overlap(self.tensors, self.tensors))))

    def overlap(self, other: "PtmMps"):
        return _train_overlap(self.tensors, other.tensors)

    def to_dense(self) -> np.ndarray:
        return _train_to_dense(self.tensors)

    def scaled(self, factor: float) -> "PtmMps":
        ts = list(self.tensors)
        ts[0] = ts[0] * factor
        return PtmMps(tuple(ts), self.center)

    def canonicalize(self, center: int = 0) -> "PtmMps":
        ts = _right_canonicalize(list(self.tensors))
        ts = _shift_center_right(ts, center)
        return PtmMps(tuple(ts), center)

    def canonical_defect(self) -> float:
        if self.center is None:
            raise ValueError("no declared center")
        return _isometry_defect(self.tensors, self.center)

    def compress(
        self, policy: CompressionPolicy, log: TruncationLog | None = None
    ) -> "PtmMps":
        ts, recs = _compress_train(list(self.tensors), policy)
        if log is not None:
            log.extend(recs)
        return PtmMps(tuple(ts), len(ts) - 1)

    def entanglement_entropies(self) -> np.ndarray:
        return _train_entropies(list(self.tensors))

    def max_entropy(self) -> float:
        ents = self.entanglement_entropies()
        return float(ents.max()) if len(ents) else 0.0

    def project_physical(self, components: Sequence[int]) -> "PtmMps":
        """Keep only the listed physical components (e.g. (0, 3) for I and Z)."""
        idx = list(components)
        ts = tuple(t[:, idx, :] for t in self.tensors)
        return PtmMps(ts, None)


# -- matrix product operator -------------------------------------------------


@dataclass(eq=False)
class PtmMpo:
    """Superoperator train with site shapes (left, out, in, right), phys 4."""

    tensors: tuple[np.ndarray, ...]
    center: int | None = None

    def __post_init__(self):
        self.tensors = tuple(np.asarray(t) for t in self.tensors)
        _check_train(self.tensors, 4)
        for q, t in enumerate(self.tensors):
            if t.shape[1] != 4 or t.shape[2] != 4:
                raise ValueError(f"site {q}: physical indices must have size 4")

    @staticmethod
    def identity(n: int) -> "PtmMpo":
        site = np.eye(4).reshape(1, 4, 4, 1)
        return PtmMpo(tuple(site.copy() for _ in range(n)), 0)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[-1] for t in self.tensors[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def to_dense(self) -> np.ndarray:
        acc = self.tensors[0][0]  # (out, in, r)
        rows, cols = 4, 4
        for t in self.tensors[1:]:
            acc = np.einsum("OIl,labr->OaIbr", acc, t, optimize=True)
            rows, cols = rows * 4, cols * 4
            acc = acc.reshape(rows, cols, t.shape[-1])
        return acc[:, :, 0]

    def transpose(self) -> "PtmMpo":
        return PtmMpo(
            tuple(t.transpose(0, 2, 1, 3) for t in self.tensors), self.center
        )

    def frobenius_norm(self) -> float:
        return float(
            np.sqrt(np.real(_train_overlap(self.tensors, self.tensors)))
        )

    def compress(
        self, policy: CompressionPolicy, log: TruncationLog | None = None
    ) -> "PtmMpo":
        fused = [_fuse(t) for t in self.tensors]
        ts, recs = _compress_train(fused, policy)
        if log is not None:
            log.extend(recs)
        back = tuple(t.reshape(t.shape[0], 4, 4, t.shape[-1]) for t in ts)
        return PtmMpo(back, len(ts) - 1)

    def apply_to_mps(self, mps: PtmMps) -> PtmMps:
        """Coefficient-train action c -> T c (bonds multiply)."""
        return self._apply(mps, transpose=False)

    def apply_transpose_to_mps(self, mps: PtmMps) -> PtmMps:
        """Adjoint action c -> T^T c, used for Heisenberg-side maps."""
        return self._apply(mps, transpose=True)

    def _apply(self, mps: PtmMps, transpose: bool) -> PtmMps:
        if mps.phys_dim != 4:
            raise ValueError("operator trains act on physical dimension 4")
        if mps.n_sites != self.n_sites:
            raise ValueError("size mismatch")
        spec = "LbaR,lbm->LlaRm" if transpose else "LabR,lbm->LlaRm"
        out = []
        for o, a in zip(self.tensors, mps.tensors):
            t = np.einsum(spec, o, a, optimize=True)
            out.append(
                t.reshape(
                    o.shape[0] * a.shape[0], 4, o.shape[-1] * a.shape[-1]
                )
            )
        return PtmMps(tuple(out), None)


def mpo_multiply(a: PtmMpo, b: PtmMpo) -> PtmMpo:
    """Composition `a after b` (transfer matrices multiply, bonds multiply)."""
    if a.n_sites != b.n_sites:
        raise ValueError("size mismatch")
    out = []
    for ta, tb in zip(a.tensors, b.tensors):
        t = np.einsum("LakR,lkbm->LlabRm", ta, tb, optimize=True)
        out.append(
            t.reshape(
                ta.shape[0] * tb.shape[0], 4, 4, ta.shape[-1] * tb.shape[-1]
            )
        )
    return PtmMpo(tuple(out), None)


def mpo_multiply_compress(
    a: PtmMpo,
    b: PtmMpo,
    policy: CompressionPolicy,
    log: TruncationLog | None = None,
) -> PtmMpo:
    return mpo_multiply(a, b).compress(policy, log)


# -- builders ----------------------------------------------------------------


def _split_two_site_ptm(t16: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact rank-revealing split of a 16x16 two-site transfer matrix."""
    t = t16.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(16, 16)
    u, s, vh = np.linalg.svd(t)
    k = max(int(np.sum(s > RANK_TOL * s[0])), 1) if s[0] > 0 else 1
    left = (u[:, :k] * np.sqrt(s[:k])).reshape(1, 4, 4, k)
    right = (np.sqrt(s[:k])[:, None] * vh[:k]).reshape(k, 4, 4, 1)
    return left, right


def mpo_from_layer(layer, n_qubits: int, inverse: bool = False) -> PtmMpo:
    """Exact transfer-matrix MPO of one circuit layer (or its inverse).

    Gate blocks must have disjoint supports and two-qubit blocks must sit on
    nearest-neighbour bonds.  Bond dimension equals the conjugation rank of
    the block (1 for identity, 4 for CZ-like gates, up to 16 in general).
    """
    sites: list[np.ndarray] = [
        np.eye(4).reshape(1, 4, 4, 1).copy() for _ in range(n_qubits)
    ]
    used: set[int] = set()

    def claim(qubits):
        for q in qubits:
            if q in used:
                raise ValueError(f"overlapping gate supports at qubit {q}")
            if not 0 <= q < n_qubits:
                raise ValueError(f"qubit {q} out of range")
            used.add(q)

    for q, gate in layer.singles:
        claim((q,))
        g = np.asarray(gate)
        sites[q] = single_qubit_ptm(g.conj().T if inverse else g).reshape(
            1, 4, 4, 1
        )

    bonds = layer.bonds_for(n_qubits)
    if bonds:
        g = layer.gate.conj().T if inverse else layer.gate
        left, right = _split_two_site_ptm(two_qubit_ptm(g))
        for i, j in bonds:
            if j != i + 1:
                raise ValueError("two-qubit blocks must be nearest-neighbour")
            claim((i, j))
            sites[i], sites[j] = left, right
    return PtmMpo(tuple(sites))


def channel_mpo(channel, inverse: bool = False) -> PtmMpo:
    """Diagonal MPO of a Pauli channel (or its exact inverse), bond <= 4."""
    diag = channel.ptm_diagonal() if isinstance(channel, SparsePauliLindblad) else channel
    if not isinstance(diag, PauliDiagonal):
        raise TypeError("expected a SparsePauliLindblad or PauliDiagonal")
    if inverse:
        diag = diag.inverse()
    eye = np.eye(4)
    sites = tuple(
        np.einsum("lar,ab->labr", t, eye) for t in diag.mps_tensors()
    )
    return PtmMpo(sites)


def pauli_mps(p: PauliString) -> PtmMps:
    """Product coefficient train of a Hermitian Pauli string."""
    if not p.is_hermitian():
        raise ValueError("observable must be Hermitian")
    sites = []
    for q in range(p.n):
        vec = np.zeros((1, 4, 1))
        vec[0, LETTER_AXIS.index(p.letter(q)), 0] = np.sqrt(2.0)
        sites.append(vec)
    sites[0] = sites[0] * float(np.real(p.sign))
    return PtmMps(tuple(sites), 0)


def _bell_state_pair() -> tuple[np.ndarray, np.ndarray]:
    a = np.zeros((1, 2, 2), dtype=complex)
    b = np.zeros((2, 2, 1), dtype=complex)
    for s in range(2):
        a[0, s, s] = 1.0 / np.sqrt(2.0)
        b[s, s, 0] = 1.0
    return a, b


def state_mps(n: int, init=None) -> PtmMps:
    """Statevector train (physical dimension 2) of an initial-state selector."""
    from ..circuits import InitialState, eigenstate_rotation

    init = init or InitialState("zeros")
    zero = np.zeros((1, 2, 1), dtype=complex)
    zero[0, 0, 0] = 1.0
    if init.kind == "zeros":
        return PtmMps(tuple(zero.copy() for _ in range(n)), 0)
    if init.kind == "plus_bell":
        if n % 2 == 0:
            raise ValueError("plus_bell needs an odd chain")
        plus = np.zeros((1, 2, 1), dtype=complex)
        plus[0, :, 0] = 1.0 / np.sqrt(2.0)
        sites: list[np.ndarray] = [plus]
        for _ in range((n - 1) // 2):
            a, b = _bell_state_pair()
            sites.extend((a, b))
        return PtmMps(tuple(sites), 0)
    if init.kind == "pauli_eigenstate":
        if init.letters is None or len(init.letters) != n:
            raise ValueError("eigenstate letters must cover every qubit")
        sites = []
        for c in init.letters:
            rot = eigenstate_rotation(c)
            sites.append((rot @ zero[0]).reshape(1, 2, 1))
        return PtmMps(tuple(sites), 0)
    raise ValueError(f"unknown initial state {init.kind!r}")


def ptm_state_mps(n: int, init=None) -> PtmMps:
    """Coefficient train of the initial density matrix (physical dimension 4).

    Overlaps with observable trains give Tr[rho O] directly.
    """
    from ..circuits import InitialState

    init = init or InitialState("zeros")
    letter_site = {}
    for a, letter in enumerate(LETTER_AXIS):
        vec = np.zeros((1, 4, 1))
        vec[0, 0, 0] = 1.0 / np.sqrt(2.0)
        if a:
            vec[0, a, 0] = 1.0 / np.sqrt(2.0)
        letter_site[letter] = vec
    letter_site["I"] = letter_site["Z"]  # selector treats I as |0>
    if init.kind == "zeros":
        return PtmMps(tuple(letter_site["Z"].copy() for _ in range(n)), 0)
    if init.kind == "pauli_eigenstate":
        if init.letters is None or len(init.letters) != n:
            raise ValueError("eigenstate letters must cover every qubit")
        return PtmMps(
            tuple(letter_site[c].copy() for c in init.letters), 0
        )
    if init.kind == "plus_bell":
        if n % 2 == 0:
            raise ValueError("plus_bell needs an odd chain")
        sites: list[np.ndarray] = [letter_site["X"].copy()]
        # Bell pair: rho = (II + XX - YY + ZZ) / 4, coefficient matrix
        # diag(1, 1, -1, 1) / 2 over the sigma x sigma basis.
        signs = np.array([1.0, 1.0, -1.0, 1.0])
        a = np.zeros((1, 4, 4))
        b = np.zeros((4, 4, 1))
        for k in range(4):
            a[0, k, k] = 1.0 / np.sqrt(2.0)
            b[k, k, 0] = signs[k] / np.sqrt(2.0)
        for _ in range((n - 1) // 2):
            sites.extend((a.copy(), b.copy()))
        return PtmMps(tuple(sites), 0)
    raise ValueError(f"unknown initial state {init.kind!r}")
