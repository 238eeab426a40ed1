"""Sparse Pauli-Lindblad noise channels on nearest-neighbour chains.

A channel is ``exp(L)`` with ``L[rho] = sum_j lam_j (P_j rho P_j - rho)`` over
the weight-<=2 nearest-neighbour generator basis (`SparseBasis`).  Such a
channel is diagonal in the Pauli transfer representation: it scales each Pauli
operator Q by a fidelity

    f_Q = exp(-2 * sum of lam_j over generators P_j that anticommute with Q).

Because the generator superoperators commute, the channel factorises into a
product of single-generator channels; that underpins both trajectory sampling
and the factorised diagonal form used by the tensor-network layer.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .pauli import CliffordLayer, PauliString, SparseBasis, multiply

_LETTER_INDEX = {"I": 0, "X": 1, "Y": 2, "Z": 3}
# _LOCAL_AC[a, b] = 1 when single-qubit Paulis a, b anticommute
_LOCAL_AC = np.array(
    [[0, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0]], dtype=np.int64
)


@dataclass
class SparsePauliLindblad:
    """Rates over a fixed sparse generator basis, tagged with a layer id."""

    basis: SparseBasis
    rates: np.ndarray
    layer_id: str = ""

    def __post_init__(self) -> None:
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.shape != (len(self.basis),):
            raise ValueError(
                f"expected {len(self.basis)} rates, got {self.rates.shape}"
            )

    @property
    def n_qubits(self) -> int:
        return self.basis.n

    def scaled(self, factor: float) -> "SparsePauliLindblad":
        return SparsePauliLindblad(self.basis, factor * self.rates, self.layer_id)

    def fidelity(self, p: PauliString) -> float:
        """Pauli fidelity f_P: the channel maps P -> f_P * P."""
        total = 0.0
        for gen, lam in zip(self.basis.entries, self.rates):
            if lam != 0.0 and anticommutes_cached(gen, p):
                total += lam
        return float(np.exp(-2.0 * total))

    def fidelities(self, paulis) -> np.ndarray:
        return np.array([self.fidelity(p) for p in paulis])

    def jump_probabilities(self) -> np.ndarray:
        """Per-generator error probability (1 - exp(-2 lam)) / 2.

        Negative rates (inverse channels) give negative quasi-probabilities;
        trajectory sampling therefore requires all rates >= 0.
        """
        return (1.0 - np.exp(-2.0 * self.rates)) / 2.0

    def sample_pauli_error(self, rng: np.random.Generator) -> PauliString:
        """Draw one Pauli error from the factorised channel."""
        probs = self.jump_probabilities()
        if np.any(probs < 0):
            raise ValueError("cannot sample a channel with negative rates")
        hits = rng.random(len(probs)) < probs
        err = PauliString.identity(self.basis.n)
        for j in np.nonzero(hits)[0]:
            err = multiply(err, self.basis.entries[int(j)])
        return err.bare()

    def ptm_diagonal(self) -> "PauliDiagonal":
        """Factorised diagonal of the channel in the Pauli basis."""
        n = self.basis.n
        site_logs = [np.zeros(4) for _ in range(n)]
        bond_logs = [np.zeros((4, 4)) for _ in range(n - 1)]
        for gen, lam in zip(self.basis.entries, self.rates):
            if lam == 0.0:
                continue
            sup = gen.support
            if len(sup) == 1:
                q = sup[0]
                a = _LETTER_INDEX[gen.letter(q)]
                site_logs[q] -= 2.0 * lam * _LOCAL_AC[a]
            else:
                q = sup[0]
                a = _LETTER_INDEX[gen.letter(q)]
                b = _LETTER_INDEX[gen.letter(q + 1)]
                # anticommutes overall iff the local anticommute parities differ
                par = (_LOCAL_AC[a][:, None] + _LOCAL_AC[b][None, :]) % 2
                bond_logs[q] -= 2.0 * lam * par
        return PauliDiagonal(n, site_logs, bond_logs)

    def to_json(self) -> str:
        entries = [
            {"pauli": format_compact(gen), "rate": float(lam)}
            for gen, lam in zip(self.basis.entries, self.rates)
            if lam != 0.0
        ]
        doc = {
            "version": 1,
            "layer_id": self.layer_id,
            "n_qubits": self.basis.n,
            "entries": entries,
        }
        return json.dumps(doc, indent=1)

    @staticmethod
    def from_json(text: str) -> "SparsePauliLindblad":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported noise-model version {doc.get('version')}")
        basis = SparseBasis(int(doc["n_qubits"]))
        rates = np.zeros(len(basis))
        for entry in doc["entries"]:
            p = parse_compact(entry["pauli"], basis.n)
            rates[basis.index_of(p)] = float(entry["rate"])
        return SparsePauliLindblad(basis, rates, str(doc.get("layer_id", "")))


def anticommutes_cached(a: PauliString, b: PauliString) -> bool:
    # weight-<=2 generators keep this cheap; plain symplectic parity
    return bool(
        (
            bin(a.x_mask & b.z_mask).count("1")
            + bin(a.z_mask & b.x_mask).count("1")
        )
        % 2
    )


def random_sparse_model(
    basis: SparseBasis,
    rng: np.random.Generator,
    scale: float = 5e-3,
    layer_id: str = "",
) -> SparsePauliLindblad:
    """Random nonnegative rates, roughly at device scale."""
    rates = scale * rng.random(len(basis))
    return SparsePauliLindblad(basis, rates, layer_id)


@dataclass
class PauliDiagonal:
    """Diagonal Pauli-basis action factorised over sites and bonds.

    The scale applied to a Pauli with local letters ``a_0 .. a_{n-1}`` is
    ``exp(sum_q site_logs[q][a_q] + sum_q bond_logs[q][a_q, a_{q+1}])``,
    exactly the weight function of a bond-4 matrix product operator.
    """

    n: int
    site_logs: list[np.ndarray]
    bond_logs: list[np.ndarray]

    def inverse(self) -> "PauliDiagonal":
        return PauliDiagonal(
            self.n,
            [-s for s in self.site_logs],
            [-g for g in self.bond_logs],
        )

    def value(self, letters: str) -> float:
        if len(letters) != self.n:
            raise ValueError("letter string length mismatch")
        idx = [_LETTER_INDEX[c] for c in letters]
        tot = sum(self.site_logs[q][idx[q]] for q in range(self.n))
        tot += sum(
            self.bond_logs[q][idx[q], idx[q + 1]] for q in range(self.n - 1)
        )
        return float(np.exp(tot))

    def mps_tensors(self) -> list[np.ndarray]:
        """Bond-4 tensor train of the diagonal weights, shapes (bl, 4, br)."""
        site = [np.exp(s) for s in self.site_logs]
        bond = [np.exp(g) for g in self.bond_logs]
        if self.n == 1:
            return [site[0].reshape(1, 4, 1)]
        tensors: list[np.ndarray] = []
        t0 = np.zeros((1, 4, 4))
        for a in range(4):
            t0[0, a, a] = site[0][a]
        tensors.append(t0)
        for q in range(1, self.n - 1):
            t = np.zeros((4, 4, 4))
            for a in range(4):
                for c in range(4):
                    t[a, c, c] = bond[q - 1][a, c] * site[q][c]
            tensors.append(t)
        tl = np.zeros((4, 4, 1))
        for a in range(4):
            for c in range(4):
                tl[a, c, 0] = bond[self.n - 2][a, c] * site[self.n - 1][c]
        tensors.append(tl)
        return tensors

    def dense_diag(self) -> np.ndarray:
        """Full 4^n diagonal, index = base-4 letters with site 0 slowest."""
        if self.n > 9:
            raise ValueError("dense diagonal capped at 9 sites")
        vec = self.mps_tensors()[0].reshape(4, -1)
        for t in self.mps_tensors()[1:]:
            vec = np.einsum("pa,abc->pbc", vec, t).reshape(-1, t.shape[2])
        return vec.reshape(-1)


@dataclass
class TwirledLayer:
    """One sampled twirling frame: pre before the layer, post after it.

    ``post * U * pre`` equals ``sign * U``; averaging over uniform `pre`
    converts any Pauli-diagonal-izable noise preceding U into its twirl.
    """

    pre: PauliString
    post: PauliString
    sign: int = 1


def twirl_layer(tableau: CliffordLayer, rng: np.random.Generator) -> TwirledLayer:
    """Sample one twirling frame for a Clifford layer tableau."""
    n = tableau.n
    top = 1 << n
    pre = PauliString(n, int(rng.integers(0, top)), int(rng.integers(0, top)), 0)
    post = tableau.apply(pre)
    if not post.is_hermitian():
        raise ValueError("twirl frame picked up a non-real phase")
    return TwirledLayer(pre=pre, post=post.bare(),
                        sign=1 if post.phase_k == 0 else -1)


def format_compact(p: PauliString) -> str:
    """Compact support form, e.g. '+XZ@(3,4)' for X on 3 and Z on 4."""
    sup = p.support
    sign = {0: "+", 1: "+i", 2: "-", 3: "-i"}[p.phase_k % 4]
    if not sup:
        return f"{sign}I@()"
    letters = "".join(p.letter(q) for q in sup)
    return f"{sign}{letters}@({','.join(str(q) for q in sup)})"


_COMPACT_RE = re.compile(r"^([+-]i?)([IXYZ]*)@\(([\d,]*)\)$")


def parse_compact(text: str, n: int) -> PauliString:
    m = _COMPACT_RE.match(text.strip())
    if not m:
        raise ValueError(f"malformed compact Pauli {text!r}")
    sign, letters, sites = m.groups()
    qubits = [int(s) for s in sites.split(",") if s != ""]
    if letters == "I" and not qubits:
        letters = ""
    if len(letters) != len(qubits):
        raise ValueError(f"site count mismatch in {text!r}")
    p = PauliString.identity(n)
    for q, letter in zip(qubits, letters):
        if letter != "I":
            p = multiply(p, PauliString.single(n, q, letter))
    k = {"+": 0, "+i": 1, "-": 2, "-i": 3}[sign]
    return PauliString(n, p.x_mask, p.z_mask, p.phase_k + k)
