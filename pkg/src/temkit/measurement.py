"""Randomized informationally-complete measurements and their estimators.

Each shot measures every qubit in a random local basis drawn from a
per-qubit distribution over {X, Y, Z}.  Estimation inverts the sampling via
per-outcome dual operators ``D = (I +/- p^-1 P)/2``; readout noise is
symmetrized by random pre-measurement bit flips and undone by dividing the
non-identity dual components by the calibrated ``<0|Z|0>`` per qubit.

Shot data is columnar: settings x shots arrays of basis codes (0/1/2 for
X/Y/Z), flip masks, and raw outcome bits.  In every bit mask, bit ``q``
stores qubit ``q`` (LSB first); note this is the reverse of the dense
simulator index, which keeps qubit 0 as the most significant bit.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .circuits import BrickworkCircuit, InitialState
from .exact_sim import (
    MAX_DENSITY_QUBITS,
    apply_gate_state,
    apply_pauli_state,
    evolve_density_matrix,
    initial_statevector,
    layer_tableau,
)
from .noise import SparsePauliLindblad, twirl_layer
from .pauli import PauliString

DEFAULT_READOUT_INFIDELITY = 1.53e-2
BASIS_LETTERS = "XYZ"

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.diag([1.0, -1j])
_ROTATIONS = (_H, _H @ _SDG, np.eye(2, dtype=complex))  # X, Y, Z measurement


@dataclass(frozen=True)
class BasisDistribution:
    """Per-qubit probabilities of measuring in the X, Y, or Z basis."""

    probs: np.ndarray  # shape (n, 3)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("need an (n, 3) probability table")
        if np.any(p < 0.0):
            raise ValueError("negative basis probability")
        if not np.allclose(p.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("per-qubit probabilities must sum to 1")

    @property
    def n_qubits(self) -> int:
        return self.probs.shape[0]

    @property
    def is_ic(self) -> bool:
        """True when every basis can occur, so the duals span all of su(2)."""
        return bool(np.all(self.probs > 0.0))

    @staticmethod
    def ic_default(n: int, signal_qubit: int | None = None,
                   signal: tuple = (0.8, 0.1, 0.1)) -> "BasisDistribution":
        """Uniform 1/3 everywhere; the signal qubit is biased towards X."""
        p = np.full((n, 3), 1.0 / 3.0)
        if signal_qubit is not None:
            p[signal_qubit] = np.asarray(signal, dtype=float)
        return BasisDistribution(p)

    # -- dense single-qubit objects (oracle checks) -------------------------

    def povm_effects(self, q: int) -> list[tuple[int, int, np.ndarray]]:
        """All effects (basis, outcome, matrix): p_b (I +/- P_b) / 2."""
        out = []
        for b, letter in enumerate(BASIS_LETTERS):
            P = PauliString.from_label("+" + letter).matrix()
            for o, sgn in ((0, 1.0), (1, -1.0)):
                out.append((b, o, self.probs[q, b] * (np.eye(2) + sgn * P) / 2))
        return out

    def dual_matrices(self, q: int) -> np.ndarray:
        """Dense duals, shape (3, 2, 2, 2): D[b, o] = (I +/- p^-1 P)/2."""
        if not np.all(self.probs[q] > 0):
            raise ValueError("duals need strictly positive basis probabilities")
        out = np.zeros((3, 2, 2, 2), dtype=complex)
        for b, letter in enumerate(BASIS_LETTERS):
            P = PauliString.from_label("+" + letter).matrix()
            for o, sgn in ((0, 1.0), (1, -1.0)):
                out[b, o] = (np.eye(2) + sgn * P / self.probs[q, b]) / 2.0
        return out

    def dual_vectors(self, calibration: np.ndarray | None = None) -> np.ndarray:
        """Dual components in the normalized Pauli basis (P/sqrt(2)).

        Shape (n, 3, 2, 4): entry [q, b, o] is the component vector of the
        dual for basis b and outcome o on qubit q.  `calibration` divides
        the non-identity components (readout flip correction).  Bases with
        zero probability get zeroed components; they are never sampled.
        """
        n = self.n_qubits
        cal = np.ones(n) if calibration is None else np.asarray(calibration)
        if np.any(cal <= 0):
            raise ValueError("calibration values must be positive")
        d = np.zeros((n, 3, 2, 4))
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        for q in range(n):
            for b in range(3):
                p = self.probs[q, b]
                for o, sgn in ((0, 1.0), (1, -1.0)):
                    d[q, b, o, 0] = inv_sqrt2
                    if p > 0:
                        d[q, b, o, 1 + b] = sgn * inv_sqrt2 / (p * cal[q])
        return d


@dataclass(frozen=True)
class ReadoutModel:
    """Independent asymmetric per-qubit readout flips."""

    p01: np.ndarray  # P(read 1 | true 0)
    p10: np.ndarray  # P(read 0 | true 1)

    def __post_init__(self):
        p01 = np.atleast_1d(np.asarray(self.p01, dtype=float))
        p10 = np.atleast_1d(np.asarray(self.p10, dtype=float))
        if p01.shape != p10.shape:
            raise ValueError("flip probability arrays must align")
        if np.any(p01 < 0) or np.any(p10 < 0) or np.any(p01 + p10 > 1):
            raise ValueError("unphysical readout flip probabilities")
        object.__setattr__(self, "p01", p01)
        object.__setattr__(self, "p10", p10)

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    @staticmethod
    def uniform(n: int, infidelity: float = DEFAULT_READOUT_INFIDELITY,
                asymmetry: float = 0.0) -> "ReadoutModel":
        """Same infidelity everywhere; `asymmetry` shifts weight to 1->0."""
        p01 = np.full(n, infidelity * (1.0 - asymmetry))
        p10 = np.full(n, infidelity * (1.0 + asymmetry))
        return ReadoutModel(p01, p10)

    def expected_z_calibration(self) -> np.ndarray:
        """Exact <0|Z|0> under flip twirling: 1 - p01 - p10 per qubit."""
        return 1.0 - self.p01 - self.p10


@dataclass(frozen=True)
class SettingsPlan:
    """Sampled measurement bases plus the distribution they came from."""

    dist: BasisDistribution
    codes: np.ndarray  # (C, n) int8, 0/1/2 = X/Y/Z

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int8)
        object.__setattr__(self, "codes", codes)
        if codes.ndim != 2 or codes.shape[1] != self.dist.n_qubits:
            raise ValueError("settings must be (C, n_qubits) basis codes")
        if codes.size and (codes.min() < 0 or codes.max() > 2):
            raise ValueError("basis codes must be 0, 1, or 2")

    @property
    def n_settings(self) -> int:
        return self.codes.shape[0]

    @staticmethod
    def from_strings(dist: BasisDistribution, rows) -> "SettingsPlan":
        codes = np.array(
            [[BASIS_LETTERS.index(ch) for ch in row] for row in rows],
            dtype=np.int8,
        )
        return SettingsPlan(dist, codes)


def sample_settings(dist: BasisDistribution, n_settings: int,
                    rng: np.random.Generator) -> SettingsPlan:
    """Draw per-qubit basis codes for every setting."""
    if not dist.is_ic:
        raise ValueError("degenerate basis distribution is not IC")
    n = dist.n_qubits
    u = rng.random((n_settings, n))
    cum = np.cumsum(dist.probs, axis=1)  # (n, 3)
    codes = (u[..., None] > cum[None, :, :]).sum(axis=2)
    return SettingsPlan(dist, codes.astype(np.int8))


@dataclass(frozen=True)
class ShotRecord:
    setting_id: int
    bases: str
    twirl_seed: int
    flip_mask: int
    outcome: int


@dataclass
class ShotData:
    """Columnar C-settings x M-shots measurement data."""

    n_qubits: int
    probs: np.ndarray       # (n, 3) basis distribution used
    bases: np.ndarray       # (C, n) int8 codes 0/1/2 = X/Y/Z
    flip_masks: np.ndarray  # (C, M) uint64, bit q = qubit q
    outcomes: np.ndarray    # (C, M) uint64 raw recorded bits
    twirl_seeds: np.ndarray = field(default=None)  # (C,) uint64

    def __post_init__(self):
        if self.twirl_seeds is None:
            self.twirl_seeds = np.zeros(self.bases.shape[0], dtype=np.uint64)
        if self.bases.shape != (self.flip_masks.shape[0], self.n_qubits):
            raise ValueError("bases shape mismatch")
        if self.flip_masks.shape != self.outcomes.shape:
            raise ValueError("flip mask / outcome shape mismatch")

    @property
    def dist(self) -> BasisDistribution:
        return BasisDistribution(self.probs)

    @property
    def n_settings(self) -> int:
        return self.bases.shape[0]

    @property
    def shots_per_setting(self) -> int:
        return self.outcomes.shape[1]

    def basis_string(self, c: int) -> str:
        return "".join(BASIS_LETTERS[b] for b in self.bases[c])

    def records(self) -> Iterator[ShotRecord]:
        for c in range(self.n_settings):
            bases = self.basis_string(c)
            seed = int(self.twirl_seeds[c])
            for s in range(self.shots_per_setting):
                yield ShotRecord(c, bases, seed,
                                 int(self.flip_masks[c, s]),
                                 int(self.outcomes[c, s]))


def _bit_reverse_table(n: int) -> np.ndarray:
    dim = 1 << n
    rev = np.zeros(dim, dtype=np.uint64)
    for q in range(n):
        bit = (np.arange(dim) >> (n - 1 - q)) & 1
        rev |= (bit << q).astype(np.uint64)
    return rev


def _apply_readout_flips(bits: np.ndarray, readout: ReadoutModel | None,
                         rng: np.random.Generator) -> np.ndarray:
    if readout is None:
        return bits
    out = bits.copy()
    for q in range(readout.n_qubits):
        col = (out >> np.uint64(q)) & np.uint64(1)
        u = rng.random(out.shape)
        flip = np.where(col == 0, u < readout.p01[q], u < readout.p10[q])
        out ^= (flip.astype(np.uint64) << np.uint64(q))
    return out


def generate_shots(
    circuit: BrickworkCircuit,
    channels: Mapping[str, SparsePauliLindblad] | None,
    readout: ReadoutModel | None,
    settings: SettingsPlan,
    shots_per_setting: int,
    rng: np.random.Generator,
    init: InitialState | None = None,
    method: str = "exact",
) -> ShotData:
    """Simulate randomized measurements of the noisy circuit.

    ``method="exact"`` samples outcomes from the exact noisy density matrix;
    Pauli channels are invariant under the Pauli twirl, so this reproduces
    the twirled-execution statistics without per-shot trajectories.
    ``method="trajectory"`` runs per-shot statevector trajectories with
    sampled Pauli errors and fresh twirl frames (Clifford layers only) and
    exists to cross-check the exact path.
    """
    n = circuit.n_qubits
    if settings.dist.n_qubits != n:
        raise ValueError("settings qubit count mismatch")
    if readout is not None and readout.n_qubits != n:
        raise ValueError("readout model size mismatch")
    codes = settings.codes
    C = codes.shape[0]
    M = shots_per_setting
    masks = rng.integers(0, 1 << n, size=(C, M), dtype=np.uint64)
    seeds = rng.integers(0, 2**63, size=C, dtype=np.uint64)
    if method == "exact":
        outcomes = _exact_outcomes(circuit, channels, codes, M, rng, init)
    elif method == "trajectory":
        outcomes = _trajectory_outcomes(circuit, channels, codes, M, seeds, init)
    else:
        raise ValueError(f"unknown shot generation method {method!r}")
    outcomes ^= masks
    outcomes = _apply_readout_flips(outcomes, readout, rng)
    return ShotData(n, settings.dist.probs, codes.astype(np.int8),
                    masks, outcomes, seeds)


def _exact_outcomes(circuit, channels, codes, M, rng, init) -> np.ndarray:
    n = circuit.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(
            f"exact shot generation capped at {MAX_DENSITY_QUBITS} qubits; "
            "use method='trajectory'"
        )
    rho = evolve_density_matrix(circuit, channels, init)
    rev = _bit_reverse_table(n)
    dim = 1 << n
    out = np.zeros((codes.shape[0], M), dtype=np.uint64)
    for c, row in enumerate(codes):
        rc = rho
        for q, code in enumerate(row):
            if code != 2:  # Z basis needs no rotation
                rc = _rotate_dm_single(rc, _ROTATIONS[code], q, n)
        probs = np.clip(np.real(np.diag(rc)), 0.0, None)
        probs /= probs.sum()
        idx = rng.choice(dim, size=M, p=probs)
        out[c] = rev[idx]
    return out


def _rotate_dm_single(rho: np.ndarray, gate: np.ndarray, q: int, n: int):
    r = rho.reshape((2,) * (2 * n))
    r = np.tensordot(gate, r, axes=((1,), (q,)))
    r = np.moveaxis(r, 0, q)
    r = np.tensordot(gate.conj(), r, axes=((1,), (n + q,)))
    r = np.moveaxis(r, 0, n + q)
    dim = 1 << n
    return np.ascontiguousarray(r).reshape(dim, dim)


def _trajectory_outcomes(circuit, channels, codes, M, seeds, init):
    n = circuit.n_qubits
    channels = channels or {}
    base = initial_statevector(n, init)
    tableaus = {
        i: layer_tableau(layer, n)
        for i, layer in enumerate(circuit.layers)
        if layer.noise_slot and layer.noise_slot in channels
    }
    rev = _bit_reverse_table(n)
    out = np.zeros((codes.shape[0], M), dtype=np.uint64)
    dim = 1 << n
    for c, row in enumerate(codes):
        sub = np.random.default_rng(int(seeds[c]))
        for s in range(M):
            vec = base
            for i, layer in enumerate(circuit.layers):
                frame = None
                if i in tableaus:
                    frame = twirl_layer(tableaus[i], sub)
                    vec = apply_pauli_state(vec, frame.pre)
                ch = channels.get(layer.noise_slot) if layer.noise_slot else None
                if ch is not None:
                    err = ch.sample_pauli_error(sub)
                    if err.weight:
                        vec = apply_pauli_state(vec, err)
                for qubits, gate in layer.blocks(n):
                    vec = apply_gate_state(vec, gate, qubits, n)
                if frame is not None:
                    vec = frame.sign * apply_pauli_state(vec, frame.post)
            for q, code in enumerate(row):
                if code != 2:
                    vec = apply_gate_state(vec, _ROTATIONS[code], (q,), n)
            probs = np.abs(vec) ** 2
            probs /= probs.sum()
            out[c, s] = rev[sub.choice(dim, p=probs)]
    return out


@dataclass(frozen=True)
class EstimateResult:
    value: float
    stderr: float
    n_settings: int
    shots_per_setting: int


def _effective_bits(shots: ShotData) -> np.ndarray:
    return shots.outcomes ^ shots.flip_masks


def _xi_pauli(shots: ShotData, observable: PauliString,
              calibration: np.ndarray | None) -> np.ndarray:
    n = shots.n_qubits
    cal = np.ones(n) if calibration is None else np.asarray(calibration)
    if np.any(cal <= 0):
        raise ValueError("calibration values must be positive")
    eff = _effective_bits(shots)
    sign = 1.0 if observable.phase_k == 0 else -1.0
    xi = np.full(shots.outcomes.shape, sign)
    letter_to_code = {"X": 0, "Y": 1, "Z": 2}
    for q in observable.support:
        code = letter_to_code[observable.letter(q)]
        match = (shots.bases[:, q] == code).astype(float)  # (C,)
        bit = ((eff >> np.uint64(q)) & np.uint64(1)).astype(float)  # (C, M)
        scale = 1.0 / (shots.probs[q, code] * cal[q])
        xi *= match[:, None] * (1.0 - 2.0 * bit) * scale
    return xi


def _xi_mps(shots: ShotData, tensors,
            calibration: np.ndarray | None) -> np.ndarray:
    n = shots.n_qubits
    if len(tensors) != n:
        raise ValueError("observable tensor count mismatch")
    d = shots.dist.dual_vectors(calibration)  # (n, 3, 2, 4)
    eff = _effective_bits(shots)
    C, M = shots.outcomes.shape
    xi = np.zeros((C, M))
    for c in range(C):
        env = np.ones((M, 1))
        for q in range(n):
            bit = ((eff[c] >> np.uint64(q)) & np.uint64(1)).astype(np.int64)
            v = d[q, shots.bases[c, q], bit]  # (M, 4)
            env = np.einsum("sl,lar,sa->sr", env, tensors[q], v,
                            optimize=True)
        xi[c] = env[:, 0]
    return xi


def estimate(
    shots: ShotData,
    observable,
    calibration: np.ndarray | None = None,
) -> EstimateResult:
    """Mean and standard error of an observable from randomized shots.

    `observable` is either a Hermitian PauliString or a tensor-train object
    exposing `.tensors` (physical dimension 4, components in the P/sqrt(2)
    basis).  The error combines within-setting and between-setting spread:

        var = sum_{c,s} (xi_cs - xi_c)^2 / (CM)^2
            + sum_c (xi_c - mean)^2 / C^2

    With a single shot per setting the first term vanishes and the second
    is the plain variance of the per-setting values.
    """
    if shots.n_settings == 0 or shots.shots_per_setting == 0:
        raise ValueError("no shots to estimate from")
    if isinstance(observable, PauliString):
        if observable.n != shots.n_qubits:
            raise ValueError("observable size mismatch")
        if not observable.is_hermitian():
            raise ValueError("observable must be Hermitian")
        xi = _xi_pauli(shots, observable, calibration)
    else:
        tensors = getattr(observable, "tensors", observable)
        xi = _xi_mps(shots, tensors, calibration)
    C, M = xi.shape
    per_setting = xi.mean(axis=1)
    value = float(xi.mean())
    within = float(np.sum((xi - per_setting[:, None]) ** 2)) / (C * M) ** 2
    between = float(np.sum((per_setting - value) ** 2)) / C**2
    return EstimateResult(value, float(np.sqrt(within + between)), C, M)


@dataclass(frozen=True)
class CalibrationResult:
    values: np.ndarray  # <0|Z_q|0> per qubit
    stderrs: np.ndarray

    def __getitem__(self, q: int) -> float:
        return float(self.values[q])


def calibrate_readout(
    n: int,
    readout: ReadoutModel | None,
    n_settings: int,
    shots_per_setting: int,
    rng: np.random.Generator,
) -> CalibrationResult:
    """Estimate <0|Z_q|0> from flip-twirled measurements of |0...0>.

    Uses the same flip-twirl as data shots, so asymmetric readout reduces
    to the symmetric factor 1 - p01 - p10.
    """
    C, M = n_settings, shots_per_setting
    masks = rng.integers(0, 1 << n, size=(C, M), dtype=np.uint64)
    recorded = _apply_readout_flips(masks.copy(), readout, rng)
    eff = recorded ^ masks
    values = np.zeros(n)
    errs = np.zeros(n)
    for q in range(n):
        bit = ((eff >> np.uint64(q)) & np.uint64(1)).astype(float)
        xi = 1.0 - 2.0 * bit
        per_setting = xi.mean(axis=1)
        mean = xi.mean()
        within = np.sum((xi - per_setting[:, None]) ** 2) / (C * M) ** 2
        between = np.sum((per_setting - mean) ** 2) / C**2
        values[q] = mean
        errs[q] = np.sqrt(within + between)
    return CalibrationResult(values, errs)


def trex_mitigate(
    values: np.ndarray,
    stderrs: np.ndarray,
    calibrations: np.ndarray,
    calibration_stderrs: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Divide raw values by their readout calibration factors.

    Relative errors of value and calibration add in quadrature.
    """
    values = np.asarray(values, dtype=float)
    stderrs = np.asarray(stderrs, dtype=float)
    cal = np.asarray(calibrations, dtype=float)
    if np.any(cal <= 0):
        raise ValueError("calibration values must be positive")
    corrected = values / cal
    if calibration_stderrs is None:
        errs = stderrs / cal
    else:
        ce = np.asarray(calibration_stderrs, dtype=float)
        safe = np.where(values == 0, 1.0, values)
        errs = np.abs(corrected) * np.sqrt(
            (stderrs / safe) ** 2 + (ce / cal) ** 2
        )
        # a zero raw value keeps the plain scaled error
        errs = np.where(values == 0, stderrs / cal, errs)
    return corrected, errs


# -- shot file io -----------------------------------------------------------


def write_shots(path: str, shots: ShotData) -> None:
    """Plain-text rows: setting_id, bases, flip mask hex, outcome hex.

    In the hex fields bit q is qubit q.  The basis distribution and twirl
    seeds ride in header comments.  A ``.gz`` suffix enables gzip.
    """
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt") as fh:
        fh.write("# temkit-shots v1\n")
        fh.write(
            f"# n_qubits={shots.n_qubits} n_settings={shots.n_settings} "
            f"shots_per_setting={shots.shots_per_setting}\n"
        )
        fh.write("# row: setting_id bases flip_hex outcome_hex (bit q = qubit q)\n")
        for q in range(shots.n_qubits):
            px, py, pz = (float(v) for v in shots.probs[q])
            fh.write(f"# probs {q} {px!r} {py!r} {pz!r}\n")
        for c in range(shots.n_settings):
            fh.write(f"# seed {c} {int(shots.twirl_seeds[c])}\n")
        for rec in shots.records():
            fh.write(
                f"{rec.setting_id} {rec.bases} {rec.flip_mask:x} {rec.outcome:x}\n"
            )


def read_shots(path: str) -> ShotData:
    opener = gzip.open if str(path).endswith(".gz") else open
    header = {}
    seeds = {}
    prob_rows = {}
    rows = []
    with opener(path, "rt") as fh:
        first = fh.readline().strip()
        if first != "# temkit-shots v1":
            raise ValueError("unrecognized shot file header")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                parts = body.split()
                if parts[0] == "seed":
                    seeds[int(parts[1])] = int(parts[2])
                elif parts[0] == "probs":
                    prob_rows[int(parts[1])] = [float(x) for x in parts[2:5]]
                else:
                    for part in parts:
                        k, _, v = part.partition("=")
                        if k and v.isdigit():
                            header[k] = int(v)
                continue
            rows.append(line.split())
    n = header["n_qubits"]
    C = header["n_settings"]
    M = header["shots_per_setting"]
    probs = np.array([prob_rows[q] for q in range(n)])
    bases = np.zeros((C, n), dtype=np.int8)
    masks = np.zeros((C, M), dtype=np.uint64)
    outs = np.zeros((C, M), dtype=np.uint64)
    counts = np.zeros(C, dtype=int)
    for setting_str, basis_str, flip_hex, out_hex in rows:
        c = int(setting_str)
        bases[c] = [BASIS_LETTERS.index(ch) for ch in basis_str]
        s = counts[c]
        masks[c, s] = int(flip_hex, 16)
        outs[c, s] = int(out_hex, 16)
        counts[c] += 1
    if np.any(counts != M):
        raise ValueError("uneven shot counts per setting")
    seed_arr = np.array([seeds.get(c, 0) for c in range(C)], dtype=np.uint64)
    return ShotData(n, probs, bases, masks, outs, seed_arr)
