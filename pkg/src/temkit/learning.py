"""Re-learning the sparse noise model from benchmark signals.

Three stages: exponential decay fits turn cycle-benchmark curves into pair
fidelities sqrt(f f'); Clifford-point circuit signals fine-tune how each
pair splits between a fidelity and its layer conjugate; a non-negative
least-squares fit maps the split fidelities to generator rates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import nnls

from .circuits import BrickworkCircuit, Layer, eigenstate_rotation
from .exact_sim import pauli_propagation
from .noise import SparsePauliLindblad
from .pauli import (
    CliffordLayer,
    PauliString,
    SparseBasis,
    build_anticommutation_matrices,
    conjugate,
)

CB_DEPTHS = (0, 2, 6, 12, 20, 34)


# -- exponential decay fits ---------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Result of fitting mean(d) = spam * pair_fidelity^(2d) in log space."""

    pauli: PauliString
    depths: tuple
    means: tuple
    pair_fidelity: float
    spam: float
    residual: float
    dropped_depths: tuple = ()

    def model(self, d):
        return self.spam * self.pair_fidelity ** (2 * np.asarray(d))


def fit_decay(pauli: PauliString, depths, means, stderrs=None) -> DecayFit:
    """Log-space least squares; slope gives the squared pair fidelity.

    Points consistent with zero (below three standard errors, or
    non-positive without error bars) sit at the noise floor and are
    dropped rather than fitted.
    """
    depths = np.asarray(depths, dtype=float)
    means = np.asarray(means, dtype=float)
    if len(depths) < 3 or 0 not in depths:
        raise ValueError("need at least three depths including zero")
    if len(depths) != len(means):
        raise ValueError("depths and means must align")
    if stderrs is None:
        keep = means > 0
    else:
        stderrs = np.asarray(stderrs, dtype=float)
        keep = means > 3 * stderrs
    dropped = tuple(float(d) for d in depths[~keep])
    x = depths[keep]
    y_lin = means[keep]
    if len(x) < 2 or len(np.unique(x)) < 2:
        raise ValueError("too few points above the noise floor to fit")
    y = np.log(y_lin)
    if stderrs is None:
        w = None
    else:
        # constant relative error in linear space -> weight by mean/stderr
        w = y_lin / np.maximum(stderrs[keep], 1e-300)
    slope, intercept = np.polyfit(x, y, 1, w=w)
    fbar = min(float(np.exp(slope / 2.0)), 1.0)
    spam = float(np.exp(intercept))
    model = spam * fbar ** (2 * x)
    residual = float(np.max(np.abs(model - y_lin))) if len(x) else 0.0
    return DecayFit(pauli, tuple(float(d) for d in depths),
                    tuple(float(m) for m in means), fbar, spam, residual,
                    dropped)


def fit_pair_fidelities(data: Mapping[PauliString, tuple]) -> list[DecayFit]:
    """Fit every benchmarked Pauli; values are (depths, means[, stderrs])."""
    fits = []
    for pauli, series in data.items():
        fits.append(fit_decay(pauli, *series))
    return fits


# -- parallel benchmark settings -----------------------------------------------


@dataclass(frozen=True)
class BenchmarkSetting:
    """One eigenstate preparation covering several basis Paulis at once."""

    letters: str
    measured: tuple[int, ...]  # indices into the sparse basis


def benchmark_settings(basis: SparseBasis) -> list[BenchmarkSetting]:
    """Nine alternating two-letter patterns cover the whole sparse basis.

    Pattern ABAB... hits single-qubit letters A and B on their sublattices
    and every ordered letter pair on every bond as (A,B) ranges over XYZ^2.
    """
    n = basis.n
    out = []
    for a in "XYZ":
        for b in "XYZ":
            letters = "".join(a if q % 2 == 0 else b for q in range(n))
            measured = tuple(
                i for i, p in enumerate(basis.entries)
                if all(letters[q] == p.letter(q) for q in p.support)
            )
            out.append(BenchmarkSetting(letters, measured))
    return out


def verify_coverage(settings: Sequence[BenchmarkSetting],
                    basis: SparseBasis) -> None:
    covered = set()
    for s in settings:
        covered.update(s.measured)
    missing = [str(basis[i]) for i in range(len(basis)) if i not in covered]
    if missing:
        raise ValueError(f"benchmark settings miss basis entries: {missing}")


# -- fidelity splits ------------------------------------------------------------


def alpha_bounds(fbar):
    """Physicality window [fbar, 1/fbar] keeping both split fidelities <= 1."""
    arr = np.asarray(fbar, dtype=float)
    if np.any(arr <= 0) or np.any(arr > 1):
        raise ValueError("pair fidelity must lie in (0, 1]")
    if arr.ndim == 0:
        return float(arr), 1.0 / float(arr)
    return arr, 1.0 / arr


def alpha_of_delta(delta, fbar):
    """Linear parameterization: delta=0 gives alpha_max, delta=1 alpha_min."""
    lo, hi = alpha_bounds(fbar)
    return delta * lo + (1.0 - delta) * hi


class ModelViolationError(ValueError):
    """Clifford target outside the physically reachable fidelity window."""

    def __init__(self, depth: int, target: float, lower: float, upper: float):
        super().__init__(
            f"signal at depth {depth} requires fidelity product {target:.6g} "
            f"outside the reachable interval [{lower:.6g}, {upper:.6g}]"
        )
        self.depth = depth
        self.target = target
        self.lower = lower
        self.upper = upper


@dataclass(frozen=True)
class SegmentReport:
    depth: int
    delta: float
    keys: tuple[tuple[str, int], ...]
    target: float
    achieved: float
    lower_bound: float
    upper_bound: float


@dataclass(frozen=True)
class SplitWeights:
    """Per-slot alpha per basis entry; untouched entries stay symmetric."""

    alphas: dict[str, np.ndarray]
    deltas: dict[str, np.ndarray]  # NaN where no Clifford data constrains it
    segments: tuple[SegmentReport, ...] = ()

    def weighted_fidelities(self, slot: str, pair_fids: np.ndarray):
        """(f, f') arrays under the stored split: f = alpha*fbar, f' = fbar/alpha."""
        a = self.alphas[slot]
        pair_fids = np.asarray(pair_fids, dtype=float)
        return a * pair_fids, pair_fids / a


def symmetric_splits(slots: Sequence[str], basis_size: int) -> SplitWeights:
    return SplitWeights(
        alphas={s: np.ones(basis_size) for s in slots},
        deltas={s: np.full(basis_size, np.nan) for s in slots},
    )


def _path_keys(circuit: BrickworkCircuit, observable: PauliString,
               basis: SparseBasis, slots: Sequence[str]):
    """(slot, basis index) per noisy step, oldest first, plus the ideal sign."""
    probe = {
        s: SparsePauliLindblad(basis, np.zeros(len(basis)), layer_id=s)
        for s in slots
    }
    res = pauli_propagation(circuit, observable, probe)
    keys = []
    for step in reversed(res.steps):
        try:
            keys.append((step.slot, basis.index_of(step.pauli)))
        except KeyError:
            raise ValueError(
                f"path Pauli {step.pauli} at slot {step.slot!r} is outside "
                "the sparse basis; cannot attribute the signal"
            )
    return keys, res.ideal_value


def finetune_splits(
    checkpoints: Sequence[tuple[BrickworkCircuit, PauliString, float]],
    basis: SparseBasis,
    pair_fids: Mapping[str, np.ndarray],
    tol: float = 1e-12,
    slack: float = 1e-9,
) -> SplitWeights:
    """Solve per-segment uniform deltas so the model hits each data point.

    `checkpoints` are (circuit, observable, measured value) at increasing
    depth.  The path of each circuit is split into the keys already fixed
    by earlier points and the new ones; a single delta for the new keys is
    found by bisection of the monotone fidelity product.  Targets within
    relative `slack` of the physical window clamp to its edge (measured
    checkpoints carry shot noise); targets farther out raise
    ModelViolationError.
    """
    slots = sorted(pair_fids)
    size = len(basis)
    alphas = {s: np.ones(size) for s in slots}
    deltas = {s: np.full(size, np.nan) for s in slots}
    assigned: set[tuple[str, int]] = set()
    segments: list[SegmentReport] = []
    for circuit, observable, value in checkpoints:
        keys, ideal = _path_keys(circuit, observable, basis, slots)
        depth = len(keys)
        if ideal == 0.0:
            raise ValueError("checkpoint observable has zero ideal value")
        target_total = value / ideal
        fixed_product = 1.0
        new_mult: dict[tuple[str, int], int] = {}
        for key in keys:
            slot, idx = key
            if key in assigned:
                fixed_product *= alphas[slot][idx] * pair_fids[slot][idx]
            else:
                new_mult[key] = new_mult.get(key, 0) + 1
        if fixed_product <= 0:
            raise ValueError("fixed fidelity product vanished")
        target = target_total / fixed_product
        fbars = np.array([pair_fids[s][i] for s, i in new_mult])
        mults = np.array([m for m in new_mult.values()], dtype=float)
        if not new_mult:
            if abs(target - 1.0) > max(slack, 1e-9):
                raise ModelViolationError(depth, target, 1.0, 1.0)
            continue
        lower = float(np.prod((fbars**2) ** mults))
        upper = 1.0
        if not (lower * (1 - slack) <= target <= upper * (1 + slack)):
            raise ModelViolationError(depth, target, lower, upper)
        target = min(max(target, lower), upper)

        def product(delta):
            a = alpha_of_delta(delta, fbars)
            return float(np.prod((a * fbars) ** mults))

        lo, hi = 0.0, 1.0  # product(0) = 1 >= target >= product(1)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if product(mid) >= target:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol * 1e-3:
                break
        delta = 0.5 * (lo + hi)
        achieved = product(delta)
        for (slot, idx), fbar in zip(new_mult, fbars):
            alphas[slot][idx] = alpha_of_delta(delta, fbar)
            deltas[slot][idx] = delta
        assigned.update(new_mult)
        segments.append(SegmentReport(
            depth, float(delta), tuple(new_mult), float(target),
            float(achieved), lower, upper,
        ))
    return SplitWeights(alphas, deltas, tuple(segments))


# -- generator fit ----------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorFit:
    model: SparsePauliLindblad
    residual: float
    measured_pair_fidelities: np.ndarray
    predicted_pair_fidelities: np.ndarray

    def max_relative_deviation(self) -> float:
        m = self.measured_pair_fidelities
        p = self.predicted_pair_fidelities
        return float(np.max(np.abs(p - m) / m))


def layer_conjugates(tableau: CliffordLayer,
                     basis: SparseBasis) -> list[PauliString]:
    return [conjugate(tableau, p) for p in basis.entries]


def fit_generators(
    pair_fids: np.ndarray,
    alphas: np.ndarray | None,
    M: np.ndarray,
    M_prime: np.ndarray,
    basis: SparseBasis,
    layer_id: str = "",
    maxiter: int | None = None,
) -> GeneratorFit:
    """Non-negative least squares for the generator rates.

    Minimizes || [M; M'] lam + (1/2) log [f(alpha); f'(alpha)] ||_2 over
    lam >= 0, where f = alpha * fbar and f' = fbar / alpha.
    """
    fbar = np.asarray(pair_fids, dtype=float)
    if np.any(fbar <= 0) or np.any(fbar > 1.0 + 1e-12):
        raise ValueError("pair fidelities must lie in (0, 1]")
    a = np.ones_like(fbar) if alphas is None else np.asarray(alphas, dtype=float)
    f = a * fbar
    fp = fbar / a
    if np.any(f > 1.0 + 1e-9) or np.any(fp > 1.0 + 1e-9):
        raise ValueError("split fidelities exceed 1; alphas out of range")
    A = np.vstack([M, M_prime])
    y = -0.5 * np.log(np.concatenate([np.minimum(f, 1.0),
                                      np.minimum(fp, 1.0)]))
    try:
        lam, rnorm = nnls(A, y, maxiter=maxiter)
    except RuntimeError as exc:
        raise RuntimeError(
            f"NNLS failed for layer {layer_id!r}: {exc}; "
            f"system {A.shape[0]}x{A.shape[1]}, "
            f"rank {np.linalg.matrix_rank(A)}"
        ) from exc
    model = SparsePauliLindblad(basis, lam, layer_id=layer_id)
    predicted = np.exp(-(M + M_prime) @ lam)
    return GeneratorFit(model, float(rnorm), fbar, predicted)


# -- model validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Benchmark:
    kind: str
    depth: int
    circuit: BrickworkCircuit
    observables: tuple[PauliString, ...]


@dataclass(frozen=True)
class ValidationRow:
    kind: str
    depth: int
    observable: PauliString
    predicted: float
    simulated: float


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]

    def max_relative_deviation(self) -> dict[tuple[str, int], float]:
        out: dict[tuple[str, int], float] = {}
        for r in self.rows:
            scale = max(abs(r.simulated), 1e-12)
            dev = abs(r.predicted - r.simulated) / scale
            key = (r.kind, r.depth)
            out[key] = max(out.get(key, 0.0), dev)
        return out


def validate_model(
    model_channels: Mapping[str, SparsePauliLindblad],
    benchmarks: Sequence[Benchmark],
    truth_channels: Mapping[str, SparsePauliLindblad],
) -> ValidationReport:
    """Model-predicted vs truth-simulated values on Clifford benchmarks."""
    rows = []
    for bench in benchmarks:
        for obs in bench.observables:
            predicted = pauli_propagation(bench.circuit, obs,
                                          model_channels).value
            simulated = pauli_propagation(bench.circuit, obs,
                                          truth_channels).value
            rows.append(ValidationRow(bench.kind, bench.depth, obs,
                                      predicted, simulated))
    return ValidationReport(tuple(rows))


def repeated_layer_benchmark_with_prep(params, parity: str,
                                       cycles: int) -> Benchmark:
    """Repeated-layer probe with the eigenstate prep folded into the circuit."""
    from .circuits import build_repeated_layer_benchmark

    circ, init, measured = build_repeated_layer_benchmark(params, parity, cycles)
    singles = tuple(
        (q, eigenstate_rotation(c)) for q, c in enumerate(init.letters)
        if c not in ("I", "Z")
    )
    prep = Layer(parity="even", gate=None, noise_slot=None, singles=singles,
                 name="eigenstate_prep", bonds=())
    full = BrickworkCircuit(params.n_qubits, [prep] + list(circ.layers),
                            params)
    obs = tuple(
        PauliString.single(params.n_qubits, q, "X") for q in measured
    )
    return Benchmark(f"repeated_{parity}", cycles, full, obs)


def mirror_benchmark(params, t: int) -> Benchmark:
    from .circuits import build_mirror_circuit

    circ = build_mirror_circuit(params, t)
    n = params.n_qubits
    obs = tuple(PauliString.single(n, q, "Z") for q in range(1, n, 2))
    return Benchmark("mirror", t, circ, obs)
