"""Noise-inverting map built layer by layer as a compressed MPO.

For a noisy circuit whose layer l applies channel then gates, the map that
turns noisy expectation values into ideal ones is

    M = (U_L ... U_1) o (Lambda_1^-1 U_1^-1 ... Lambda_L^-1 U_L^-1),

i.e. the ideal circuit composed with the inverted noisy circuit.  It is
accumulated from the middle of that product outwards,

    M_0 = 1,    M_l = U_l o M_{l-1} o Lambda_l^-1 o U_l^-1,

so that with weak noise every intermediate MPO stays close to the identity
and compresses well.  Each iteration runs in two compressed steps: absorb the
inverse channel on the incoming side, then sandwich between the layer gates
and their inverses (a local two-site update per gate, since a unitary
transfer matrix is orthogonal and its inverse is its transpose).

The observable side works through the adjoint: `modify_observable` returns
the coefficient train of M^T applied to a Pauli observable, whose overlap
with the noisy state reproduces the ideal expectation value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..circuits import BrickworkCircuit
from ..noise import SparsePauliLindblad
from ..pauli import PauliString
from .ops import (
    CompressionPolicy,
    PtmMpo,
    PtmMps,
    TruncationLog,
    _apply_single_to_train,
    _apply_two_site_to_train,
    _compress_train,
    channel_mpo,
    mpo_multiply_compress,
    pauli_mps,
    single_qubit_ptm,
    two_qubit_ptm,
)

Window = tuple[int, int]


@dataclass
class TemMap:
    """Inverse-noise map after `layers_applied` circuit layers."""

    mpo: PtmMpo
    layers_applied: int
    policy: CompressionPolicy
    log: TruncationLog
    windows: tuple[Window, ...] | None = None

    @property
    def n_qubits(self) -> int:
        return self.mpo.n_sites

    @property
    def max_bond(self) -> int:
        return self.mpo.max_bond

    def identity_defect(self) -> float:
        """Frobenius distance to the identity map, normalised per site."""
        eye = PtmMpo.identity(self.n_qubits)
        d2 = (
            self.mpo.frobenius_norm() ** 2
            - 2.0 * np.real(_overlap_mpo(eye, self.mpo))
            + eye.frobenius_norm() ** 2
        )
        return float(np.sqrt(max(d2, 0.0)) / eye.frobenius_norm())


def _overlap_mpo(a: PtmMpo, b: PtmMpo):
    from .ops import _train_overlap

    return _train_overlap(
        [t.reshape(t.shape[0], 16, t.shape[-1]) for t in a.tensors],
        [t.reshape(t.shape[0], 16, t.shape[-1]) for t in b.tensors],
    )


def _intersects(qubits, window: Window | None) -> bool:
    if window is None:
        return True
    lo, hi = window
    return min(qubits) <= hi and max(qubits) >= lo


def _restrict_channel(
    channel: SparsePauliLindblad, window: Window | None
) -> SparsePauliLindblad:
    """Zero out generator rates with support outside the window."""
    if window is None:
        return channel
    rates = np.array(
        [
            lam if _intersects(gen.support or (-1,), window) else 0.0
            for gen, lam in zip(channel.basis.entries, channel.rates)
        ]
    )
    return SparsePauliLindblad(channel.basis, rates, channel.layer_id)


def light_cone_windows(
    circuit: BrickworkCircuit, target, margin: int = 0
) -> tuple[Window, ...]:
    """Per-layer qubit interval reachable backwards from the target support.

    `target` is a PauliString or an explicit (lo, hi) interval at the end of
    the circuit.  Gates outside the interval of their layer cannot influence
    the target observable.  `margin` widens every window by that many qubits
    on each side (clipped to the chain), giving the wider corridors used when
    the construction is only approximately local.
    """
    n = circuit.n_qubits
    if margin < 0:
        raise ValueError("margin must be non-negative")
    if isinstance(target, PauliString):
        sup = target.support
        if not sup:
            raise ValueError("identity observable has an empty light cone")
        lo, hi = min(sup), max(sup)
    else:
        lo, hi = target
    if not (0 <= lo <= hi < n):
        raise ValueError("window out of range")
    windows: list[Window] = [None] * len(circuit.layers)  # type: ignore[list-item]
    for idx in range(len(circuit.layers) - 1, -1, -1):
        for qubits, _ in circuit.layers[idx].blocks(n):
            if _intersects(qubits, (lo, hi)):
                lo = min(lo, *qubits)
                hi = max(hi, *qubits)
        windows[idx] = (max(lo - margin, 0), min(hi + margin, n - 1))
    return tuple(windows)


def _fused(mpo: PtmMpo) -> list[np.ndarray]:
    return [t.reshape(t.shape[0], 16, t.shape[-1]).copy() for t in mpo.tensors]


def _unfused(ts: Sequence[np.ndarray]) -> PtmMpo:
    return PtmMpo(
        tuple(t.reshape(t.shape[0], 4, 4, t.shape[-1]) for t in ts),
        len(ts) - 1,
    )


def _sandwich_layer(
    mpo: PtmMpo,
    layer,
    n: int,
    policy: CompressionPolicy,
    log: TruncationLog,
    window: Window | None,
) -> PtmMpo:
    """One conjugation step: gates on the out legs, inverses on the in legs."""
    ts = _fused(mpo)
    for q, gate in layer.singles:
        if not _intersects((q,), window):
            continue
        t1 = single_qubit_ptm(gate)
        _apply_single_to_train(ts, q, np.kron(t1, t1))
    bonds = [b for b in layer.bonds_for(n) if _intersects(b, window)]
    if bonds:
        t4 = two_qubit_ptm(layer.gate).reshape(4, 4, 4, 4)
        # W acts on the fused (out, in) pairs of two adjacent sites: the same
        # orthogonal transfer matrix hits the out legs and, transposed, the
        # in legs.
        w = np.einsum("xyab,uvij->xuyvaibj", t4, t4).reshape(256, 256)
        for i, j in bonds:
            if j != i + 1:
                raise ValueError("two-qubit blocks must be nearest-neighbour")
            _apply_two_site_to_train(ts, i, w, policy, log)
    ts, recs = _compress_train(ts, policy)
    log.extend(recs)
    return _unfused(ts)


def tem_map_steps(
    circuit: BrickworkCircuit,
    channels: Mapping[str, SparsePauliLindblad] | None,
    chi_max: int | None = None,
    cutoff: float | None = 1e-12,
    light_cone=None,
    cone_margin: int = 1,
) -> Iterator[TemMap]:
    """Yield the map after each layer of the recurrence."""
    n = circuit.n_qubits
    policy = CompressionPolicy(cutoff=cutoff, max_bond=chi_max)
    windows = (
        light_cone_windows(circuit, light_cone, cone_margin)
        if light_cone is not None
        else None
    )
    log = TruncationLog()
    mpo = PtmMpo.identity(n)
    channels = channels or {}
    for idx, layer in enumerate(circuit.layers):
        window = windows[idx] if windows is not None else None
        ch = channels.get(layer.noise_slot) if layer.noise_slot else None
        if ch is not None:
            inv = channel_mpo(_restrict_channel(ch, window), inverse=True)
            mpo = mpo_multiply_compress(mpo, inv, policy, log)
        mpo = _sandwich_layer(mpo, layer, n, policy, log, window)
        yield TemMap(mpo, idx + 1, policy, log, windows)


def build_tem_map(
    circuit: BrickworkCircuit,
    channels: Mapping[str, SparsePauliLindblad] | None,
    chi_max: int | None = None,
    cutoff: float | None = 1e-12,
    light_cone=None,
    cone_margin: int = 1,
) -> TemMap:
    """Accumulate the full inverse-noise map over all circuit layers.

    `chi_max` caps every bond (hard-cap policy); `cutoff` is the relative
    2-norm budget per compression sweep.  Truncations are never fatal: they
    are recorded in the returned map's log.

    `light_cone` (a PauliString or a (lo, hi) interval) switches on the
    corridor variant: gates and inverse-noise generators outside each layer's
    backward window are dropped and the map stays an exact identity there.
    Gate dropping alone never changes the target's expectation value; zeroing
    the noise inversions as well is an approximation that becomes exact as
    the corridor widens, so `cone_margin` pads the strict cone (default one
    qubit each side).
    """
    last = TemMap(
        PtmMpo.identity(circuit.n_qubits),
        0,
        CompressionPolicy(cutoff=cutoff, max_bond=chi_max),
        TruncationLog(),
        None,
    )
    for last in tem_map_steps(
        circuit, channels, chi_max, cutoff, light_cone, cone_margin
    ):
        pass
    return last


def modify_observable(
    tem_map: TemMap,
    observable: PauliString,
    cutoff: float | None = 1e-12,
    chi_max: int | None = None,
    log: TruncationLog | None = None,
) -> PtmMps:
    """Coefficient train of the adjoint map applied to a Pauli observable.

    Estimating this train on the noisy state reproduces the noiseless
    expectation value of the original observable.
    """
    if observable.n != tem_map.n_qubits:
        raise ValueError("observable size mismatch")
    obs = pauli_mps(observable)
    out = tem_map.mpo.apply_transpose_to_mps(obs)
    return out.compress(CompressionPolicy(cutoff=cutoff, max_bond=chi_max), log)


def component_weights(mps: PtmMps, observable: PauliString) -> tuple[float, float]:
    """Split a modified observable into `c * O` plus a residual.

    Returns (c, residual 2-norm).  With invertible in-model noise c >= 1: the
    inverse channel amplifies the observable's own component.
    """
    base = pauli_mps(observable)
    denom = float(np.real(base.overlap(base)))
    c = float(np.real(base.overlap(mps))) / denom
    # Norm of mps - c*base via a direct-sum train and QR canonicalization;
    # the Pythagorean shortcut sqrt(|mps|^2 - c^2 |base|^2) loses half the
    # digits to cancellation when the residual is tiny.
    n = mps.n_sites
    diff: list[np.ndarray] = []
    for q in range(n):
        a, b = mps.tensors[q], base.tensors[q]
        if q == 0:
            b = -c * b
        if n == 1:
            diff.append(a + b)
        elif q == 0:
            diff.append(np.concatenate([a, b], axis=2))
        elif q == n - 1:
            diff.append(np.concatenate([a, b], axis=0))
        else:
            block = np.zeros(
                (a.shape[0] + b.shape[0], 4, a.shape[2] + b.shape[2])
            )
            block[: a.shape[0], :, : a.shape[2]] = a
            block[a.shape[0] :, :, a.shape[2] :] = b
            diff.append(block)
    centered = PtmMps(tuple(diff), None).canonicalize(0)
    return c, float(np.linalg.norm(centered.tensors[0]))


def mitigated_estimate(
    shots,
    tem_map: TemMap,
    observable: PauliString,
    calibration: np.ndarray | None = None,
    cutoff: float | None = 1e-12,
):
    """Estimate the noise-free expectation value from randomized shots.

    Contracts the shots' dual frames against the modified-observable train;
    per-qubit readout calibration factors apply per Pauli component, exactly
    as in `measurement.estimate`.  Returns an EstimateResult.
    """
    from ..measurement import estimate

    if shots.n_qubits != tem_map.n_qubits:
        raise ValueError("shot data size mismatch")
    obs = modify_observable(tem_map, observable, cutoff=cutoff)
    return estimate(shots, obs, calibration=calibration)


@dataclass(frozen=True)
class ConvergenceReport:
    """Bond-dimension convergence diagnostics for a sweep of runs."""

    chis: tuple[int, ...]
    values: tuple[float, ...]
    delta_curve: tuple[float, ...]
    extrapolated: float
    delta_chi: tuple[float, ...]
    entropies: tuple[float, ...] | None = None
    projected_entropies: tuple[float, ...] | None = None


def convergence_report(
    chis: Sequence[int],
    values: Sequence[float],
    states: Sequence[PtmMps] | None = None,
    min_chi: int | None = None,
) -> ConvergenceReport:
    """Successive differences, 1/chi extrapolation and entropy ceilings.

    The extrapolated value is the intercept of a straight-line fit of the
    expectation values against 1/chi (restricted to chi >= `min_chi` when
    given); `delta_chi` is the absolute distance of each run from it.  With
    `states` the report includes the maximal bond entropy of each run and the
    entropy of the I/Z-projected train (operator trains only).
    """
    if len(chis) != len(values):
        raise ValueError("chis and values must align")
    if states is not None and len(states) != len(chis):
        raise ValueError("states must align with chis")
    if len(chis) < 3:
        raise ValueError("need at least three bond dimensions")
    order = np.argsort(chis)
    chis_s = tuple(int(chis[i]) for i in order)
    vals_s = tuple(float(values[i]) for i in order)
    if len(set(chis_s)) < len(chis_s):
        raise ValueError("duplicate bond dimensions")
    fit_idx = [
        i for i, c in enumerate(chis_s) if min_chi is None or c >= min_chi
    ]
    if len(fit_idx) < 2:
        raise ValueError("need at least two points above min_chi")
    x = np.array([1.0 / chis_s[i] for i in fit_idx])
    y = np.array([vals_s[i] for i in fit_idx])
    slope, intercept = np.polyfit(x, y, 1)
    deltas = tuple(
        float(abs(vals_s[i] - vals_s[i - 1])) for i in range(1, len(vals_s))
    )
    delta_chi = tuple(float(abs(v - intercept)) for v in vals_s)
    entropies = None
    projected = None
    if states is not None:
        states_s = [states[i] for i in order]
        entropies = tuple(s.max_entropy() for s in states_s)
        if states_s and states_s[0].phys_dim == 4:
            projected = tuple(
                s.project_physical((0, 3)).max_entropy() for s in states_s
            )
    return ConvergenceReport(
        chis_s,
        vals_s,
        deltas,
        float(intercept),
        delta_chi,
        entropies,
        projected,
    )
