"""Fit, overhead, and report-table tests.

Decay fits are checked against the closed-form rate -ln cos(2h) on exact
data and against coverage statistics on noisy data.  Overhead ratios are
checked against hand-evaluated reference rows.  The relative-error report
is exercised on a genuine mismatched-model mitigation run.
"""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from temkit.analysis import (
    CONVERGENCE_CSV_HEADER,
    DECAY_CSV_HEADER,
    OVERHEAD_CSV_HEADER,
    ZNE_LOG_COEFF,
    DecayFit,
    fit_decay_rate,
    relative_error_report,
    sampling_overheads,
    signal_damping,
    theory_decay_rate,
    write_convergence_csv,
    write_decay_csv,
    write_overhead_csv,
)
from temkit.circuits import KickedIsingParams, build_brickwork
from temkit.exact_sim import noisy_expectation_dm
from temkit.noise import SparsePauliLindblad, random_sparse_model
from temkit.pauli import PauliString, SparseBasis
from temkit.tn import (
    build_tem_map,
    convergence_report,
    heisenberg_evolve,
    initial_state_expectation,
    modify_observable,
    pauli_mps,
)


def exact_decay_points(h, t_max=6):
    """Boundary-correlator series cos(2h)^t, the closed-form ideal curve."""
    return [(t, math.cos(2.0 * h) ** t) for t in range(1, t_max + 1)]


# -- decay-rate fits ---------------------------------------------------------


def test_fit_recovers_closed_form_rate_on_exact_data():
    for h in (0.05, 0.1, 0.15):
        fit = fit_decay_rate(exact_decay_points(h))
        assert abs(fit.rate - (-math.log(math.cos(2.0 * h)))) < 1e-10
        assert abs(fit.amplitude - 1.0) < 1e-10
        assert fit.stderr < 1e-12
        assert fit.n_used == 6
        assert fit.dropped == ()


def test_fit_is_flat_without_longitudinal_field():
    fit = fit_decay_rate(exact_decay_points(0.0))
    assert abs(fit.rate) < 1e-12
    assert fit.covers(0.0)


def test_theory_rate_spot_value():
    # -ln cos(0.2) for the h = 0.1 working point.
    assert theory_decay_rate(0.1) == pytest.approx(0.020134, abs=1e-5)
    assert theory_decay_rate(0.0) == 0.0
    with pytest.raises(ValueError, match="cos"):
        theory_decay_rate(math.pi / 3)


def test_fit_matches_polyfit_slope():
    rng = np.random.default_rng(3)
    pts = [(t, math.exp(-0.05 * t + rng.normal(0, 0.1))) for t in range(1, 9)]
    fit = fit_decay_rate(pts)
    slope = np.polyfit([p[0] for p in pts], np.log([p[1] for p in pts]), 1)[0]
    assert fit.rate == pytest.approx(-slope, abs=1e-12)


def test_fit_drops_nonpositive_points_and_flags_them():
    pts = exact_decay_points(0.1, t_max=5) + [(6, 0.0), (7, -0.3)]
    fit = fit_decay_rate(pts)
    assert fit.dropped == (6.0, 7.0)
    assert fit.n_used == 5
    assert abs(fit.rate - theory_decay_rate(0.1)) < 1e-10


def test_fit_input_validation():
    with pytest.raises(ValueError, match="three positive"):
        fit_decay_rate([(1, 0.9), (2, 0.8)])
    with pytest.raises(ValueError, match="three positive"):
        fit_decay_rate([(1, 0.9), (2, -0.8), (3, -0.7), (4, -0.6)])
    with pytest.raises(ValueError, match="distinct time"):
        fit_decay_rate([(2, 0.9), (2, 0.8), (2, 0.7)])


def test_confidence_interval_covers_truth():
    """Two-sided 95% band: at least 90 of 100 seeded trials cover the rate."""
    rng = np.random.default_rng(7)
    truth = theory_decay_rate(0.1)
    hits = 0
    for _ in range(100):
        pts = [
            (t, math.exp(-truth * t) * math.exp(rng.normal(0, 0.02)))
            for t in range(1, 9)
        ]
        if fit_decay_rate(pts).covers(truth):
            hits += 1
    assert hits >= 90


def test_decay_fit_is_frozen():
    fit = fit_decay_rate(exact_decay_points(0.1))
    assert isinstance(fit, DecayFit)
    with pytest.raises(AttributeError):
        fit.rate = 0.0


# -- sampling overheads -------------------------------------------------------


def test_overheads_reference_rows():
    # Hand-evaluated R^2 and (1 + 3.59 ln R)^2 at three damping levels,
    # compared at the precision the summary table displays.
    rows = {
        3.1: (9.6, 25.6),
        7.1: (50.4, 64.6),
        22.7: (515.0, 149.0),
    }
    for r, (pec, zne) in rows.items():
        o = sampling_overheads(r)
        digits = 1 if r < 10 else 0
        assert round(o.pec_over_tem, digits) == pec
        assert round(o.zne_over_tem, digits) == zne
        assert o.r == r


def test_overheads_unit_damping_is_free():
    o = sampling_overheads(1.0)
    assert o.pec_over_tem == 1.0
    assert o.zne_over_tem == 1.0


def test_overheads_reject_signal_gain():
    with pytest.raises(ValueError, match="at least 1"):
        sampling_overheads(0.99)


@given(
    st.floats(min_value=1.0, max_value=1e4),
    st.floats(min_value=1e-4, max_value=1e3),
)
@settings(max_examples=200)
def test_overheads_grow_with_damping(r, gap):
    lo, hi = sampling_overheads(r), sampling_overheads(r + gap)
    assert hi.pec_over_tem > lo.pec_over_tem
    assert hi.zne_over_tem > lo.zne_over_tem


def test_zne_coefficient_is_pinned():
    assert ZNE_LOG_COEFF == 3.59


def test_signal_damping_values_and_validation():
    assert signal_damping(0.9, 0.3) == pytest.approx(3.0)
    with pytest.raises(ValueError, match="zero"):
        signal_damping(0.5, 0.0)
    with pytest.raises(ValueError, match="sign"):
        signal_damping(0.5, -0.2)


# -- relative-error report ----------------------------------------------------


def test_perfect_mitigation_reports_zero():
    exact = [0.9, 0.7, 0.5, -0.2]
    rep = relative_error_report(
        experimental=[0.8, 0.6, 0.45, -0.1],
        mitigated=list(exact),
        noisy_sim=[0.8, 0.6, 0.45, -0.1],
        exact=exact,
    )
    assert rep.mitigated == (0.0, 0.0, 0.0, 0.0)
    assert rep.unmitigated == (0.0, 0.0, 0.0, 0.0)
    assert rep.mitigated_index == (0, 1, 2, 3)


def test_zero_references_are_excluded_with_index_bookkeeping():
    rep = relative_error_report(
        experimental=[1.0, 0.5, 0.3],
        mitigated=[1.0, 0.5, 0.3],
        noisy_sim=[0.8, 0.0, 0.2],
        exact=[0.0, 0.6, 0.3],
    )
    assert rep.unmitigated_index == (0, 2)
    assert rep.mitigated_index == (1, 2)
    assert rep.unmitigated == pytest.approx((0.25, 0.5))
    assert rep.mitigated == pytest.approx((1.0 / 6.0, 0.0))


def test_misaligned_series_rejected():
    with pytest.raises(ValueError, match="aligned"):
        relative_error_report([1.0, 0.5], [1.0], [0.9, 0.4], [1.0, 0.5])


@given(
    st.lists(
        st.tuples(*[st.floats(min_value=-2, max_value=2) for _ in range(4)]),
        min_size=1,
        max_size=8,
    )
)
@settings(max_examples=200)
def test_relative_errors_are_nonnegative(quads):
    exp, mit, sim, exact = (list(col) for col in zip(*quads))
    rep = relative_error_report(exp, mit, sim, exact)
    assert all(v >= 0.0 for v in rep.unmitigated)
    assert all(v >= 0.0 for v in rep.mitigated)
    assert len(rep.unmitigated) == len(rep.unmitigated_index)
    assert len(rep.mitigated) == len(rep.mitigated_index)


def _perturbed(channels, eps, rng):
    """Multiplicative rate jitter, clipped to keep the model physical."""
    out = {}
    for key, ch in channels.items():
        jitter = 1.0 + eps * rng.standard_normal(len(ch.rates))
        out[key] = SparsePauliLindblad(
            ch.basis, np.clip(ch.rates * jitter, 0.0, None), ch.layer_id
        )
    return out


def _mismatch_report(true_channels, model, n, ts):
    """Run mitigation with `model` on data generated by `true_channels`."""
    exp_v, sim_v, mit_v, exact_v = [], [], [], []
    for t in ts:
        params = KickedIsingParams(n, math.pi / 4, math.pi / 4, 0.1, t_steps=t)
        circuit = build_brickwork(params, include_prep=True)
        obs = PauliString.single(n, t, "X")
        exp_v.append(noisy_expectation_dm(circuit, true_channels, obs))
        sim_v.append(noisy_expectation_dm(circuit, model, obs))
        exact_v.append(noisy_expectation_dm(circuit, None, obs))
        train = modify_observable(
            build_tem_map(circuit, model, light_cone=obs), obs
        )
        back = heisenberg_evolve(circuit, train, channels=true_channels)
        mit_v.append(initial_state_expectation(back, None))
    return relative_error_report(exp_v, mit_v, sim_v, exact_v)


def test_model_mismatch_moves_both_errors_together():
    """R_U and R_M track each other as the learned model drifts off the truth.

    In-model mitigation leaves both at zero; jittering the model's rates
    raises the unmitigated error (experiment vs simulation) and the
    mitigated error (mitigated vs exact) by the same order.
    """
    n, ts = 5, (1, 2)
    rng = np.random.default_rng(5)
    true_channels = {
        "even": random_sparse_model(SparseBasis(n), rng, scale=0.02,
                                    layer_id="even"),
        "odd": random_sparse_model(SparseBasis(n), rng, scale=0.02,
                                   layer_id="odd"),
    }
    means = {}
    for eps in (0.0, 0.1, 0.3):
        model = _perturbed(true_channels, eps, np.random.default_rng(99))
        rep = _mismatch_report(true_channels, model, n, ts)
        assert rep.unmitigated_index == tuple(range(len(ts)))
        assert rep.mitigated_index == tuple(range(len(ts)))
        means[eps] = (np.mean(rep.unmitigated), np.mean(rep.mitigated))
    assert means[0.0][0] == 0.0
    assert means[0.0][1] < 1e-10
    for eps in (0.1, 0.3):
        r_u, r_m = means[eps]
        assert 1e-4 < r_u < 0.1
        assert 0.5 < r_u / r_m < 2.0
    assert means[0.3][0] > means[0.1][0]
    assert means[0.3][1] > means[0.1][1]


# -- CSV emitters -------------------------------------------------------------


def _read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def test_decay_csv_roundtrip(tmp_path):
    path = tmp_path / "decay.csv"
    t = [1, 2, 3]
    ideal = [0.98, 0.96, 0.94]
    mitigated = [0.97, 0.95, 0.93]
    write_decay_csv(path, t, ideal=ideal, mitigated=mitigated)
    header, rows = _read_csv(path)
    assert header == list(DECAY_CSV_HEADER)
    assert len(rows) == 3
    for i, row in enumerate(rows):
        assert float(row[0]) == t[i]
        assert float(row[1]) == ideal[i]
        assert float(row[5]) == mitigated[i]
        # absent series stay blank
        assert row[2] == row[3] == row[4] == row[6] == ""


def test_decay_csv_alignment_check(tmp_path):
    with pytest.raises(ValueError, match="aligned"):
        write_decay_csv(tmp_path / "bad.csv", [1, 2, 3], ideal=[0.9, 0.8])


def test_overhead_csv_rows_match_formulas(tmp_path):
    path = tmp_path / "overhead.csv"
    write_overhead_csv(path, [("shallow", 3.1), ("deep", 22.7)])
    header, rows = _read_csv(path)
    assert header == list(OVERHEAD_CSV_HEADER)
    assert [r[0] for r in rows] == ["shallow", "deep"]
    for row in rows:
        o = sampling_overheads(float(row[1]))
        assert float(row[2]) == o.pec_over_tem
        assert float(row[3]) == o.zne_over_tem


def test_convergence_csv_from_report(tmp_path):
    chis = [4, 8, 16, 32]
    values = [0.4 + 0.1 / c for c in chis]
    states = [pauli_mps(PauliString.from_label("XZ")) for _ in chis]
    report = convergence_report(chis, values, states=states)
    path = tmp_path / "conv.csv"
    write_convergence_csv(path, report)
    header, rows = _read_csv(path)
    assert header == list(CONVERGENCE_CSV_HEADER)
    assert [int(r[0]) for r in rows] == chis
    assert rows[0][3] == ""  # differences start at the second run
    for i, row in enumerate(rows):
        assert float(row[1]) == report.values[i]
        assert float(row[2]) == report.delta_chi[i]
        assert float(row[4]) == report.entropies[i]
        if i:
            assert float(row[3]) == report.delta_curve[i - 1]


def test_convergence_csv_without_states(tmp_path):
    report = convergence_report([2, 4, 8], [0.5, 0.45, 0.44])
    path = tmp_path / "conv.csv"
    write_convergence_csv(path, report)
    _, rows = _read_csv(path)
    assert all(r[4] == "" and r[5] == "" for r in rows)
