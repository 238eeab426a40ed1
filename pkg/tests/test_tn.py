"""Tensor-network engine tests against dense oracles.

The independent route expands every superoperator in the (P/sqrt 2)^n basis
by explicit traces on dense matrices; train contractions must reproduce those
numbers.  Compression error bounds are verified densely at small sizes.
"""

import numpy as np
import pytest

from temkit.circuits import (
    BrickworkCircuit,
    InitialState,
    KickedIsingParams,
    Layer,
    bell_prep_layer,
    build_brickwork,
    two_qubit_block,
)
from temkit.exact_sim import (
    evolve_statevector,
    initial_statevector,
    noisy_expectation_dm,
    statevector_expectation,
)
from temkit.measurement import (
    BasisDistribution,
    ReadoutModel,
    estimate,
    generate_shots,
    sample_settings,
)
from temkit.noise import random_sparse_model
from temkit.pauli import PauliString, SparseBasis
from temkit import tn
from temkit.tn import (
    CompressionPolicy,
    PtmMpo,
    PtmMps,
    TruncationLog,
    build_tem_map,
    channel_mpo,
    component_weights,
    convergence_report,
    heisenberg_evolve,
    heisenberg_expectation,
    initial_state_expectation,
    light_cone_windows,
    mitigated_estimate,
    modify_observable,
    mpo_from_layer,
    mpo_multiply,
    mpo_multiply_compress,
    mps_pauli_expectation,
    pauli_mps,
    ptm_state_mps,
    schrodinger_evolve,
    schrodinger_expectation,
    state_mps,
    tem_map_steps,
)

LETTERS = "IXYZ"
_P1 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1.0 + 0j, -1.0]),
}
CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)


def sigma_basis(n):
    """All normalised Pauli words, site 0 slowest."""
    out = []
    for idx in range(4**n):
        m = np.array([[1.0 + 0j]])
        for q in range(n):
            letter = LETTERS[(idx >> (2 * (n - 1 - q))) & 3]
            m = np.kron(m, _P1[letter] / np.sqrt(2))
        out.append(m)
    return out


def dense_conjugation_ptm(u, n):
    """Oracle transfer matrix of rho -> U rho U^dag by explicit traces.

    Tr[S (U S' U^dag)] = vec(S^T) . vec(U S' U^dag), batched over columns.
    """
    sigs = sigma_basis(n)
    sig_t = np.array([s.T.reshape(-1) for s in sigs])
    cols = [sig_t @ (u @ sj @ u.conj().T).reshape(-1) for sj in sigs]
    t = np.array(cols).T
    assert np.max(np.abs(t.imag)) < 1e-12
    return t.real


def dense_layer_unitary(layer, n):
    u = np.eye(2**n, dtype=complex)
    for qubits, gate in layer.blocks(n):
        full = np.array([[1.0 + 0j]])
        pos = 0
        for q in range(n):
            if q == qubits[0]:
                full = np.kron(full, gate)
                pos = q + len(qubits)
            elif q < pos:
                continue
            else:
                full = np.kron(full, np.eye(2))
        u = full @ u
    return u


def dm_coefficients(rho, n):
    """Coefficient vector of a density matrix over the sigma basis."""
    return np.array([np.trace(rho @ s).real for s in sigma_basis(n)])


def random_channel(n, rng, scale=0.03, slot="even"):
    return random_sparse_model(SparseBasis(n), rng, scale=scale, layer_id=slot)


def ki_layer(parity, J=0.3, b=0.45, h=0.2, slot=None):
    return Layer(
        parity=parity,
        gate=two_qubit_block(J, b, h),
        noise_slot=slot,
        name=f"ki_{parity}",
    )


def manual_circuit(n, t, J=0.3, b=0.45, h=0.2, noisy=True):
    """Alternating brickwork on any chain length, no preparation layer."""
    layers = []
    for k in range(t):
        parity = "even" if k % 2 == 0 else "odd"
        layers.append(
            ki_layer(parity, J, b, h, slot=parity if noisy else None)
        )
    return BrickworkCircuit(n, layers)


# -- transfer matrices and layer MPOs ---------------------------------------


def test_gate_ptms_match_dense_traces():
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    assert np.allclose(tn.single_qubit_ptm(h), dense_conjugation_ptm(h, 1),
                       atol=1e-12)
    g = two_qubit_block(0.31, 0.47, 0.23)
    assert np.allclose(tn.two_qubit_ptm(g), dense_conjugation_ptm(g, 2),
                       atol=1e-12)


def test_identity_layer_mpo_is_bond_one():
    layer = Layer(parity="even", gate=None, noise_slot=None, bonds=())
    mpo = mpo_from_layer(layer, 3)
    assert mpo.bond_dims == (1, 1)
    assert np.allclose(mpo.to_dense(), np.eye(64), atol=1e-14)


def test_cz_layer_mpo_matches_dense_conjugation():
    layer = Layer(parity="even", gate=CZ, noise_slot=None, bonds=((0, 1),))
    mpo = mpo_from_layer(layer, 3)
    oracle = dense_conjugation_ptm(np.kron(CZ, np.eye(2)), 3)
    assert np.allclose(mpo.to_dense(), oracle, atol=1e-12)
    assert mpo.bond_dims[0] == 4  # CZ conjugation has Schmidt rank 4


def test_generic_block_needs_bond_sixteen():
    layer = ki_layer("even")
    mpo = mpo_from_layer(layer, 3)
    assert mpo.bond_dims[0] == 16


def test_full_layer_mpo_matches_dense_oracle():
    layer = bell_prep_layer(5, noise_slot=None)
    mpo = mpo_from_layer(layer, 5)
    oracle = dense_conjugation_ptm(dense_layer_unitary(layer, 5), 5)
    assert np.allclose(mpo.to_dense(), oracle, atol=1e-11)


def test_layer_times_inverse_is_identity():
    layer = ki_layer("odd")
    prod = mpo_multiply_compress(
        mpo_from_layer(layer, 5),
        mpo_from_layer(layer, 5, inverse=True),
        CompressionPolicy.relative(1e-12),
    )
    assert np.allclose(prod.to_dense(), np.eye(4**5), atol=1e-12)
    assert prod.max_bond == 1


def test_mpo_from_layer_rejects_overlaps_and_gaps():
    bad = Layer(
        parity="even",
        gate=CZ,
        noise_slot=None,
        singles=((0, _P1["X"]),),
        bonds=((0, 1),),
    )
    with pytest.raises(ValueError, match="overlap"):
        mpo_from_layer(bad, 3)
    skip = Layer(parity="even", gate=CZ, noise_slot=None, bonds=((0, 2),))
    with pytest.raises(ValueError, match="nearest"):
        mpo_from_layer(skip, 3)


def test_multiply_by_identity_preserves_dense():
    layer = ki_layer("even")
    mpo = mpo_from_layer(layer, 3)
    prod = mpo_multiply(PtmMpo.identity(3), mpo)
    assert np.allclose(prod.to_dense(), mpo.to_dense(), atol=1e-13)


def test_multiply_matches_dense_product_without_truncation():
    rng = np.random.default_rng(11)
    a = channel_mpo(random_channel(4, rng, slot="a"))
    b = channel_mpo(random_channel(4, rng, slot="b"))
    assert a.max_bond <= 4 and b.max_bond <= 4
    prod = mpo_multiply(a, b)
    assert np.allclose(
        prod.to_dense(), a.to_dense() @ b.to_dense(), atol=1e-12
    )


def test_hard_cap_caps_bonds_and_logs():
    even, odd = ki_layer("even"), ki_layer("odd")
    log = TruncationLog()
    prod = mpo_multiply_compress(
        mpo_from_layer(even, 5),
        mpo_from_layer(odd, 5),
        CompressionPolicy.hard_cap(4),
        log,
    )
    assert all(bd <= 4 for bd in prod.bond_dims)
    assert log.truncated_records()
    assert log.max_relative_weight() > 0.0


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-8])
def test_relative_cutoff_bounds_dense_error(eps):
    rng = np.random.default_rng(5)
    a = mpo_from_layer(ki_layer("even"), 4)
    b = channel_mpo(random_channel(4, rng))
    exact = mpo_multiply(a, b)
    dense = exact.to_dense()
    compressed = exact.compress(CompressionPolicy.relative(eps))
    err = np.linalg.norm(compressed.to_dense() - dense)
    assert err <= eps * np.linalg.norm(dense) + 1e-14


def test_compression_policy_validation():
    with pytest.raises(ValueError):
        CompressionPolicy(cutoff=-1e-3)
    with pytest.raises(ValueError):
        CompressionPolicy(max_bond=0)


# -- trains: states, observables, channels -----------------------------------


def test_pauli_mps_dense_components():
    p = PauliString.from_label("-XIZY")
    mps = pauli_mps(p)
    dense = mps.to_dense()
    nz = np.nonzero(dense)[0]
    assert len(nz) == 1
    # site 0 slowest: index digits X,I,Z,Y -> 1,0,3,2
    assert nz[0] == ((1 * 4 + 0) * 4 + 3) * 4 + 2
    assert dense[nz[0]] == pytest.approx(-(np.sqrt(2.0) ** 4))
    assert mps.overlap(mps) == pytest.approx(2.0**4)
    with pytest.raises(ValueError, match="Hermitian"):
        pauli_mps(PauliString.from_label("iX"))


@pytest.mark.parametrize(
    "init",
    [
        InitialState("zeros"),
        InitialState("plus_bell"),
        InitialState("pauli_eigenstate", "XYZIY"),
    ],
)
def test_state_mps_matches_dense_statevector(init):
    vec = state_mps(5, init).to_dense()
    assert np.allclose(vec, initial_statevector(5, init), atol=1e-14)


def test_ptm_state_mps_reproduces_traces():
    n = 5
    for init in (
        InitialState("zeros"),
        InitialState("plus_bell"),
        InitialState("pauli_eigenstate", "XYZIY"),
    ):
        vec = initial_statevector(n, init)
        rho = np.outer(vec, vec.conj())
        coeffs = dm_coefficients(rho, n)
        assert np.allclose(ptm_state_mps(n, init).to_dense(), coeffs,
                           atol=1e-12)


def test_channel_mpo_matches_dense_diagonal():
    rng = np.random.default_rng(3)
    ch = random_channel(4, rng)
    diag = ch.ptm_diagonal()
    mpo = channel_mpo(ch)
    assert np.allclose(mpo.to_dense(), np.diag(diag.dense_diag()), atol=1e-12)
    inv = channel_mpo(ch, inverse=True)
    prod = mpo_multiply(mpo, inv).compress(CompressionPolicy.relative(1e-12))
    assert np.allclose(prod.to_dense(), np.eye(4**4), atol=1e-10)
    with pytest.raises(TypeError):
        channel_mpo(np.eye(4))


def test_bell_chain_entropy_pattern():
    mps = state_mps(5, InitialState("plus_bell"))
    ents = mps.entanglement_entropies()
    assert np.allclose(ents, [0.0, 1.0, 0.0, 1.0], atol=1e-12)
    assert mps.max_entropy() == pytest.approx(1.0)


def test_project_physical_keeps_iz_components():
    n = 3
    obs = heisenberg_evolve(
        manual_circuit(n, 1, noisy=False), PauliString.single(n, 1, "Z")
    )
    projected = obs.project_physical((0, 3))
    dense = obs.to_dense().reshape((4,) * n)
    keep = dense[np.ix_(*([[0, 3]] * n))]
    assert np.allclose(projected.to_dense(), keep.reshape(-1), atol=1e-12)


def test_canonical_forms_and_defect():
    rng = np.random.default_rng(9)
    ts = [np.asarray(rng.normal(size=(1, 4, 3)))]
    ts.append(rng.normal(size=(3, 4, 5)))
    ts.append(rng.normal(size=(5, 4, 2)))
    ts.append(rng.normal(size=(2, 4, 1)))
    raw = PtmMps(tuple(ts), None)
    for center in (0, 2, 3):
        canon = raw.canonicalize(center)
        assert canon.center == center
        assert canon.canonical_defect() < 1e-12
        assert abs(canon.norm() - raw.norm()) < 1e-10 * max(raw.norm(), 1.0)
    squeezed = raw.compress(CompressionPolicy.relative(1e-12))
    assert squeezed.canonical_defect() < 1e-10
    with pytest.raises(ValueError, match="center"):
        PtmMps(tuple(ts), None).canonical_defect()


def test_compress_preserves_dense_and_records():
    rng = np.random.default_rng(13)
    ch = random_channel(5, rng)
    mps = channel_mpo(ch).apply_to_mps(pauli_mps(PauliString.single(5, 2, "X")))
    log = TruncationLog()
    small = mps.compress(CompressionPolicy.relative(1e-12), log)
    assert np.allclose(small.to_dense(), mps.to_dense(), atol=1e-10)
    assert len(log) == 4
    # diagonal channel keeps a product observable a product
    assert small.max_bond == 1


# -- simulators ---------------------------------------------------------------


def test_schrodinger_matches_dense_statevector():
    params = KickedIsingParams(7, 0.3, 0.45, 0.2, t_steps=3)
    circuit = build_brickwork(params, include_prep=True)
    mps = schrodinger_evolve(circuit)
    assert np.allclose(mps.to_dense(), evolve_statevector(circuit), atol=1e-12)


def test_schrodinger_empty_circuit_product_state_bond_one():
    mps = schrodinger_evolve(BrickworkCircuit(5, []))
    assert mps.max_bond == 1
    assert np.allclose(mps.to_dense(), initial_statevector(5), atol=1e-15)


def test_bell_prep_state_has_bond_two():
    mps = state_mps(7, InitialState("plus_bell"))
    assert mps.max_bond == 2


def test_schrodinger_clifford_overlap_at_chi16():
    params = KickedIsingParams(9, np.pi / 4, np.pi / 4, 0.0, t_steps=4)
    circuit = build_brickwork(params, include_prep=True)
    mps = schrodinger_evolve(circuit, chi_max=16)
    vec = evolve_statevector(circuit)
    overlap = abs(np.vdot(vec, mps.to_dense()))
    assert abs(overlap - 1.0) < 1e-10


def test_entropy_ceiling_under_aggressive_truncation():
    params = KickedIsingParams(9, np.pi / 4, np.pi / 4, 0.3, t_steps=4)
    circuit = build_brickwork(params, include_prep=True)
    for chi in (2, 4):
        mps = schrodinger_evolve(circuit, chi_max=chi)
        ent = mps.max_entropy()
        assert ent <= np.log2(chi) + 1e-9
        # dual-unitary scrambling pushes against the ceiling
        assert ent > 0.8 * np.log2(chi)


def test_heisenberg_clifford_bond_one_exact():
    t = 5
    params = KickedIsingParams(11, np.pi / 4, np.pi / 4, 0.0, t_steps=t)
    circuit = build_brickwork(params, include_prep=True)
    obs = heisenberg_evolve(circuit, PauliString.single(11, t, "X"), chi_max=1)
    assert obs.max_bond == 1
    assert initial_state_expectation(obs) == pytest.approx(1.0, abs=1e-10)


def test_heisenberg_matches_statevector_at_chi64():
    params = KickedIsingParams(9, np.pi / 4, np.pi / 4, 0.1, t_steps=4)
    circuit = build_brickwork(params, include_prep=True)
    obs = PauliString.single(9, 4, "X")
    val = heisenberg_expectation(circuit, obs, chi_max=64)
    assert val == pytest.approx(statevector_expectation(circuit, obs),
                                abs=1e-8)
    assert val == pytest.approx(np.cos(0.2) ** 4, abs=1e-8)


def test_pictures_agree_without_truncation():
    params = KickedIsingParams(9, 0.37, 0.52, 0.21, t_steps=3)
    circuit = build_brickwork(params, include_prep=True)
    obs = PauliString.from_letters(9, (3, 4), "ZX")
    a = schrodinger_expectation(circuit, obs)
    b = heisenberg_expectation(circuit, obs)
    assert a == pytest.approx(b, abs=1e-10)


def test_noisy_heisenberg_matches_density_matrix():
    rng = np.random.default_rng(21)
    params = KickedIsingParams(7, 0.3, 0.45, 0.2, t_steps=3)
    circuit = build_brickwork(params, include_prep=True)
    channels = {
        "even": random_channel(7, rng, scale=0.02, slot="even"),
        "odd": random_channel(7, rng, scale=0.02, slot="odd"),
    }
    obs = PauliString.single(7, 3, "X")
    val = heisenberg_expectation(circuit, obs, channels=channels)
    assert val == pytest.approx(
        noisy_expectation_dm(circuit, channels, obs), abs=1e-8
    )


def test_expectation_input_validation():
    state = state_mps(3)
    with pytest.raises(ValueError, match="Hermitian"):
        mps_pauli_expectation(state, PauliString.from_label("iXII"))
    with pytest.raises(ValueError, match="size"):
        mps_pauli_expectation(state, PauliString.single(4, 0, "X"))
    obs = pauli_mps(PauliString.single(3, 0, "X"))
    with pytest.raises(ValueError, match="statevector"):
        mps_pauli_expectation(obs, PauliString.single(3, 0, "X"))
    with pytest.raises(ValueError, match="operator"):
        initial_state_expectation(state)


# -- the inverse-noise map ----------------------------------------------------


def test_zero_noise_map_is_identity_at_every_layer():
    circuit = build_brickwork(
        KickedIsingParams(7, 0.3, 0.45, 0.2, t_steps=3), include_prep=True
    )
    for chi in (1, None):
        for step in tem_map_steps(circuit, {}, chi_max=chi):
            assert step.identity_defect() < 1e-10
            assert step.mpo.max_bond == 1
        assert step.layers_applied == len(circuit.layers)


def test_tem_recurrence_matches_direct_dense_composition():
    rng = np.random.default_rng(17)
    n, t = 5, 3
    circuit = build_brickwork(
        KickedIsingParams(n, 0.3, 0.45, 0.2, t_steps=t), include_prep=True
    )
    channels = {
        "even": random_channel(n, rng, slot="even"),
        "odd": random_channel(n, rng, slot="odd"),
    }
    built = build_tem_map(circuit, channels).mpo.to_dense()

    ideal = np.eye(4**n)
    inverted = np.eye(4**n)
    for layer in circuit.layers:
        u = dense_conjugation_ptm(dense_layer_unitary(layer, n), n)
        ideal = u @ ideal
        ch = channels.get(layer.noise_slot) if layer.noise_slot else None
        lam_inv = (
            np.diag(ch.ptm_diagonal().inverse().dense_diag())
            if ch is not None
            else np.eye(4**n)
        )
        inverted = inverted @ (lam_inv @ u.T)
    assert np.allclose(built, ideal @ inverted, atol=1e-10)


def test_tem_hard_cap_logs_truncations():
    rng = np.random.default_rng(19)
    circuit = build_brickwork(
        KickedIsingParams(5, 0.3, 0.45, 0.2, t_steps=2), include_prep=True
    )
    channels = {
        "even": random_channel(5, rng, slot="even"),
        "odd": random_channel(5, rng, slot="odd"),
    }
    tem = build_tem_map(circuit, channels, chi_max=4)
    assert all(bd <= 4 for bd in tem.mpo.bond_dims)
    assert tem.log.truncated_records()
    assert tem.layers_applied == len(circuit.layers)


def test_modify_observable_zero_noise_is_original():
    circuit = build_brickwork(
        KickedIsingParams(5, 0.3, 0.45, 0.2, t_steps=2), include_prep=True
    )
    tem = build_tem_map(circuit, {})
    obs = PauliString.single(5, 2, "X")
    train = modify_observable(tem, obs)
    assert np.allclose(train.to_dense(), pauli_mps(obs).to_dense(), atol=1e-10)
    c, resid = component_weights(train, obs)
    assert c == pytest.approx(1.0, abs=1e-10)
    assert resid < 1e-8


def test_single_channel_inversion_rescales_observable():
    rng = np.random.default_rng(23)
    n = 4
    ch = random_channel(n, rng, slot="only")
    noise_only = BrickworkCircuit(
        n, [Layer(parity="even", gate=None, noise_slot="only", bonds=())]
    )
    tem = build_tem_map(noise_only, {"only": ch})
    obs = PauliString.single(n, 1, "X")
    train = modify_observable(tem, obs)
    c, resid = component_weights(train, obs)
    assert c == pytest.approx(1.0 / ch.fidelity(obs), rel=1e-10)
    assert resid < 1e-10
    assert c >= 1.0


def test_modified_observable_amplifies_for_in_model_noise():
    rng = np.random.default_rng(29)
    circuit = build_brickwork(
        KickedIsingParams(5, 0.3, 0.45, 0.2, t_steps=2), include_prep=True
    )
    channels = {
        "even": random_channel(5, rng, slot="even"),
        "odd": random_channel(5, rng, slot="odd"),
    }
    tem = build_tem_map(circuit, channels)
    obs = PauliString.single(5, 2, "X")
    train = modify_observable(tem, obs)
    base = pauli_mps(obs)
    ratio = float(np.real(base.overlap(train) / base.overlap(base)))
    assert ratio >= 1.0


def noisy_value_of_train(circuit, channels, train, init=None):
    """Tr[rho_noisy O'] via the adjoint route (no dense objects)."""
    back = heisenberg_evolve(circuit, train, channels=channels)
    return initial_state_expectation(back, init)


def test_mitigation_recovers_ideal_value_in_both_regimes():
    rng = np.random.default_rng(31)
    n, t = 7, 2
    for h in (0.0, 0.2):
        params = KickedIsingParams(n, np.pi / 4, np.pi / 4, h, t_steps=t)
        circuit = build_brickwork(params, include_prep=True)
        channels = {
            "even": random_channel(n, rng, scale=0.02, slot="even"),
            "odd": random_channel(n, rng, scale=0.02, slot="odd"),
        }
        obs = PauliString.single(n, t, "X")
        tem = build_tem_map(circuit, channels)
        train = modify_observable(tem, obs)
        mitigated = noisy_value_of_train(circuit, channels, train)
        raw = noisy_expectation_dm(circuit, channels, obs)
        ideal = np.cos(2 * h) ** t
        assert mitigated == pytest.approx(ideal, abs=1e-8)
        assert abs(raw - ideal) > 0.01


def test_corridor_map_approximation_quality_on_dual_unitary():
    rng = np.random.default_rng(37)
    n, t = 7, 2
    params = KickedIsingParams(n, np.pi / 4, np.pi / 4, 0.15, t_steps=t)
    circuit = build_brickwork(params, include_prep=True)
    channels = {
        "even": random_channel(n, rng, scale=0.02, slot="even"),
        "odd": random_channel(n, rng, scale=0.02, slot="odd"),
    }
    obs = PauliString.single(n, t, "X")
    full = build_tem_map(circuit, channels)
    v_full = noisy_value_of_train(
        circuit, channels, modify_observable(full, obs)
    )
    assert v_full == pytest.approx(np.cos(0.3) ** t, abs=1e-10)

    # strict cone: second order in the rates, wider corridor: negligible
    strict = build_tem_map(circuit, channels, light_cone=obs, cone_margin=0)
    v_strict = noisy_value_of_train(
        circuit, channels, modify_observable(strict, obs)
    )
    assert v_strict == pytest.approx(v_full, abs=1e-3)
    wide = build_tem_map(circuit, channels, light_cone=obs)
    v_wide = noisy_value_of_train(
        circuit, channels, modify_observable(wide, obs)
    )
    assert v_wide == pytest.approx(v_full, abs=1e-9)
    assert abs(v_wide - v_full) <= abs(v_strict - v_full)
    assert wide.windows is not None

    # full-width windows reproduce the unrestricted construction
    cover = build_tem_map(circuit, channels, light_cone=obs, cone_margin=n)
    v_cover = noisy_value_of_train(
        circuit, channels, modify_observable(cover, obs)
    )
    assert v_cover == pytest.approx(v_full, abs=1e-12)
    assert all(w == (0, n - 1) for w in cover.windows)


def test_light_cone_windows_geometry():
    circuit = build_brickwork(
        KickedIsingParams(9, 0.3, 0.45, 0.2, t_steps=2), include_prep=False
    )
    wins = light_cone_windows(circuit, PauliString.single(9, 7, "X"))
    assert wins == ((6, 8), (7, 8))
    # windows grow monotonically towards earlier layers
    for (lo0, hi0), (lo1, hi1) in zip(wins, wins[1:]):
        assert lo0 <= lo1 and hi0 >= hi1
    padded = light_cone_windows(circuit, PauliString.single(9, 7, "X"), 1)
    assert padded == ((5, 8), (6, 8))
    with pytest.raises(ValueError, match="light cone"):
        light_cone_windows(circuit, PauliString.identity(9))
    with pytest.raises(ValueError, match="range"):
        light_cone_windows(circuit, (3, 9))
    with pytest.raises(ValueError, match="margin"):
        light_cone_windows(circuit, (3, 4), -1)


def test_mitigated_estimate_with_identity_map_equals_plain_estimate():
    rng = np.random.default_rng(41)
    n = 5
    params = KickedIsingParams(n, np.pi / 4, np.pi / 4, 0.1, t_steps=1)
    circuit = build_brickwork(params, include_prep=True)
    dist = BasisDistribution.ic_default(n)
    plan = sample_settings(dist, 40, rng)
    shots = generate_shots(
        circuit, {}, ReadoutModel.uniform(n, 0.0), plan, 4, rng
    )
    tem = build_tem_map(circuit, {})
    obs = PauliString.single(n, 1, "X")
    via_map = mitigated_estimate(shots, tem, obs)
    direct = estimate(shots, obs)
    assert via_map.value == pytest.approx(direct.value, abs=1e-10)
    assert via_map.stderr == pytest.approx(direct.stderr, abs=1e-10)
    with pytest.raises(ValueError, match="size"):
        mitigated_estimate(shots, build_tem_map(BrickworkCircuit(4, []), {}),
                           PauliString.single(4, 0, "X"))


def test_mitigated_estimate_end_to_end_shot_level():
    rng = np.random.default_rng(43)
    n, t = 5, 2
    params = KickedIsingParams(n, np.pi / 4, np.pi / 4, 0.2, t_steps=t)
    circuit = build_brickwork(params, include_prep=True)
    channels = {
        "even": random_channel(n, rng, scale=0.015, slot="even"),
        "odd": random_channel(n, rng, scale=0.015, slot="odd"),
    }
    obs = PauliString.single(n, t, "X")
    dist = BasisDistribution.ic_default(n, signal_qubit=t)
    plan = sample_settings(dist, 600, rng)
    shots = generate_shots(
        circuit, channels, ReadoutModel.uniform(n, 0.0), plan, 16, rng
    )
    tem = build_tem_map(circuit, channels)
    mitigated = mitigated_estimate(shots, tem, obs)
    raw = estimate(shots, obs)
    ideal = np.cos(0.4) ** t
    noisy = noisy_expectation_dm(circuit, channels, obs)
    assert abs(mitigated.value - ideal) < 4 * mitigated.stderr
    assert abs(raw.value - noisy) < 4 * raw.stderr
    # the raw signal is biased away from the ideal value by design
    assert abs(noisy - ideal) > 5 * raw.stderr


# -- convergence diagnostics --------------------------------------------------


def test_convergence_report_constant_sequence():
    rep = convergence_report([2, 4, 8], [0.7, 0.7, 0.7])
    assert rep.extrapolated == pytest.approx(0.7)
    assert rep.delta_chi == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
    assert rep.delta_curve == pytest.approx((0.0, 0.0), abs=1e-12)


def test_convergence_report_exact_on_linear_inverse_chi():
    chis = [4, 8, 16, 64]
    target, slope = 0.42, 0.9
    vals = [target + slope / c for c in chis]
    rep = convergence_report(chis, vals)
    assert rep.extrapolated == pytest.approx(target, abs=1e-12)
    assert rep.delta_chi == pytest.approx(
        tuple(slope / c for c in sorted(chis)), abs=1e-12
    )


def test_convergence_report_orders_and_validates():
    rep = convergence_report([8, 2, 4], [0.1, 0.3, 0.2])
    assert rep.chis == (2, 4, 8)
    assert rep.values == (0.3, 0.2, 0.1)
    with pytest.raises(ValueError, match="three"):
        convergence_report([2, 4], [0.1, 0.2])
    with pytest.raises(ValueError, match="align"):
        convergence_report([2, 4, 8], [0.1, 0.2])
    with pytest.raises(ValueError, match="duplicate"):
        convergence_report([2, 2, 4], [0.1, 0.1, 0.2])


def test_convergence_report_entropy_curves():
    params = KickedIsingParams(9, np.pi / 4, np.pi / 4, 0.1, t_steps=3)
    circuit = build_brickwork(params, include_prep=True)
    obs = PauliString.single(9, 3, "X")
    chis = [2, 4, 8]
    states = [heisenberg_evolve(circuit, obs, chi_max=c) for c in chis]
    vals = [initial_state_expectation(s) for s in states]
    rep = convergence_report(chis, vals, states)
    assert rep.entropies is not None and rep.projected_entropies is not None
    for chi, ent, proj in zip(rep.chis, rep.entropies,
                              rep.projected_entropies):
        assert ent <= np.log2(chi) + 1e-9
        assert proj <= np.log2(chi) + 1e-9


# -- snapshots ----------------------------------------------------------------


def test_snapshot_roundtrip(tmp_path):
    params = KickedIsingParams(5, 0.3, 0.45, 0.2, t_steps=2)
    circuit = build_brickwork(params, include_prep=True)
    mps = schrodinger_evolve(circuit)
    path = tmp_path / "state.ptmt"
    tn.save_mps(path, mps)
    back = tn.load_mps(path)
    assert back.center == mps.center
    assert all(
        np.array_equal(a, b) for a, b in zip(mps.tensors, back.tensors)
    )
    rng = np.random.default_rng(3)
    mpo = channel_mpo(random_channel(5, rng))
    path2 = tmp_path / "map.ptmt"
    tn.save_mpo(path2, mpo)
    back2 = tn.load_mpo(path2)
    assert all(
        np.array_equal(a, b) for a, b in zip(mpo.tensors, back2.tensors)
    )


def test_snapshot_rejects_garbage_and_wrong_kind(tmp_path):
    bad = tmp_path / "bad.ptmt"
    bad.write_bytes(b"not a snapshot")
    with pytest.raises(ValueError):
        tn.load_mps(bad)
    path = tmp_path / "state.ptmt"
    tn.save_mps(path, state_mps(3))
    with pytest.raises(ValueError, match="kind"):
        tn.load_mpo(path)
    truncated = tmp_path / "cut.ptmt"
    truncated.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ValueError, match="truncated"):
        tn.load_mps(truncated)
