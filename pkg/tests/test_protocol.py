import numpy as np
import pytest

from nmrqec.code import build_code_circuit, data_state, decode_and_correct, encode
from nmrqec.linalg import conjugate
from nmrqec.noise import (
    DephasingSchedule,
    DispersionModel,
    NaturalSchedule,
    coherent_z,
    dephasing_q,
    independent_dephasing,
)
from nmrqec.protocol import (
    U_PPS,
    RoundConfig,
    coherence_projector,
    entanglement_fidelity,
    input_unitary,
    phase_cycle_filter,
    pps_angle,
    pps_target,
    prepare_pps,
    run_one_round,
    run_two_rounds,
    survival_fraction,
    syndrome_branches,
    syndrome_count,
    thermal_deviation,
)
from nmrqec.spins import PAULI, BathCoupling, malonic, pauli_operator

from conftest import random_hermitian, random_unitary
from oracles import choi_entanglement_fidelity, one_round_flip_probability, pauli_survival, two_round_fidelity


def basis(bits):
    v = np.zeros(8)
    v[int(bits, 2)] = 1
    return v


TQC = np.outer(basis("000"), basis("111")) + np.outer(basis("111"), basis("000"))


# survival and fidelity -------------------------------------------------------


@pytest.mark.parametrize("label", "XYZ")
def test_identity_pipeline_survives(label):
    assert survival_fraction(lambda r: r, label) == pytest.approx(1.0, abs=1e-15)


def test_unencoded_full_dephasing():
    ch = dephasing_q(0.5, 2)
    assert survival_fraction(ch.apply, "X") == pytest.approx(0.0, abs=1e-15)
    assert survival_fraction(ch.apply, "Z") == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("qubit", [0, 1, 2])
@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_corrected_single_qubit_dephasing_survives(qubit, q):
    ch = dephasing_q(q, qubit)

    def pipeline(rho):
        return decode_and_correct(ch.apply(encode(rho)))

    for label in "XYZ":
        assert survival_fraction(pipeline, label) == pytest.approx(1.0, abs=1e-12)


def test_entanglement_fidelity_examples():
    assert entanglement_fidelity(1, 1, 1) == 1
    assert entanglement_fidelity(0, 0, 1) == 0.5
    assert entanglement_fidelity(-1, -1, 1) == 0


def test_entanglement_fidelity_range_check():
    with pytest.raises(ValueError):
        entanglement_fidelity(1.5, 0, 0)


def test_complete_dephasing_choi_oracle():
    kraus = [np.sqrt(0.5) * PAULI["I"], np.sqrt(0.5) * PAULI["Z"]]
    assert choi_entanglement_fidelity(kraus) == pytest.approx(0.5)
    assert choi_entanglement_fidelity([PAULI["Z"]]) == pytest.approx(0.0, abs=1e-15)


def test_entanglement_fidelity_matches_choi_overlap(rng):
    for _ in range(100):
        k = rng.integers(1, 5)
        w = rng.dirichlet(np.ones(k))
        kraus = [np.sqrt(wi) * random_unitary(rng, 2) for wi in w]
        fs = [pauli_survival(kraus, lab) for lab in "XYZ"]
        assert entanglement_fidelity(*fs) == pytest.approx(choi_entanglement_fidelity(kraus), abs=1e-10)


def test_input_unitaries():
    for lab in "XYZ":
        u = input_unitary(lab)
        assert np.allclose(u @ PAULI["Z"] @ u.conj().T, PAULI[lab], atol=1e-15)
    with pytest.raises(ValueError):
        input_unitary("W")


# pseudopure preparation ------------------------------------------------------


def test_pps_encoder_maps_target_to_triple_quantum():
    assert np.allclose(conjugate(U_PPS, 2 * pps_target()), TQC)


def test_pps_from_thermal_matches_projection_oracle():
    out = prepare_pps(thermal_deviation())
    # oracle: project the pre-rotated input onto the filtered target direction
    ry = np.cos(np.pi / 4) * np.eye(2) - 1j * np.sin(np.pi / 4) * PAULI["Y"]
    rotated = conjugate(np.kron(np.eye(4), ry), thermal_deviation())
    target = conjugate(U_PPS.conj().T, TQC)
    c = np.vdot(target, rotated) / np.vdot(target, target)
    assert np.allclose(out, c * target, atol=1e-12)
    assert pps_angle(out) <= 1e-8
    assert abs(c) > 0.1


def test_pps_idempotent_on_target():
    target = pps_target()
    once = prepare_pps(target, pre_rotation=False)
    assert np.allclose(once, target, atol=1e-12)
    assert np.allclose(prepare_pps(once, pre_rotation=False), once, atol=1e-10)


def test_pps_idempotent_from_thermal():
    once = prepare_pps()
    twice = prepare_pps(once, pre_rotation=False)
    assert np.allclose(twice, once, atol=1e-10)


def test_pps_orthogonal_input_gives_zero():
    z1_minus_z2 = pauli_operator("ZII") - pauli_operator("IZI")
    assert np.allclose(prepare_pps(z1_minus_z2), 0, atol=1e-14)


def test_filter_keeps_pure_triple_quantum():
    assert np.allclose(phase_cycle_filter(TQC, 3, 8), TQC, atol=1e-14)


def test_filter_kills_diagonal(rng):
    assert np.allclose(phase_cycle_filter(np.diag(rng.normal(size=8)), 3, 8), 0, atol=1e-14)


def test_filter_matches_coherence_projector(rng):
    for _ in range(100):
        rho = random_hermitian(rng, 8)
        for order in (0, 1, 2, 3):
            assert np.max(np.abs(phase_cycle_filter(rho, order, 8) - coherence_projector(rho, order))) <= 1e-10


def test_filter_rejects_aliasing():
    with pytest.raises(ValueError):
        phase_cycle_filter(TQC, 3, 6)


# one round ----------------------------------------------------------------------


def test_invalid_mode():
    with pytest.raises(ValueError):
        RoundConfig(mode="twice")


@pytest.mark.parametrize("theta", [0.3, 1.0, 2.5])
def test_one_round_coherent(theta):
    res = run_one_round(RoundConfig("corrected", coherent_z(theta, 0)))
    assert res.entanglement_fidelity == pytest.approx(1, abs=1e-12)
    expected = (np.cos(theta / 2) ** 2, np.sin(theta / 2) ** 2, 0, 0)
    for s in res.syndromes.values():
        assert np.allclose(s, expected, atol=1e-12)


def test_one_round_independent_dephasing():
    res = run_one_round(RoundConfig("corrected", independent_dephasing(0.1)))
    assert res.entanglement_fidelity == pytest.approx(0.972, abs=1e-12)


def test_unencoded_dephasing():
    res = run_one_round(RoundConfig("unencoded", dephasing_q(0.1, 2)))
    assert res.entanglement_fidelity == pytest.approx(0.9, abs=1e-12)
    assert (res.f_x, res.f_y, res.f_z) == pytest.approx((0.8, 0.8, 1.0), abs=1e-12)
    assert all(s is None for s in res.syndromes.values())


def test_unencoded_dephasing_q02():
    res = run_one_round(RoundConfig("unencoded", dephasing_q(0.2, 2)))
    assert (res.f_x, res.f_y, res.f_z) == pytest.approx((0.6, 0.6, 1.0), abs=1e-12)


def test_prepared_and_ideal_inputs_agree():
    ch = independent_dephasing(0.17)
    a = run_one_round(RoundConfig("decoded", ch, prepare=True))
    b = run_one_round(RoundConfig("decoded", ch, prepare=False))
    assert a.entanglement_fidelity == pytest.approx(b.entanglement_fidelity, abs=1e-12)


def test_fidelity_formula_holds_by_construction():
    res = run_one_round(RoundConfig("decoded", independent_dephasing(0.3)))
    assert res.entanglement_fidelity == (1 + res.f_x + res.f_y + res.f_z) / 4


@pytest.mark.parametrize("noise", [independent_dephasing(0.23), coherent_z(0.8, 1), dephasing_q(0.3, 0)])
def test_ancilla_relabelling_invariance(noise):
    a = run_one_round(RoundConfig("corrected", noise))
    b = run_one_round(RoundConfig("corrected", noise, swap_ancillae=True))
    assert a.entanglement_fidelity == pytest.approx(b.entanglement_fidelity, abs=1e-12)
    for lab in "XYZ":
        assert np.allclose(a.syndromes[lab], b.syndromes[lab], atol=1e-12)


@pytest.mark.parametrize("q", np.linspace(0, 0.5, 6))
def test_one_round_matches_flip_enumeration(q):
    res = run_one_round(RoundConfig("corrected", independent_dephasing(q)))
    assert res.entanglement_fidelity == pytest.approx(1 - one_round_flip_probability(q), abs=1e-12)


# two rounds ---------------------------------------------------------------------


def test_two_rounds_zero_delay():
    sched = NaturalSchedule(malonic((BathCoupling(3, 0.5),)), 1.0, DispersionModel.for_t2star())
    res = run_two_rounds(RoundConfig("corrected", sched, delay_ms=0.0))
    assert res.entanglement_fidelity == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("ideal", [True, False])
def test_two_round_dephasing_law(ideal):
    q = 0.2
    res = run_two_rounds(RoundConfig("corrected", independent_dephasing(q), ideal_ancillae=ideal))
    ql = 3 * q**2 * (1 - q) + q**3
    assert res.entanglement_fidelity == pytest.approx(1 - 2 * ql * (1 - ql), abs=1e-10)
    assert res.entanglement_fidelity == pytest.approx(0.8136, abs=1e-4)
    assert res.entanglement_fidelity == pytest.approx(two_round_fidelity(q), abs=1e-10)


def test_branch_counter():
    res = run_two_rounds(RoundConfig("corrected", independent_dephasing(0.1)))
    assert res.n_branches == {"X": 4, "Y": 4, "Z": 4}
    assert syndrome_count(2) == 4
    assert syndrome_count(1) == 1
    assert syndrome_count(3) == 16


def test_branch_signal_bookkeeping():
    rho = decode_and_correct(independent_dephasing(0.3).apply(encode(PAULI["X"])))
    total = np.real(np.trace(PAULI["X"] @ data_state(rho)))
    blocks = [np.real(np.trace(PAULI["X"] @ data_state(b))) for _, b in syndrome_branches(rho)]
    assert sum(blocks) == pytest.approx(total, abs=1e-10)
    assert np.allclose(sum(b for _, b in syndrome_branches(rho)), np.kron(np.diag([1, 0, 0, 0]), data_state(rho)))


def test_gate_error_models_projection_loss():
    clean = run_two_rounds(RoundConfig("corrected", None, delay_ms=0.0))
    noisy = run_two_rounds(RoundConfig("corrected", None, delay_ms=0.0, gate_error=0.01))
    assert clean.entanglement_fidelity == pytest.approx(1, abs=1e-12)
    assert noisy.entanglement_fidelity < 0.99


def test_two_rounds_use_half_interval():
    calls = []

    def sched(tau):
        calls.append(tau)
        return independent_dephasing(0.0)

    run_two_rounds(RoundConfig("corrected", sched, delay_ms=3.0))
    assert calls == [1.5]


def test_two_round_rejects_other_modes():
    with pytest.raises(ValueError):
        run_two_rounds(RoundConfig("unencoded"))


def test_circuit_shared_read_only():
    c = build_code_circuit()
    with pytest.raises(ValueError):
        c.u_encode[0, 0] = 2


def _crossover(gate_error, delays):
    sched = DephasingSchedule(1.0)
    for tau in delays:
        one = run_one_round(RoundConfig("corrected", sched, tau, gate_error=gate_error)).entanglement_fidelity
        two = run_two_rounds(RoundConfig("two_rounds", sched, tau, gate_error=gate_error)).entanglement_fidelity
        if two > one:
            return tau
    return None


def test_gate_error_creates_crossover():
    delays = (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)
    low, high = _crossover(0.002, delays), _crossover(0.01, delays)
    # extra gates cost a second round its advantage at short delays only
    assert low is not None and high is not None
    assert 0.0 < low < high
