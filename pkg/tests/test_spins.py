import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nmrqec.linalg import conjugate, is_hermitian
from nmrqec.spins import (
    BathCoupling,
    SpinSystem,
    build_hamiltonian,
    coherence_decompose,
    collective_z_rotation,
    malonic,
    pauli_operator,
)

from conftest import random_hermitian


def basis(bits):
    v = np.zeros(2 ** len(bits))
    v[int(bits, 2)] = 1
    return v


def test_pauli_identity():
    assert np.array_equal(pauli_operator("III"), np.eye(8))


def test_pauli_zii_diagonal():
    assert np.array_equal(pauli_operator("ZII"), np.diag([1, 1, 1, 1, -1, -1, -1, -1]))


def test_pauli_xxi_entry():
    m = pauli_operator("XXI")
    assert m[int("000", 2), int("110", 2)] == 1
    assert np.count_nonzero(m) == 8


def test_pauli_invalid_letter():
    with pytest.raises(ValueError):
        pauli_operator("XQ")


def test_malonic_ground_diagonal():
    h = build_hamiltonian(malonic())
    assert abs(h[0, 0].real - np.pi * 3.495) < 1e-12
    assert abs(h[0, 0].real - 10.980) < 1e-3


def test_zero_parameters_give_zero_matrix():
    sys_ = SpinSystem.from_pairs(("a", "b", "c"), (0, 0, 0))
    assert np.array_equal(build_hamiltonian(sys_), np.zeros((8, 8)))


def test_single_shift():
    sys_ = SpinSystem.from_pairs(("a",), (1.0,))
    h = build_hamiltonian(sys_)
    assert np.allclose(h, np.pi * np.diag([1, -1]))
    assert np.allclose(np.linalg.eigvalsh(h), [-np.pi, np.pi])


def test_bath_enlarges_space():
    sys_ = malonic(bath=(BathCoupling(3, 0.5),))
    h = build_hamiltonian(sys_)
    assert h.shape == (16, 16)
    h0 = build_hamiltonian(malonic(), 0.0)
    # with the bath coupling off the carbons see the same Hamiltonian
    assert np.allclose(build_hamiltonian(sys_, bath_scale=0.0), np.kron(h0, np.eye(2)))


def test_empty_bath_reproduces_carbon_hamiltonian():
    assert np.array_equal(build_hamiltonian(malonic(bath=())), build_hamiltonian(malonic()))


def test_lower_triangle_rejected():
    with pytest.raises(ValueError):
        SpinSystem.from_pairs(("a", "b"), (0, 0), dipolar={(1, 0): 0.3})


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        SpinSystem.from_pairs(("a", "b"), (np.nan, 0))


tables = st.lists(st.floats(-5, 5), min_size=9, max_size=9)


@given(tables, st.floats(-2, 2), st.floats(-2, 2))
def test_hamiltonian_hermitian_traceless(vals, offset, d):
    dip = {(0, 1): vals[0], (0, 2): vals[1], (1, 2): vals[2]}
    jj = {(0, 1): vals[3], (0, 2): vals[4], (1, 2): vals[5]}
    sys_ = SpinSystem.from_pairs(("a", "b", "c"), vals[6:], dip, jj, bath=(BathCoupling(2, d),))
    h = build_hamiltonian(sys_, offset)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    assert abs(np.trace(h)) <= 1e-10


def test_permuted_matches_relabelled_hamiltonian():
    sys_ = malonic(bath=(BathCoupling(3, 0.4),))
    perm = sys_.permuted([2, 0, 1])
    assert perm.labels == ("Cm", "C1", "C2")
    assert perm.bath[0].carbon_index == 1
    # eigenvalues are invariant under relabelling
    assert np.allclose(np.linalg.eigvalsh(build_hamiltonian(sys_)), np.linalg.eigvalsh(build_hamiltonian(perm)))


def test_coherence_triple_quantum():
    parts = coherence_decompose(np.outer(basis("000"), basis("111")))
    assert np.count_nonzero(parts[3]) == 1
    assert all(np.count_nonzero(parts[p]) == 0 for p in parts if p != 3)


def test_coherence_diagonal():
    parts = coherence_decompose(np.diag(np.arange(8.0)))
    assert all(np.count_nonzero(parts[p]) == 0 for p in parts if p != 0)


def test_coherence_pps_orders():
    iz = np.eye(2) + np.diag([1, -1])
    x = np.array([[0, 1], [1, 0]])
    parts = coherence_decompose(np.kron(np.kron(iz, iz), x) / 8)
    populated = {p for p, m in parts.items() if np.any(m)}
    assert populated == {-1, 1}
    assert not np.any(parts[3]) and not np.any(parts[-3])


def test_coherence_sum_and_phase_property(rng):
    rho = random_hermitian(rng, 8)
    parts = coherence_decompose(rho)
    assert np.array_equal(sum(parts.values()), rho)
    for phi in rng.uniform(0, 2 * np.pi, 20):
        r = collective_z_rotation(phi, 3)
        for p, m in parts.items():
            assert np.max(np.abs(conjugate(r, m) - np.exp(-1j * p * phi) * m)) <= 1e-10


def test_hamiltonian_is_hermitian_flagged():
    assert is_hermitian(build_hamiltonian(malonic(), 0.3))
