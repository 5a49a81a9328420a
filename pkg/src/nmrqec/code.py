"""Three-qubit phase-flip code: encoder, decoder, correction and syndromes.

Wires: qubits 1 and 2 (top) are ancillae, qubit 3 (bottom) carries the
data.  Syndrome bit strings are written ``(q1, q2)``, so the decoded
ancillae read 00, 10, 01, 11 after errors III, ZII, IZI, IIZ.

The encoder is ``H (x) H (x) H`` after two CNOTs fanning the data out to
the ancillae; the decoder is its inverse.  In that frame a phase flip on
the data wire shows up as a bit flip of the decoded data with syndrome 11,
so the correction is a Toffoli onto the data controlled by both ancillae.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .linalg import conjugate, kronecker, partial_trace
from .spins import PAULI

SYNDROMES = ("00", "10", "01", "11")
ERROR_FOR_SYNDROME = {"00": "III", "10": "ZII", "01": "IZI", "11": "IIZ"}
LEAKAGE_ATOL = 1e-8

_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _on(ops, n=3):
    return kronecker(*(ops.get(q, PAULI["I"]) for q in range(n)))


def cnot(control, target, n=3):
    """CNOT with zero-based ``control``/``target`` wires."""
    return _on({control: _P0}, n) + _on({control: _P1, target: PAULI["X"]}, n)


def toffoli(c1, c2, target, n=3):
    flip = _on({c1: _P1, c2: _P1}, n)
    return np.eye(2**n, dtype=complex) - flip + flip @ _on({target: PAULI["X"]}, n)


def swap(a, b, n=3):
    return cnot(a, b, n) @ cnot(b, a, n) @ cnot(a, b, n)


def ancilla_projector(bits):
    """``|ab><ab| (x) I`` for the syndrome string ``bits``."""
    a, b = (int(c) for c in bits)
    return kronecker(_P1 if a else _P0, _P1 if b else _P0, PAULI["I"])


@dataclass(frozen=True)
class CodeCircuit:
    u_encode: np.ndarray
    u_decode: np.ndarray
    u_correct: np.ndarray
    # syndrome string read on wires (q1, q2) for each nominal syndrome
    syndrome_map: tuple = tuple(zip(SYNDROMES, SYNDROMES))

    def read(self, nominal):
        return dict(self.syndrome_map)[nominal]


@lru_cache(maxsize=2)
def build_code_circuit(swap_ancillae=False):
    """Gate-level circuit matrices.

    With ``swap_ancillae`` the two ancilla wires trade roles; the syndrome
    table is permuted to match (nominal 10 is read on the wires as 01).
    """
    enc = _on({0: HADAMARD, 1: HADAMARD, 2: HADAMARD}) @ cnot(2, 0) @ cnot(2, 1)
    corr = toffoli(0, 1, 2)
    table = tuple(zip(SYNDROMES, SYNDROMES))
    if swap_ancillae:
        # the Toffoli is symmetric in its controls, so only the frame moves
        enc = enc @ swap(0, 1)
        table = tuple((k, k[::-1]) for k in SYNDROMES)
    dec = enc.conj().T
    for m in (enc, dec, corr):
        m.setflags(write=False)
    return CodeCircuit(u_encode=enc, u_decode=dec, u_correct=corr, syndrome_map=table)


def ancilla_leakage(rho):
    """Largest entry of ``rho`` outside the ancilla-|00> block."""
    p = ancilla_projector("00")
    return float(np.max(np.abs(rho - p @ rho @ p), initial=0.0))


def embed_data(data_rho):
    """``|00><00| (x) data_rho``: data on the bottom wire, ancillae in |00>."""
    return kronecker(_P0, _P0, np.asarray(data_rho, dtype=complex))


def encode(rho, circuit=None):
    """Encode a three-qubit operator whose support is the ancilla-|00> block.

    A 2x2 argument is taken as the data-qubit operator and embedded first.
    """
    circuit = circuit or build_code_circuit()
    rho = np.asarray(rho, dtype=complex)
    if rho.shape == (2, 2):
        rho = embed_data(rho)
    if rho.shape != (8, 8):
        raise ValueError(f"expected a 2x2 data or 8x8 register operator, got {rho.shape}")
    if ancilla_leakage(rho) > LEAKAGE_ATOL:
        raise ValueError("input has support outside the ancilla-|00> block")
    return conjugate(circuit.u_encode, rho)


def decode_and_correct(rho, apply_correction=True, circuit=None):
    circuit = circuit or build_code_circuit()
    out = conjugate(circuit.u_decode, rho)
    if apply_correction:
        out = conjugate(circuit.u_correct, out)
    return out


def data_state(rho):
    """Reduced operator on the data wire (ancillae traced out)."""
    return partial_trace(rho, keep=[2], dims=[2, 2, 2])


def syndrome_intensities(rho, input_label, circuit=None):
    """Fraction of the input signal found in each ancilla block.

    ``s_ab = Tr[(|ab><ab| (x) P) rho] / Tr[P P]`` for input Pauli ``P``,
    so a noiseless round gives ``(1, 0, 0, 0)``.  Returned in nominal
    order ``(s00, s10, s01, s11)``.
    """
    circuit = circuit or build_code_circuit()
    p = PAULI[input_label.upper()]
    norm = np.trace(p @ p).real
    out = []
    for nominal in SYNDROMES:
        proj = ancilla_projector(circuit.read(nominal)) @ kronecker(np.eye(4), p)
        out.append(np.trace(proj @ rho).real / norm)
    return tuple(out)
