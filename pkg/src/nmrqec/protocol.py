"""Experiment drivers: pseudopure preparation, one- and two-round QEC.

Every pipeline acts on 8x8 deviation matrices over (ancilla, ancilla,
data).  Survival fractions compare the data-qubit signal after the
pipeline with the signal that went in, so the overall deviation scale
never matters.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .code import (
    SYNDROMES,
    ancilla_projector,
    build_code_circuit,
    cnot,
    data_state,
    embed_data,
    syndrome_intensities,
)
from .linalg import conjugate, frobenius_angle, kronecker
from .noise import Channel, depolarizing
from .spins import PAULI, coherence_decompose, collective_z_rotation, total_z

log = logging.getLogger(__name__)

INPUT_LABELS = ("X", "Y", "Z")
MODES = ("unencoded", "decoded", "corrected")
TWO_ROUND_MODE = "two_rounds"
# ancilla toggles that cycle each syndrome block into |00>
SYNDROME_TOGGLES = ("II", "XI", "IX", "XX")
N_QUBITS = 3


def _ry(theta):
    return np.cos(theta / 2) * PAULI["I"] - 1j * np.sin(theta / 2) * PAULI["Y"]


def _rx(theta):
    return np.cos(theta / 2) * PAULI["I"] - 1j * np.sin(theta / 2) * PAULI["X"]


_INPUT_ROTATIONS = {"Z": PAULI["I"], "X": _ry(np.pi / 2), "Y": _rx(-np.pi / 2)}


def input_unitary(label):
    """Single-qubit ``U_p`` with ``U_p Z U_p^dag = P`` for ``P`` in X, Y, Z."""
    try:
        return _INPUT_ROTATIONS[label.upper()]
    except (KeyError, AttributeError):
        raise ValueError(f"input label must be one of {INPUT_LABELS}, got {label!r}") from None


# pseudopure preparation ------------------------------------------------------

# CNOTs from the data wire onto both ancillae; sends |00>|0> -> |000> and
# |00>|1> -> |111>, so the PPS deviation becomes a pure triple-quantum term
U_PPS = cnot(2, 0) @ cnot(2, 1)


def pps_target():
    """Labelled pseudopure deviation ``(I+Z)(I+Z)X / 8``."""
    iz = PAULI["I"] + PAULI["Z"]
    return kronecker(iz, iz, PAULI["X"]) / 8


def thermal_deviation(n=N_QUBITS):
    return total_z(n).astype(complex)


def phase_cycle_filter(rho, order, n_steps):
    """Keep coherence orders ``+-order`` by an ``n_steps`` collective-phase cycle.

    ``rho_f = (2/N) sum_k cos(order phi_k) R(phi_k) rho R(phi_k)^dag`` with
    ``phi_k = 2 pi k / N`` (weight ``1/N`` for ``order = 0``).  ``n_steps``
    must exceed twice the largest physical order so nothing aliases in.
    """
    rho = np.asarray(rho, dtype=complex)
    n = int(round(np.log2(rho.shape[0])))
    order = abs(int(order))
    if order > n:
        raise ValueError(f"order {order} exceeds the {n}-spin maximum")
    if n_steps <= 2 * n:
        raise ValueError(f"n_steps={n_steps} aliases coherence orders; need more than {2 * n}")
    out = np.zeros_like(rho)
    scale = 1.0 / n_steps if order == 0 else 2.0 / n_steps
    for k in range(n_steps):
        phi = 2 * np.pi * k / n_steps
        out += scale * np.cos(order * phi) * conjugate(collective_z_rotation(phi, n), rho)
    return out


def coherence_projector(rho, order):
    """Direct sum of the ``+-order`` coherence components."""
    parts = coherence_decompose(rho)
    order = abs(int(order))
    if order == 0:
        return parts[0]
    return parts[order] + parts[-order]


def prepare_pps(thermal=None, pre_rotation=True, n_steps=8):
    """Filter a thermal deviation down to the labelled pseudopure state.

    ``pre_rotation`` first turns the data-qubit polarization into the
    transverse plane (a y rotation by pi/2), then the state is mapped by
    ``U_PPS``, passed through the triple-quantum filter and mapped back.
    The output is proportional to :func:`pps_target`; a zero result means
    the input had no overlap with the filtered coherence.
    """
    rho = thermal_deviation() if thermal is None else np.asarray(thermal, dtype=complex)
    if rho.shape != (8, 8):
        raise ValueError(f"expected an 8x8 deviation, got {rho.shape}")
    if pre_rotation:
        rho = conjugate(kronecker(PAULI["I"], PAULI["I"], _ry(np.pi / 2)), rho)
    rho = conjugate(U_PPS, rho)
    rho = phase_cycle_filter(rho, 3, n_steps)
    rho = conjugate(U_PPS.conj().T, rho)
    if np.max(np.abs(rho)) < 1e-14:
        log.warning("pseudopure filter returned zero: input has no triple-quantum overlap")
    return rho


def pps_angle(rho):
    """Frobenius angle between ``rho`` and the pseudopure target."""
    return frobenius_angle(rho, pps_target())


# fidelity bookkeeping ------------------------------------------------------


def entanglement_fidelity(f_x, f_y, f_z):
    """``F = (1 + f_x + f_y + f_z) / 4`` for a unital single-qubit channel."""
    for name, f in (("f_x", f_x), ("f_y", f_y), ("f_z", f_z)):
        if not -1 - 1e-9 <= f <= 1 + 1e-9:
            raise ValueError(f"{name}={f} outside [-1, 1]")
    return (1.0 + f_x + f_y + f_z) / 4.0


def survival_fraction(pipeline, input_pauli):
    """Fraction of the data-qubit ``P`` signal that survives ``pipeline``.

    ``pipeline`` maps the 8x8 input ``|00><00| (x) P`` to an 8x8 output;
    ``f_P = Tr[P out_data] / Tr[P P]`` with ancillae traced out.
    """
    p = PAULI[input_pauli.upper()]
    out = np.asarray(pipeline(embed_data(p)))
    if out.shape == (8, 8):
        out = data_state(out)
    return float(np.real(np.trace(p @ out)) / 2.0)


# round drivers ---------------------------------------------------------------


@dataclass
class RoundConfig:
    """One QEC experiment.

    ``noise`` is a channel, a callable ``delay_ms -> channel``, or ``None``
    for no noise.  In two-round runs each round sees half of ``delay_ms``.
    ``gate_error`` adds single-qubit depolarizing of that strength on every
    wire after each gate stage.
    """

    mode: str = "corrected"
    noise: object = None
    delay_ms: float = 0.0
    ideal_ancillae: bool = False
    gate_error: float = 0.0
    swap_ancillae: bool = False
    prepare: bool = True

    def __post_init__(self):
        if self.mode not in MODES + (TWO_ROUND_MODE,):
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES + (TWO_ROUND_MODE,)}")
        if self.delay_ms < 0:
            raise ValueError(f"delay must be non-negative, got {self.delay_ms}")
        if not 0.0 <= self.gate_error <= 1.0:
            raise ValueError(f"gate_error must lie in [0, 1], got {self.gate_error}")


@dataclass
class RoundResult:
    f_x: float
    f_y: float
    f_z: float
    entanglement_fidelity: float
    # per input label: (s00, s10, s01, s11), or None when nothing was decoded
    syndromes: dict = field(default_factory=dict)
    # pipeline executions per input label
    n_branches: dict = field(default_factory=dict)

    @property
    def mean_syndromes(self):
        rows = [s for s in self.syndromes.values() if s is not None]
        if not rows:
            return None
        return tuple(float(x) for x in np.mean(rows, axis=0))


def _noise_channel(noise, tau_ms):
    if noise is None:
        return None
    if isinstance(noise, Channel):
        return noise
    if callable(noise):
        return noise(tau_ms)
    raise TypeError(f"noise must be a channel or a schedule, got {type(noise).__name__}")


def _prepared_input(label, prepare):
    """Pseudopure state with the data deviation turned to ``P``.

    The filter leaves ``X`` on the data wire; a y rotation takes it to
    ``Z`` and ``U_p`` takes ``Z`` to the requested input.
    """
    if prepare:
        rho = prepare_pps()
        to_z = _ry(-np.pi / 2)
    else:
        rho = embed_data(PAULI["Z"])
        to_z = PAULI["I"]
    u = kronecker(PAULI["I"], PAULI["I"], input_unitary(label) @ to_z)
    return conjugate(u, rho)


class _Pipeline:
    """Gate stages of one round, with the optional per-stage depolarizing."""

    def __init__(self, cfg):
        self.circuit = build_code_circuit(cfg.swap_ancillae)
        self.gate_noise = depolarizing(cfg.gate_error, range(N_QUBITS)) if cfg.gate_error > 0 else None

    def gate(self, u, rho):
        rho = conjugate(u, rho)
        return self.gate_noise.apply(rho) if self.gate_noise is not None else rho

    def round(self, rho, channel, mode):
        if mode != "unencoded":
            rho = self.gate(self.circuit.u_encode, rho)
        if channel is not None:
            rho = channel.apply(rho)
        if mode != "unencoded":
            rho = self.gate(self.circuit.u_decode, rho)
            if mode == "corrected":
                rho = self.gate(self.circuit.u_correct, rho)
        return rho


def _signal(rho, label):
    p = PAULI[label]
    return float(np.real(np.trace(p @ data_state(rho))))


def _finish(outputs, inputs, syndromes, counts):
    f = {lab: _signal(outputs[lab], lab) / _signal(inputs[lab], lab) for lab in INPUT_LABELS}
    return RoundResult(
        f_x=f["X"],
        f_y=f["Y"],
        f_z=f["Z"],
        entanglement_fidelity=entanglement_fidelity(f["X"], f["Y"], f["Z"]),
        syndromes=syndromes,
        n_branches=counts,
    )


def _normalized_syndromes(rho, rho_in, label, circuit):
    # syndrome_intensities assumes a unit input; rescale to the actual one
    scale = _signal(rho_in, label) / 2.0
    return tuple(s / scale for s in syndrome_intensities(rho, label, circuit))


def run_one_round(cfg):
    """Prepare, (encode,) apply noise, (decode[, correct]) for inputs X, Y, Z."""
    if cfg.mode not in MODES:
        raise ValueError(f"one-round mode must be one of {MODES}, got {cfg.mode!r}")
    pipe = _Pipeline(cfg)
    channel = _noise_channel(cfg.noise, cfg.delay_ms)
    inputs, outputs, syndromes, counts = {}, {}, {}, {}
    for label in INPUT_LABELS:
        rho_in = _prepared_input(label, cfg.prepare)
        out = pipe.round(rho_in, channel, cfg.mode)
        inputs[label], outputs[label] = rho_in, out
        counts[label] = 1
        syndromes[label] = (
            None if cfg.mode == "unencoded" else _normalized_syndromes(out, rho_in, label, pipe.circuit)
        )
    return _finish(outputs, inputs, syndromes, counts)


def syndrome_branches(rho, toggles=SYNDROME_TOGGLES):
    """Unnormalized ancilla-|00> blocks after each syndrome toggle ``U_s``."""
    p00 = ancilla_projector("00")
    out = []
    for t in toggles:
        u_s = kronecker(PAULI[t[0]], PAULI[t[1]], PAULI["I"])
        moved = conjugate(u_s, rho)
        out.append((t, p00 @ moved @ p00))
    return out


def run_two_rounds(cfg):
    """Two corrected rounds, each over half of ``cfg.delay_ms``.

    Between rounds the ancillae are refreshed.  By default this is done
    the ensemble way: each of the four toggles ``U_s`` moves one syndrome
    block into ``|00>``, that block is extracted unnormalized, the second
    round is run on it, and the four outputs are summed.  With
    ``ideal_ancillae`` the ancillae are simply reset to ``|00>``.
    """
    if cfg.mode not in ("corrected", TWO_ROUND_MODE):
        raise ValueError("two-round runs are defined for the corrected pipeline only")
    pipe = _Pipeline(cfg)
    half = 0.5 * cfg.delay_ms
    channel = _noise_channel(cfg.noise, half)
    inputs, outputs, syndromes, counts = {}, {}, {}, {}
    for label in INPUT_LABELS:
        rho_in = _prepared_input(label, cfg.prepare)
        first = pipe.round(rho_in, channel, "corrected")
        if cfg.ideal_ancillae:
            branches = [embed_data(data_state(first))]
        else:
            branches = []
            for t, block in syndrome_branches(first):
                if pipe.gate_noise is not None and t != "II":
                    block = pipe.gate_noise.apply(block)
                branches.append(block)
        total = np.zeros((8, 8), dtype=complex)
        for block in branches:
            total += pipe.round(block, channel, "corrected")
        inputs[label], outputs[label] = rho_in, total
        counts[label] = len(branches)
        syndromes[label] = _normalized_syndromes(total, rho_in, label, pipe.circuit)
    return _finish(outputs, inputs, syndromes, counts)


def run_round(cfg):
    """Dispatch on ``cfg.mode``; ``two_rounds`` selects :func:`run_two_rounds`."""
    if cfg.mode == TWO_ROUND_MODE:
        return run_two_rounds(cfg)
    return run_one_round(cfg)


def syndrome_count(n_rounds, n_syndromes=len(SYNDROMES)):
    """Pipeline executions per input for ``n_rounds`` rounds: ``s ** (m - 1)``."""
    if n_rounds < 1:
        raise ValueError("need at least one round")
    return n_syndromes ** (n_rounds - 1)


__all__ = [
    "INPUT_LABELS",
    "MODES",
    "TWO_ROUND_MODE",
    "U_PPS",
    "RoundConfig",
    "RoundResult",
    "coherence_projector",
    "entanglement_fidelity",
    "input_unitary",
    "phase_cycle_filter",
    "pps_angle",
    "pps_target",
    "prepare_pps",
    "run_one_round",
    "run_round",
    "run_two_rounds",
    "survival_fraction",
    "syndrome_branches",
    "syndrome_count",
    "thermal_deviation",
]
