"""Phase-noise channels acting on register deviation matrices.

Three error classes are modelled:

* coherent: a known unitary phase rotation (:func:`coherent_z`);
* incoherent: an ensemble average over a classical parameter, either a
  two-point phase mixture (:func:`dephasing`) or a Zeeman-offset
  distribution (:func:`dispersion_average`);
* decoherent: evolution together with bath spins that are traced out
  afterwards (:func:`natural_evolution`).

Every channel here is trace preserving and unital.
"""

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .linalg import conjugate, kronecker, partial_trace
from .spins import PAULI, build_hamiltonian, pauli_on

DEFAULT_T2STAR_MS = 2.0
DEFAULT_DISPERSION_SAMPLES = 15


class Channel:
    """Base class; subclasses implement :meth:`apply` on ``(2**n, 2**n)`` arrays."""

    def apply(self, rho):
        raise NotImplementedError

    def _check(self, rho):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (2**self.n_qubits,) * 2:
            raise ValueError(
                f"{self.kind} channel acts on {self.n_qubits} qubits, got matrix {rho.shape}"
            )
        return rho


@dataclass(frozen=True, eq=False)
class UnitaryMixture(Channel):
    """``rho -> sum_k w_k U_k rho U_k^dag`` with weights summing to one."""

    kind: str
    n_qubits: int
    weights: tuple
    unitaries: tuple = field(repr=False)

    def apply(self, rho):
        rho = self._check(rho)
        if len(self.unitaries) == 1:
            return conjugate(self.unitaries[0], rho)
        us = np.asarray(self.unitaries)
        return _kernels.weighted_conjugation_sum(us, np.asarray(self.weights, dtype=float), rho)


@dataclass(frozen=True, eq=False)
class Identity(Channel):
    n_qubits: int = 3
    kind: str = "identity"

    def apply(self, rho):
        return self._check(rho).copy()


def identity_channel(n_qubits=3):
    return Identity(n_qubits)


def coherent_z(theta, qubit, n_qubits=3):
    """Conjugation by ``exp(-i theta/2 Z_q) = cos(theta/2) I - i sin(theta/2) Z_q``."""
    _check_qubit(qubit, n_qubits)
    u = np.cos(theta / 2) * np.eye(2**n_qubits) - 1j * np.sin(theta / 2) * pauli_on("Z", qubit, n_qubits)
    return UnitaryMixture("coherent_z", n_qubits, (1.0,), (u,))


def dephasing(theta, qubit, n_qubits=3):
    """``rho -> cos^2(theta) rho + sin^2(theta) Z rho Z`` on one qubit."""
    _check_qubit(qubit, n_qubits)
    z = pauli_on("Z", qubit, n_qubits)
    return UnitaryMixture(
        "dephasing",
        n_qubits,
        (np.cos(theta) ** 2, np.sin(theta) ** 2),
        (np.eye(2**n_qubits, dtype=complex), z),
    )


def dephasing_q(q, qubit, n_qubits=3):
    """Dephasing with flip weight ``q = sin^2(theta)``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"flip weight must lie in [0, 1], got {q}")
    return dephasing(np.arcsin(np.sqrt(q)), qubit, n_qubits)


def independent_dephasing(q, qubits=(0, 1, 2), n_qubits=3):
    return compose([dephasing_q(q, k, n_qubits) for k in qubits])


def depolarizing(p, qubits, n_qubits=3):
    """Independent single-qubit depolarizing of strength ``p`` on each listed qubit.

    Each qubit sees ``(1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {p}")
    qubits = list(qubits)
    weights, unitaries = [], []
    single = [("I", 1 - p), ("X", p / 3), ("Y", p / 3), ("Z", p / 3)]
    for combo in itertools.product(single, repeat=len(qubits)):
        w = float(np.prod([c[1] for c in combo]))
        if w == 0.0:
            continue
        letters = ["I"] * n_qubits
        for q, (c, _) in zip(qubits, combo):
            letters[q] = c
        weights.append(w)
        unitaries.append(kronecker(*(PAULI[c] for c in letters)))
    return UnitaryMixture("depolarizing", n_qubits, tuple(weights), tuple(unitaries))


def _check_qubit(qubit, n):
    if not 0 <= qubit < n:
        raise ValueError(f"qubit index {qubit} out of range for {n} qubits")


@lru_cache(maxsize=4096)
def _eig(system, shift_offset_khz, bath_scale):
    h = build_hamiltonian(system, shift_offset_khz, bath_scale)
    return np.linalg.eigh(h)


def evolution_operator(system, tau_ms, shift_offset_khz=0.0, bath_scale=1.0):
    """``exp(-i H tau)`` on the carbons plus bath (cached eigendecomposition)."""
    evals, evecs = _eig(system, float(shift_offset_khz), float(bath_scale))
    return (evecs * np.exp(-1j * evals * tau_ms)) @ evecs.conj().T


@dataclass(frozen=True, eq=False)
class NaturalEvolution(Channel):
    """Free evolution under the register Hamiltonian for ``tau_ms``.

    Bath spins start maximally mixed and are traced out afterwards, and
    every bath coupling is scaled by ``decoupling_scale``.
    """

    system: object
    tau_ms: float
    decoupling_scale: float = 1.0
    shift_offset_khz: float = 0.0
    kind: str = "natural_evolution"

    @property
    def n_qubits(self):
        return self.system.n_spins

    def apply(self, rho):
        rho = self._check(rho)
        if self.tau_ms == 0:
            return rho.copy()
        nb = self.system.n_bath
        u = evolution_operator(self.system, self.tau_ms, self.shift_offset_khz, self.decoupling_scale)
        if nb == 0:
            return conjugate(u, rho)
        big = np.kron(rho, np.eye(2**nb) / 2**nb)
        n = self.system.n_spins
        return partial_trace(conjugate(u, big), keep=range(n), dims=self.system.dims)

    def at_offset(self, offset_khz):
        return NaturalEvolution(self.system, self.tau_ms, self.decoupling_scale, offset_khz)


def natural_evolution(system, tau_ms, decoupling_scale=1.0):
    if tau_ms < 0:
        raise ValueError(f"delay must be non-negative, got {tau_ms}")
    if not 0.0 <= decoupling_scale <= 1.0:
        raise ValueError(f"decoupling scale must lie in [0, 1], got {decoupling_scale}")
    return NaturalEvolution(system, float(tau_ms), float(decoupling_scale))


@dataclass(frozen=True, eq=False)
class Ensemble(Channel):
    """Weighted average of member channels acting on the same register."""

    members: tuple
    kind: str = "dispersion"

    @property
    def n_qubits(self):
        return self.members[0][1].n_qubits

    def apply(self, rho):
        rho = self._check(rho)
        out = np.zeros_like(rho)
        for w, ch in self.members:
            out += w * ch.apply(rho)
        return out


@dataclass(frozen=True, eq=False)
class Composed(Channel):
    """Apply ``channels`` in list order."""

    channels: tuple
    kind: str = "composed"

    @property
    def n_qubits(self):
        return self.channels[0].n_qubits

    def apply(self, rho):
        for ch in self.channels:
            rho = ch.apply(rho)
        return rho


def compose(channels):
    channels = tuple(channels)
    if not channels:
        raise ValueError("nothing to compose")
    n = {ch.n_qubits for ch in channels}
    if len(n) != 1:
        raise ValueError(f"cannot compose channels on different register sizes {sorted(n)}")
    if len(channels) == 1:
        return channels[0]
    return Composed(channels)


def lorentzian_width_for_t2star(t2star_ms=DEFAULT_T2STAR_MS):
    """Half width (kHz) of a Lorentzian offset distribution giving FID ``exp(-t/T2*)``."""
    return 1.0 / (2 * np.pi * t2star_ms)


def gaussian_width_for_t2star(t2star_ms=DEFAULT_T2STAR_MS):
    """Standard deviation (kHz) of a Gaussian offset distribution with ``FID(T2*) = 1/e``."""
    return np.sqrt(2.0) / (2 * np.pi * t2star_ms)


def szego_cauchy_rule(n, r):
    """n-point Gauss rule on the unit circle for the wrapped Cauchy law.

    Returns angles ``phi_k`` and positive weights ``w_k`` such that
    ``sum_k w_k exp(i p phi_k) = r**|p|`` for ``|p| <= n - 1``.  The nodes are
    the zeros of the para-orthogonal polynomial ``z^n - r z^(n-1) + r z - 1``.
    """
    if n < 1:
        raise ValueError("need at least one node")
    if not 0.0 <= r < 1.0:
        raise ValueError(f"concentration must lie in [0, 1), got {r}")
    if n == 1:
        return np.zeros(1), np.ones(1)
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    coeffs[1] -= r
    coeffs[n - 1] += r
    coeffs[n] -= 1.0
    z = np.roots(coeffs)
    z = z / np.abs(z)
    # Christoffel weights: orthonormal Phi_j has |phi_j(z)|^2 = |z - r|^2 / (1 - r^2) for j >= 1
    w = 1.0 / (1.0 + (n - 1) * np.abs(z - r) ** 2 / (1.0 - r * r))
    phi = np.angle(z)
    order = np.argsort(phi)
    phi, w = phi[order], w[order]
    return phi, w / w.sum()


@dataclass(frozen=True)
class DispersionModel:
    """Distribution of a common Zeeman offset added to every carbon shift.

    ``width_khz`` is the half width at half maximum for ``"lorentzian"`` and
    the standard deviation for ``"gaussian"``.
    """

    distribution: str = "lorentzian"
    width_khz: float = field(default_factory=lorentzian_width_for_t2star)
    n_samples: int = DEFAULT_DISPERSION_SAMPLES

    def __post_init__(self):
        if self.distribution not in ("lorentzian", "gaussian"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not self.width_khz >= 0:
            raise ValueError(f"width must be non-negative, got {self.width_khz}")

    @classmethod
    def for_t2star(cls, t2star_ms=DEFAULT_T2STAR_MS, distribution="lorentzian", n_samples=DEFAULT_DISPERSION_SAMPLES):
        if t2star_ms <= 0:
            raise ValueError("T2* must be positive")
        width = {
            "lorentzian": lorentzian_width_for_t2star,
            "gaussian": gaussian_width_for_t2star,
        }[distribution](t2star_ms)
        return cls(distribution, width, n_samples)

    def nodes(self, tau_ms):
        """Offsets (kHz) and normalized weights for a delay of ``tau_ms``.

        Gaussian: Gauss-Hermite nodes, independent of ``tau_ms``.
        Lorentzian: the offset only enters through the collective phase
        ``phi = 2 pi offset tau`` taken mod 2 pi, whose law is wrapped Cauchy
        with ``r = exp(-2 pi width tau)``; the circle Gauss rule for that law
        is exact for every coherence order below ``n_samples``.
        """
        if self.width_khz == 0 or tau_ms == 0:
            return np.zeros(1), np.ones(1)
        if self.distribution == "gaussian":
            x, w = np.polynomial.hermite_e.hermegauss(self.n_samples)
            return self.width_khz * x, w / w.sum()
        r = np.exp(-2 * np.pi * self.width_khz * tau_ms)
        phi, w = szego_cauchy_rule(self.n_samples, r)
        return phi / (2 * np.pi * tau_ms), w


def dispersion_average(base, model):
    """Average a natural-evolution channel over the model's offset nodes."""
    if not isinstance(base, NaturalEvolution):
        raise TypeError("dispersion averaging needs a natural_evolution base channel")
    offsets, weights = model.nodes(base.tau_ms)
    members = tuple(
        (float(w), base.at_offset(base.shift_offset_khz + float(o))) for o, w in zip(offsets, weights)
    )
    return Ensemble(members)


# Delay-parametrised noise, used by the round drivers and sweeps.


@dataclass(frozen=True)
class DephasingSchedule:
    """Independent dephasing with ``q(tau) = (1 - exp(-tau/T2)) / 2`` per listed qubit."""

    t2_ms: float
    qubits: tuple = (0, 1, 2)
    n_qubits: int = 3

    def flip_weight(self, tau_ms):
        return 0.5 * (1.0 - np.exp(-tau_ms / self.t2_ms))

    def __call__(self, tau_ms):
        return independent_dephasing(self.flip_weight(tau_ms), self.qubits, self.n_qubits)


@dataclass(frozen=True)
class CoherentSchedule:
    """Coherent rotation of ``qubit`` by ``theta = 2 pi f tau``."""

    freq_khz: float
    qubit: int = 0
    n_qubits: int = 3

    def __call__(self, tau_ms):
        return coherent_z(2 * np.pi * self.freq_khz * tau_ms, self.qubit, self.n_qubits)


@dataclass(frozen=True)
class NaturalSchedule:
    """Natural evolution, optionally averaged over Zeeman dispersion."""

    system: object
    decoupling_scale: float = 1.0
    dispersion: object = None

    def __call__(self, tau_ms):
        ch = natural_evolution(self.system, tau_ms, self.decoupling_scale)
        if self.dispersion is not None:
            ch = dispersion_average(ch, self.dispersion)
        return ch


@dataclass(frozen=True)
class FixedSchedule:
    """The same channel regardless of delay."""

    channel: object

    def __call__(self, tau_ms):
        return self.channel
