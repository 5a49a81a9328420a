"""Spin register: Pauli strings, the carbon Hamiltonian and coherence orders.

Units are fixed for the whole package: frequencies in kHz, times in ms,
Hamiltonians in rad/ms.  All factors of pi live in :func:`build_hamiltonian`.

Basis convention: ``|0>`` is spin-up (Z = +1).  Qubit/spin 1 is the leftmost
tensor factor.  Bath spins, when present, are appended after the carbons.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .linalg import kronecker

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MALONIC_LABELS = ("C1", "C2", "Cm")
MALONIC_SHIFTS_KHZ = (6.380, -1.533, -5.650)
# upper triangle of the coupling table: dipolar constants
MALONIC_DIPOLAR_KHZ = {(0, 1): 0.297, (0, 2): 0.780, (1, 2): 1.050}
# lower triangle of the coupling table: J constants
MALONIC_J_KHZ = {(0, 1): -0.025, (0, 2): 0.071, (1, 2): 0.042}


def pauli_operator(letters):
    """Kronecker product of single-qubit Paulis, e.g. ``"XXI"``."""
    letters = str(letters).upper()
    if not letters:
        raise ValueError("empty Pauli string")
    bad = set(letters) - set(PAULI)
    if bad:
        raise ValueError(f"invalid Pauli letter(s) {sorted(bad)} in {letters!r}")
    return kronecker(*(PAULI[c] for c in letters))


def pauli_on(letter, qubit, n):
    """Single Pauli ``letter`` on zero-based ``qubit`` of an ``n``-qubit register."""
    s = ["I"] * n
    s[qubit] = letter
    return pauli_operator("".join(s))


def _pair_table(n, entries, name):
    table = np.zeros((n, n))
    for (i, j), v in entries.items():
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{name} pair ({i}, {j}) out of range for {n} spins")
        if i >= j:
            raise ValueError(f"{name} table is upper-triangular; got pair ({i}, {j})")
        table[i, j] = v
    return tuple(tuple(float(x) for x in row) for row in table)


@dataclass(frozen=True)
class BathCoupling:
    """Secular coupling of one bath spin (proton) to one carbon.

    ``carbon_index`` is one-based.  The bath term contributes
    ``pi * coupling_khz * Z_carbon Z_bath``, so an isolated carbon coherence
    is modulated as ``cos(2 pi d t)`` and fully revives at ``t = 1/d``.
    """

    carbon_index: int
    coupling_khz: float

    def __post_init__(self):
        if not np.isfinite(self.coupling_khz):
            raise ValueError("bath coupling must be finite")
        if self.carbon_index < 1:
            raise ValueError("carbon_index is one-based")


@dataclass(frozen=True)
class SpinSystem:
    """Carbon register plus optional bath spins.

    ``dipolar_khz`` and ``j_khz`` are ``n x n`` tables of which only the
    strict upper triangle is used; :meth:`from_pairs` builds them from
    ``{(i, j): value}`` maps with zero-based ``i < j``.
    """

    labels: tuple
    shifts_khz: tuple
    dipolar_khz: tuple
    j_khz: tuple
    bath: tuple = field(default=())

    def __post_init__(self):
        n = len(self.labels)
        if n < 1:
            raise ValueError("need at least one spin")
        if len(self.shifts_khz) != n:
            raise ValueError("one chemical shift per spin required")
        for name in ("dipolar_khz", "j_khz"):
            t = np.asarray(getattr(self, name), dtype=float)
            if t.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if np.any(np.tril(t) != 0):
                raise ValueError(f"{name} table is upper-triangular; lower/diagonal entries must be zero")
            if not np.all(np.isfinite(t)):
                raise ValueError(f"{name} contains non-finite values")
        if not np.all(np.isfinite(self.shifts_khz)):
            raise ValueError("chemical shifts must be finite")
        for b in self.bath:
            if b.carbon_index > n:
                raise ValueError(f"bath coupling targets carbon {b.carbon_index}, register has {n}")

    @classmethod
    def from_pairs(cls, labels, shifts_khz, dipolar=None, j=None, bath=()):
        n = len(labels)
        return cls(
            labels=tuple(labels),
            shifts_khz=tuple(float(w) for w in shifts_khz),
            dipolar_khz=_pair_table(n, dipolar or {}, "dipolar"),
            j_khz=_pair_table(n, j or {}, "J"),
            bath=tuple(bath),
        )

    @property
    def n_spins(self):
        return len(self.labels)

    @property
    def n_bath(self):
        return len(self.bath)

    @property
    def dims(self):
        return [2] * (self.n_spins + self.n_bath)

    def with_bath(self, bath):
        return replace(self, bath=tuple(bath))

    def without_carbon_terms(self):
        """Same register and bath with every carbon-only term zeroed."""
        n = self.n_spins
        zero = tuple((0.0,) * n for _ in range(n))
        return replace(self, shifts_khz=(0.0,) * n, dipolar_khz=zero, j_khz=zero)

    def permuted(self, order):
        """Reorder spins; ``order[k]`` is the old index placed at position k."""
        order = list(order)
        if sorted(order) != list(range(self.n_spins)):
            raise ValueError(f"{order} is not a permutation of the spins")
        new_of_old = {old: new for new, old in enumerate(order)}

        def remap(table):
            t = np.asarray(table)
            pairs = {}
            for i in range(self.n_spins):
                for j in range(i + 1, self.n_spins):
                    if t[i, j] != 0:
                        a, b = sorted((new_of_old[i], new_of_old[j]))
                        pairs[(a, b)] = t[i, j]
            return _pair_table(self.n_spins, pairs, "coupling")

        return SpinSystem(
            labels=tuple(self.labels[k] for k in order),
            shifts_khz=tuple(self.shifts_khz[k] for k in order),
            dipolar_khz=remap(self.dipolar_khz),
            j_khz=remap(self.j_khz),
            bath=tuple(BathCoupling(new_of_old[b.carbon_index - 1] + 1, b.coupling_khz) for b in self.bath),
        )


def malonic(bath=()):
    """The three-carbon malonic-acid register (shifts and couplings in kHz)."""
    return SpinSystem.from_pairs(
        MALONIC_LABELS, MALONIC_SHIFTS_KHZ, MALONIC_DIPOLAR_KHZ, MALONIC_J_KHZ, bath=bath
    )


@lru_cache(maxsize=64)
def _spin_ops(n):
    return {c: [pauli_on(c, q, n) for q in range(n)] for c in "XYZ"}


def build_hamiltonian(system, shift_offset_khz=0.0, bath_scale=1.0):
    """Register Hamiltonian in rad/ms.

    ``H = sum_i pi (w_i + offset) Z_i
        + sum_{i<j} pi D_ij (2 Z_i Z_j - X_i X_j - Y_i Y_j)
        + sum_{i<j} (pi/2) J_ij (Z_i Z_j + X_i X_j + Y_i Y_j)
        + sum_bath pi (bath_scale * d) Z_c Z_b``

    The Hilbert space holds the carbons followed by one qubit per bath
    coupling, so its dimension is ``2 ** (n_spins + n_bath)``.
    """
    n = system.n_spins
    ntot = n + system.n_bath
    ops = _spin_ops(ntot)
    X, Y, Z = ops["X"], ops["Y"], ops["Z"]
    h = np.zeros((2**ntot, 2**ntot), dtype=complex)
    for i in range(n):
        w = system.shifts_khz[i] + shift_offset_khz
        if w:
            h += np.pi * w * Z[i]
    dip = system.dipolar_khz
    jj = system.j_khz
    for i in range(n):
        for j in range(i + 1, n):
            zz = Z[i] @ Z[j]
            xx_yy = X[i] @ X[j] + Y[i] @ Y[j]
            if dip[i][j]:
                h += np.pi * dip[i][j] * (2 * zz - xx_yy)
            if jj[i][j]:
                h += 0.5 * np.pi * jj[i][j] * (zz + xx_yy)
    for k, b in enumerate(system.bath):
        d = bath_scale * b.coupling_khz
        if d:
            h += np.pi * d * (Z[b.carbon_index - 1] @ Z[n + k])
    return h


def total_z(n):
    """Collective ``sum_i Z_i`` on ``n`` qubits (diagonal)."""
    return sum(_spin_ops(n)["Z"])


def coherence_orders(n):
    """Integer matrix ``p[a, b] = (#up in a) - (#up in b)`` on ``n`` qubits."""
    idx = np.arange(2**n)
    ups = np.array([n - bin(i).count("1") for i in idx])
    return ups[:, None] - ups[None, :]


def coherence_decompose(rho, n=None):
    """Split ``rho`` into coherence-order components ``{p: rho_p}``.

    Every order from ``-n`` to ``n`` is present in the result, with zero
    matrices for empty orders, and the components sum to ``rho`` exactly.
    Under ``R = exp(-i phi sum Z / 2)``, ``R rho_p R^dag = exp(-i p phi) rho_p``.
    """
    rho = np.asarray(rho, dtype=complex)
    if n is None:
        n = int(round(np.log2(rho.shape[0])))
    if rho.shape != (2**n, 2**n):
        raise ValueError(f"expected a {2**n}x{2**n} matrix, got {rho.shape}")
    orders = coherence_orders(n)
    return {p: np.where(orders == p, rho, 0) for p in range(-n, n + 1)}


def collective_z_rotation(phi, n):
    """``exp(-i phi sum_i Z_i / 2)`` on ``n`` qubits."""
    return np.diag(np.exp(-0.5j * phi * np.diag(total_z(n)).real))
