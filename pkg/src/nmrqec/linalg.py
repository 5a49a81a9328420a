"""Dense complex linear algebra for small register Hilbert spaces.

Operators are plain ``numpy.ndarray`` objects of shape ``(dim, dim)`` with
complex dtype.  Tensor-factor ordering is fixed everywhere in the package:
qubit 1 is the leftmost Kronecker factor, i.e. the slowest-varying index
and the top wire of a circuit diagram.
"""

from functools import reduce

import numpy as np

HERMITIAN_ATOL = 1e-10
UNITARY_ATOL = 1e-10
TRACE_ATOL = 1e-12


def as_operator(a):
    """Return ``a`` as a square complex array, raising on bad shape."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a, atol=HERMITIAN_ATOL):
    a = as_operator(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= atol)


def is_unitary(a, atol=UNITARY_ATOL):
    a = as_operator(a)
    eye = np.eye(a.shape[0])
    return bool(np.max(np.abs(a.conj().T @ a - eye), initial=0.0) <= atol)


def check_hermitian(a, atol=HERMITIAN_ATOL):
    if not is_hermitian(a, atol):
        dev = np.max(np.abs(a - np.conj(a).T))
        raise ValueError(f"operator is not Hermitian (max |A - A^dag| = {dev:.3g})")
    return a


def check_unitary(a, atol=UNITARY_ATOL):
    if not is_unitary(a, atol):
        a = as_operator(a)
        dev = np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))
        raise ValueError(f"operator is not unitary (max |U^dag U - I| = {dev:.3g})")
    return a


def kronecker(*factors):
    """Kronecker product of the factors, first factor slowest."""
    if not factors:
        raise ValueError("kronecker needs at least one factor")
    return reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


def expm_hermitian(h, t=1.0):
    """Return ``exp(-i h t)`` for Hermitian ``h`` via eigendecomposition.

    Parameters
    ----------
    h : (d, d) array_like
        Hermitian generator.  Rejected if ``max|h - h^dag| > 1e-10``.
    t : float
        Evolution time, in the reciprocal units of ``h``.

    Returns
    -------
    (d, d) ndarray
        The unitary propagator.
    """
    h = check_hermitian(as_operator(h))
    if t == 0:
        return np.eye(h.shape[0], dtype=complex)
    # symmetrize so eigh sees an exactly Hermitian matrix
    evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T


def conjugate(u, rho):
    """``u @ rho @ u^dag``."""
    return u @ rho @ u.conj().T


def partial_trace(rho, keep, dims):
    """Trace out every tensor factor of ``rho`` not listed in ``keep``.

    ``keep`` holds zero-based factor indices; ``dims`` lists factor
    dimensions in the global (leftmost = slowest) order.  The kept factors
    stay in their original relative order.
    """
    rho = as_operator(rho)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != rho.shape[0]:
        raise ValueError(f"factor dims {dims} do not multiply to {rho.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep indices {keep} out of range for {n} factors")

    t = rho.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d_keep = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(d_keep, d_keep)


def frobenius_angle(a, b):
    """Angle between two operators under the Frobenius inner product."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("angle undefined for a zero operator")
    a = a / na
    b = b / nb
    along = np.vdot(a, b)
    # atan2 form keeps resolution for nearly parallel operators
    perp = np.linalg.norm(b - along * a)
    return float(np.arctan2(perp, abs(along)))
