"""Hot numeric kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and the environment
variable ``NMRQEC_DISABLE_NUMBA`` is unset or ``0``.  Both paths expose the
same functions and are checked against each other in the test suite.

Array conventions: ``(M, N, d, d)`` stacks are ensemble member x time slice
x matrix.  Slice ``k = 0`` is applied first.
"""

import os

import numpy as np

_DISABLED = os.environ.get("NMRQEC_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by NMRQEC_DISABLE_NUMBA")
    import numba
except ImportError:
    numba = None

BACKEND = "numba" if numba is not None else "numpy"


# pure numpy -----------------------------------------------------------------


def weighted_conjugation_sum_np(us, weights, rho):
    return np.einsum("k,kij,jl,kml->im", weights, us, rho, us.conj(), optimize=True)


def slice_propagators_np(evals, evecs, dt):
    phases = np.exp(-1j * evals * dt)
    return (evecs * phases[..., None, :]) @ np.conj(np.swapaxes(evecs, -1, -2))


def forward_products_np(uk):
    m, n, d, _ = uk.shape
    out = np.empty((m, n + 1, d, d), dtype=complex)
    out[:, 0] = np.eye(d)
    for k in range(n):
        out[:, k + 1] = uk[:, k] @ out[:, k]
    return out


def backward_products_np(uk, target_dag):
    """``P[k] = T^dag U_{N-1} ... U_{k+1}`` (``P[N-1] = T^dag``)."""
    m, n, d, _ = uk.shape
    out = np.empty((m, n, d, d), dtype=complex)
    out[:, n - 1] = target_dag
    for k in range(n - 1, 0, -1):
        out[:, k - 1] = out[:, k] @ uk[:, k]
    return out


def _divided_differences_np(evals, dt):
    phases = np.exp(-1j * evals * dt)
    diff = evals[..., :, None] - evals[..., None, :]
    degenerate = np.abs(diff) < 1e-10
    num = phases[..., :, None] - phases[..., None, :]
    safe = np.where(degenerate, 1.0, diff)
    return np.where(degenerate, -1j * dt * phases[..., :, None], num / safe)


def slice_gradients_np(fwd, bwd, evals, evecs, dt, controls, rf):
    """``dg[m, k, c] = Tr(P_k (dU_k / du_c) R_k)`` for trace overlap ``g``.

    ``controls`` holds the control Hamiltonians per unit amplitude, scaled
    per member by ``rf``.
    """
    vh = np.conj(np.swapaxes(evecs, -1, -2))
    mk = fwd[:, :-1] @ bwd
    mt = vh @ mk @ evecs
    g = _divided_differences_np(evals, dt)
    out = np.empty(evals.shape[:2] + (len(controls),), dtype=complex)
    for c, hc in enumerate(controls):
        a = rf[:, None, None, None] * (vh @ hc @ evecs)
        out[..., c] = np.einsum("mkba,mkab,mkab->mk", mt, g, a)
    return out


# numba ----------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def weighted_conjugation_sum_nb(us, weights, rho):
        d = rho.shape[0]
        out = np.zeros((d, d), dtype=np.complex128)
        for k in range(us.shape[0]):
            u = us[k]
            out += weights[k] * (u @ rho @ u.conj().T)
        return out

    @numba.njit(cache=True)
    def slice_propagators_nb(evals, evecs, dt):
        m, n, d = evals.shape
        out = np.empty((m, n, d, d), dtype=np.complex128)
        for i in range(m):
            for k in range(n):
                v = evecs[i, k]
                ph = np.exp(-1j * evals[i, k] * dt)
                for a in range(d):
                    for b in range(d):
                        acc = 0j
                        for j in range(d):
                            acc += v[a, j] * ph[j] * np.conj(v[b, j])
                        out[i, k, a, b] = acc
        return out

    @numba.njit(cache=True)
    def forward_products_nb(uk):
        m, n, d, _ = uk.shape
        out = np.empty((m, n + 1, d, d), dtype=np.complex128)
        for i in range(m):
            out[i, 0] = np.eye(d, dtype=np.complex128)
            for k in range(n):
                out[i, k + 1] = uk[i, k] @ out[i, k]
        return out

    @numba.njit(cache=True)
    def backward_products_nb(uk, target_dag):
        m, n, d, _ = uk.shape
        out = np.empty((m, n, d, d), dtype=np.complex128)
        for i in range(m):
            out[i, n - 1] = target_dag
            for k in range(n - 1, 0, -1):
                out[i, k - 1] = out[i, k] @ uk[i, k]
        return out

    @numba.njit(cache=True)
    def slice_gradients_nb(fwd, bwd, evals, evecs, dt, controls, rf):
        m, n, d = evals.shape
        nc = controls.shape[0]
        out = np.empty((m, n, nc), dtype=np.complex128)
        g = np.empty((d, d), dtype=np.complex128)
        for i in range(m):
            for k in range(n):
                v = np.ascontiguousarray(evecs[i, k])
                vh = np.ascontiguousarray(v.conj().T)
                lam = evals[i, k]
                ph = np.exp(-1j * lam * dt)
                for a in range(d):
                    for b in range(d):
                        dl = lam[a] - lam[b]
                        if abs(dl) < 1e-10:
                            g[a, b] = -1j * dt * ph[a]
                        else:
                            g[a, b] = (ph[a] - ph[b]) / dl
                mt = vh @ (np.ascontiguousarray(fwd[i, k]) @ np.ascontiguousarray(bwd[i, k])) @ v
                for c in range(nc):
                    a_mat = vh @ controls[c] @ v
                    acc = 0j
                    for a in range(d):
                        for b in range(d):
                            acc += mt[b, a] * g[a, b] * a_mat[a, b]
                    out[i, k, c] = rf[i] * acc
        return out

    weighted_conjugation_sum = weighted_conjugation_sum_nb
    slice_propagators = slice_propagators_nb
    forward_products = forward_products_nb
    backward_products = backward_products_nb
    slice_gradients = slice_gradients_nb
else:
    weighted_conjugation_sum = weighted_conjugation_sum_np
    slice_propagators = slice_propagators_np
    forward_products = forward_products_np
    backward_products = backward_products_np
    slice_gradients = slice_gradients_np
