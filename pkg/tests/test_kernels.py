import numpy as np
import pytest

from nmrqec import _kernels as K

from conftest import random_hermitian, random_unitary

needs_numba = pytest.mark.skipif(K.numba is None, reason="numba not available")


def test_backend_name():
    assert K.BACKEND in ("numba", "numpy")


def _stack(rng, m, n, d):
    h = np.array([[random_hermitian(rng, d) for _ in range(n)] for _ in range(m)])
    return np.linalg.eigh(h)


def _inputs(rng, m=3, n=6, d=4):
    evals, evecs = _stack(rng, m, n, d)
    uk = K.slice_propagators_np(evals, evecs, 0.05)
    controls = np.array([random_hermitian(rng, d), random_hermitian(rng, d)])
    return evals, evecs, uk, controls, rng.uniform(0.9, 1.1, m), random_unitary(rng, d)


def test_numpy_slice_propagators_are_exponentials(rng):
    evals, evecs = _stack(rng, 1, 2, 4)
    uk = K.slice_propagators_np(evals, evecs, 0.3)
    h = evecs[0, 1] @ np.diag(evals[0, 1]) @ evecs[0, 1].conj().T
    w, v = np.linalg.eigh(h)
    assert np.allclose(uk[0, 1], v @ np.diag(np.exp(-0.3j * w)) @ v.conj().T, atol=1e-12)


def test_numpy_products_consistent(rng):
    _, _, uk, _, _, t = _inputs(rng)
    fwd = K.forward_products_np(uk)
    bwd = K.backward_products_np(uk, t.conj().T)
    # P_k U_k R_k is the full overlap operator for every k
    full = t.conj().T @ fwd[:, -1]
    for k in range(uk.shape[1]):
        assert np.allclose(bwd[:, k] @ uk[:, k] @ fwd[:, k], full, atol=1e-12)


@needs_numba
def test_backends_agree(rng):
    evals, evecs, uk, controls, rf, t = _inputs(rng)
    assert np.allclose(K.slice_propagators_nb(evals, evecs, 0.05), uk, atol=1e-13)
    fwd_np, fwd_nb = K.forward_products_np(uk), K.forward_products_nb(uk)
    assert np.allclose(fwd_np, fwd_nb, atol=1e-13)
    tdag = np.ascontiguousarray(t.conj().T)
    bwd_np, bwd_nb = K.backward_products_np(uk, tdag), K.backward_products_nb(uk, tdag)
    assert np.allclose(bwd_np, bwd_nb, atol=1e-13)
    g_np = K.slice_gradients_np(fwd_np, bwd_np, evals, evecs, 0.05, controls, rf)
    g_nb = K.slice_gradients_nb(fwd_nb, bwd_nb, evals, evecs, 0.05, controls, rf)
    assert np.allclose(g_np, g_nb, atol=1e-12)
    us = np.array([random_unitary(rng, 8) for _ in range(5)])
    w = rng.dirichlet(np.ones(5))
    rho = random_hermitian(rng, 8)
    assert np.allclose(K.weighted_conjugation_sum_np(us, w, rho), K.weighted_conjugation_sum_nb(us, w, rho), atol=1e-13)


def test_degenerate_divided_differences():
    evals = np.zeros((1, 1, 2))
    g = K._divided_differences_np(evals, 0.2)
    assert np.allclose(g, -0.2j)


def test_env_flag_selects_numpy():
    import subprocess
    import sys

    code = "import nmrqec._kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"NMRQEC_DISABLE_NUMBA": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "numpy"


def test_benchmark_script_runs():
    import pathlib
    import subprocess
    import sys

    script = pathlib.Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(script), "--slices", "10", "--repeat", "1"],
                         capture_output=True, text=True, check=True, timeout=600)
    assert "full evaluation" in out.stdout
    assert "slice_gradients" in out.stdout
