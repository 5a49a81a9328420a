"""Compare the numba and numpy kernel paths.

Each backend runs in a fresh interpreter selected with
``NMRQEC_DISABLE_NUMBA``.  Reported are the best-of-``repeat`` times of the
dispatched hot kernels on GRAPE-sized stacks (15 members x 1000 slices of
8x8) and of one full ensemble fidelity+gradient evaluation.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--slices 1000]
"""

import argparse
import json
import os
import subprocess
import sys

TIMING_SNIPPET = r"""
import json, timeit
import numpy as np
from nmrqec import _kernels, grape
from nmrqec.code import build_code_circuit
from nmrqec.spins import malonic

n, repeat = {slices}, {repeat}
ens = grape.RobustnessEnsemble.grid()
pulse = grape.ControlPulse.smooth_guess(n, 1.0)
problem = grape._Problem(malonic(), build_code_circuit().u_encode, ens, pulse.dt_ms)

rng = np.random.default_rng(0)
m = len(ens)
a = rng.normal(size=(m, n, 8, 8)) + 1j * rng.normal(size=(m, n, 8, 8))
evals, evecs = np.linalg.eigh(a + np.conj(np.swapaxes(a, -1, -2)))
dt = 1.0 / n
uk = _kernels.slice_propagators(evals, evecs, dt)
fwd = _kernels.forward_products(uk)
target_dag = np.ascontiguousarray(build_code_circuit().u_encode.conj().T)
bwd = _kernels.backward_products(uk, target_dag)
rf = np.array([r for _, r in ens.members])
mix = uk[0, :16].copy()
w = np.full(len(mix), 1 / len(mix))
rho = mix[0] @ mix[0].conj().T
cases = {{
    "weighted_conjugation_sum": (mix, w, rho),
    "slice_propagators": (evals, evecs, dt),
    "forward_products": (uk,),
    "backward_products": (uk, target_dag),
    "slice_gradients": (fwd, bwd, evals, evecs, dt, problem.controls, rf),
}}
out = {{"backend": _kernels.BACKEND}}
for name, args in cases.items():
    fn = getattr(_kernels, name)
    fn(*args)  # compile / warm caches outside the timing
    out[name] = min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))
problem.evaluate(pulse.amplitudes)
out["full evaluation"] = min(timeit.repeat(lambda: problem.evaluate(pulse.amplitudes), number=1, repeat=repeat))
print(json.dumps(out))
"""


def measure(disable_numba, slices, repeat):
    env = dict(os.environ, NMRQEC_DISABLE_NUMBA="1" if disable_numba else "0")
    code = TIMING_SNIPPET.format(slices=slices, repeat=repeat)
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"benchmark worker failed:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    parser = argparse.ArgumentParser(description="numba vs numpy kernel timings")
    parser.add_argument("--slices", type=int, default=1000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    np_times = measure(True, args.slices, args.repeat)
    nb_times = measure(False, args.slices, args.repeat)
    if nb_times["backend"] != "numba":
        print("numba is not importable here; both columns use the numpy path")
    print(f"15 members x {args.slices} slices, best of {args.repeat}")
    print(f"{'kernel':26s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name in np_times:
        if name == "backend":
            continue
        t_np, t_nb = np_times[name], nb_times[name]
        print(f"{name:26s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
