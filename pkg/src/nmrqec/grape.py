"""GRAPE pulse design for the carbon register.

Controls are a collective (spin-nonselective) x/y drive on all carbons,
``H_k = H_drift(offset) + rf * (pi u_x,k sum_i X_i + pi u_y,k sum_i Y_i)``,
piecewise constant over ``n_slices`` slices of ``dt_ms``.  Amplitudes are
in kHz.  The figure of merit is the Hilbert-Schmidt gate fidelity
``|Tr(T^dag U)|^2 / d^2`` averaged over a robustness ensemble of Zeeman
offsets and RF scale factors.

Per-slice derivatives are exact: each slice generator is diagonalized and
the derivative of its exponential is assembled from divided differences
of the eigenphases, so no small-``dt`` approximation is involved.
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .linalg import expm_hermitian
from .noise import lorentzian_width_for_t2star
from .spins import build_hamiltonian, pauli_on

log = logging.getLogger(__name__)


@dataclass
class ControlPulse:
    """Piecewise-constant control amplitudes, shape ``(n_slices, 2)`` in kHz."""

    amplitudes: np.ndarray
    dt_ms: float
    max_amplitude_khz: float = None

    def __post_init__(self):
        self.amplitudes = np.array(self.amplitudes, dtype=float).reshape(-1, 2)
        if self.dt_ms <= 0:
            raise ValueError(f"slice length must be positive, got {self.dt_ms}")
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("pulse amplitudes must be finite")
        if self.max_amplitude_khz is not None and np.any(
            np.abs(self.amplitudes) > self.max_amplitude_khz + 1e-12
        ):
            raise ValueError(f"amplitudes exceed the {self.max_amplitude_khz} kHz bound")

    @property
    def n_slices(self):
        return self.amplitudes.shape[0]

    @property
    def duration_ms(self):
        return self.n_slices * self.dt_ms

    @classmethod
    def zeros(cls, n_slices, duration_ms, max_amplitude_khz=None):
        return cls(np.zeros((n_slices, 2)), duration_ms / n_slices, max_amplitude_khz)

    @classmethod
    def smooth_guess(cls, n_slices, duration_ms, amplitude_khz=5.0, max_amplitude_khz=None):
        """Deterministic non-zero starting point (low-order sinusoids)."""
        k = np.arange(n_slices) / n_slices
        amps = amplitude_khz * np.stack([np.sin(2 * np.pi * 3 * k), np.cos(2 * np.pi * 5 * k)], axis=1)
        return cls(amps, duration_ms / n_slices, max_amplitude_khz)

    def copy_with(self, amplitudes):
        return ControlPulse(amplitudes, self.dt_ms, self.max_amplitude_khz)

    def resampled(self, n_slices):
        """Same duration on ``n_slices`` slices.

        Refining by an integer factor repeats each slice, which leaves the
        propagator unchanged; coarsening by an integer factor averages
        blocks of slices.
        """
        n = self.n_slices
        if n_slices % n == 0:
            amps = np.repeat(self.amplitudes, n_slices // n, axis=0)
        elif n % n_slices == 0:
            amps = self.amplitudes.reshape(n_slices, n // n_slices, 2).mean(axis=1)
        else:
            raise ValueError(f"cannot resample {n} slices to {n_slices}; one must divide the other")
        return ControlPulse(amps, self.duration_ms / n_slices, self.max_amplitude_khz)

    def save(self, path):
        header = f"n_slices={self.n_slices}\ndt_ms={self.dt_ms!r}"
        if self.max_amplitude_khz is not None:
            header += f"\nmax_amplitude_khz={self.max_amplitude_khz!r}"
        header += "\nu_x_khz u_y_khz"
        np.savetxt(path, self.amplitudes, fmt="%.12e", header=header, comments="# ")

    @classmethod
    def load(cls, path):
        meta = {}
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
        if "dt_ms" not in meta:
            raise ValueError(f"{path}: missing '# dt_ms=' header")
        amps = np.loadtxt(path, comments="#", ndmin=2)
        if amps.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns u_x_khz u_y_khz")
        if "n_slices" in meta and int(meta["n_slices"]) != amps.shape[0]:
            raise ValueError(f"{path}: header says {meta['n_slices']} slices, found {amps.shape[0]}")
        bound = meta.get("max_amplitude_khz")
        return cls(amps, float(meta["dt_ms"]), float(bound) if bound is not None else None)


@dataclass(frozen=True)
class RobustnessEnsemble:
    """Weighted ``(shift_offset_khz, rf_scale)`` members."""

    members: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.members) != len(self.weights) or not self.members:
            raise ValueError("need one weight per ensemble member")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights sum to {sum(self.weights)}, not 1")
        if any(s <= 0 for _, s in self.members):
            raise ValueError("RF scale factors must be positive")

    @classmethod
    def single(cls, offset_khz=0.0, rf_scale=1.0):
        return cls(((float(offset_khz), float(rf_scale)),), (1.0,))

    @classmethod
    def grid(cls, offset_width_khz=None, n_offsets=5, rf_scales=(0.95, 1.0, 1.05)):
        """Gauss-Hermite offsets over a Gaussian of the given width, times RF scales.

        The default width is the Lorentzian half width for T2* = 2 ms.
        """
        if offset_width_khz is None:
            offset_width_khz = lorentzian_width_for_t2star()
        x, w = np.polynomial.hermite_e.hermegauss(n_offsets)
        w = w / w.sum()
        members, weights = [], []
        for xo, wo in zip(x, w):
            for s in rf_scales:
                members.append((float(offset_width_khz * xo), float(s)))
                weights.append(float(wo) / len(rf_scales))
        total = sum(weights)
        return cls(tuple(members), tuple(wt / total for wt in weights))

    def __len__(self):
        return len(self.members)


def control_operators(n_spins):
    """Collective ``pi sum X_i`` and ``pi sum Y_i``: the Hamiltonians per kHz of drive."""
    sx = sum(pauli_on("X", i, n_spins) for i in range(n_spins))
    sy = sum(pauli_on("Y", i, n_spins) for i in range(n_spins))
    return np.array([np.pi * sx, np.pi * sy])


def _drift(system, offset_khz):
    # control design ignores bath spins
    return build_hamiltonian(system.with_bath(()), offset_khz)


def propagate(pulse, system, member=(0.0, 1.0)):
    """Total propagator ``U_N ... U_1`` for one ensemble member."""
    offset, rf = member
    controls = control_operators(system.n_spins)
    h0 = _drift(system, offset)
    u = np.eye(h0.shape[0], dtype=complex)
    for ux, uy in pulse.amplitudes:
        h = h0 + rf * (ux * controls[0] + uy * controls[1])
        u = expm_hermitian(h, pulse.dt_ms) @ u
    return u


def gate_fidelity(u, target):
    """``|Tr(target^dag u)|^2 / d^2``; insensitive to global phase."""
    u = np.asarray(u)
    target = np.asarray(target)
    if u.shape != target.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {target.shape}")
    d = u.shape[0]
    return float(abs(np.vdot(target, u)) ** 2 / d**2)


class _Problem:
    """Precomputed drift/control stacks for one system, target and ensemble."""

    def __init__(self, system, target, ensemble, dt_ms):
        self.target = np.asarray(target, dtype=complex)
        self.dim = self.target.shape[0]
        if self.dim != 2**system.n_spins:
            raise ValueError(f"target is {self.dim}x{self.dim}, register needs {2**system.n_spins}")
        self.controls = control_operators(system.n_spins)
        self.drifts = np.array([_drift(system, off) for off, _ in ensemble.members])
        self.rf = np.array([s for _, s in ensemble.members], dtype=float)
        self.weights = np.array(ensemble.weights, dtype=float)
        self.dt = dt_ms

    def evaluate(self, amps, need_grad=True):
        ctrl = np.tensordot(amps, self.controls, axes=(1, 0))  # (N, d, d)
        h = self.drifts[:, None] + self.rf[:, None, None, None] * ctrl[None]
        evals, evecs = np.linalg.eigh(h)
        uk = _kernels.slice_propagators(evals, evecs, self.dt)
        fwd = _kernels.forward_products(uk)
        overlaps = np.einsum("ij,mij->m", self.target.conj(), fwd[:, -1])
        d2 = self.dim**2
        per_member = np.abs(overlaps) ** 2 / d2
        fid = float(self.weights @ per_member)
        if not need_grad:
            return fid, None, per_member
        bwd = _kernels.backward_products(uk, np.ascontiguousarray(self.target.conj().T))
        dg = _kernels.slice_gradients(fwd, bwd, evals, evecs, self.dt, self.controls, self.rf)
        grads = 2 * np.real(overlaps.conj()[:, None, None] * dg) / d2
        return fid, np.einsum("m,mkc->kc", self.weights, grads), per_member


def ensemble_fidelity(pulse, system, target, ensemble):
    return _Problem(system, target, ensemble, pulse.dt_ms).evaluate(pulse.amplitudes, False)[0]


def gradient(pulse, system, target, ensemble):
    """Exact ``d(mean fidelity)/du``, shape ``(n_slices, 2)`` per kHz."""
    return _Problem(system, target, ensemble, pulse.dt_ms).evaluate(pulse.amplitudes)[1]


@dataclass
class GrapeSettings:
    max_iter: int = 500
    target_fidelity: float = 1.0
    ftol: float = 1e-12
    gtol: float = 1e-10
    initial_step: float = 1.0
    # "lbfgs" (limited-memory quasi-Newton, box bounds), "conjugate"
    # (Polak-Ribiere directions) or "gradient" (steepest ascent)
    direction: str = "lbfgs"
    lbfgs_memory: int = 20
    time_budget_s: float = None


@dataclass
class GrapeResult:
    pulse: ControlPulse
    fidelity: float
    trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    status: str = ""
    # (n_slices, fidelity, iterations, status) per resolution level
    levels: list = field(default_factory=list)


DIRECTIONS = ("lbfgs", "conjugate", "gradient")


def optimize(initial, system, target, ensemble, settings=None, callback=None):
    """Ascend the ensemble-averaged fidelity from ``initial``.

    Every accepted iterate strictly increases the fidelity, so ``trace`` is
    non-decreasing.  Amplitude bounds are enforced as box constraints
    (``lbfgs``) or by clipping trial points.  Non-convergence is reported in
    ``status`` rather than raised.
    """
    settings = settings or GrapeSettings()
    if settings.direction not in DIRECTIONS:
        raise ValueError(f"unknown direction rule {settings.direction!r}")
    problem = _Problem(system, target, ensemble, initial.dt_ms)
    if settings.direction == "lbfgs":
        return _optimize_lbfgs(initial, problem, settings, callback)
    return _optimize_line_search(initial, problem, settings, callback)


def _optimize_lbfgs(initial, problem, settings, callback):
    from scipy.optimize import minimize

    bound = initial.max_amplitude_khz
    amps0 = initial.amplitudes.copy()
    if bound is not None:
        amps0 = np.clip(amps0, -bound, bound)
    shape = amps0.shape
    started = time.perf_counter()
    state = {"x": amps0.ravel(), "fid": None, "grad": None, "status": "max_iter"}

    def objective(x):
        fid, grad, _ = problem.evaluate(x.reshape(shape))
        if not np.isfinite(fid):
            raise FloatingPointError("non-finite fidelity during optimization")
        return -fid, -grad.ravel()

    fid0, grad0 = objective(state["x"])
    state["fid"], trace = -fid0, [-fid0]

    def on_iterate(intermediate_result):
        fid = -float(intermediate_result.fun)
        if fid > state["fid"]:
            state["x"], state["fid"] = intermediate_result.x.copy(), fid
        trace.append(state["fid"])
        if callback is not None:
            callback(len(trace) - 1, state["fid"])
        if state["fid"] >= settings.target_fidelity:
            state["status"] = "target reached"
            raise StopIteration
        if settings.time_budget_s is not None and time.perf_counter() - started > settings.time_budget_s:
            state["status"] = "time budget"
            raise StopIteration

    if state["fid"] >= settings.target_fidelity:
        return GrapeResult(initial.copy_with(amps0), state["fid"], trace, 0, True, "target reached")
    if np.linalg.norm(grad0) <= settings.gtol:
        return GrapeResult(initial.copy_with(amps0), state["fid"], trace, 0, True, "stationary")
    if settings.max_iter == 0:
        return GrapeResult(initial.copy_with(amps0), state["fid"], trace, 0, False, "max_iter")
    res = minimize(
        objective,
        state["x"],
        jac=True,
        method="L-BFGS-B",
        bounds=None if bound is None else [(-bound, bound)] * state["x"].size,
        callback=on_iterate,
        options=dict(
            maxiter=settings.max_iter,
            maxfun=10 * settings.max_iter,
            maxcor=settings.lbfgs_memory,
            ftol=settings.ftol,
            gtol=settings.gtol,
        ),
    )
    status = state["status"]
    converged = status == "target reached"
    if status == "max_iter" and res.nit < settings.max_iter:
        # scipy stopped on its own tolerances
        converged = bool(res.success)
        status = "stationary" if converged else f"stopped: {res.message}"
    amps = state["x"].reshape(shape)
    return GrapeResult(initial.copy_with(amps), state["fid"], trace, len(trace) - 1, converged, status)


def _optimize_line_search(initial, problem, settings, callback):
    bound = initial.max_amplitude_khz
    def clip(a):
        return np.clip(a, -bound, bound) if bound is not None else a

    amps = clip(initial.amplitudes.copy())
    fid, grad, _ = problem.evaluate(amps)
    trace = [fid]
    direction = grad.copy()
    step = settings.initial_step
    started = time.perf_counter()
    status = "max_iter"
    converged = False
    it = 0
    for it in range(settings.max_iter + 1):
        if fid >= settings.target_fidelity:
            status, converged = "target reached", True
            break
        if np.linalg.norm(grad) <= settings.gtol:
            status, converged = "stationary", True
            break
        if it == settings.max_iter:
            break
        if settings.time_budget_s is not None and time.perf_counter() - started > settings.time_budget_s:
            status = "time budget"
            break
        slope = float(np.sum(grad * direction))
        if slope <= 0:
            direction, slope = grad.copy(), float(np.sum(grad * grad))
        accepted = False
        while step > 1e-14:
            trial = clip(amps + step * direction)
            f_trial = problem.evaluate(trial, need_grad=False)[0]
            if f_trial > fid:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "line search failed"
            break
        gain = f_trial - fid
        amps = trial
        fid, new_grad, _ = problem.evaluate(amps)
        trace.append(fid)
        if settings.direction == "conjugate":
            beta = max(0.0, float(np.sum(new_grad * (new_grad - grad)) / np.sum(grad * grad)))
            direction = new_grad + beta * direction
        else:
            direction = new_grad.copy()
        grad = new_grad
        step *= 2.0
        if callback is not None:
            callback(it + 1, fid)
        if it % 50 == 0:
            log.debug("iteration %d fidelity %.8f step %.3g", it + 1, fid, step)
        if gain < settings.ftol:
            status, converged = "ftol", True
            break
    return GrapeResult(initial.copy_with(amps), fid, trace, len(trace) - 1, converged, status)


def optimize_multilevel(initial, system, target, ensemble, settings=None, coarse_slices=(100,), callback=None):
    """Optimize on coarser time grids first, then refine to ``initial``'s grid.

    Each level starts from the previous optimum repeated onto the finer
    grid, which has exactly the same fidelity, so the work done on cheap
    coarse grids carries over.  Each entry of ``coarse_slices`` must
    divide the next finer grid; levels at or above the final resolution
    are skipped.  ``time_budget_s`` covers all levels together.  The returned
    ``trace`` is that of the final level, and ``levels`` summarizes each one.
    """
    settings = settings or GrapeSettings()
    n_final = initial.n_slices
    grids = sorted({int(n) for n in coarse_slices if int(n) < n_final})
    chain = grids + [n_final]
    for a, b in zip(chain, chain[1:]):
        if a < 1 or b % a:
            raise ValueError(f"coarse grid of {a} slices does not divide the next grid of {b}")
    started = time.perf_counter()
    pulse, levels, iterations = initial, [], 0
    for n in grids + [n_final]:
        budget = settings.time_budget_s
        if budget is not None:
            budget = max(budget - (time.perf_counter() - started), 1e-9)
        level_settings = replace(settings, time_budget_s=budget)

        def level_callback(it, fid, offset=iterations):
            if callback is not None:
                callback(offset + it, fid)

        result = optimize(pulse.resampled(n), system, target, ensemble, level_settings, level_callback)
        iterations += result.iterations
        levels.append((n, result.fidelity, result.iterations, result.status))
        log.info("level %d slices: fidelity %.6f after %d iterations (%s)", n, result.fidelity,
                 result.iterations, result.status)
        pulse = result.pulse
        if result.status == "time budget" and n != n_final:
            # keep the best pulse on the requested grid even when out of time
            pulse = pulse.resampled(n_final)
            fid = ensemble_fidelity(pulse, system, target, ensemble)
            levels.append((n_final, fid, 0, "time budget"))
            return GrapeResult(pulse, fid, [fid], iterations, False, "time budget", levels)
    result.iterations = iterations
    result.levels = levels
    return result
