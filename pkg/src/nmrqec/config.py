"""Experiment configuration: a flat ``key: value`` format with sections.

Example::

    [system]
    builtin: malonic
    bath: Cm 0.5

    [noise]
    kind: natural
    decoupling_scale: 1.0
    dispersion: lorentzian
    t2star_ms: 2.0

    [sweep]
    modes: unencoded decoded corrected
    delay_range: 0 4 0.1

Lines starting with ``#`` are comments.  Every error names the line and
the key it came from.  Spin labels in ``[system]`` keys refer to the
register as listed in ``labels`` (or the builtin order C1 C2 Cm); coupling
keys are written in table order, so ``dipolar.C1.C2`` is accepted and
``dipolar.C2.C1`` is rejected as a lower-triangle entry.
"""

import re
from dataclasses import dataclass, field

import numpy as np

from .noise import (
    DEFAULT_DISPERSION_SAMPLES,
    DEFAULT_T2STAR_MS,
    CoherentSchedule,
    DephasingSchedule,
    DispersionModel,
    FixedSchedule,
    NaturalSchedule,
    coherent_z,
    dephasing_q,
    independent_dephasing,
)
from .grape import DIRECTIONS as GRAPE_DIRECTIONS
from .protocol import MODES, TWO_ROUND_MODE
from .spins import MALONIC_LABELS, BathCoupling, SpinSystem, malonic


class ConfigError(ValueError):
    """Invalid configuration; ``line`` and ``key`` locate the problem."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


SECTIONS = {
    "system": {"builtin", "labels", "shifts_khz", "bath", "wires"},
    "noise": {
        "kind", "decoupling_scale", "dispersion", "t2star_ms", "dispersion_width_khz",
        "dispersion_samples", "t2_ms", "q", "theta", "freq_khz", "qubit", "qubits",
    },
    "sweep": {"modes", "delays_ms", "delay_range", "ideal_ancillae", "gate_error", "swap_ancillae"},
    "output": {"csv", "gnuplot", "fit"},
    "grape": {
        "target", "duration_ms", "n_slices", "n_offsets", "offset_width_khz", "rf_scales",
        "max_iter", "target_fidelity", "max_amplitude_khz", "initial", "initial_amplitude_khz",
        "pulse_out", "time_budget_s", "direction", "coarse_slices",
    },
}
# per-pair keys: dipolar.A.B, j.A.B; per-spin keys: shift.A
_PAIR_KEY = re.compile(r"^(dipolar|j)\.([^.]+)\.([^.]+)$")
_SHIFT_KEY = re.compile(r"^shift\.([^.]+)$")
NOISE_KINDS = ("identity", "natural", "dephasing", "dephasing_t2", "coherent_z")
GRAPE_TARGETS = ("encode", "decode", "correct", "identity")


@dataclass
class NoiseSpec:
    kind: str = "identity"
    decoupling_scale: float = 1.0
    dispersion: str = "none"
    t2star_ms: float = DEFAULT_T2STAR_MS
    dispersion_width_khz: float = None
    dispersion_samples: int = DEFAULT_DISPERSION_SAMPLES
    t2_ms: float = None
    q: float = None
    theta: float = None
    freq_khz: float = None
    qubit: int = 1
    qubits: tuple = (1, 2, 3)

    def dispersion_model(self):
        if self.dispersion == "none":
            return None
        if self.dispersion_width_khz is not None:
            return DispersionModel(self.dispersion, self.dispersion_width_khz, self.dispersion_samples)
        return DispersionModel.for_t2star(self.t2star_ms, self.dispersion, self.dispersion_samples)

    def schedule(self, system):
        """Delay-parametrised channel on the 3-wire register."""
        zero_based = tuple(k - 1 for k in self.qubits)
        if self.kind == "identity":
            return None
        if self.kind == "natural":
            return NaturalSchedule(system, self.decoupling_scale, self.dispersion_model())
        if self.kind == "dephasing_t2":
            return DephasingSchedule(self.t2_ms, zero_based)
        if self.kind == "dephasing":
            if len(zero_based) == 1:
                return FixedSchedule(dephasing_q(self.q, zero_based[0]))
            return FixedSchedule(independent_dephasing(self.q, zero_based))
        if self.kind == "coherent_z":
            if self.theta is not None:
                return FixedSchedule(coherent_z(self.theta, self.qubit - 1))
            return CoherentSchedule(self.freq_khz, self.qubit - 1)
        raise ValueError(f"unknown noise kind {self.kind!r}")


@dataclass
class GrapeSpec:
    target: str = "encode"
    duration_ms: float = 1.0
    n_slices: int = 1000
    n_offsets: int = 5
    offset_width_khz: float = None
    rf_scales: tuple = (0.95, 1.0, 1.05)
    max_iter: int = 2000
    target_fidelity: float = 0.998
    max_amplitude_khz: float = None
    initial: str = "smooth"
    initial_amplitude_khz: float = 5.0
    pulse_out: str = None
    time_budget_s: float = None
    direction: str = "lbfgs"
    # coarse time grids optimized first; () optimizes on the final grid only
    coarse_slices: tuple = (100,)


@dataclass
class ExperimentConfig:
    system: SpinSystem
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    modes: tuple = ("corrected",)
    delays_ms: tuple = (0.0,)
    ideal_ancillae: bool = False
    gate_error: float = 0.0
    swap_ancillae: bool = False
    csv: str = None
    gnuplot: str = None
    fit: bool = True
    grape: GrapeSpec = None

    def schedule(self):
        return self.noise.schedule(self.system)


# value parsers ---------------------------------------------------------------


def _float(value, key, line, lo=None, hi=None, positive=False):
    try:
        x = float(value)
    except ValueError:
        raise ConfigError(f"expected a number, got {value!r}", line, key) from None
    if not np.isfinite(x):
        raise ConfigError("value must be finite", line, key)
    if positive and x <= 0:
        raise ConfigError(f"must be positive, got {x}", line, key)
    if lo is not None and x < lo:
        raise ConfigError(f"must be >= {lo}, got {x}", line, key)
    if hi is not None and x > hi:
        raise ConfigError(f"must be <= {hi}, got {x}", line, key)
    return x


def _int(value, key, line, lo=None):
    try:
        x = int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", line, key) from None
    if lo is not None and x < lo:
        raise ConfigError(f"must be >= {lo}, got {x}", line, key)
    return x


def _bool(value, key, line):
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected true/false, got {value!r}", line, key)


def _floats(value, key, line, **kw):
    items = value.replace(",", " ").split()
    if not items:
        raise ConfigError("empty list", line, key)
    return tuple(_float(v, key, line, **kw) for v in items)


def _choice(value, options, key, line):
    if value not in options:
        raise ConfigError(f"expected one of {', '.join(options)}, got {value!r}", line, key)
    return value


def _optional_float(value, key, line, **kw):
    return None if value.lower() == "none" else _float(value, key, line, **kw)


# tokenizer -------------------------------------------------------------------


def _entries(text):
    """Yield ``(section, key, value, line)``; rejects unknown sections and duplicates."""
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if ":" not in line:
            raise ConfigError(f"expected 'key: value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split(":", 1))
        if section is None:
            raise ConfigError("entry outside any section", lineno, key)
        if not key:
            raise ConfigError("missing key", lineno)
        if not value:
            raise ConfigError("missing value", lineno, key)
        if (section, key) in seen:
            raise ConfigError("duplicate key", lineno, key)
        seen.add((section, key))
        yield section, key, value, lineno


# sections --------------------------------------------------------------------


def _build_system(items):
    builtin = items.get("builtin")
    if builtin is not None:
        value, line = builtin
        _choice(value, ("malonic",), "builtin", line)
        labels = list(MALONIC_LABELS)
    elif "labels" in items:
        labels = items["labels"][0].split()
        if len(set(labels)) != len(labels):
            raise ConfigError("duplicate spin label", items["labels"][1], "labels")
    else:
        raise ConfigError("[system] needs 'builtin: malonic' or 'labels'", key="system")
    if len(labels) != 3:
        raise ConfigError(f"the code register needs exactly 3 carbons, got {len(labels)}", key="labels")
    index = {lab: k for k, lab in enumerate(labels)}

    def spin(label, key, line):
        if label not in index:
            raise ConfigError(f"unknown spin label {label!r}; known: {' '.join(labels)}", line, key)
        return index[label]

    if builtin is not None:
        base = malonic()
        shifts = list(base.shifts_khz)
        dip = {(i, j): base.dipolar_khz[i][j] for i in range(3) for j in range(i + 1, 3)}
        jj = {(i, j): base.j_khz[i][j] for i in range(3) for j in range(i + 1, 3)}
    else:
        shifts, dip, jj = [0.0] * 3, {}, {}
    if "shifts_khz" in items:
        value, line = items["shifts_khz"]
        shifts = list(_floats(value, "shifts_khz", line))
        if len(shifts) != 3:
            raise ConfigError("need one shift per spin", line, "shifts_khz")
    for key, (value, line) in items.items():
        m = _SHIFT_KEY.match(key)
        if m:
            shifts[spin(m.group(1), key, line)] = _float(value, key, line)
            continue
        m = _PAIR_KEY.match(key)
        if m:
            kind, a, b = m.groups()
            i, j = spin(a, key, line), spin(b, key, line)
            if i == j:
                raise ConfigError("a spin cannot couple to itself", line, key)
            if i > j:
                raise ConfigError(
                    f"{kind} table is upper-triangular; write {kind}.{b}.{a} instead", line, key
                )
            (dip if kind == "dipolar" else jj)[(i, j)] = _float(value, key, line)

    bath = []
    if "bath" in items:
        value, line = items["bath"]
        for chunk in value.split(","):
            parts = chunk.split()
            if len(parts) != 2:
                raise ConfigError(f"bath entries are 'LABEL kHz', got {chunk.strip()!r}", line, "bath")
            bath.append(BathCoupling(spin(parts[0], "bath", line) + 1, _float(parts[1], "bath", line)))
        if len(bath) > 2:
            raise ConfigError("at most two bath spins are supported", line, "bath")

    system = SpinSystem.from_pairs(labels, shifts, dip, jj, bath)
    if "wires" in items:
        value, line = items["wires"]
        order = [spin(lab, "wires", line) for lab in value.split()]
        if sorted(order) != [0, 1, 2]:
            raise ConfigError("wires must list every spin once (q1 q2 q3)", line, "wires")
        system = system.permuted(order)
    return system


def _build_noise(items):
    spec = NoiseSpec()
    for key, (value, line) in items.items():
        if key == "kind":
            spec.kind = _choice(value, NOISE_KINDS, key, line)
        elif key == "decoupling_scale":
            spec.decoupling_scale = _float(value, key, line, lo=0.0, hi=1.0)
        elif key == "dispersion":
            spec.dispersion = _choice(value, ("none", "lorentzian", "gaussian"), key, line)
        elif key == "t2star_ms":
            spec.t2star_ms = _float(value, key, line, positive=True)
        elif key == "dispersion_width_khz":
            spec.dispersion_width_khz = _float(value, key, line, lo=0.0)
        elif key == "dispersion_samples":
            spec.dispersion_samples = _int(value, key, line, lo=1)
        elif key == "t2_ms":
            spec.t2_ms = _float(value, key, line, positive=True)
        elif key == "q":
            spec.q = _float(value, key, line, lo=0.0, hi=1.0)
        elif key == "theta":
            spec.theta = _float(value, key, line)
        elif key == "freq_khz":
            spec.freq_khz = _float(value, key, line)
        elif key == "qubit":
            spec.qubit = _int(value, key, line, lo=1)
            if spec.qubit > 3:
                raise ConfigError("qubit index must be 1, 2 or 3", line, key)
        elif key == "qubits":
            spec.qubits = tuple(_int(v, key, line, lo=1) for v in value.replace(",", " ").split())
            if not spec.qubits or max(spec.qubits) > 3 or len(set(spec.qubits)) != len(spec.qubits):
                raise ConfigError("qubits must be distinct indices from 1..3", line, key)
    required = {"dephasing": "q", "dephasing_t2": "t2_ms"}
    need = required.get(spec.kind)
    if need and getattr(spec, need) is None:
        raise ConfigError(f"noise kind '{spec.kind}' requires '{need}'", items.get("kind", (None, None))[1], need)
    if spec.kind == "coherent_z" and spec.theta is None and spec.freq_khz is None:
        raise ConfigError("coherent_z needs 'theta' or 'freq_khz'", items["kind"][1], "theta")
    return spec


def _build_grape(items):
    spec = GrapeSpec()
    for key, (value, line) in items.items():
        if key == "target":
            spec.target = _choice(value, GRAPE_TARGETS, key, line)
        elif key == "duration_ms":
            spec.duration_ms = _float(value, key, line, positive=True)
        elif key == "n_slices":
            spec.n_slices = _int(value, key, line, lo=1)
        elif key == "n_offsets":
            spec.n_offsets = _int(value, key, line, lo=1)
        elif key == "offset_width_khz":
            spec.offset_width_khz = _float(value, key, line, lo=0.0)
        elif key == "rf_scales":
            spec.rf_scales = _floats(value, key, line, positive=True)
        elif key == "max_iter":
            spec.max_iter = _int(value, key, line, lo=0)
        elif key == "target_fidelity":
            spec.target_fidelity = _float(value, key, line, lo=0.0, hi=1.0)
        elif key == "max_amplitude_khz":
            spec.max_amplitude_khz = _optional_float(value, key, line, positive=True)
        elif key == "initial":
            spec.initial = value
        elif key == "initial_amplitude_khz":
            spec.initial_amplitude_khz = _float(value, key, line, lo=0.0)
        elif key == "pulse_out":
            spec.pulse_out = value
        elif key == "time_budget_s":
            spec.time_budget_s = _optional_float(value, key, line, positive=True)
        elif key == "direction":
            spec.direction = _choice(value, GRAPE_DIRECTIONS, key, line)
        elif key == "coarse_slices":
            if value.lower() == "none":
                spec.coarse_slices = ()
            else:
                spec.coarse_slices = tuple(_int(v, key, line, lo=1) for v in value.replace(",", " ").split())
    chain = sorted({n for n in spec.coarse_slices if n < spec.n_slices}) + [spec.n_slices]
    for a, b in zip(chain, chain[1:]):
        if b % a:
            line = items["coarse_slices"][1] if "coarse_slices" in items else None
            raise ConfigError(f"coarse grid of {a} slices does not divide the next grid of {b}", line,
                              "coarse_slices")
    return spec


def _delays(items):
    if "delays_ms" in items and "delay_range" in items:
        raise ConfigError("give either delays_ms or delay_range, not both", items["delay_range"][1], "delay_range")
    if "delay_range" in items:
        value, line = items["delay_range"]
        parts = _floats(value, "delay_range", line)
        if len(parts) != 3:
            raise ConfigError("delay_range is 'start stop step'", line, "delay_range")
        start, stop, step = parts
        if step <= 0:
            raise ConfigError("step must be positive", line, "delay_range")
        if start < 0:
            raise ConfigError(f"delays must be non-negative, got {start}", line, "delay_range")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ConfigError("empty delay range", line, "delay_range")
        # rounding keeps grid points like 0.3 printable as typed
        return tuple(round(start + k * step, 12) for k in range(n)), line, "delay_range"
    if "delays_ms" in items:
        value, line = items["delays_ms"]
        return _floats(value, "delays_ms", line), line, "delays_ms"
    return (0.0,), None, "delays_ms"


def parse_config(text):
    """Parse and validate a configuration string into :class:`ExperimentConfig`."""
    grouped = {name: {} for name in SECTIONS}
    present = set()
    for section, key, value, line in _entries(text):
        present.add(section)
        known = SECTIONS[section]
        dynamic = section == "system" and (_PAIR_KEY.match(key) or _SHIFT_KEY.match(key))
        if key not in known and not dynamic:
            raise ConfigError(f"unknown key in [{section}]", line, key)
        grouped[section][key] = (value, line)

    if "system" not in present:
        raise ConfigError("missing [system] section")
    system = _build_system(grouped["system"])
    noise = _build_noise(grouped["noise"])

    sweep = grouped["sweep"]
    modes = ("corrected",)
    if "modes" in sweep:
        value, line = sweep["modes"]
        modes = tuple(value.replace(",", " ").split())
        for m in modes:
            _choice(m, MODES + (TWO_ROUND_MODE,), "modes", line)
        if len(set(modes)) != len(modes):
            raise ConfigError("duplicate mode", line, "modes")
    delays, line, key = _delays(sweep)
    for a in delays:
        if a < 0:
            raise ConfigError(f"delays must be non-negative, got {a}", line, key)
    if any(b <= a for a, b in zip(delays, delays[1:])):
        raise ConfigError("delays must be strictly increasing", line, key)

    cfg = ExperimentConfig(system=system, noise=noise, modes=modes, delays_ms=delays)
    if "ideal_ancillae" in sweep:
        value, line = sweep["ideal_ancillae"]
        cfg.ideal_ancillae = _bool(value, "ideal_ancillae", line)
    if "gate_error" in sweep:
        value, line = sweep["gate_error"]
        cfg.gate_error = _float(value, "gate_error", line, lo=0.0, hi=1.0)
    if "swap_ancillae" in sweep:
        value, line = sweep["swap_ancillae"]
        cfg.swap_ancillae = _bool(value, "swap_ancillae", line)

    out = grouped["output"]
    if "csv" in out:
        cfg.csv = out["csv"][0]
    if "gnuplot" in out:
        cfg.gnuplot = out["gnuplot"][0]
    if "fit" in out:
        cfg.fit = _bool(out["fit"][0], "fit", out["fit"][1])

    if "grape" in present:
        cfg.grape = _build_grape(grouped["grape"])
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
