"""Delay sweeps over the QEC modes, CSV output and quadratic fits."""

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .protocol import RoundConfig, run_round

CSV_COLUMNS = ("delay_ms", "mode", "f_x", "f_y", "f_z", "F_e", "s00", "s10", "s01", "s11")
SIGNIFICANT_DIGITS = 6


@dataclass(frozen=True)
class SweepRow:
    delay_ms: float
    mode: str
    f_x: float
    f_y: float
    f_z: float
    F_e: float
    # mean over the three inputs; None for the unencoded mode
    syndromes: tuple = None


def _point(cfg, schedule, mode, delay):
    rc = RoundConfig(
        mode=mode,
        noise=schedule,
        delay_ms=delay,
        ideal_ancillae=cfg.ideal_ancillae,
        gate_error=cfg.gate_error,
        swap_ancillae=cfg.swap_ancillae,
    )
    res = run_round(rc)
    values = (res.f_x, res.f_y, res.f_z, res.entanglement_fidelity)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite result at delay {delay} ms, mode {mode}")
    return SweepRow(delay, mode, *values, syndromes=res.mean_syndromes)


def run_sweep(cfg, threads=1):
    """Evaluate every (delay, mode) point; rows are ordered by delay, then mode."""
    schedule = cfg.schedule()
    jobs = [(mode, delay) for delay in cfg.delays_ms for mode in cfg.modes]
    if threads <= 1:
        return [_point(cfg, schedule, m, d) for m, d in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map keeps submission order whatever the completion order
        return list(pool.map(lambda job: _point(cfg, schedule, *job), jobs))


def _fmt(x):
    if x is None:
        return ""
    s = f"{x:.{SIGNIFICANT_DIGITS}g}"
    return "0" if s == "-0" else s


def format_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        syn = r.syndromes if r.syndromes is not None else (None,) * 4
        writer.writerow([_fmt(r.delay_ms), r.mode, _fmt(r.f_x), _fmt(r.f_y), _fmt(r.f_z), _fmt(r.F_e)]
                        + [_fmt(s) for s in syn])
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(rows))


def parse_csv(text):
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for rec in reader:
        syn = tuple(float(rec[k]) for k in ("s00", "s10", "s01", "s11")) if rec["s00"] else None
        rows.append(SweepRow(float(rec["delay_ms"]), rec["mode"], float(rec["f_x"]), float(rec["f_y"]),
                             float(rec["f_z"]), float(rec["F_e"]), syn))
    return rows


@dataclass(frozen=True)
class QuadraticFit:
    """``F_e ~ c0 + c1 t + c2 t^2``."""

    mode: str
    coefficients: tuple
    residuals: tuple

    @property
    def rms(self):
        return float(np.sqrt(np.mean(np.square(self.residuals))))


def fit_quadratic(rows, mode):
    """Least-squares quadratic of ``F_e`` against delay for one mode."""
    pts = [(r.delay_ms, r.F_e) for r in rows if r.mode == mode]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for a quadratic fit of mode {mode!r}, got {len(pts)}")
    t, f = np.array(pts).T
    design = np.vander(t, 3, increasing=True)
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    resid = f - design @ coef
    return QuadraticFit(mode, tuple(float(c) for c in coef), tuple(float(x) for x in resid))


def dominant_syndrome(rows, mode="corrected"):
    """Non-trivial syndrome carrying the most summed intensity over the sweep."""
    labels = ("10", "01", "11")
    totals = np.zeros(3)
    for r in rows:
        if r.mode == mode and r.syndromes is not None:
            totals += np.asarray(r.syndromes[1:])
    return labels[int(np.argmax(totals))]


def gnuplot_script(csv_path, modes, fits=()):
    """Plot ``F_e`` against delay for each mode, with fitted curves if given."""
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 'delay (ms)'",
        "set ylabel 'entanglement fidelity'",
        "set yrange [0:1.05]",
    ]
    plots = [f"'{csv_path}' using 1:(strcol(2) eq '{m}' ? $6 : 1/0) with points title '{m}'" for m in modes]
    for k, fit in enumerate(fits):
        c0, c1, c2 = fit.coefficients
        lines.append(f"f{k}(x) = {c0!r} + {c1!r}*x + {c2!r}*x**2")
        plots.append(f"f{k}(x) with lines dashtype 2 title '{fit.mode} fit'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
