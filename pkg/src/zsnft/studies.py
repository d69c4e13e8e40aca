"""Parameter sweeps of the discrete spectrum and the convergence benchmark."""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .continuous import LambdaMesh
from .matrix import FilterPolicy, default_threshold, matrix_eigenvalues
from .oracles import rect_continuous, sy_a, sy_continuous
from .search import NewtonOptions, find_eigenvalues, newton_refine, DivergenceReport
from .signal import PulseSpec, auto_window, conserved, generate, make_grid
from .steppers import ALL_METHODS, Method, propagate, threads

SWEEP_PARAMETERS = ("amp", "phase", "linear_chirp", "quad_chirp", "dilation", "delay")
MATRIX_BENCH = ("spectral", "cd", "al", "al-norm")


def apply_parameter(spec: PulseSpec, parameter: str, value: float) -> PulseSpec:
    """Pulse with one parameter replaced.

    For wavetrains ``phase`` rotates the last pulse only (the relative phase
    of a two-pulse train) and ``delay`` places two pulses at ``-value`` and
    ``+value``; for single pulses they act on the whole pulse.
    """
    if parameter == "amp":
        return replace(spec, amplitude=value)
    if parameter == "phase":
        if spec.family == "wavetrain":
            train = list(spec.train)
            a, d = train[-1]
            train[-1] = (abs(a) * np.exp(1j * value), d)
            return replace(spec, train=tuple(train))
        return replace(spec, phase=value)
    if parameter == "linear_chirp":
        return replace(spec, chirp1=value)
    if parameter == "quad_chirp":
        return replace(spec, chirp2=value)
    if parameter == "dilation":
        return replace(spec, scale=value)
    if parameter == "delay":
        if spec.family == "wavetrain":
            if len(spec.train) != 2:
                raise ValueError("delay sweeps need a two-pulse train")
            (a1, _), (a2, _) = spec.train
            return replace(spec, train=((a1, -value), (a2, value)))
        raise ValueError("delay sweeps need a two-pulse train")
    raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")


@dataclass(frozen=True)
class LocusRow:
    param: float
    lam: complex
    flagged: bool


def _spectrum_at(spec, window, n, method, engine, opts, mesh, threshold_all):
    win = window if window is not None else auto_window(spec)
    sig = generate(spec, make_grid(win[0], win[1], n))
    energy = conserved(sig, 1)
    if engine == "matrix":
        res = matrix_eigenvalues(sig, "spectral", energy=energy)
        lams = list(res.lambdas)
        complete = True
    else:
        seeds = []
        if engine == "hybrid":
            seeds = list(matrix_eigenvalues(sig, "spectral", energy=energy).lambdas)
        d, rep = find_eigenvalues(sig, method, opts, mesh, seeds=seeds, warn=False)
        thr = default_threshold(energy) if not threshold_all else 0.0
        lams = [e.lam for e in d.detected(thr)]
        complete = d.complete
    return lams, not complete


def sweep_locus(spec: PulseSpec, parameter: str, values, method="layer_peeling",
                window: tuple[float, float] | None = None, n: int = 1024, engine: str = "hybrid",
                opts: NewtonOptions = NewtonOptions(), mesh: LambdaMesh = LambdaMesh(),
                workers: int | None = None, all_zeros: bool = False) -> list[LocusRow]:
    """Discrete spectrum at every parameter value, rows sorted by (param, re, im).

    ``engine`` is ``search`` (trace-driven Newton search), ``matrix``
    (filtered spectral-matrix eigenvalues) or ``hybrid`` (matrix candidates
    polished by the Newton search).  Rows of values whose search did not
    close the trace formula are flagged.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2 or not (np.all(np.diff(values) > 0) or np.all(np.diff(values) < 0)):
        raise ValueError("sweep range must be monotone with at least 2 values")
    if engine not in ("search", "matrix", "hybrid"):
        raise ValueError("engine must be 'search', 'matrix' or 'hybrid'")
    method = Method.parse(method)
    specs = [apply_parameter(spec, parameter, float(v)) for v in values]
    job = lambda s: _spectrum_at(s, window, n, method, engine, opts, mesh, all_zeros)
    workers = threads() if workers is None else max(1, workers)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, specs))
    else:
        results = [job(s) for s in specs]
    rows = [LocusRow(float(v), complex(l), flag)
            for v, (lams, flag) in zip(values, results) for l in lams]
    rows.sort(key=lambda r: (r.param, r.lam.real, r.lam.imag))
    return rows


def continue_tracks(rows: list[LocusRow], gap: float = 0.5) -> list[list[LocusRow]]:
    """Greedy nearest-neighbour continuation of eigenvalue tracks.

    A point further than ``gap`` from every track end starts a new track, so
    collisions and absorptions show up as births and deaths.
    """
    params = sorted({r.param for r in rows})
    tracks: list[list[LocusRow]] = []
    open_tracks: list[list[LocusRow]] = []
    for p in params:
        pts = [r for r in rows if r.param == p]
        pairs = sorted(((abs(r.lam - t[-1].lam), i, j) for i, r in enumerate(pts)
                        for j, t in enumerate(open_tracks)), key=lambda x: x[0])
        used_p, used_t = set(), set()
        nxt = []
        for dist, i, j in pairs:
            if dist > gap or i in used_p or j in used_t:
                continue
            used_p.add(i)
            used_t.add(j)
            open_tracks[j].append(pts[i])
            nxt.append(open_tracks[j])
        for i, r in enumerate(pts):
            if i not in used_p:
                t = [r]
                tracks.append(t)
                nxt.append(t)
        open_tracks = nxt
    return tracks


def write_locus_csv(rows: list[LocusRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "re_lambda", "im_lambda", "flagged"])
        for r in rows:
            w.writerow([f"{r.param:.17g}", f"{r.lam.real:.17g}", f"{r.lam.imag:.17g}", int(r.flagged)])


# -- convergence benchmark ---------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    method: str
    n: int
    error: float
    time_ms: float


def _reference(spec: PulseSpec, window, lam: float):
    if spec.family == "sech" and spec.effective_scale == 1 and spec.chirp1 == 0 \
            and spec.chirp2 == 0 and complex(spec.amplitude).imag == 0:
        return sy_continuous(float(complex(spec.amplitude).real), lam)
    if spec.family == "rect" and spec.chirp1 == 0 and spec.chirp2 == 0:
        return rect_continuous(complex(spec.amplitude) * np.exp(1j * spec.phase),
                               -1 / spec.effective_scale, 1 / spec.effective_scale, lam)
    return None


def bench(spec: PulseSpec, window: tuple[float, float], ns, methods=ALL_METHODS,
          target_eig: complex | None = None, lam: float = 0.3, quantity: str = "qhat") -> list[BenchRow]:
    """Error against a reference for every (method, n).

    With ``target_eig`` the error is the distance of the eigenvalue found
    near it (Newton from the target for integrators, closest filtered
    candidate for matrix methods).  Otherwise the error of q^(lam) (or of
    a(lam) with ``quantity='a'``, sech pulses only) against the closed form,
    or against the finest-grid layer-peeling result when none exists.
    """
    ns = sorted(int(n) for n in ns)
    ref = None
    if target_eig is None:
        if quantity == "a":
            if spec.family != "sech":
                raise ValueError("a(lambda) reference only exists for sech pulses")
            ref = sy_a(float(complex(spec.amplitude).real), lam)
        else:
            ref = _reference(spec, window, lam)
        if ref is None:
            fine = generate(spec, make_grid(window[0], window[1], 4 * ns[-1]))
            c = propagate("layer_peeling", fine, lam)
            ref = c.a if quantity == "a" else c.b / c.a
    rows = []
    for m in methods:
        for n in ns:
            sig = generate(spec, make_grid(window[0], window[1], n))
            t0 = time.perf_counter()
            if m in MATRIX_BENCH:
                if target_eig is None:
                    raise ValueError("matrix methods need a target eigenvalue")
                res = matrix_eigenvalues(sig, m, FilterPolicy(
                    domain="z" if m.startswith("al") else "lambda",
                    merge_tol=2e-2 if m == "cd" else 0.0), energy=conserved(sig, 1))
                lams = res.lambdas
                err = float(np.min(np.abs(lams - target_eig))) if len(lams) else float("inf")
            elif target_eig is not None:
                r = newton_refine(sig, m, target_eig, NewtonOptions())
                err = abs(r.lam - target_eig) if not isinstance(r, DivergenceReport) else float("inf")
            else:
                c = propagate(m, sig, lam)
                val = c.a if quantity == "a" else c.b / c.a
                err = abs(val - ref)
            rows.append(BenchRow(Method.parse(m).value if m not in MATRIX_BENCH else m, n, float(err),
                                 (time.perf_counter() - t0) * 1e3))
    return rows


def convergence_slope(rows: list[BenchRow], method: str) -> float:
    pts = [(r.n, r.error) for r in rows if r.method == method and r.error > 0 and np.isfinite(r.error)]
    if len(pts) < 2:
        return float("nan")
    n, e = np.array(pts).T
    return float(np.polyfit(np.log(n), np.log(e), 1)[0])


def write_bench_csv(rows: list[BenchRow], path, with_time: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "n", "error"] + (["time_ms"] if with_time else []))
        for r in rows:
            w.writerow([r.method, r.n, f"{r.error:.17g}"] + ([f"{r.time_ms:.3f}"] if with_time else []))
