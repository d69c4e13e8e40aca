"""Command-line front end.

Every subcommand writes delimited text (CSV) and a JSON run report with the
keys command, config, residuals, eigenvalues, timing_ms and seed.  Exit
codes: 0 success, 1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .continuous import LambdaMesh, continuous_spectrum, write_spectrum_csv
from .matrix import (MATRIX_KINDS, FilterPolicy, build_al_matrix, build_cd_matrix,
                     build_spectral_matrix, default_threshold, matrix_eigenvalues, write_matrix_dump)
from .nls import PropagationPlan, fiber_units, ssf_propagate
from .search import (NewtonOptions, Region, find_eigenvalues, read_discrete_csv,
                     spectral_energies, time_energies, trace_residual, write_discrete_csv,
                     DiscreteSpectrum, refine_candidates)
from .signal import FAMILIES, PulseSpec, auto_window, generate, make_grid, read_signal_csv, write_signal_csv
from .steppers import ALL_METHODS, Method
from .studies import SWEEP_PARAMETERS, MATRIX_BENCH, bench, sweep_locus, write_bench_csv, write_locus_csv


class UsageError(Exception):
    """Invalid combination of flags or unreadable input."""


class ComputationFailed(Exception):
    """The computation ran but did not reach its goal (exit code 1)."""


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 2:
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return vals


def _train(text: str) -> tuple[tuple[complex, float], ...]:
    pairs = []
    for item in text.split(","):
        try:
            a, d = item.split("@")
            pairs.append((_complex(a), float(d)))
        except (ValueError, argparse.ArgumentTypeError):
            raise argparse.ArgumentTypeError(
                f"train entries look like AMP@DELAY, got {item!r}") from None
    return tuple(pairs)


def _pulse_args(p: argparse.ArgumentParser, single_n: bool = True) -> None:
    g = p.add_argument_group("pulse")
    g.add_argument("--pulse", choices=FAMILIES, default="sech")
    g.add_argument("--amp", type=_complex, default=1.0, help="amplitude (complex allowed, e.g. 2+1j)")
    g.add_argument("--scale", type=float, help="time dilation factor (default 2 for sinc, else 1)")
    g.add_argument("--chirp1", type=float, default=0.0, help="linear chirp w: factor exp(-j w t)")
    g.add_argument("--chirp2", type=float, default=0.0, help="quadratic chirp w: factor exp(j w t^2)")
    g.add_argument("--phase", type=float, default=0.0)
    g.add_argument("--beta", type=float, default=0.5, help="raised-cosine roll-off")
    g.add_argument("--train", type=_train, default=(), help="wavetrain pulses AMP@DELAY,...")
    g.add_argument("--base", default="sinc", help="wavetrain base family")
    g.add_argument("--in", dest="infile", help="signal CSV for --pulse file")
    w = p.add_argument_group("grid")
    w.add_argument("--window", type=float, nargs=2, metavar=("T1", "T2"))
    w.add_argument("--auto-window", action="store_true")
    w.add_argument("--fraction", type=float, default=0.9999)
    if single_n:
        w.add_argument("--n", type=int, default=1024, help="number of intervals")
    else:
        w.add_argument("--n", dest="n_list", type=_int_list, required=True,
                       help="comma-separated list of sizes")


def _spec(a) -> PulseSpec:
    return PulseSpec(family=a.pulse, amplitude=a.amp, scale=a.scale, chirp1=a.chirp1,
                     chirp2=a.chirp2, phase=a.phase, beta=a.beta, train=a.train, base=a.base,
                     path=a.infile)


def _window(a, spec: PulseSpec) -> tuple[float, float] | None:
    if a.window:
        return tuple(a.window)
    if a.auto_window or spec.family == "rect":
        return auto_window(spec, a.fraction)
    return None


def _mesh_args(p):
    p.add_argument("--lmin", type=float, default=-20.0)
    p.add_argument("--lmax", type=float, default=20.0)
    p.add_argument("--mesh", type=int, default=2001)


def _newton_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=200)
    p.add_argument("--delta", type=float, default=1e-12)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--eps1", type=float, help="trace tolerance (default 1e-2 * energy)")
    p.add_argument("--region", type=float, nargs=4, metavar=("RE_LO", "RE_HI", "IM_LO", "IM_HI"))


def _opts(a) -> NewtonOptions:
    region = Region(*a.region) if a.region else None
    return NewtonOptions(alpha=a.alpha, delta=a.delta, max_iter=a.max_iter, region=region,
                         rng_seed=a.seed, draws=a.draws, eps1=a.eps1)


def _eig_list(lams) -> list[list[float]]:
    return [[float(complex(z).real), float(complex(z).imag)] for z in lams]


def _report(path: Path, command: str, config: dict, residuals=None, eigenvalues=(),
            timing_ms: float = 0.0, seed=None) -> None:
    doc = {"command": command, "config": config, "residuals": residuals or {},
           "eigenvalues": _eig_list(eigenvalues), "timing_ms": round(timing_ms, 3), "seed": seed}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _trace_dict(rep) -> dict:
    return {"e_time": list(rep.e_time), "e_cont": list(rep.e_cont), "e_disc": list(rep.e_disc),
            "residual": list(rep.residual), "relative_k1": rep.relative(1)}


def _outdir(path: str) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _json_beside(path: Path) -> Path:
    return path.with_suffix(".json")


def _config(a) -> dict:
    return {k: (v if isinstance(v, (int, float, str, bool, type(None))) else str(v))
            for k, v in sorted(vars(a).items()) if k != "func"}


# -- subcommands --------------------------------------------------------------

def cmd_gen(a) -> int:
    t0 = time.perf_counter()
    spec = _spec(a)
    if spec.family == "file":
        sig = generate(spec)
    else:
        win = _window(a, spec)
        if win is None:
            raise UsageError("gen needs --window T1 T2 or --auto-window")
        sig = generate(spec, make_grid(win[0], win[1], a.n))
    out = Path(a.out)
    write_signal_csv(sig, out)
    _report(_json_beside(out), "gen", _config(a), {}, (), (time.perf_counter() - t0) * 1e3)
    print(f"wrote {out} ({sig.grid.n + 1} samples on [{sig.grid.t1:g}, {sig.grid.t2:g}])")
    return 0


def cmd_nft(a) -> int:
    t0 = time.perf_counter()
    sig = read_signal_csv(a.infile)
    mesh = LambdaMesh(a.lmin, a.lmax, a.mesh)
    out = _outdir(a.out)
    spec = continuous_spectrum(sig, a.method, mesh)
    write_spectrum_csv(spec, out / "spectrum.csv")
    residuals, lams, ok = {}, [], True
    if a.discrete:
        d, rep = find_eigenvalues(sig, a.method, _opts(a), mesh, spectrum=spec)
        write_discrete_csv(d, out / "discrete.csv")
        residuals = _trace_dict(rep)
        residuals["complete"] = d.complete
        residuals["draws"] = d.draws
        lams = d.lambdas
        ok = d.complete
        for e in d.eigenvalues:
            print(f"lambda = {e.lam.real:+.10f} {e.lam.imag:+.10f}j   |a| = {e.residual:.1e}")
        print(f"trace residual (k=1): {rep.residual[0]:.3e} ({rep.relative(1):.2e} relative)")
    _report(out / "report.json", "nft", _config(a), residuals, lams,
            (time.perf_counter() - t0) * 1e3, a.seed)
    if not ok:
        print("search budget exhausted before the trace formula closed", file=sys.stderr)
        return 1
    return 0


def cmd_eig(a) -> int:
    t0 = time.perf_counter()
    sig = read_signal_csv(a.infile)
    kind = a.matrix
    if a.dump_matrix:
        builders = {"cd": lambda: build_cd_matrix(sig), "al": lambda: build_al_matrix(sig, "al_full"),
                    "al-norm": lambda: build_al_matrix(sig, "al_normalized"),
                    "al-simplified": lambda: build_al_matrix(sig, "al_simplified"),
                    "spectral": lambda: build_spectral_matrix(sig, a.fourier_order)}
        write_matrix_dump(builders[kind](), Path(a.dump_matrix))
    domain = "z" if kind.startswith("al") else "lambda"
    policy = FilterPolicy(im_threshold=a.im_threshold, strip=tuple(a.strip) if a.strip else None,
                          domain=domain, merge_tol=2e-2 if kind == "cd" else 0.0)
    energy = time_energies(sig)[0]
    res = matrix_eigenvalues(sig, kind, policy, energy=energy, fourier_order=a.fourier_order)
    cands = res.candidates
    if a.refine:
        thr = a.im_threshold if a.im_threshold is not None else default_threshold(energy)
        cands = refine_candidates(sig, a.method, cands, NewtonOptions(), thr)
    out = _outdir(a.out)
    write_discrete_csv(DiscreteSpectrum(cands, True), out / "discrete.csv")
    for c in cands:
        print(f"lambda = {c.lam.real:+.10f} {c.lam.imag:+.10f}j")
    if res.wrap_risk:
        print(f"warning: {len(res.wrap_risk)} eigenvalue(s) near the z-map wrap limit", file=sys.stderr)
    residuals = {"n_input": res.n_input, "merged": res.merged,
                 "wrap_risk": _eig_list(res.wrap_risk),
                 "trace_bound": {"sum_4im": float(4 * sum(c.lam.imag for c in cands)), "energy": energy}}
    _report(out / "report.json", "eig", _config(a), residuals, [c.lam for c in cands],
            (time.perf_counter() - t0) * 1e3, None)
    return 0


def cmd_sweep(a) -> int:
    t0 = time.perf_counter()
    spec = _spec(a)
    start, stop, count = a.range
    count = int(count)
    if count < 2:
        raise UsageError("--range needs at least 2 samples")
    values = np.linspace(start, stop, count)
    win = tuple(a.window) if a.window else None
    rows = sweep_locus(spec, a.param, values, a.method, win, a.n, a.engine,
                       _opts(a), LambdaMesh(a.lmin, a.lmax, a.mesh))
    out = Path(a.out)
    write_locus_csv(rows, out)
    flagged = sorted({r.param for r in rows if r.flagged})
    _report(_json_beside(out), "sweep", _config(a), {"flagged_params": flagged},
            [r.lam for r in rows], (time.perf_counter() - t0) * 1e3, a.seed)
    print(f"wrote {out} ({len(rows)} rows, {len(flagged)} flagged parameter values)")
    return 0


def cmd_propagate(a) -> int:
    t0 = time.perf_counter()
    sig = read_signal_csv(a.infile)
    res = ssf_propagate(sig, PropagationPlan(a.z, a.steps, a.padding))
    out = Path(a.out)
    write_signal_csv(res.padded if a.keep_padding else res.signal, out)
    residuals = {"leaked": res.leaked}
    if a.t0_ps:
        residuals["units"] = fiber_units(a.t0_ps)
        print(f"z = {a.z} corresponds to {a.z * residuals['units']['length_km']:.4g} km")
    _report(_json_beside(out), "propagate", _config(a), residuals, (),
            (time.perf_counter() - t0) * 1e3, None)
    print(f"wrote {out}")
    return 0


def cmd_trace(a) -> int:
    t0 = time.perf_counter()
    sig = read_signal_csv(a.infile)
    mesh = LambdaMesh(a.lmin, a.lmax, a.mesh)
    spec = continuous_spectrum(sig, a.method, mesh)
    if a.discrete_csv:
        eigs = read_discrete_csv(a.discrete_csv)
        rep = trace_residual(time_energies(sig), spectral_energies(spec), eigs)
        lams = [e.lam for e in eigs]
    else:
        d, rep = find_eigenvalues(sig, a.method, _opts(a), mesh, spectrum=spec)
        lams = d.lambdas
    for k in range(3):
        print(f"k={k + 1}: time {rep.e_time[k]:+.10g}  cont {rep.e_cont[k]:+.10g}  "
              f"disc {rep.e_disc[k]:+.10g}  residual {rep.residual[k]:.3e}")
    if a.out:
        _report(Path(a.out), "trace", _config(a), _trace_dict(rep), lams,
                (time.perf_counter() - t0) * 1e3, a.seed)
    return 0


def cmd_bench(a) -> int:
    t0 = time.perf_counter()
    spec = _spec(a)
    win = _window(a, spec)
    if win is None:
        raise UsageError("bench needs --window T1 T2 or --auto-window")
    if a.methods == "all":
        methods = [m.value for m in ALL_METHODS]
    else:
        methods = [m.strip() for m in a.methods.split(",") if m.strip()]
        for m in methods:
            if m not in MATRIX_BENCH:
                Method.parse(m)
    rows = bench(spec, win, a.n_list, methods, a.target_eig, a.lam, a.quantity)
    out = Path(a.out)
    write_bench_csv(rows, out)
    for r in rows:
        print(f"{r.method:>15s} n={r.n:<6d} error={r.error:.3e}")
    _report(_json_beside(out), "bench", _config(a), {},
            [a.target_eig] if a.target_eig is not None else (), (time.perf_counter() - t0) * 1e3, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zsnft", description="Nonlinear Fourier transform toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    methods = [m.value for m in ALL_METHODS] + ["layer-peeling", "crank-nicolson"]

    g = sub.add_parser("gen", help="sample a pulse to a signal CSV")
    _pulse_args(g)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    n = sub.add_parser("nft", help="continuous spectrum and (optionally) eigenvalue search")
    n.add_argument("--in", dest="infile", required=True)
    n.add_argument("--method", choices=methods, default="layer_peeling")
    _mesh_args(n)
    n.add_argument("--discrete", action="store_true")
    _newton_args(n)
    n.add_argument("--out", required=True, help="output directory")
    n.set_defaults(func=cmd_nft)

    e = sub.add_parser("eig", help="matrix eigenvalue methods")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--matrix", choices=MATRIX_KINDS, default="spectral")
    e.add_argument("--fourier-order", type=int)
    e.add_argument("--im-threshold", type=float)
    e.add_argument("--strip", type=float, nargs=2, metavar=("RE_LO", "RE_HI"))
    e.add_argument("--refine", action="store_true",
                   help="Newton-polish candidates, drop duplicates and non-zeros of a")
    e.add_argument("--method", choices=methods, default="layer_peeling")
    e.add_argument("--dump-matrix")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_eig)

    s = sub.add_parser("sweep", help="eigenvalue loci under a parameter sweep")
    _pulse_args(s)
    s.add_argument("--param", choices=SWEEP_PARAMETERS, required=True)
    s.add_argument("--range", type=float, nargs=3, metavar=("START", "STOP", "COUNT"), required=True)
    s.add_argument("--method", choices=methods, default="layer_peeling")
    s.add_argument("--engine", choices=("hybrid", "search", "matrix"), default="hybrid")
    _mesh_args(s)
    _newton_args(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("propagate", help="split-step NLS propagation")
    r.add_argument("--in", dest="infile", required=True)
    r.add_argument("--z", type=float, required=True)
    r.add_argument("--steps", type=int, default=4096)
    r.add_argument("--padding", type=float, default=2.0)
    r.add_argument("--keep-padding", action="store_true")
    r.add_argument("--t0-ps", type=float, help="time unit in ps, for fiber-length display")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_propagate)

    t = sub.add_parser("trace", help="trace-formula energy report")
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--method", choices=methods, default="layer_peeling")
    t.add_argument("--discrete-csv", help="use these eigenvalues instead of searching")
    _mesh_args(t)
    _newton_args(t)
    t.add_argument("--out", help="JSON report path")
    t.set_defaults(func=cmd_trace)

    b = sub.add_parser("bench", help="error-vs-n convergence table")
    _pulse_args(b, single_n=False)
    b.add_argument("--methods", default="all", help="'all' or comma list (integrators and "
                   + ", ".join(MATRIX_BENCH) + ")")
    b.add_argument("--target-eig", type=_complex)
    b.add_argument("--lam", type=float, default=0.3)
    b.add_argument("--quantity", choices=("qhat", "a"), default="qhat")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (UsageError, ValueError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, ComputationFailed) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
