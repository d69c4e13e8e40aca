"""Newton-Raphson eigenvalue refinement and the trace-formula driven search.

Discrete eigenvalues are the zeros of a(lambda) in the upper half plane.
Starting points are drawn at random from a rectangle and refined with
``lam <- lam - alpha a / a'``, where a' comes from the augmented
propagation.  The search stops once the eigenvalues found account for the
energy left over by the continuous spectrum (the nonlinear Parseval
identity), or when the draw budget runs out.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .continuous import ContinuousSpectrum, LambdaMesh, continuous_spectrum, spectral_energy
from .signal import Signal, conserved
from .steppers import Method, bidirectional_b, propagate_many
from .zs import DiscreteEigenvalue

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class Region:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if not self.im_lo > 0:
            raise ValueError("the search region must lie strictly above the real axis")
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ValueError("empty search region")

    def contains(self, lam) -> np.ndarray:
        lam = np.asarray(lam)
        return ((lam.real >= self.re_lo) & (lam.real <= self.re_hi)
                & (lam.imag >= self.im_lo) & (lam.imag <= self.im_hi))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        re = rng.uniform(self.re_lo, self.re_hi, k)
        im = rng.uniform(self.im_lo, self.im_hi, k)
        return re + 1j * im


def default_region(signal: Signal, energy: float | None = None) -> Region:
    """Rectangle bounded by the trace formula (Im lam <= E/4) and the bandwidth."""
    if energy is None:
        energy = conserved(signal, 1)
    q = np.asarray(signal.q)[:-1]
    p = np.abs(np.fft.fft(q)) ** 2
    total = p.sum()
    width = 0.0
    if total > 0:
        omega = 2 * np.pi * np.fft.fftfreq(len(q), signal.grid.eps)
        mean = np.sum(omega * p) / total
        std = math.sqrt(max(np.sum((omega - mean) ** 2 * p) / total, 0.0))
        # a spectral component e^{-j w t} sits at lam = w/2
        width = 0.5 * (abs(mean) + 3 * std)
    re = max(10.0, 2 * width)
    return Region(-re, re, 0.01, 1.2 * energy / 4 + 1)


@dataclass(frozen=True)
class NewtonOptions:
    alpha: float = 1.0
    delta: float = 1e-12
    max_iter: int = 100
    region: Region | None = None
    rng_seed: int = 0
    draws: int = 200
    batch: int = 8
    eps1: float | None = None  # trace tolerance; default 1e-2 * E(1)
    dedupe_tol: float = 1e-6
    stagnation: float = 1e-8
    max_step: float | None = 0.5  # trust radius for one update

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if self.max_iter < 1 or self.draws < 0 or self.batch < 1:
            raise ValueError("iteration counts must be positive")


@dataclass(frozen=True)
class DivergenceReport:
    """Newton did not converge: why, and where it stopped."""

    lam0: complex
    last: complex
    iterations: int
    reason: str  # max_iter | left_region | degenerate | non_finite


@dataclass(frozen=True)
class _Outcome:
    lam: complex
    converged: bool
    iterations: int
    reason: str
    a: complex
    a_prime: complex
    b: complex


def _newton_batch(signal: Signal, method: Method, lam0: np.ndarray, opts: NewtonOptions,
                  region: Region | None, known=()) -> list[_Outcome]:
    """Run independent Newton chains in lock-step, one propagation per sweep.

    Zeros in ``known`` are deflated: the iteration runs on
    ``a(lam) * prod (lam - conj(l)) / (lam - l)``, which keeps the remaining
    zeros of a but not the known ones.  With nothing known this is the plain
    ``lam - alpha a/a'`` update.
    """
    known = np.asarray(known, dtype=complex)
    lam = np.array(lam0, dtype=complex)
    k = len(lam)
    active = np.ones(k, dtype=bool)
    iters = np.zeros(k, dtype=int)
    last_step = np.full(k, np.inf)
    reason = np.array([""] * k, dtype=object)
    a = np.zeros(k, dtype=complex)
    da = np.zeros(k, dtype=complex)
    b = np.zeros(k, dtype=complex)

    for _ in range(opts.max_iter):
        idx = np.flatnonzero(active)
        if not len(idx):
            break
        try:
            c = propagate_many(method, signal, lam[idx], with_derivative=True)
        except FloatingPointError:
            # evaluate one by one to isolate overflowing chains
            for i in idx:
                try:
                    ci = propagate_many(method, signal, lam[i:i + 1], with_derivative=True)
                except FloatingPointError:
                    active[i] = False
                    reason[i] = "non_finite"
                    continue
                a[i], da[i], b[i] = ci.a[0], ci.a_prime[0], ci.b[0]
            idx = idx[active[idx]]
        else:
            a[idx], da[idx], b[idx] = c.a, c.a_prime, c.b
        for i in idx:
            if abs(da[i]) <= DEGENERATE_TOL:
                active[i] = False
                reason[i] = "degenerate"
                continue
            if len(known):
                if a[i] == 0:
                    active[i] = False
                    reason[i] = "converged"
                    continue
                logd = da[i] / a[i] - np.sum(1 / (lam[i] - known) - 1 / (lam[i] - known.conj()))
                if logd == 0 or not np.isfinite(logd):
                    active[i] = False
                    reason[i] = "degenerate"
                    continue
                dl = opts.alpha / logd
            else:
                dl = opts.alpha * a[i] / da[i]
            step = abs(dl)
            if opts.max_step is not None and step > opts.max_step:
                dl *= opts.max_step / step
                step = opts.max_step
            iters[i] += 1
            if step < opts.delta:
                active[i] = False
                reason[i] = "converged"
                continue
            if step < opts.stagnation and step >= 0.5 * last_step[i]:
                # rounding floor of a: further steps only wander
                active[i] = False
                reason[i] = "converged"
                continue
            last_step[i] = step
            lam[i] -= dl
            if region is not None and not region.contains(lam[i]):
                active[i] = False
                reason[i] = "left_region"
    reason[active] = "max_iter"
    return [_Outcome(complex(lam[i]), reason[i] == "converged", int(iters[i]), str(reason[i]),
                     complex(a[i]), complex(da[i]), complex(b[i])) for i in range(k)]


def _to_eigenvalue(o: _Outcome, signal: Signal, method: Method) -> DiscreteEigenvalue:
    # b from the forward sweep is useless once exp(2 Im(lam) width) is large
    try:
        b = bidirectional_b(method, signal, o.lam)
    except FloatingPointError:
        b = o.b
    return DiscreteEigenvalue(o.lam, b / o.a_prime, abs(o.a))


def newton_refine(signal: Signal, method, lambda0: complex, opts: NewtonOptions = NewtonOptions()):
    """Refine one starting point; returns a DiscreteEigenvalue or a DivergenceReport."""
    method = Method.parse(method)
    region = opts.region
    if region is not None and not region.contains(lambda0):
        raise ValueError(f"starting point {lambda0} lies outside the search region")
    o = _newton_batch(signal, method, np.array([lambda0]), opts, region)[0]
    if o.converged and o.lam.imag > 0:
        return _to_eigenvalue(o, signal, method)
    return DivergenceReport(complex(lambda0), o.lam, o.iterations,
                            o.reason if not o.converged else "left_region")


def refine_candidates(signal: Signal, method, candidates, opts: NewtonOptions = NewtonOptions(),
                      threshold: float = 0.0) -> list[DiscreteEigenvalue]:
    """Newton-polish matrix candidates and keep distinct zeros above ``threshold``.

    The Fourier matrix solves the periodised problem, whose extra eigenvalues
    near the real axis are not zeros of a(lambda); polishing sends them to a
    true zero (then removed as duplicates) or makes them diverge.
    """
    method = Method.parse(method)
    out: list[DiscreteEigenvalue] = []
    for c in candidates:
        lam0 = c.lam if isinstance(c, DiscreteEigenvalue) else complex(c)
        o = _newton_batch(signal, method, np.array([lam0]), opts, opts.region)[0]
        if not o.converged or not o.lam.imag > threshold:
            continue
        if any(abs(e.lam - o.lam) < opts.dedupe_tol for e in out):
            continue
        out.append(_to_eigenvalue(o, signal, method))
    out.sort(key=lambda e: (-e.lam.imag, e.lam.real))
    return out


@dataclass(frozen=True)
class TraceReport:
    e_time: tuple[float, float, float]
    e_cont: tuple[float, float, float]
    e_disc: tuple[float, float, float]
    residual: tuple[float, float, float]

    def relative(self, k: int = 1) -> float:
        scale = abs(self.e_time[k - 1])
        return self.residual[k - 1] / scale if scale > 0 else self.residual[k - 1]


def discrete_energy(lams, k: int) -> float:
    lams = np.asarray(lams, dtype=complex)
    return float(4.0 / k * np.sum((lams ** k).imag))


def trace_residual(e_time, e_cont, eigs) -> TraceReport:
    lams = [e.lam if isinstance(e, DiscreteEigenvalue) else complex(e) for e in eigs]
    e_disc = tuple(discrete_energy(lams, k) for k in (1, 2, 3))
    res = tuple(abs(e_time[i] - e_cont[i] - e_disc[i]) for i in range(3))
    return TraceReport(tuple(map(float, e_time)), tuple(map(float, e_cont)), e_disc, res)


@dataclass
class DiscreteSpectrum:
    eigenvalues: list[DiscreteEigenvalue]
    complete: bool
    draws: int = 0
    failures: dict = field(default_factory=dict)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.eigenvalues], dtype=complex)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def detected(self, threshold: float) -> list[DiscreteEigenvalue]:
        """Eigenvalues whose imaginary part exceeds ``threshold``."""
        return [e for e in self.eigenvalues if e.lam.imag > threshold]


def time_energies(signal: Signal) -> tuple[float, float, float]:
    return conserved(signal, 1), conserved(signal, 2), conserved(signal, 3)


def spectral_energies(spec: ContinuousSpectrum, warn: bool = True) -> tuple[float, float, float]:
    return tuple(spectral_energy(spec, k, warn=warn and k == 1) for k in (1, 2, 3))


def phase_seeds(spec: ContinuousSpectrum, region: Region, max_seeds: int = 32) -> list[complex]:
    """Starting points from fast phase rotation of a(lam) along the real mesh.

    An eigenvalue ``l`` close to the real axis contributes the factor
    ``(lam - l)/(lam - conj(l))`` to a, whose phase winds by 2 pi over a
    width of about ``Im l`` around ``Re l`` with peak slope ``2/Im l``.
    Local maxima of d(arg a)/d(lam) therefore point at such eigenvalues.
    """
    ok = ~spec.pole & np.isfinite(spec.a)
    lam = spec.lam[ok]
    if len(lam) < 3:
        return []
    phase = np.unwrap(np.angle(spec.a[ok]))
    slope = np.gradient(phase, lam)
    floor = 2.0 / region.im_hi
    peaks = np.flatnonzero((slope[1:-1] > slope[:-2]) & (slope[1:-1] >= slope[2:])
                           & (slope[1:-1] > floor)) + 1
    peaks = peaks[np.argsort(-slope[peaks])][:max_seeds]
    seeds = lam[peaks] + 1j * np.clip(2.0 / slope[peaks], region.im_lo, region.im_hi)
    return [complex(z) for z in seeds if region.contains(z)]


def find_eigenvalues(signal: Signal, method="layer_peeling", opts: NewtonOptions = NewtonOptions(),
                     mesh: LambdaMesh = LambdaMesh(), seeds=(), spectrum: ContinuousSpectrum | None = None,
                     warn: bool = True) -> tuple[DiscreteSpectrum, TraceReport]:
    """Random-restart Newton search until the k=1 trace formula closes.

    ``seeds`` (for example candidates from a matrix method) and the phase
    seeds of the continuous spectrum are tried before any random draw; they
    do not count against the draw budget.
    """
    method = Method.parse(method)
    if spectrum is None:
        spectrum = continuous_spectrum(signal, method, mesh)
    e_time = time_energies(signal)
    e_cont = spectral_energies(spectrum, warn)
    region = opts.region or default_region(signal, e_time[0])
    eps1 = opts.eps1 if opts.eps1 is not None else 1e-2 * e_time[0]
    rng = np.random.default_rng(opts.rng_seed)

    found: list[DiscreteEigenvalue] = []
    failures: dict[str, int] = {}
    draws = 0

    def residual() -> float:
        return abs(e_time[0] - e_cont[0] - discrete_energy([e.lam for e in found], 1))

    def absorb(outcomes):
        for o in outcomes:
            if not o.converged:
                failures[o.reason] = failures.get(o.reason, 0) + 1
                continue
            if not region.contains(o.lam):
                failures["outside"] = failures.get("outside", 0) + 1
                continue
            dup = next((e for e in found if abs(e.lam - o.lam) < opts.dedupe_tol), None)
            if dup is not None:
                continue
            found.append(_to_eigenvalue(o, signal, method))

    seeds = [complex(s) for s in seeds if region.contains(complex(s))]
    seeds += phase_seeds(spectrum, region)
    for start in range(0, len(seeds), opts.batch):
        if residual() < eps1:
            break
        absorb(_newton_batch(signal, method, np.array(seeds[start:start + opts.batch]), opts,
                             region, [e.lam for e in found]))
    while residual() >= eps1 and draws < opts.draws:
        k = min(opts.batch, opts.draws - draws)
        draws += k
        absorb(_newton_batch(signal, method, region.sample(rng, k), opts, region,
                             [e.lam for e in found]))

    found.sort(key=lambda e: (-e.lam.imag, e.lam.real))
    report = trace_residual(e_time, e_cont, found)
    return DiscreteSpectrum(found, residual() < eps1, draws, failures), report


def write_discrete_csv(spec: DiscreteSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_lambda", "im_lambda", "re_qtilde", "im_qtilde", "residual"])
        for e in spec.eigenvalues:
            qt = e.qtilde if e.qtilde is not None else complex("nan")
            w.writerow([f"{v:.17g}" for v in (e.lam.real, e.lam.imag, qt.real, qt.imag, e.residual)])


def read_discrete_csv(path) -> list[DiscreteEigenvalue]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["re_lambda", "im_lambda", "re_qtilde", "im_qtilde", "residual"]:
        raise ValueError(f"{path}: not a discrete-spectrum CSV")
    out = []
    for r in rows[1:]:
        if not r:
            continue
        v = [float(c) for c in r]
        qt = None if math.isnan(v[2]) else complex(v[2], v[3])
        out.append(DiscreteEigenvalue(complex(v[0], v[1]), qt, v[4]))
    return out
