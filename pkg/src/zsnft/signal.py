"""Time grids, pulse families and time-domain conserved quantities."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy.integrate import trapezoid

FAMILIES = ("sech", "rect", "sinc", "gaussian", "raised_cosine", "wavetrain", "file")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with ``n`` intervals and ``n + 1`` nodes on ``[t1, t2]``."""

    t1: float
    t2: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.t1) and math.isfinite(self.t2)) or self.t2 <= self.t1:
            raise ValueError(f"empty time window [{self.t1}, {self.t2}]")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need at least 2 intervals, got n={self.n}")

    @property
    def eps(self) -> float:
        return (self.t2 - self.t1) / self.n

    @property
    def t(self) -> np.ndarray:
        # t[n] is t1 + n*eps, the same expression every consumer uses
        return self.t1 + np.arange(self.n + 1) * self.eps

    @property
    def t_end(self) -> float:
        return self.t1 + self.n * self.eps

    @property
    def width(self) -> float:
        return self.t2 - self.t1


def make_grid(t1: float, t2: float, n: int) -> TimeGrid:
    return TimeGrid(float(t1), float(t2), int(n))


@dataclass(frozen=True)
class Signal:
    grid: TimeGrid
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex)
        if q.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} samples, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("signal contains non-finite samples")
        q = q.copy()
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def with_samples(self, q: np.ndarray) -> "Signal":
        return Signal(self.grid, q)


@dataclass(frozen=True)
class PulseSpec:
    """Parametrised pulse ``A e^{j phase} e^{-j chirp1 t} e^{j chirp2 t^2} base(t)``.

    ``scale`` dilates time (``base(scale * t)``), so ``sinc`` with the default
    ``scale=2`` is ``sinc(2t)``.  For wavetrains ``train`` holds
    ``(amplitude, delay)`` pairs of shifted copies of ``base`` and the outer
    modulation applies to the sum.
    """

    family: str = "sech"
    amplitude: complex = 1.0
    scale: float | None = None
    chirp1: float = 0.0
    chirp2: float = 0.0
    phase: float = 0.0
    beta: float = 0.5
    train: tuple[tuple[complex, float], ...] = ()
    base: str = "sinc"
    path: str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown pulse family {self.family!r}")
        if self.family == "wavetrain":
            if not self.train:
                raise ValueError("wavetrain needs at least one (amplitude, delay) pair")
            if self.base not in FAMILIES[:5]:
                raise ValueError(f"invalid wavetrain base {self.base!r}")
        if self.family == "file" and not self.path:
            raise ValueError("file family needs a path")
        if self.scale is not None and self.scale <= 0:
            raise ValueError("scale must be positive")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("raised-cosine roll-off must lie in [0, 1]")

    @property
    def base_family(self) -> str:
        return self.base if self.family == "wavetrain" else self.family

    @property
    def effective_scale(self) -> float:
        if self.scale is not None:
            return float(self.scale)
        return 2.0 if self.base_family == "sinc" else 1.0


def _sech(x):
    # overflow-free for large |x|
    e = np.exp(-np.abs(x))
    return 2.0 * e / (1.0 + e * e)


def _raised_cosine(x, beta):
    x = np.asarray(x, dtype=float)
    out = np.sinc(x)
    if beta > 0:
        den = 1.0 - (2.0 * beta * x) ** 2
        sing = np.abs(den) < 1e-10
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(sing, np.pi / 4 * np.sinc(1.0 / (2.0 * beta)),
                           out * np.cos(np.pi * beta * x) / np.where(sing, 1.0, den))
    return out


def _base(family: str, x, beta: float):
    x = np.asarray(x, dtype=float)
    if family == "sech":
        return _sech(x)
    if family == "rect":
        return np.where(np.abs(x) <= 1.0, 1.0, 0.0)
    if family == "sinc":
        return np.sinc(x)
    if family == "gaussian":
        return np.exp(-x * x)
    if family == "raised_cosine":
        return _raised_cosine(x, beta)
    raise ValueError(f"no analytic base for family {family!r}")


def envelope(spec: PulseSpec, t) -> np.ndarray:
    """Unmodulated real-time envelope (amplitudes included for wavetrains)."""
    t = np.asarray(t, dtype=float)
    a = spec.effective_scale
    if spec.family == "wavetrain":
        out = np.zeros(t.shape, dtype=complex)
        for amp, delay in spec.train:
            out += complex(amp) * _base(spec.base, a * (t - delay), spec.beta)
        return out
    return _base(spec.family, a * t, spec.beta).astype(complex)


def evaluate(spec: PulseSpec, t) -> np.ndarray:
    """Evaluate the modulated pulse at arbitrary times."""
    if spec.family == "file":
        raise ValueError("file pulses are only defined on their stored grid")
    t = np.asarray(t, dtype=float)
    mod = complex(spec.amplitude) * np.exp(
        1j * (spec.phase - spec.chirp1 * t + spec.chirp2 * t * t))
    return envelope(spec, t) * mod


def generate(spec: PulseSpec, grid: TimeGrid | None = None) -> Signal:
    """Sample ``spec`` on ``grid``; the file family returns the stored signal."""
    if spec.family == "file":
        sig = read_signal_csv(spec.path)
        t = sig.t
        mod = complex(spec.amplitude) * np.exp(
            1j * (spec.phase - spec.chirp1 * t + spec.chirp2 * t * t))
        return sig.with_samples(sig.q * mod)
    if grid is None:
        raise ValueError("a grid is required for analytic pulse families")
    return Signal(grid, evaluate(spec, grid.t))


def _center(spec: PulseSpec) -> float:
    if spec.family == "wavetrain":
        return float(np.mean([d for _, d in spec.train]))
    return 0.0


def _chunk_energy(spec: PulseSpec, x0: float, x1: float) -> float:
    fn = lambda s: float(np.abs(envelope(spec, s)) ** 2)
    val, _ = integrate.quad(fn, x0, x1, limit=200, epsabs=0.0, epsrel=1e-12)
    return val


def auto_window(spec: PulseSpec, fraction: float = 0.9999) -> tuple[float, float]:
    """Smallest symmetric window holding at least ``fraction`` of the energy.

    Energy is integrated by adaptive quadrature over chunks of ``4/scale``
    around the pulse centre (mean wavetrain delay).  Families with slowly
    decaying tails get a ``1/T`` tail extrapolation for the total energy.
    The window half-width is then bisected to 1e-6.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if spec.family == "file":
        sig = read_signal_csv(spec.path)
        return sig.grid.t1, sig.grid.t2
    if complex(spec.amplitude) == 0:
        return -1.0, 1.0
    c = _center(spec)
    a = spec.effective_scale
    if spec.base_family == "rect":
        delays = [d for _, d in spec.train] or [0.0]
        return min(delays) - 1.0 / a, max(delays) + 1.0 / a

    h = 4.0 / a
    # cum[i] = energy inside [c - i*h, c + i*h]; for a 1/t^2 energy density the
    # remaining tail is about i*inc, and its uncertainty about inc
    cum = [0.0]
    tail = 0.0
    while len(cum) < 2 ** 15:
        i = len(cum) - 1
        inc = _chunk_energy(spec, c + i * h, c + (i + 1) * h) + \
            _chunk_energy(spec, c - (i + 1) * h, c - i * h)
        cum.append(cum[-1] + inc)
        tail = (i + 1) * inc
        if i >= 2 and inc <= 1e-3 * (1.0 - fraction) * cum[-1]:
            break
    cum = np.array(cum)
    total = cum[-1] + tail
    target = fraction * total
    if cum[-1] < target:
        raise ValueError("energy tail too heavy for an automatic window")

    i = int(np.searchsorted(cum, target))  # cum[i-1] < target <= cum[i]
    lo, hi = (i - 1) * h, i * h
    base = cum[i - 1]
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        e = base + _chunk_energy(spec, c + (i - 1) * h, c + mid) + \
            _chunk_energy(spec, c - mid, c - (i - 1) * h)
        if e >= target:
            hi = mid
        else:
            lo = mid
    return c - hi, c + hi


def time_derivative(signal: Signal, method: str = "fd") -> np.ndarray:
    """q_t by second-order differences (``fd``) or by FFT (``spectral``).

    The spectral derivative treats the first n samples as one period and is
    only appropriate for smooth signals that vanish at the window edges.
    """
    q = np.asarray(signal.q)
    eps = signal.grid.eps
    if method == "fd":
        return np.gradient(q, eps, edge_order=2)
    if method == "spectral":
        n = signal.grid.n
        w = 2j * np.pi * np.fft.fftfreq(n, eps)
        if n % 2 == 0:
            w[n // 2] = 0
        d = np.fft.ifft(w * np.fft.fft(q[:n]))
        return np.append(d, d[0])
    raise ValueError("derivative must be 'fd' or 'spectral'")


def conserved(signal: Signal, k: int, literal_momentum: bool = False, derivative: str = "fd") -> float:
    """Energy (k=1), momentum (k=2) or Hamiltonian (k=3) of the samples.

    Trapezoid rule in time; q_t from :func:`time_derivative`.
    """
    q = signal.q
    eps = signal.grid.eps
    if k == 1:
        return float(trapezoid(np.abs(q) ** 2, dx=eps))
    qt = time_derivative(signal, derivative)
    if k == 2:
        if literal_momentum:
            return complex(trapezoid(q * qt, dx=eps) / 2j)
        # q conj(q_t) keeps the sign consistent with the spectral side
        return float((trapezoid(q * np.conj(qt), dx=eps) / 2j).real)
    if k == 3:
        integrand = np.abs(q) ** 4 - np.abs(qt) ** 2
        return float(trapezoid(integrand, dx=eps) / -4.0)
    raise ValueError("k must be 1, 2 or 3")


def write_signal_csv(signal: Signal, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re", "im"])
        for t, v in zip(signal.t, signal.q):
            w.writerow([f"{t:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def read_signal_csv(path) -> Signal:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"signal file {path} not found")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "re", "im"]:
        raise ValueError(f"{path}: expected header 't,re,im'")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed number ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 3:
        raise ValueError(f"{path}: need at least 3 rows of t,re,im")
    t = data[:, 0]
    n = len(t) - 1
    grid = make_grid(t[0], t[-1], n)
    if np.max(np.abs(t - grid.t)) > 1e-9 * max(1.0, grid.width):
        raise ValueError(f"{path}: time samples are not uniformly spaced")
    return Signal(grid, data[:, 1] + 1j * data[:, 2])


def train_spec(pairs: Sequence[tuple[complex, float]], base: str = "sinc", **kw) -> PulseSpec:
    return PulseSpec(family="wavetrain", train=tuple((complex(a), float(d)) for a, d in pairs),
                     base=base, **kw)
