"""Continuous spectrum on a real lambda mesh and its energy integrals."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .signal import Signal
from .steppers import Method, propagate_many, threads
from .zs import ContinuousSpectrumPoint, qhat_array

TAIL_TOLERANCE = 1e-8


class SpectrumWarning(UserWarning):
    """Poles on the mesh or a truncated integrand tail."""


@dataclass(frozen=True)
class LambdaMesh:
    lo: float = -20.0
    hi: float = 20.0
    m: int = 2001

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError(f"empty lambda range [{self.lo}, {self.hi}]")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError("mesh needs at least 2 points")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.m)


@dataclass(frozen=True)
class ContinuousSpectrum:
    lam: np.ndarray
    qhat: np.ndarray
    a: np.ndarray
    b: np.ndarray
    pole: np.ndarray

    def __len__(self) -> int:
        return len(self.lam)

    def point(self, i: int) -> ContinuousSpectrumPoint:
        return ContinuousSpectrumPoint(float(self.lam[i]), complex(self.qhat[i]),
                                       complex(self.a[i]), complex(self.b[i]), bool(self.pole[i]))

    @property
    def unimodularity_defect(self) -> float:
        return float(np.max(np.abs(np.abs(self.a) ** 2 + np.abs(self.b) ** 2 - 1)))


def continuous_spectrum(signal: Signal, method="layer_peeling", mesh: LambdaMesh = LambdaMesh(),
                        workers: int | None = None) -> ContinuousSpectrum:
    """q^ = b/a on every mesh point; poles are flagged and carry NaN."""
    method = Method.parse(method)
    lam = mesh.points
    workers = threads() if workers is None else max(1, workers)
    if workers == 1 or len(lam) < 2 * workers:
        c = propagate_many(method, signal, lam)
        a, b = c.a, c.b
    else:
        parts = np.array_split(lam, workers)
        with ThreadPoolExecutor(workers) as pool:
            res = list(pool.map(lambda p: propagate_many(method, signal, p), parts))
        a = np.concatenate([r.a for r in res])
        b = np.concatenate([r.b for r in res])
    qh, pole = qhat_array(a, b)
    return ContinuousSpectrum(lam, qh, a, b, pole)


def spectral_energy(spec: ContinuousSpectrum, k: int = 1, warn: bool = True) -> float:
    """``(1/pi) * integral lam^(k-1) log(1 + |q^|^2)`` by the trapezoid rule.

    Poles are left out of the integral; both that and a non-negligible
    integrand at the mesh ends raise a :class:`SpectrumWarning`.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    ok = ~spec.pole
    if warn and not np.all(ok):
        warnings.warn(f"{int(np.sum(~ok))} pole(s) on the mesh excluded from the energy integral",
                      SpectrumWarning, stacklevel=2)
    lam = spec.lam[ok]
    if len(lam) < 2:
        return 0.0
    f = np.log1p(np.abs(spec.qhat[ok]) ** 2) * lam ** (k - 1)
    if warn and max(abs(f[0]), abs(f[-1])) > TAIL_TOLERANCE:
        warnings.warn(f"integrand tail {max(abs(f[0]), abs(f[-1])):.2e} at the mesh ends; "
                      "widen the lambda range", SpectrumWarning, stacklevel=2)
    return float(trapezoid(f, lam) / math.pi)


def write_spectrum_csv(spec: ContinuousSpectrum, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "re_qhat", "im_qhat", "re_a", "im_a", "re_b", "im_b"])
        for lam, qh, a, b in zip(spec.lam, spec.qhat, spec.a, spec.b):
            w.writerow([f"{v:.17g}" for v in (lam, qh.real, qh.imag, a.real, a.imag, b.real, b.imag)])


def read_spectrum_csv(path) -> ContinuousSpectrum:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["lambda", "re_qhat", "im_qhat", "re_a", "im_a", "re_b", "im_b"]:
        raise ValueError(f"{path}: not a spectrum CSV")
    d = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float).reshape(-1, 7)
    qh = d[:, 1] + 1j * d[:, 2]
    return ContinuousSpectrum(d[:, 0], qh, d[:, 3] + 1j * d[:, 4], d[:, 5] + 1j * d[:, 6],
                              np.isnan(qh))
