"""Zakharov-Shabat scattering data and the spectral amplitudes built from it."""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .signal import TimeGrid

POLE_THRESHOLD = 1e-300


class PoleError(ArithmeticError):
    """a(lambda) vanishes on the real axis, so b/a is undefined."""


class DegenerateEigenvalueError(ArithmeticError):
    """a'(lambda) vanishes at an eigenvalue (multiple zero of a)."""


@dataclass(frozen=True)
class JostState:
    """Eigenvector ``v`` (and optionally ``dv/dlambda``) at one time node."""

    v1: complex
    v2: complex
    dv1: complex | None = None
    dv2: complex | None = None

    @classmethod
    def initial(cls, lam: complex, t1: float, derivative: bool = False) -> "JostState":
        e = cmath.exp(-1j * lam * t1)
        if derivative:
            return cls(e, 0j, -1j * t1 * e, 0j)
        return cls(e, 0j)

    @property
    def has_derivative(self) -> bool:
        return self.dv1 is not None


@dataclass(frozen=True)
class ScatteringCoefficients:
    lam: complex
    a: complex
    b: complex
    a_prime: complex | None = None
    b_prime: complex | None = None

    @property
    def unimodularity_defect(self) -> float:
        return abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1.0)


@dataclass(frozen=True)
class ContinuousSpectrumPoint:
    lam: float
    qhat: complex
    a: complex | None = None
    b: complex | None = None
    pole: bool = False


@dataclass(frozen=True)
class DiscreteEigenvalue:
    lam: complex
    qtilde: complex | None
    residual: float
    multiplicity_hint: int = 1

    def __post_init__(self):
        if not self.lam.imag > 0:
            raise ValueError(f"eigenvalue {self.lam} is not in the upper half plane")


def coefficients_from_terminal(v: JostState, grid: TimeGrid, lam: complex) -> ScatteringCoefficients:
    """Read a, b (and a') off the eigenvector at ``t[n] = T2``."""
    t2 = grid.t_end
    ep = cmath.exp(1j * lam * t2)
    em = cmath.exp(-1j * lam * t2)
    a = v.v1 * ep
    b = v.v2 * em
    if v.has_derivative:
        return ScatteringCoefficients(lam, a, b, (v.dv1 + 1j * t2 * v.v1) * ep,
                                      (v.dv2 - 1j * t2 * v.v2) * em)
    return ScatteringCoefficients(lam, a, b)


def continuous_amplitude(c: ScatteringCoefficients) -> complex:
    if abs(c.a) < POLE_THRESHOLD:
        raise PoleError(f"a({c.lam}) = {c.a}: pole of the continuous spectrum")
    return c.b / c.a


def discrete_amplitude(c: ScatteringCoefficients, tol: float = 1e-14) -> complex:
    if c.a_prime is None:
        raise ValueError("coefficients carry no derivative; propagate with_derivative=True")
    if abs(c.a_prime) <= tol:
        raise DegenerateEigenvalueError(f"a'({c.lam}) = {c.a_prime}: multiple zero of a")
    return c.b / c.a_prime


def qhat_array(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised b/a; returns (qhat, pole_mask) with NaN at poles."""
    a = np.asarray(a)
    pole = ~(np.abs(a) >= POLE_THRESHOLD)
    with np.errstate(divide="ignore", invalid="ignore"):
        qh = np.where(pole, np.nan + 0j, b / np.where(pole, 1.0, a))
    return qh, pole
