"""Closed-form and high-accuracy reference spectra.

Used as test oracles: the Satsuma-Yajima (sech) family, the rectangular
pulse, and adaptive ODE integration of the scattering problem.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .signal import Signal
from .zs import PoleError

_LANCZOS_G = 7.0
_LANCZOS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _check_poles(z):
    near = np.isclose(z.real, np.round(z.real), rtol=0, atol=0) & (z.imag == 0) & (z.real <= 0)
    if np.any(near):
        raise PoleError(f"gamma function pole at {z[near][0]}")


def _log_gamma_right(z):
    # Lanczos for Re z >= 0.5
    z = z - 1
    x = np.full(z.shape, _LANCZOS[0], dtype=complex)
    for i in range(1, 9):
        x = x + _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(x)


def _log_sin_pi(z):
    """log sin(pi z) without overflow for large |Im z|."""
    out = np.empty_like(z)
    big = np.abs(z.imag) > 20
    out[~big] = np.log(np.sin(np.pi * z[~big]))
    zb = z[big]
    up = zb.imag > 0
    res = np.empty_like(zb)
    # sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 i pi z}) for Im z > 0, mirrored below
    zu, zd = zb[up], zb[~up]
    res[up] = -1j * np.pi * zu + math.log(0.5) + 0.5j * np.pi + np.log1p(-np.exp(2j * np.pi * zu))
    res[~up] = 1j * np.pi * zd + math.log(0.5) - 0.5j * np.pi + np.log1p(-np.exp(-2j * np.pi * zd))
    out[big] = res
    return out


def log_gamma_complex(z):
    """log Gamma(z) (some branch; exp of it is Gamma(z))."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    _check_poles(z)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = _log_gamma_right(z[right])
    left = ~right
    if np.any(left):
        zl = z[left]
        out[left] = math.log(math.pi) - _log_sin_pi(zl) - _log_gamma_right(1 - zl)
    return complex(out[0]) if scalar else out


def gamma_complex(z):
    """Gamma function for complex arguments (Lanczos g=7, 9 terms, reflection)."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    _check_poles(z)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = np.exp(_log_gamma_right(z[right]))
    left = ~right
    if np.any(left):
        zl = z[left]
        out[left] = np.pi / (np.sin(np.pi * zl) * np.exp(_log_gamma_right(1 - zl)))
    return complex(out[0]) if scalar else out


# -- Satsuma-Yajima: q(t) = A sech(t) ---------------------------------------

def sy_continuous(A: float, lam):
    """Continuous spectrum of ``A sech(t)`` at real ``lam``."""
    if A <= 0:
        raise ValueError("A must be positive")
    lam = np.asarray(lam, dtype=float)
    s = math.sin(math.pi * A)
    if abs(s) < 1e-15 * max(1.0, A):
        return np.zeros(lam.shape, dtype=complex) if lam.ndim else 0j
    w = 0.5 - 1j * lam
    lg = (log_gamma_complex(w + A) + log_gamma_complex(w - A) - 2 * log_gamma_complex(w)
          - np.pi * np.abs(lam) - np.log1p(np.exp(-2 * np.pi * np.abs(lam))) + math.log(2.0))
    out = -s * np.exp(lg)
    return complex(out) if np.ndim(out) == 0 else out


def sy_a(A: float, lam):
    """Scattering coefficient a(lam) of ``A sech(t)`` (Im lam >= 0)."""
    w = np.atleast_1d(0.5 - 1j * np.asarray(lam, dtype=complex))
    # a vanishes where w - A hits a pole of Gamma (the eigenvalues)
    d = w - A
    zero = (np.abs(d.imag) < 1e-14) & (d.real < 0.5) & (np.abs(d.real - np.round(d.real)) < 1e-12)
    out = np.zeros(w.shape, dtype=complex)
    ok = ~zero
    out[ok] = np.exp(2 * log_gamma_complex(w[ok]) - log_gamma_complex(w[ok] + A)
                     - log_gamma_complex(w[ok] - A))
    return complex(out[0]) if np.ndim(lam) == 0 else out


def sy_discrete(A: float) -> list[complex]:
    """Eigenvalues (A - 1/2)j, (A - 3/2)j, ... of ``A sech(t)``."""
    if A <= 0:
        raise ValueError("A must be positive")
    count = max(0, math.ceil(A - 0.5))
    return [complex(0.0, A - 0.5 - m) for m in range(count) if A - 0.5 - m > 0]


def klaus_shaw_count(l1_norm: float) -> int:
    """Eigenvalue count floor(1/2 + ||q||_1 / pi - 0) for single-lobe pulses."""
    x = 0.5 + l1_norm / math.pi
    return max(0, math.ceil(x) - 1)


# -- rectangular pulse: q = A on [t1, t2] -----------------------------------

def rect_continuous(A: complex, t1: float, t2: float, lam):
    """Continuous spectrum of the rectangle ``A`` on ``[t1, t2]`` at real lam.

    ``q^ = A* S exp(-2j lam t2) / (j lam S - cos(D L))`` with
    ``L = t2 - t1``, ``D = sqrt(lam^2 + |A|^2)``, ``S = sin(D L)/D``.
    """
    lam = np.asarray(lam, dtype=float)
    A = complex(A)
    L = t2 - t1
    d = np.sqrt(lam * lam + abs(A) ** 2)
    dl = d * L
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(d > 0, np.sin(dl) / np.where(d > 0, d, 1.0), L)
    den = 1j * lam * s - np.cos(dl)
    if np.any(np.abs(den) < 1e-300):
        raise PoleError("rectangle spectrum has a pole on the real axis")
    out = np.conj(A) * s * np.exp(-2j * lam * t2) / den
    return complex(out) if out.ndim == 0 else out


def rect_discrete(A: complex, t1: float, t2: float, grid_points: int = 4000) -> list[complex]:
    """Eigenvalues of the rectangle; they lie on the imaginary axis.

    On ``lam = j eta`` the condition a = 0 reads
    ``D cos(D L) + eta sin(D L) = 0`` with ``D = sqrt(|A|^2 - eta^2)``;
    roots in ``(0, |A|)`` are bracketed on a dense grid and polished by Brent.
    """
    amp = abs(complex(A))
    if amp == 0:
        return []
    L = t2 - t1

    def f(eta):
        d = math.sqrt(max(amp * amp - eta * eta, 0.0))
        return d * math.cos(d * L) + eta * math.sin(d * L)

    etas = np.linspace(0.0, amp, grid_points + 1)[1:-1]
    vals = np.array([f(e) for e in etas])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(brentq(f, etas[i], etas[i + 1], xtol=1e-15, rtol=1e-15))
    return sorted((complex(0.0, r) for r in roots), key=lambda z: -z.imag)


# -- ODE references -----------------------------------------------------------

def _as_callable(q) -> tuple[Callable, float, float]:
    if isinstance(q, Signal):
        t = q.t
        re = CubicSpline(t, q.q.real)
        im = CubicSpline(t, q.q.imag)
        return (lambda s: re(s) + 1j * im(s)), q.grid.t1, q.grid.t_end
    raise TypeError("expected a Signal; pass callables together with t1, t2")


def ode_scattering(q, lam: complex, t1: float | None = None, t2: float | None = None,
                   rtol: float = 1e-11, atol: float = 1e-13) -> tuple[complex, complex]:
    """a(lam), b(lam) by adaptive integration of the normalised linear system.

    ``u1' = q e^{2j lam t} u2``, ``u2' = -q* e^{-2j lam t} u1``, from (1, 0).
    """
    if t1 is None or t2 is None:
        q, t1, t2 = _as_callable(q)

    def rhs(t, u):
        qt = complex(q(t))
        e = np.exp(2j * lam * t)
        return [qt * e * u[1], -np.conj(qt) / e * u[0]]

    sol = solve_ivp(rhs, (t1, t2), np.array([1, 0], dtype=complex), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise ArithmeticError(f"ODE reference failed: {sol.message}")
    return complex(sol.y[0, -1]), complex(sol.y[1, -1])


def ode_continuous_reference(q, lam: float, t1: float | None = None, t2: float | None = None,
                             rtol: float = 1e-11, atol: float = 1e-13) -> complex:
    """q^(lam) from the Riccati equation ``y' = -q e^{2j lam t} y^2 - q* e^{-2j lam t}``.

    ``y = u2/u1`` so ``y(t2) = b/a``.  Falls back to the linear system when
    the Riccati solution blows up (near zeros of a).
    """
    if t1 is None or t2 is None:
        q, t1, t2 = _as_callable(q)

    def rhs(t, y):
        qt = complex(q(t))
        e = np.exp(2j * lam * t)
        return [-qt * e * y[0] ** 2 - np.conj(qt) / e]

    sol = solve_ivp(rhs, (t1, t2), np.array([0j]), method="DOP853", rtol=rtol, atol=atol)
    if sol.success and np.all(np.isfinite(sol.y)) and abs(sol.y[0, -1]) < 1e8:
        return complex(sol.y[0, -1])
    a, b = ode_scattering(q, lam, t1, t2, rtol, atol)
    if abs(a) < 1e-300:
        raise PoleError(f"a({lam}) vanishes")
    return b / a


def ode_a_reference(q, lam: complex, t1: float, t2: float, dq=None,
                    rtol: float = 1e-11, atol: float = 1e-13) -> complex:
    """a(lam) from ``u'' - (q_t/q + 2j lam) u' + |q|^2 u = 0``, u(t1)=1, u'(t1)=0.

    Requires q without zeros on ``[t1, t2]``; ``dq`` defaults to a centred
    difference.
    """
    if dq is None:
        def dq(t, h=1e-5):
            return (complex(q(t + h)) - complex(q(t - h))) / (2 * h)

    def rhs(t, y):
        qt = complex(q(t))
        if abs(qt) < 1e-300:
            raise ZeroDivisionError(f"q vanishes at t={t}")
        return [y[1], (complex(dq(t)) / qt + 2j * lam) * y[1] - abs(qt) ** 2 * y[0]]

    sol = solve_ivp(rhs, (t1, t2), np.array([1, 0], dtype=complex), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise ArithmeticError(f"ODE reference failed: {sol.message}")
    return complex(sol.y[0, -1])
