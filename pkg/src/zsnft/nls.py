"""Split-step Fourier propagation of ``j q_z = q_tt + 2 |q|^2 q``.

In this normalisation ``sech(t) exp(-j z)`` is an exact solution, the
discrete eigenvalues are constants of motion and the continuous spectrum
evolves by the all-pass multiplier ``exp(-4j lam^2 z)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .signal import Signal, make_grid

LEAKAGE_TOLERANCE = 1e-6
SPEED_OF_LIGHT = 299792458.0


class LeakageWarning(UserWarning):
    """Energy reached the absorbing edge of the padded window."""


@dataclass(frozen=True)
class PropagationPlan:
    z: float
    steps: int = 4096
    padding: float = 2.0

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError("distance must be finite")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError("steps must be a positive integer")
        if not self.padding >= 1:
            raise ValueError("padding must be >= 1")


@dataclass(frozen=True)
class PropagationResult:
    signal: Signal          # cut back to the input grid
    padded: Signal          # full padded window
    leaked: float           # fraction of energy absorbed at the window edge


def _taper(n_total: int, lo: int, hi: int) -> np.ndarray:
    """1 on [lo, hi], raised-cosine roll-off over the outer half of each pad."""
    mask = np.ones(n_total)
    left = lo // 2
    if left > 0:
        x = np.arange(left) / left
        mask[:left] = 0.5 - 0.5 * np.cos(np.pi * x)
    right = (n_total - 1 - hi) // 2
    if right > 0:
        x = np.arange(right)[::-1] / right
        mask[n_total - right:] = 0.5 - 0.5 * np.cos(np.pi * x)
    return mask


def ssf_propagate(signal: Signal, plan: PropagationPlan) -> PropagationResult:
    """Strang-split propagation over ``plan.z`` in ``plan.steps`` steps.

    Half nonlinear rotation ``exp(-2j |q|^2 dz/2)``, full linear step
    ``exp(j w^2 dz)`` in Fourier space, half nonlinear rotation.  The signal
    is embedded in a zero-padded periodic window; a raised-cosine taper on
    the outer half of the pad absorbs radiation that would otherwise wrap.
    """
    grid = signal.grid
    n = grid.n
    eps = grid.eps
    n_total = max(n, int(round(plan.padding * n)))
    n_total += n_total % 2
    offset = (n_total - n) // 2
    q = np.zeros(n_total, dtype=complex)
    q[offset:offset + n + 1 if offset + n + 1 <= n_total else n_total] = \
        signal.q[: min(n + 1, n_total - offset)]
    if plan.z == 0:
        full = np.concatenate([q, q[:1]])
        padded = Signal(make_grid(grid.t1 - offset * eps, grid.t1 + (n_total - offset) * eps, n_total), full)
        return PropagationResult(signal, padded, 0.0)

    mask = _taper(n_total, offset, offset + n) if offset > 0 else None
    dz = plan.z / plan.steps
    omega = 2 * np.pi * np.fft.fftfreq(n_total, eps)
    lin = np.exp(1j * omega ** 2 * dz)
    e0 = np.sum(np.abs(q) ** 2)
    absorbed = 0.0

    q = q * np.exp(-1j * np.abs(q) ** 2 * dz)  # first half step
    for s in range(plan.steps):
        q = np.fft.ifft(lin * np.fft.fft(q))
        if s < plan.steps - 1:
            q = q * np.exp(-2j * np.abs(q) ** 2 * dz)
        else:
            q = q * np.exp(-1j * np.abs(q) ** 2 * dz)
        if mask is not None:
            before = np.sum(np.abs(q) ** 2)
            q = q * mask
            absorbed += before - np.sum(np.abs(q) ** 2)

    leaked = absorbed / e0 if e0 > 0 else 0.0
    if leaked > LEAKAGE_TOLERANCE:
        warnings.warn(f"{leaked:.2e} of the energy reached the window edge; increase padding",
                      LeakageWarning, stacklevel=2)
    full = np.concatenate([q, q[:1]])
    pgrid = make_grid(grid.t1 - offset * eps, grid.t1 + (n_total - offset) * eps, n_total)
    padded = Signal(pgrid, full)
    return PropagationResult(Signal(grid, q[offset:offset + n + 1] if offset > 0 else full),
                             padded, float(leaked))


def expected_continuous_evolution(qhat0, lam, z: float):
    """Continuous spectrum after distance z: ``qhat0 * exp(-4j lam^2 z)``."""
    lam = np.asarray(lam)
    out = np.asarray(qhat0) * np.exp(-4j * lam ** 2 * z)
    return complex(out) if out.ndim == 0 else out


def fiber_units(t0_ps: float, dispersion: float = 17.0, gamma: float = 1.27,
                wavelength_nm: float = 1550.0) -> dict:
    """Physical scales behind the normalised equation for a given time unit.

    ``dispersion`` in ps/(nm km), ``gamma`` in 1/(W km).  Returns the group
    velocity dispersion (ps^2/km), the length of one normalised distance
    unit (km) and the power of unit amplitude (W).
    """
    if t0_ps <= 0:
        raise ValueError("time unit must be positive")
    lam_m = wavelength_nm * 1e-9
    beta2 = -dispersion * 1e-6 * lam_m ** 2 / (2 * math.pi * SPEED_OF_LIGHT)  # s^2/m
    beta2_ps2_km = beta2 * 1e24 * 1e3
    length_km = 2 * (t0_ps ** 2) / abs(beta2_ps2_km)
    power_w = 2 / (gamma * length_km)
    return {"beta2_ps2_per_km": beta2_ps2_km, "length_km": length_km, "power_w": power_w,
            "t0_ps": t0_ps}
