"""One-step transfer updates for the seven integrators and the propagation driver.

Every method is written as a linear one-step map ``s[k+1] = A[k] s[k]`` on a
state vector (the eigenvector ``v`` for most methods, the stacked pair
``(v[k], v[k-1])`` for the two-step central scheme).  Differentiating in
lambda gives ``s'[k+1] = A'[k] s[k] + A[k] s'[k]``, so the augmented
iteration is the same chain of products carried with the product rule.

Two equivalent coordinate systems are supported:

``v``
    the Jost eigenvector itself; a and b are read off at ``T2``.
``u``
    the normalised variables ``u1 = v1 exp(j lam t)``, ``u2 = v2 exp(-j lam t)``
    which start at ``(1, 0)`` and end at ``(a, b)``.  The step matrices are
    the v-form ones conjugated by these diagonal phases.  Layer-peeling is
    natively of this form.

The chain of step matrices is composed by pairwise (tree) multiplication,
vectorised over a batch of lambda values.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from math import factorial

import numpy as np

from .signal import Signal, TimeGrid
from .zs import JostState, ScatteringCoefficients

# above this value of Im(lam) * (T2 - T1) the normalised u-form is used
UFORM_THRESHOLD = 30.0
_CHUNK_ELEMENTS = 1 << 17
_J = np.array([[-1j, 0], [0, 1j]])


class Method(str, Enum):
    EULER = "euler"
    CENTRAL = "central"
    RK4 = "rk4"
    CRANK_NICOLSON = "crank_nicolson"
    LAYER_PEELING = "layer_peeling"
    AL1 = "al1"
    AL2 = "al2"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        key = {"cn": "crank_nicolson", "lp": "layer_peeling", "forward": "euler",
               "central_difference": "central", "ablowitz_ladik": "al1"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown method {name!r}; choose from "
                             f"{', '.join(m.value for m in cls)}") from None


ALL_METHODS = tuple(Method)


# -- small helpers -----------------------------------------------------------

def _mat2(a11, a12, a21, a22):
    a11, a12, a21, a22 = np.broadcast_arrays(*(np.asarray(x, dtype=complex)
                                               for x in (a11, a12, a21, a22)))
    out = np.empty(a11.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a11
    out[..., 0, 1] = a12
    out[..., 1, 0] = a21
    out[..., 1, 1] = a22
    return out


def _zs_matrix(q, lam):
    """P = [[-j lam, q], [-q*, j lam]]."""
    q = np.asarray(q, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    return _mat2(-1j * lam, q, -np.conj(q), 1j * lam)


_C_SERIES = np.array([(-1) ** m / factorial(2 * m) for m in range(7)])
_S_SERIES = np.array([(-1) ** m / factorial(2 * m + 1) for m in range(7)])
_G_SERIES = np.array([(-1) ** m * 2 * m / factorial(2 * m + 1) for m in range(1, 8)])


def _cs_functions(w, eps):
    """cos(D eps), sin(D eps)/D and (eps cos(D eps) - sin(D eps)/D)/D^2, D^2 = w.

    All three are entire in ``w``; a truncated series is used for |D eps| < 0.1
    where the closed forms lose accuracy.
    """
    w = np.asarray(w, dtype=complex)
    x = w * eps * eps
    small = np.abs(x) < 1e-2
    c = np.empty_like(w)
    s = np.empty_like(w)
    g = np.empty_like(w)
    if np.any(small):
        xs = x[small]
        c[small] = np.polynomial.polynomial.polyval(xs, _C_SERIES)
        s[small] = eps * np.polynomial.polynomial.polyval(xs, _S_SERIES)
        g[small] = eps ** 3 * np.polynomial.polynomial.polyval(xs, _G_SERIES)
    big = ~small
    if np.any(big):
        d = np.sqrt(w[big])
        cb = np.cos(d * eps)
        sb = np.sin(d * eps) / d
        c[big] = cb
        s[big] = sb
        g[big] = (eps * cb - sb) / w[big]
    return c, s, g


def cubic_midpoints(q: np.ndarray) -> np.ndarray:
    """Fourth-order accurate values of q at the interval midpoints (n values)."""
    q = np.asarray(q, dtype=complex)
    n = len(q) - 1
    if n < 3:
        return 0.5 * (q[:-1] + q[1:])
    mid = np.empty(n, dtype=complex)
    mid[1:n - 1] = (-q[:n - 2] + 9 * q[1:n - 1] + 9 * q[2:n] - q[3:n + 1]) / 16
    mid[0] = (5 * q[0] + 15 * q[1] - 5 * q[2] + q[3]) / 16
    mid[n - 1] = (q[n - 3] - 5 * q[n - 2] + 15 * q[n - 1] + 5 * q[n]) / 16
    return mid


# -- one-step matrices -------------------------------------------------------

def transfer_matrix(method, q_k, q_next, lam, eps, q_mid=None, derivative=False, normalize=False):
    """v-form one-step matrix ``A`` (and ``dA/dlam``) for one or many steps.

    ``q_k``, ``q_next``, ``q_mid`` and ``lam`` broadcast against each other.
    The central scheme returns its 4x4 two-step companion matrix acting on
    ``(v[k], v[k-1])``.  For layer-peeling the matrix is the exact exponential
    of the piecewise-constant step (phase factors dropped).  ``normalize``
    (Euler only) divides the step by the square root of its determinant
    ``1 + eps^2 (lam^2 + |q|^2)``, which pulls its eigenvalues
    ``1 +- j eps sqrt(lam^2 + |q|^2)`` back onto the unit circle for real lam.
    """
    method = Method.parse(method)
    if normalize and method is not Method.EULER:
        raise ValueError("determinant normalisation is only offered for the euler method")
    q_k = np.asarray(q_k, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    dA = None

    if method is Method.EULER:
        P = _zs_matrix(q_k, lam)
        A = np.eye(2) + eps * P
        if derivative:
            dA = np.broadcast_to(eps * _J, A.shape).copy()
        if normalize:
            det = 1 + eps * eps * (lam * lam + np.abs(q_k) ** 2)
            r = (1 / np.sqrt(det))[..., None, None]
            if derivative:
                ddet = (2 * eps * eps * lam)[..., None, None]
                dA = dA * r - A * (0.5 * r ** 3 * ddet)
            A = A * r

    elif method is Method.CENTRAL:
        P = _zs_matrix(q_k, lam)
        shape = P.shape[:-2]
        A = np.zeros(shape + (4, 4), dtype=complex)
        A[..., :2, :2] = 2 * eps * P
        A[..., 0, 2] = A[..., 1, 3] = 1.0
        A[..., 2, 0] = A[..., 3, 1] = 1.0
        if derivative:
            dA = np.zeros_like(A)
            dA[..., :2, :2] = 2 * eps * _J

    elif method is Method.CRANK_NICOLSON:
        P0 = _zs_matrix(q_k, lam)
        P1 = _zs_matrix(q_next, lam)
        L = np.eye(2) - 0.5 * eps * P1
        R = np.eye(2) + 0.5 * eps * P0
        det = L[..., 0, 0] * L[..., 1, 1] - L[..., 0, 1] * L[..., 1, 0]
        if np.any(np.abs(det) < 1e-14):
            raise ZeroDivisionError("Crank-Nicolson step matrix is singular")
        Linv = _mat2(L[..., 1, 1], -L[..., 0, 1], -L[..., 1, 0], L[..., 0, 0]) / det[..., None, None]
        A = Linv @ R
        if derivative:
            # d/dlam of L^{-1} R with L' = -eps/2 J, R' = eps/2 J
            dA = 0.5 * eps * (Linv @ (_J @ (np.eye(2) + A)))

    elif method is Method.RK4:
        if q_mid is None:
            q_mid = 0.5 * (q_k + np.asarray(q_next, dtype=complex))
        P0 = _zs_matrix(q_k, lam)
        Pm = _zs_matrix(q_mid, lam)
        P1 = _zs_matrix(q_next, lam)
        I = np.eye(2)
        K1 = P0
        K2 = Pm @ (I + 0.5 * eps * K1)
        K3 = Pm @ (I + 0.5 * eps * K2)
        K4 = P1 @ (I + eps * K3)
        A = I + eps / 6 * (K1 + 2 * K2 + 2 * K3 + K4)
        if derivative:
            dK1 = np.broadcast_to(_J, K1.shape)
            dK2 = _J @ (I + 0.5 * eps * K1) + 0.5 * eps * (Pm @ dK1)
            dK3 = _J @ (I + 0.5 * eps * K2) + 0.5 * eps * (Pm @ dK2)
            dK4 = _J @ (I + eps * K3) + eps * (P1 @ dK3)
            dA = eps / 6 * (dK1 + 2 * dK2 + 2 * dK3 + dK4)

    elif method is Method.LAYER_PEELING:
        q2 = np.abs(q_k) ** 2
        c, s, g = _cs_functions(lam * lam + q2, eps)
        qs = q_k * s
        A = _mat2(c - 1j * lam * s, qs, -np.conj(q_k) * s, c + 1j * lam * s)
        if derivative:
            dx = -eps * lam * s - 1j * s - 1j * lam * lam * g
            dxb = -eps * lam * s + 1j * s + 1j * lam * lam * g
            dy = q_k * lam * g
            dA = _mat2(dx, dy, -np.conj(q_k) * lam * g, dxb)

    elif method in (Method.AL1, Method.AL2):
        z = np.exp(-1j * lam * eps)
        Q = q_k * eps
        A = _mat2(z, Q, -np.conj(Q), 1 / z)
        if derivative:
            dA = _mat2(-1j * eps * z, 0, 0, 1j * eps / z)
        if method is Method.AL2:
            norm = 1 / np.sqrt(1 + np.abs(Q) ** 2)
            norm = np.asarray(norm)[..., None, None]
            A = A * norm
            if derivative:
                dA = dA * norm
    else:  # pragma: no cover
        raise ValueError(method)

    if derivative:
        dA = np.broadcast_to(dA, A.shape)
        return A, dA
    return A, None


def _phase_exponents(method: Method, t_left, t_right):
    """Per-component exponents (sign * time) for the v -> u conjugation."""
    if method is Method.CENTRAL:
        # state (v[k], v[k-1]) -> (v[k+1], v[k])
        tl = (t_left, -t_left, t_right, -t_right)
        return tl
    return (t_left, -t_left)


def to_uform(method, A, dA, lam, t_next, t_k, t_prev=None):
    """Conjugate v-form step matrices by the diagonal phases exp(+-j lam t)."""
    method = Method.parse(method)
    lam = np.asarray(lam, dtype=complex)
    if method is Method.CENTRAL:
        left = (t_next, -t_next, t_k, -t_k)
        right = (t_k, -t_k, t_prev, -t_prev)
    else:
        left = (t_next, -t_next)
        right = (t_k, -t_k)
    d = len(left)
    U = np.empty(np.broadcast_shapes(A.shape, lam.shape + (d, d)), dtype=complex)
    dU = None if dA is None else np.empty_like(U)
    for i in range(d):
        for k in range(d):
            expo = np.asarray(left[i]) - np.asarray(right[k])
            expo = np.broadcast_to(expo, np.broadcast_shapes(np.shape(expo), lam.shape))
            ph = np.exp(1j * lam * expo)
            U[..., i, k] = A[..., i, k] * ph
            if dA is not None:
                dU[..., i, k] = (dA[..., i, k] + 1j * expo * A[..., i, k]) * ph
    return U, dU


# -- the chain product -------------------------------------------------------

def _chain(M, dM=None):
    """Ordered product ``M[n-1] @ ... @ M[0]`` (and its derivative)."""
    leftovers = []
    while M.shape[0] > 1:
        if M.shape[0] % 2:
            leftovers.append((M[-1], None if dM is None else dM[-1]))
            M = M[:-1]
            dM = None if dM is None else dM[:-1]
        lo, hi = M[0::2], M[1::2]
        if dM is not None:
            dM = dM[1::2] @ lo + hi @ dM[0::2]
        M = hi @ lo
    P = M[0]
    dP = None if dM is None else dM[0]
    for R, dR in reversed(leftovers):
        if dP is not None:
            dP = dR @ P + R @ dP
        P = R @ P
    return P, dP


@dataclass
class Coefficients:
    """Scattering data for a batch of lambda values (arrays of equal shape)."""

    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_prime: np.ndarray | None = None
    b_prime: np.ndarray | None = None

    def at(self, i) -> ScatteringCoefficients:
        return ScatteringCoefficients(
            complex(self.lam[i]), complex(self.a[i]), complex(self.b[i]),
            None if self.a_prime is None else complex(self.a_prime[i]),
            None if self.b_prime is None else complex(self.b_prime[i]))


def _propagate_block(method, signal, lam, derivative, uform, telescoped, normalize=False):
    """Propagate one batch of lambda values (1-D array) through the signal."""
    grid = signal.grid
    q = np.asarray(signal.q)
    n, eps = grid.n, grid.eps
    t = grid.t
    lam_b = lam[None, :]
    qk = q[:-1, None]
    qn = q[1:, None]
    q_mid = cubic_midpoints(q)[:, None] if method is Method.RK4 else None

    if method is Method.LAYER_PEELING and not telescoped:
        uform = True

    if method is Method.CENTRAL:
        # bootstrap v[1] with one forward step, then leapfrog k = 1..n-1
        v0 = np.zeros(lam.shape + (2,), dtype=complex)
        e0 = np.exp(-1j * lam * t[0])
        v0[:, 0] = e0
        E, dE = transfer_matrix(Method.EULER, q[0], None, lam, eps, derivative=derivative)
        v1 = np.einsum("mij,mj->mi", E, v0)
        s0 = np.concatenate([v1, v0], axis=-1)
        ds0 = None
        if derivative:
            dv0 = np.zeros_like(v0)
            dv0[:, 0] = -1j * t[0] * e0
            dv1 = np.einsum("mij,mj->mi", dE, v0) + np.einsum("mij,mj->mi", E, dv0)
            ds0 = np.concatenate([dv1, dv0], axis=-1)
        if n == 1:
            sN, dsN = s0, ds0
        else:
            A, dA = transfer_matrix(method, qk[1:], None, lam_b, eps, derivative=derivative)
            if uform:
                A, dA = to_uform(method, A, dA, lam_b, t[2:, None], t[1:-1, None], t[:-2, None])
                expo = np.array([t[1], -t[1], t[0], -t[0]])
                ph = np.exp(1j * lam[:, None] * expo)
                if derivative:
                    ds0 = (ds0 + 1j * expo * s0) * ph
                s0 = s0 * ph
            P, dP = _chain(A, dA)
            sN = np.einsum("mij,mj->mi", P, s0)
            dsN = None
            if derivative:
                dsN = np.einsum("mij,mj->mi", dP, s0) + np.einsum("mij,mj->mi", P, ds0)
        state, dstate = sN[:, :2], None if dsN is None else dsN[:, :2]
    else:
        A, dA = transfer_matrix(method, qk, qn, lam_b, eps, q_mid=q_mid, derivative=derivative,
                                normalize=normalize)
        if uform:
            A, dA = to_uform(method, A, dA, lam_b, t[1:, None], t[:-1, None])
        P, dP = _chain(A, dA)
        if uform:
            state = P[:, :, 0]
            dstate = None if dP is None else dP[:, :, 0]
        else:
            e0 = np.exp(-1j * lam * t[0])
            state = P[:, :, 0] * e0[:, None]
            dstate = None
            if derivative:
                dstate = (dP[:, :, 0] - 1j * t[0] * P[:, :, 0]) * e0[:, None]

    if uform:
        a, b = state[:, 0], state[:, 1]
        if derivative:
            return a, b, dstate[:, 0], dstate[:, 1]
        return a, b, None, None
    t2 = grid.t_end
    ep = np.exp(1j * lam * t2)
    em = np.exp(-1j * lam * t2)
    a = state[:, 0] * ep
    b = state[:, 1] * em
    if derivative:
        da = (dstate[:, 0] + 1j * t2 * state[:, 0]) * ep
        db = (dstate[:, 1] - 1j * t2 * state[:, 1]) * em
        return a, b, da, db
    return a, b, None, None


def propagate_many(method, signal: Signal, lams, with_derivative: bool = False,
                   form: str = "auto", telescoped: bool = False, normalize: bool = False) -> Coefficients:
    """Scattering coefficients for every lambda in ``lams``.

    ``form`` is ``"v"``, ``"u"`` or ``"auto"`` (u-form where
    ``Im(lam) * (T2 - T1)`` exceeds ``UFORM_THRESHOLD``).  ``telescoped``
    only affects layer-peeling: the per-step phase factors are dropped and the
    result is rescaled once at the end.  ``normalize`` selects the
    determinant-normalised Euler step.
    """
    method = Method.parse(method)
    if normalize and method is not Method.EULER:
        raise ValueError("determinant normalisation is only offered for the euler method")
    if form not in ("auto", "u", "v"):
        raise ValueError("form must be 'auto', 'u' or 'v'")
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    shape = lams.shape
    flat = lams.ravel()
    out = [np.empty(flat.shape, dtype=complex) for _ in range(4 if with_derivative else 2)]
    if form == "auto":
        use_u = flat.imag * signal.grid.width > UFORM_THRESHOLD
    else:
        use_u = np.full(flat.shape, form == "u")
    chunk = max(1, _CHUNK_ELEMENTS // signal.grid.n)

    for flag in (False, True):
        idx = np.flatnonzero(use_u == flag)
        for start in range(0, len(idx), chunk):
            sel = idx[start:start + chunk]
            # overflow shows up as inf/nan and is reported below
            with np.errstate(over="ignore", invalid="ignore"):
                res = _propagate_block(method, signal, flat[sel], with_derivative, flag, telescoped,
                                       normalize)
            for arr, val in zip(out, res):
                arr[sel] = val
    if not all(np.all(np.isfinite(arr)) for arr in out):
        bad = np.flatnonzero(~np.isfinite(out[0]))
        raise FloatingPointError(
            f"non-finite scattering data at lambda={flat[bad[:3]] if len(bad) else '?'}; "
            "Im(lambda) * (T2 - T1) is too large for double precision")
    res = [arr.reshape(shape) for arr in out]
    if with_derivative:
        return Coefficients(lams, res[0], res[1], res[2], res[3])
    return Coefficients(lams, res[0], res[1])


def propagate(method, signal: Signal, lam: complex, with_derivative: bool = False,
              form: str = "auto", telescoped: bool = False, normalize: bool = False) -> ScatteringCoefficients:
    """Scattering coefficients a, b (and a', b') of ``signal`` at one lambda."""
    c = propagate_many(method, signal, [lam], with_derivative, form, telescoped, normalize)
    return c.at(0)


# -- single-step interface ---------------------------------------------------

@dataclass(frozen=True)
class TransferState:
    """State after ``k`` steps.

    ``vec`` is the eigenvector ``v`` (v-form), the pair ``(a, b)`` for
    layer-peeling, or ``(v[k], v[k-1])`` stacked for the central scheme.
    """

    k: int
    vec: np.ndarray
    dvec: np.ndarray | None = None

    @classmethod
    def initial(cls, method, lam: complex, grid: TimeGrid, derivative: bool = False):
        method = Method.parse(method)
        if method is Method.LAYER_PEELING:
            return cls(0, np.array([1, 0], dtype=complex),
                       np.zeros(2, dtype=complex) if derivative else None)
        j = JostState.initial(lam, grid.t1, derivative)
        vec = np.array([j.v1, j.v2])
        dvec = np.array([j.dv1, j.dv2]) if derivative else None
        if method is Method.CENTRAL:
            vec = np.concatenate([vec, np.zeros(2)])
            dvec = None if dvec is None else np.concatenate([dvec, np.zeros(2)])
        return cls(0, vec, dvec)

    @property
    def v(self) -> np.ndarray:
        return self.vec[:2]

    @property
    def dv(self) -> np.ndarray | None:
        return None if self.dvec is None else self.dvec[:2]


def _single_step(method, state, q_k, q_next, lam, grid, k, q_mid, derivative):
    method = Method.parse(method)
    if not 0 <= k < grid.n or state.k != k:
        raise ValueError(f"step index {k} does not follow state at k={state.k}")
    eps = grid.eps
    t_k = grid.t1 + k * eps
    t_next = grid.t1 + (k + 1) * eps
    if derivative and state.dvec is None:
        raise ValueError("state carries no derivative")

    if method is Method.CENTRAL and k == 0:
        E, dE = transfer_matrix(Method.EULER, q_k, q_next, lam, eps, derivative=derivative)
        v0 = state.vec[:2]
        v1 = E @ v0
        vec = np.concatenate([v1, v0])
        dvec = None
        if derivative:
            dv0 = state.dvec[:2]
            dvec = np.concatenate([dE @ v0 + E @ dv0, dv0])
        return TransferState(1, vec, dvec)

    A, dA = transfer_matrix(method, q_k, q_next, lam, eps, q_mid=q_mid, derivative=derivative)
    if method is Method.LAYER_PEELING:
        A, dA = to_uform(method, A, dA, lam, t_next, t_k)
    vec = A @ state.vec
    dvec = None
    if derivative:
        dvec = dA @ state.vec + A @ state.dvec
    return TransferState(k + 1, vec, dvec)


def step(method, state: TransferState, q_k, q_next, lam, grid: TimeGrid, k: int,
         q_mid=None) -> TransferState:
    """Advance ``state`` from ``t[k]`` to ``t[k+1]``.

    RK4 takes the midpoint sample from ``q_mid`` when given and otherwise
    interpolates linearly between ``q_k`` and ``q_next``.
    """
    return _single_step(method, state, q_k, q_next, lam, grid, k, q_mid, False)


def step_aug(method, state: TransferState, q_k, q_next, lam, grid: TimeGrid, k: int,
             q_mid=None) -> TransferState:
    """As :func:`step`, also carrying the lambda-derivative of the state."""
    return _single_step(method, state, q_k, q_next, lam, grid, k, q_mid, True)


def coefficients_from_state(method, state: TransferState, grid: TimeGrid, lam) -> ScatteringCoefficients:
    from .zs import coefficients_from_terminal
    method = Method.parse(method)
    if state.k != grid.n:
        raise ValueError("state has not reached t[n]")
    if method is Method.LAYER_PEELING:
        a, b = state.vec[:2]
        if state.dvec is None:
            return ScatteringCoefficients(lam, a, b)
        return ScatteringCoefficients(lam, a, b, state.dvec[0], state.dvec[1])
    v = state.vec[:2]
    if state.dvec is None:
        j = JostState(v[0], v[1])
    else:
        j = JostState(v[0], v[1], state.dvec[0], state.dvec[1])
    return coefficients_from_terminal(j, grid, lam)


# -- two-sided evaluation of b at an eigenvalue -------------------------------

def _inv2(A):
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return _mat2(A[..., 1, 1], -A[..., 0, 1], -A[..., 1, 0], A[..., 0, 0]) / det[..., None, None]


def bidirectional_b(method, signal: Signal, lam: complex, split: int | None = None) -> complex:
    """b(lam) at a discrete eigenvalue from a forward and a backward sweep.

    Forward propagation alone amplifies rounding errors by about
    ``exp(2 Im(lam) (T2 - T1))`` in b.  Here the left Jost solution is carried
    from T1 to ``t[split]`` and the right one, ``(0, exp(j lam t))`` at T2,
    backwards to the same node; at an eigenvalue the two are proportional
    and b is the least-squares ratio.  ``split`` defaults to the node of
    largest |q|.
    """
    method = Method.parse(method)
    lam = complex(lam)
    grid = signal.grid
    q = np.asarray(signal.q)
    n, eps, t = grid.n, grid.eps, grid.t
    m = int(np.argmax(np.abs(q))) if split is None else int(split)
    m = min(max(m, 1), n - 1)

    if method is Method.CENTRAL:
        P = _zs_matrix(q[:-1], lam)
        v0 = np.array([np.exp(-1j * lam * t[0]), 0j])
        E, _ = transfer_matrix(Method.EULER, q[0], None, lam, eps)
        s = np.concatenate([E @ v0, v0])
        C, _ = transfer_matrix(method, q[1:m], None, lam, eps)
        if m > 1:
            s = _chain(C)[0] @ s
        # leapfrog inverse: (v[k+1], v[k]) -> (v[k], v[k-1])
        Ci = np.zeros((n - m, 4, 4), dtype=complex)
        Ci[:, 0, 2] = Ci[:, 1, 3] = Ci[:, 2, 0] = Ci[:, 3, 1] = 1.0
        Ci[:, 2:, 2:] = -2 * eps * P[m:][::-1]
        r = np.array([0j, np.exp(1j * lam * t[n]), 0j, np.exp(1j * lam * t[n - 1])])
        r = _chain(Ci)[0] @ r
        left, right = s, r
    else:
        q_mid = cubic_midpoints(q) if method is Method.RK4 else None
        A, _ = transfer_matrix(method, q[:-1], q[1:], lam, eps, q_mid=q_mid)
        left = _chain(A[:m])[0] @ np.array([np.exp(-1j * lam * t[0]), 0j])
        inv = _inv2(A[m:])[::-1]
        right = _chain(inv)[0] @ np.array([0j, np.exp(1j * lam * t[n])])
    den = np.vdot(right, right)
    if not (np.isfinite(den) and np.all(np.isfinite(left))) or den == 0:
        raise FloatingPointError(f"two-sided sweep overflowed at lambda={lam}")
    return complex(np.vdot(right, left) / den)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("NFT_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1
