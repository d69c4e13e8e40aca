"""Matrix eigenvalue formulations of the discrete spectrum.

Three discretisations of the scattering operator are turned into dense
non-Hermitian eigenproblems:

* central finite differences on the periodic grid (eigenvalues are lambda),
* the Ablowitz-Ladik lattice (eigenvalues are ``z = exp(-j lam eps)``),
* a truncated Fourier (spectral) basis (eigenvalues are lambda).

Every solver also returns a large number of spurious eigenvalues near the
real axis, and for the lattice a vertical line far from the origin;
:func:`filter_physical` removes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signal import Signal
from .zs import DiscreteEigenvalue

AL_VARIANTS = ("al_full", "al_simplified", "al_normalized")
MATRIX_KINDS = ("cd", "al", "al-norm", "al-simplified", "spectral")
CD_MERGE_TOL = 2e-2


@dataclass(frozen=True)
class EigenProblem:
    """A dense matrix together with how its eigenvalues map to lambda."""

    matrix: np.ndarray
    domain: str = "lambda"  # or "z"
    eps: float | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _circulant_derivative(n_nodes: int, eps: float) -> np.ndarray:
    D = np.zeros((n_nodes, n_nodes))
    i = np.arange(n_nodes)
    D[i, (i + 1) % n_nodes] = 1.0
    D[i, (i - 1) % n_nodes] = -1.0
    return D / (2 * eps)


def build_cd_matrix(signal: Signal) -> EigenProblem:
    """``j [[D, -diag q], [-diag q*, -D]]`` with the periodic centred difference D."""
    q = np.asarray(signal.q)
    m = len(q)
    D = _circulant_derivative(m, signal.grid.eps)
    A = np.empty((2 * m, 2 * m), dtype=complex)
    A[:m, :m] = D
    A[m:, m:] = -D
    A[:m, m:] = -np.diag(q)
    A[m:, :m] = -np.diag(np.conj(q))
    return EigenProblem(1j * A, "lambda")


def build_al_matrix(signal: Signal, variant: str = "al_full") -> EigenProblem:
    """Ablowitz-Ladik eigenproblem in the z-domain (all shifts cyclic).

    ``al_full``:        z v1[k] = v1[k+1] - Q[k] v2[k],
                        z v2[k] = -Q*[k-1] v1[k] + alpha[k-1] v2[k-1];
    ``al_simplified``:  alpha dropped and Q*[k-1] replaced by Q*[k];
    ``al_normalized``:  the alpha weight moves to the first row,
                        z v1[k] = alpha[k] v1[k+1] - Q[k] v2[k],
                        z v2[k] = -Q*[k-1] v1[k] + v2[k-1];
    with ``Q = q eps`` and ``alpha = 1 + |Q|^2``.
    """
    if variant not in AL_VARIANTS:
        raise ValueError(f"unknown AL variant {variant!r}; choose from {AL_VARIANTS}")
    eps = signal.grid.eps
    Q = np.asarray(signal.q) * eps
    m = len(Q)
    alpha = 1 + np.abs(Q) ** 2
    i = np.arange(m)
    nxt = (i + 1) % m
    prv = (i - 1) % m
    A = np.zeros((2 * m, 2 * m), dtype=complex)
    top_w = alpha if variant == "al_normalized" else np.ones(m)
    bot_w = alpha[prv] if variant == "al_full" else np.ones(m)
    A[i, nxt] = top_w
    A[i, m + i] = -Q
    A[m + i, i] = -np.conj(Q if variant == "al_simplified" else Q[prv])
    A[m + i, m + prv] = bot_w
    return EigenProblem(A, "z", eps)


def fourier_coefficients(signal: Signal, M: int) -> np.ndarray:
    """``gamma_k`` for k = -M..M over the period ``T = T2 - T1``.

    Rectangle-rule Fourier sum of the first n samples against
    ``exp(-j 2 pi k t / T)`` in absolute time.
    """
    grid = signal.grid
    n = grid.n
    if M >= n:
        raise ValueError(f"Fourier order M={M} needs more than M samples (n={n})")
    F = np.fft.fft(np.asarray(signal.q)[:n]) / n
    k = np.arange(-M, M + 1)
    return F[k % n] * np.exp(-2j * np.pi * k * grid.t1 / grid.width)


def default_fourier_order(n: int, cap: int = 256) -> int:
    m = min(cap, n - 1)
    return m - (m % 2)


def build_spectral_matrix(signal: Signal, M: int | None = None) -> EigenProblem:
    """``[[Omega, Gamma], [-Gamma^H, -Omega]]`` on Fourier modes -M/2..M/2.

    Its eigenvalues are lambda.
    """
    if M is None:
        M = default_fourier_order(signal.grid.n)
    if M < 2 or M % 2:
        raise ValueError("Fourier order M must be a positive even integer")
    h = M // 2
    gam = fourier_coefficients(signal, M)  # index k + M
    k = np.arange(-h, h + 1)
    diff = k[:, None] - k[None, :]
    G = np.where(np.abs(diff) <= h, gam[diff + M], 0.0)
    Gamma = -1j * G
    Omega = np.diag(-2 * np.pi / signal.grid.width * k).astype(complex)
    A = np.block([[Omega, Gamma], [-Gamma.conj().T, -Omega]])
    return EigenProblem(A, "lambda")


def all_eigenvalues(m) -> np.ndarray:
    """All eigenvalues of a general complex matrix (LAPACK zgeev via numpy)."""
    A = m.matrix if isinstance(m, EigenProblem) else np.asarray(m, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigenvalue iteration did not converge: {exc}") from None
    bad = np.flatnonzero(~np.isfinite(w))
    if len(bad):
        raise ArithmeticError(f"eigenvalue {bad[0]} did not converge")
    return w


@dataclass(frozen=True)
class FilterPolicy:
    """Rules separating physical from spurious matrix eigenvalues.

    ``im_threshold`` defaults to ``0.02 * max(1, E/4)`` when an energy is
    supplied to :func:`filter_physical`.  ``strip`` bounds Re(lambda); for the
    lattice it defaults to ``|Re lam| < pi / (2 eps)``.  Survivors closer
    than ``merge_tol`` are merged into their mean; central differences on a
    periodic grid return every eigenvalue twice (odd/even decoupling).
    """

    im_threshold: float | None = None
    strip: tuple[float, float] | None = None
    domain: str = "lambda"
    wrap_margin: float = 0.1
    merge_tol: float = 0.0

    def __post_init__(self):
        if self.im_threshold is not None and not self.im_threshold > 0:
            raise ValueError("im_threshold must be positive")
        if self.domain not in ("lambda", "z"):
            raise ValueError("domain must be 'lambda' or 'z'")
        if self.merge_tol < 0:
            raise ValueError("merge_tol must be non-negative")
        if self.strip is not None and not self.strip[0] < self.strip[1]:
            raise ValueError("strip bounds must be increasing")


@dataclass
class FilterResult:
    candidates: list[DiscreteEigenvalue]
    wrap_risk: list[complex] = field(default_factory=list)
    n_input: int = 0
    merged: int = 0

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([c.lam for c in self.candidates], dtype=complex)


def default_threshold(energy: float | None) -> float:
    return 0.02 * max(1.0, (energy or 0.0) / 4.0)


def filter_physical(eigs, policy: FilterPolicy = FilterPolicy(), eps: float | None = None,
                    energy: float | None = None) -> FilterResult:
    """Keep eigenvalues that plausibly belong to the discrete spectrum.

    z-domain values are mapped by ``lam = (j/eps) Log z`` keeping ``|z| > 1``;
    then ``Im lam > im_threshold`` and the optional strip on Re(lambda).
    Results are sorted by decreasing imaginary part.
    """
    eigs = np.asarray(eigs, dtype=complex).ravel()
    n_input = len(eigs)
    strip = policy.strip
    if policy.domain == "z":
        if eps is None:
            raise ValueError("z-domain filtering needs the grid spacing eps")
        eigs = eigs[np.abs(eigs) > 1.0]
        eigs = 1j * np.log(eigs) / eps
        if strip is None:
            half = math.pi / (2 * eps)
            strip = (-half, half)
    thr = policy.im_threshold if policy.im_threshold is not None else default_threshold(energy)
    keep = eigs[eigs.imag > thr]
    if strip is not None:
        keep = keep[(keep.real > strip[0]) & (keep.real < strip[1])]
    keep = keep[np.lexsort((keep.real, -keep.imag))]
    merged = 0
    if policy.merge_tol > 0 and len(keep) > 1:
        groups: list[list[complex]] = []
        for z in keep:
            for g in groups:
                if abs(z - g[0]) < policy.merge_tol:
                    g.append(z)
                    break
            else:
                groups.append([z])
        merged = len(keep) - len(groups)
        keep = np.array([np.mean(g) for g in groups])
        keep = keep[np.lexsort((keep.real, -keep.imag))]
    wrap = []
    if policy.domain == "z":
        limit = math.pi / eps * (1 - policy.wrap_margin)
        wrap = [complex(z) for z in keep if abs(z.real) >= limit]
    cands = [DiscreteEigenvalue(complex(z), None, float("nan")) for z in keep]
    return FilterResult(cands, wrap, n_input, merged)


def matrix_eigenvalues(signal: Signal, kind: str, policy: FilterPolicy | None = None,
                       energy: float | None = None, fourier_order: int | None = None) -> FilterResult:
    """Build, solve and filter one of ``cd``, ``al``, ``al-norm``, ``al-simplified``, ``spectral``."""
    kind = kind.replace("-", "_")
    if kind == "cd":
        prob = build_cd_matrix(signal)
    elif kind in ("al", "al_full"):
        prob = build_al_matrix(signal, "al_full")
    elif kind in ("al_norm", "al_normalized"):
        prob = build_al_matrix(signal, "al_normalized")
    elif kind in ("al_simplified",):
        prob = build_al_matrix(signal, "al_simplified")
    elif kind == "spectral":
        prob = build_spectral_matrix(signal, fourier_order)
    else:
        raise ValueError(f"unknown matrix kind {kind!r}")
    if policy is None:
        policy = FilterPolicy(domain=prob.domain, merge_tol=CD_MERGE_TOL if kind == "cd" else 0.0)
    elif policy.domain != prob.domain:
        raise ValueError(f"filter domain {policy.domain!r} does not match builder ({prob.domain!r})")
    w = all_eigenvalues(prob)
    return filter_physical(w, policy, eps=signal.grid.eps, energy=energy)


def write_matrix_dump(prob: EigenProblem, path) -> None:
    """Text dump: the dimension d, then d^2 rows ``re,im`` in row-major order."""
    A = prob.matrix
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]}\n")
        for v in A.ravel():
            fh.write(f"{v.real:.17g},{v.imag:.17g}\n")


def read_matrix_dump(path) -> np.ndarray:
    with open(path) as fh:
        d = int(fh.readline())
        vals = np.loadtxt(fh, delimiter=",", ndmin=2)
    if vals.shape != (d * d, 2):
        raise ValueError(f"{path}: expected {d * d} rows")
    return (vals[:, 0] + 1j * vals[:, 1]).reshape(d, d)
