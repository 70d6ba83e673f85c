"""Symmetric eigendecomposition, gap statistics, interlacing and the minor identity.

Eigenvalues are always reported in descending order (λ_1 ≥ … ≥ λ_n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ensembles import principal_minor

DEFAULT_TOL_ABS = 0.0
DEFAULT_TOL_SCALE = 1e-10
DEGENERATE_CORNER = 1e-12


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    backward_error: float


def _as_finite_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def eigen_sym(M, want_vectors: bool = False) -> Spectrum:
    """All eigenvalues (and optionally orthonormal eigenvectors) of a symmetric matrix.

    The upper triangle is authoritative. Without vectors the backward error
    cannot be measured and is reported as NaN.
    """
    M = _as_finite_square(M)
    if not want_vectors:
        w = np.linalg.eigvalsh(M, UPLO="U")[::-1].copy()
        return Spectrum(w, None, math.nan)
    w, V = np.linalg.eigh(M, UPLO="U")
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    upper = np.triu(M) + np.triu(M, 1).T
    resid = np.linalg.norm(upper @ V - V * w, axis=0)
    return Spectrum(w, V, float(resid.max(initial=0.0)))


def operator_norm(M) -> float:
    """max(|λ_1|, |λ_n|)."""
    w = eigen_sym(M).eigenvalues
    return float(max(abs(w[0]), abs(w[-1]))) if w.size else 0.0


@dataclass(frozen=True)
class GapReport:
    eigenvalues: np.ndarray
    gaps: np.ndarray
    delta_min: float
    argmin: int
    clusters: list[tuple[int, int]]
    simple: bool
    tol_abs: float
    tol_scale: float
    tol: float

    @property
    def cluster_sizes(self) -> list[int]:
        return [hi - lo + 1 for lo, hi in self.clusters]

    @property
    def max_cluster(self) -> int:
        return max(self.cluster_sizes, default=0)

    def cluster_of(self, index: int) -> tuple[int, int]:
        for lo, hi in self.clusters:
            if lo <= index <= hi:
                return lo, hi
        raise IndexError(index)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "delta_min": None if math.isinf(self.delta_min) else self.delta_min,
            "simple": self.simple,
            "clusters": [[lo, hi] for lo, hi in self.clusters],
        }


def gap_report(s, tol_abs: float = DEFAULT_TOL_ABS,
               tol_scale: float = DEFAULT_TOL_SCALE) -> GapReport:
    """Consecutive gaps and multiplicity clusters of a descending spectrum.

    Neighbours are chained into one cluster when their gap is at most
    ``tol_abs + tol_scale * max(1, |λ_1|, |λ_n|)``.
    """
    if tol_abs < 0 or tol_scale < 0:
        raise ValueError("tolerances must be nonnegative")
    lam = np.asarray(s.eigenvalues if isinstance(s, Spectrum) else s, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("need a nonempty 1-d spectrum")
    gaps = lam[:-1] - lam[1:]
    if np.any(gaps < 0):
        raise ValueError("spectrum must be sorted in descending order")
    tol = tol_abs + tol_scale * max(1.0, abs(lam[0]), abs(lam[-1]))
    clusters = []
    lo = 0
    for i, g in enumerate(gaps):
        if g > tol:
            clusters.append((lo, i))
            lo = i + 1
    clusters.append((lo, lam.size - 1))
    if gaps.size:
        k = int(np.argmin(gaps))
        dmin = float(gaps[k])
    else:
        k, dmin = -1, math.inf
    return GapReport(lam, gaps, dmin, k, clusters,
                     all(lo == hi for lo, hi in clusters), tol_abs, tol_scale, tol)


def null_multiplicity(report: GapReport) -> int:
    """Number of eigenvalues within the report's tolerance of zero."""
    return int(np.count_nonzero(np.abs(report.eigenvalues) <= report.tol))


class InterlacingResult(NamedTuple):
    violation: float
    passed: bool


def interlacing_check(M, drop_index: int, slack: float = 1e-8) -> InterlacingResult:
    """Largest violation of λ_{i+1}(M) ≤ λ_i(minor) ≤ λ_i(M) over all i."""
    M = _as_finite_square(M)
    if M.shape[0] < 2:
        raise ValueError("interlacing needs n >= 2")
    minor, _, _ = principal_minor(M, drop_index)
    lam = eigen_sym(M).eigenvalues
    mu = eigen_sym(minor).eigenvalues
    worst = max(0.0, float(np.max(mu - lam[:-1])), float(np.max(lam[1:] - mu)))
    return InterlacingResult(worst, worst <= slack)


class IdentityResult(NamedTuple):
    residual: float
    degenerate: bool
    lhs: float
    rhs: float


def gap_identity_residual(M, i: int, j: int | None = None) -> IdentityResult:
    """Check |a·wᵀX| = |μ_j − λ_i|·|wᵀx| against the last-coordinate minor.

    ``v = (x, a)`` is the i-th eigenvector of ``M`` and ``w`` the j-th
    eigenvector (default ``j = i``) of the minor obtained by deleting the last
    row and column, whose deleted column is ``X``.
    """
    M = _as_finite_square(M)
    n = M.shape[0]
    j = i if j is None else j
    if not (0 <= i < n and 0 <= j < n - 1):
        raise IndexError(f"eigenvalue index out of range for n={n}")
    minor, X, _ = principal_minor(M, n - 1)
    full = eigen_sym(M, want_vectors=True)
    sub = eigen_sym(minor, want_vectors=True)
    v = full.eigenvectors[:, i]
    x, a = v[:-1], v[-1]
    w = sub.eigenvectors[:, j]
    lhs = abs(a * float(w @ X))
    rhs = abs(sub.eigenvalues[j] - full.eigenvalues[i]) * abs(float(w @ x))
    return IdentityResult(float(abs(lhs - rhs)), bool(abs(a) < DEGENERATE_CORNER), float(lhs), float(rhs))


# -- reference solver ---------------------------------------------------------

def tridiagonalize(M) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction to tridiagonal form; returns (diagonal, off-diagonal)."""
    A = np.array(_as_finite_square(M), dtype=float)
    n = A.shape[0]
    for k in range(n - 2):
        x = A[k + 1:, k]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            continue
        alpha = -math.copysign(norm_x, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)
        A[k + 1:, :] -= 2.0 * np.outer(v, v @ A[k + 1:, :])
        A[:, k + 1:] -= 2.0 * np.outer(A[:, k + 1:] @ v, v)
    return np.diag(A).copy(), np.diag(A, -1).copy()


def _wilkinson_shift(a: float, b: float, c: float) -> float:
    """Eigenvalue of [[a, b], [b, c]] closer to c."""
    t = (a - c) / 2.0
    if b == 0.0:
        return c
    return c - b * b / (t + math.copysign(math.hypot(t, b), t if t != 0 else 1.0))


def eigvalsh_qr(M, max_sweeps: int = 60) -> np.ndarray:
    """Descending eigenvalues via Householder + implicitly shifted symmetric QR.

    Slow (Python loops) and meant as an independent check on small matrices.
    """
    d, e = tridiagonalize(M)
    n = d.size
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    eps = np.finfo(float).eps
    hi = n - 1
    budget = max_sweeps * max(n, 1)
    while hi > 0:
        for k in range(hi):
            if abs(T[k + 1, k]) <= eps * (abs(T[k, k]) + abs(T[k + 1, k + 1])):
                T[k + 1, k] = T[k, k + 1] = 0.0
        if T[hi, hi - 1] == 0.0:
            hi -= 1
            continue
        lo = hi - 1
        while lo > 0 and T[lo, lo - 1] != 0.0:
            lo -= 1
        budget -= 1
        if budget < 0:
            raise RuntimeError("implicit QR failed to converge")
        mu = _wilkinson_shift(T[hi - 1, hi - 1], T[hi, hi - 1], T[hi, hi])
        cols = slice(lo, hi + 1)
        for k in range(lo, hi):
            if k == lo:
                x, z = T[lo, lo] - mu, T[lo + 1, lo]
            else:
                x, z = T[k, k - 1], T[k + 1, k - 1]
            r = math.hypot(x, z)
            if r == 0.0:
                continue
            G = np.array([[x / r, z / r], [-z / r, x / r]])
            T[k:k + 2, cols] = G @ T[k:k + 2, cols]
            T[cols, k:k + 2] = T[cols, k:k + 2] @ G.T
            if k > lo:
                T[k + 1, k - 1] = T[k - 1, k + 1] = 0.0
    return np.sort(np.diag(T))[::-1].copy()

