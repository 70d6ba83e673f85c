"""Lévy concentration estimates and small-ball bound formulas."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .ensembles import EntryDist, keyed_rng
from .params import Params
from .structure import lcd

# Frozen defaults for the unspecified constants. C_LCD comes from
# calibrate_lcd_constant() with its default arguments (max ratio 0.231 over the
# calibration set, rounded up); see the decisions ledger.
C_LCD = 0.25
C_TENSOR = C_LCD
C_PZ = 0.05
# (c, c') for the tensorization check; c' is the Chernoff exponent of the
# lower tail at q = 0.05, c = 0.1, the smallest over q in [0.05, 1/2).
TENSORIZATION_C = (0.1, 0.04)
DELTA0_MIN = 0.01

_SAMPLE_CHUNK = 8192
_STREAM_DELTA0 = 11
_STREAM_DOT = 12


@dataclass(frozen=True)
class LevyEstimate:
    eps: float
    estimate: float
    samples: int
    stderr: float
    center_mode: str
    center: float | np.ndarray

    def to_dict(self) -> dict:
        return {"eps": self.eps, "estimate": self.estimate,
                "samples": self.samples, "stderr": self.stderr,
                "center_mode": self.center_mode}


def _stderr(estimate: float, samples: int) -> float:
    return math.sqrt(estimate * (1.0 - estimate) / samples)


def levy_scalar(samples, eps: float) -> LevyEstimate:
    """Exact sup over centers of the empirical mass of a closed ball of radius eps.

    Sorting and sweeping windows [s_i, s_i + 2·eps] covers every maximal window.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("need at least one sample")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    counts = np.searchsorted(s, s + 2.0 * eps, side="right") - np.arange(s.size)
    k = int(np.argmax(counts))
    est = counts[k] / s.size
    return LevyEstimate(eps, est, s.size, _stderr(est, s.size),
                        "scalar-sliding-window", float(s[k] + eps))


def levy_vector(samples, eps: float) -> LevyEstimate:
    """Lower bound on L for vector samples: best ball among centers {0} ∪ samples."""
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("expected a nonempty (N, d) sample array")
    centers = np.vstack([np.zeros((1, X.shape[1])), X])
    counts = cKDTree(X).query_ball_point(centers, r=eps, return_length=True)
    k = int(np.argmax(counts))
    est = counts[k] / X.shape[0]
    return LevyEstimate(eps, est, X.shape[0], _stderr(est, X.shape[0]),
                        "vector-candidate-centers", centers[k])


def sample_sparse_entries(dist: EntryDist, p: float, size: int, seed: int,
                          stream: int = _STREAM_DELTA0) -> np.ndarray:
    """``size`` iid draws of δ·ξ with δ ~ Bernoulli(p)."""
    mask = keyed_rng(seed, stream, 0).random(size) < p
    return np.where(mask, dist.sample(keyed_rng(seed, stream, 1), size), 0.0)


def sample_dot_products(V, p: float, dist: EntryDist, N: int, seed: int) -> np.ndarray:
    """N draws of X·v for each column v of V, X having iid δξ coordinates.

    Returns an (N, k) array. Chunks use their own keyed streams, so the result
    depends only on (seed, N).
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n = V.shape[0]
    out = np.empty((N, V.shape[1]))
    for c, lo in enumerate(range(0, N, _SAMPLE_CHUNK)):
        rows = min(_SAMPLE_CHUNK, N - lo)
        mask = keyed_rng(seed, _STREAM_DOT, c, 0).random((rows, n)) < p
        vals = dist.sample(keyed_rng(seed, _STREAM_DOT, c, 1), (rows, n))
        out[lo:lo + rows] = np.where(mask, vals, 0.0) @ V
    return out


class Delta0Estimate(NamedTuple):
    value: float
    stderr: float
    levy: LevyEstimate


def delta0_estimate(dist: EntryDist, p: float, eps_bar0: float = 0.1,
                    N: int = 100_000, seed: int = 0) -> Delta0Estimate:
    """δ0 = (1 − L(δξ, ε̄0)) / p with its Monte Carlo standard error."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    est = levy_scalar(sample_sparse_entries(dist, p, N, seed), eps_bar0)
    if est.estimate >= 1.0:
        warnings.warn("L(δξ, ε̄0) estimated as 1; using the minimum δ0", RuntimeWarning)
        return Delta0Estimate(DELTA0_MIN, math.nan, est)
    value = min(1.0, max(DELTA0_MIN, (1.0 - est.estimate) / p))
    return Delta0Estimate(value, est.stderr / p, est)


def estimate_delta0(dist: EntryDist, p: float, eps_bar0: float = 0.1,
                    N: int = 100_000, seed: int = 0) -> float:
    return delta0_estimate(dist, p, eps_bar0, N, seed).value


def lcd_smallball_bound(v, eps: float, p: float, C: float = C_LCD,
                        lcd_value: float = math.inf) -> float:
    """C·(ε + 1/(√p·D)), clamped to [0, 1]. ``v`` is accepted for symmetry only."""
    if not lcd_value > 0:
        raise ValueError("lcd_value must be positive")
    return min(1.0, max(0.0, C * (eps + 1.0 / (math.sqrt(p) * lcd_value))))


class TensorBound(NamedTuple):
    log_bound: float
    vacuous: bool
    lcd_value: float


def tensorized_bound(v, params: Params, block, eps: float, C: float = C_TENSOR,
                     lcd_value: float | None = None) -> TensorBound:
    """log of (C·ε + C/(√p·D(v_I/‖v_I‖)))^(n − ⌈αn⌉), clipped at 0 when vacuous."""
    v = np.asarray(v, dtype=float)
    block = np.asarray(block)
    if lcd_value is None:
        xb = v[block] / np.linalg.norm(v[block])
        if 1.0 / (2.0 * np.abs(xb).max()) >= params.theta_max:
            lcd_value = math.inf
        else:
            lcd_value = lcd(xb, params.delta0, params.p, params.theta_max,
                            params.grid_step).value
    base = C * eps + C / (math.sqrt(params.p) * lcd_value)
    if base == 0.0:
        return TensorBound(-math.inf, False, lcd_value)
    log_bound = (params.n - params.block_size) * math.log(base)
    if log_bound >= 0.0:
        return TensorBound(0.0, True, lcd_value)
    return TensorBound(log_bound, False, lcd_value)


def pz_levy_bound(x, p: float, c: float = C_PZ) -> float:
    """1 − c·p/((‖x‖∞/‖x‖₂)² + p)."""
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("x must be nonzero")
    ratio = np.abs(x).max() / norm
    return 1.0 - c * p / (ratio**2 + p)


class TensorizationResult(NamedTuple):
    rate: float
    threshold: float
    allowed: float
    passed: bool


def chernoff_exponent(a: float, q: float) -> float:
    """Relative entropy D(a ‖ q) of Bernoulli laws, the Chernoff lower-tail rate."""
    if a <= 0:
        return -math.log1p(-q)
    return a * math.log(a / q) + (1 - a) * math.log((1 - a) / (1 - q))


def tensorization_check(q: float, n: int, trials: int, seed: int,
                        c_pair: tuple[float, float] = TENSORIZATION_C) -> TensorizationResult:
    """Empirical P(Σ V_j ≤ c·q·n/log(1/q)) for V_j iid Bernoulli(q) unit masses."""
    if not 0.0 < q < 0.5:
        raise ValueError(f"q must lie in (0, 1/2), got {q}")
    c, c_prime = c_pair
    threshold = c * q * n / math.log(1.0 / q)
    if trials == 0:
        return TensorizationResult(0.0, threshold, 1.0, True)
    sums = keyed_rng(seed, 13).binomial(n, q, size=trials)
    rate = float(np.mean(sums <= threshold))
    target = math.exp(-c_prime * n)
    allowed = target + 3.0 * math.sqrt(target * (1 - target) / trials)
    return TensorizationResult(rate, threshold, allowed, rate <= allowed)


def count_structured_rows(M, J, Jprime, signs) -> int:
    """Rows among the top ⌊n/2⌋ with exactly one nonzero m_ij (j ∈ J, j ≠ i),
    that entry satisfying m_ij·signs_j ≥ 1, and m_ij = 0 for every j ∈ Jprime."""
    M = np.asarray(M, dtype=float)
    J = np.asarray(J, dtype=np.int64).ravel()
    Jp = np.asarray(Jprime, dtype=np.int64).ravel()
    signs = np.asarray(signs, dtype=float).ravel()
    if np.intersect1d(J, Jp).size:
        raise ValueError("J and Jprime must be disjoint")
    if signs.size != J.size:
        raise ValueError("need one sign per index of J")
    rows = np.arange(M.shape[0] // 2)
    sub = M[np.ix_(rows, J)].copy()
    sub[rows[:, None] == J[None, :]] = 0.0
    one_hit = np.count_nonzero(sub, axis=1) == 1
    signed = (sub * signs).sum(axis=1) >= 1.0
    clean = ~M[np.ix_(rows, Jp)].any(axis=1) if Jp.size else np.ones(rows.size, bool)
    return int(np.count_nonzero(one_hit & signed & clean))


def calibrate_lcd_constant(n: int = 64, p: float = 0.2, eps: float = 0.1,
                           N: int = 100_000, seed: int = 0,
                           dist: EntryDist | None = None,
                           n_random: int = 9, delta0: float | None = None):
    """Largest ratio L̂(X·v, √p·ε) / (ε + 1/(√p·D(v))) over a calibration set.

    The set is the uniform direction plus ``n_random`` normalized gaussian
    directions drawn from ``seed``. Returns ``(C, ratios)``.
    """
    dist = dist or EntryDist.rademacher()
    if delta0 is None:
        delta0 = estimate_delta0(dist, p)
    g = keyed_rng(seed, 14).standard_normal((n, n_random))
    V = np.column_stack([np.full(n, 1 / math.sqrt(n)), g / np.linalg.norm(g, axis=0)])
    theta_max = 4.0 * math.exp((n * p) ** (1 / 32))
    dots = sample_dot_products(V, p, dist, N, seed)
    ratios = []
    for k in range(V.shape[1]):
        D = lcd(V[:, k], delta0, p, max(theta_max, 1.0 / np.abs(V[:, k]).max()), 1e-3).value
        L = levy_scalar(dots[:, k], math.sqrt(p) * eps).estimate
        ratios.append(L / (eps + 1.0 / (math.sqrt(p) * D)))
    return max(ratios), ratios
