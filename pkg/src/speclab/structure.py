"""Vector structure: sparsity distance, spread sets, block partitions and LCD.

Magnitude orderings break ties by lowest index everywhere, so every
construction here is a deterministic function of its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .params import Params

UNIT_TOL = 1e-12
BISECTION_RTOL = 1e-9
_CHUNK = 2048


class Structure(str, Enum):
    COMP = "Comp"
    INCOMP = "Incomp"


def _check_unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("expected a nonempty vector")
    if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
        raise ValueError(f"expected a unit vector (norm {np.linalg.norm(x)!r})")
    return x


def magnitude_order(x: np.ndarray) -> np.ndarray:
    """Indices by non-increasing |x|, ties by lower index."""
    return np.argsort(-np.abs(x), kind="stable")


def rearranged_segment(x, m: int, m2: int) -> np.ndarray:
    """Keep the entries ranked ``m..m2`` (1-based, inclusive) by magnitude; zero the rest."""
    x = np.asarray(x, dtype=float)
    if not 1 <= m <= m2 <= x.size:
        raise ValueError(f"bad rank range [{m}:{m2}] for n={x.size}")
    keep = magnitude_order(x)[m - 1:m2]
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out


def _sorted_magnitudes(x: np.ndarray) -> np.ndarray:
    return np.sort(np.abs(x))[::-1]


def dist_to_sparse(x, M: int) -> float:
    """Euclidean distance from a unit vector to the set of M-sparse vectors."""
    x = _check_unit(x)
    if M >= x.size:
        return 0.0
    return float(np.linalg.norm(_sorted_magnitudes(x)[M:]))


def classify(x, M: int, rho: float) -> Structure:
    return Structure.COMP if dist_to_sparse(x, M) <= rho else Structure.INCOMP


def is_dominated(x, m: int, alpha_dom: float) -> bool:
    """‖tail‖₂ ≤ alpha_dom·√m·‖tail‖∞ for the tail after the top m magnitudes."""
    x = _check_unit(x)
    if not 1 <= m < x.size:
        raise ValueError(f"m must lie in [1, n), got {m}")
    tail = _sorted_magnitudes(x)[m:]
    return bool(np.linalg.norm(tail) <= alpha_dom * math.sqrt(m) * tail[0])


def spread_set(v, params: Params) -> np.ndarray:
    """Ascending indices k with ρ/√(2n) ≤ |v_k| ≤ 1/√M."""
    v = _check_unit(v)
    a = np.abs(v)
    lo = params.rho / math.sqrt(2 * v.size)
    hi = 1.0 / math.sqrt(params.M)
    return np.flatnonzero((a >= lo) & (a <= hi))


# -- partition ----------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Index decomposition of an incompressible vector.

    ``blocks`` each have ``block_size`` indices. Normally that is ⌈αn⌉; when
    fewer than ⌈αn⌉ indices lie outside τ (always the case at desk scale,
    where α is close to 1) a single block takes all of them and ``clamped``
    is set.
    """

    sigma: np.ndarray
    tau: np.ndarray
    tau_prime: np.ndarray
    J: np.ndarray
    I0: np.ndarray
    blocks: list[np.ndarray]
    block_size: int
    clamped: bool
    source_params: Params = field(repr=False)

    @property
    def k0(self) -> int:
        return len(self.blocks)

    def violations(self, v) -> list[str]:
        """Every invariant the partition of ``v`` fails; empty when all hold."""
        prm = self.source_params
        v = np.asarray(v, dtype=float)
        n = v.size
        out = []
        parts = [self.I0, *self.blocks]
        allidx = np.concatenate(parts)
        if allidx.size != n or not np.array_equal(np.sort(allidx), np.arange(n)):
            out.append("blocks and I0 do not partition [n]")
        if self.I0.size > 2 * prm.M:
            out.append(f"|I0| = {self.I0.size} > 2M = {2 * prm.M}")
        if self.sigma.size != math.ceil(prm.M * prm.rho**2 / 2):
            out.append(f"|sigma| = {self.sigma.size} != ceil(M rho^2 / 2)")
        upper = 2 * math.sqrt(prm.alpha * n / prm.M)
        for k, I in enumerate(self.blocks, start=1):
            if I.size != self.block_size:
                out.append(f"block {k} has size {I.size} != {self.block_size}")
            norm2 = np.linalg.norm(v[I])
            if norm2 < prm.rho_prime:
                out.append(f"block {k}: norm {norm2:.3g} < rho' = {prm.rho_prime:.3g}")
            if norm2 > upper:
                out.append(f"block {k}: norm {norm2:.3g} > 2 sqrt(alpha n / M) = {upper:.3g}")
            if np.abs(v[I]).max(initial=0.0) > 1 / math.sqrt(prm.M):
                out.append(f"block {k}: sup norm exceeds 1/sqrt(M)")
        return out


def build_partition(v, params: Params) -> Partition:
    """σ/τ/block decomposition of an incompressible unit vector.

    σ keeps the ⌈Mρ²/2⌉ largest members of the spread band and τ is the top-M
    set minus σ. Block k takes its share of σ followed by σ̄ = [n] ∖ (τ ∪ σ),
    both walked in magnitude order; whatever σ̄ is left over forms J.
    """
    v = _check_unit(v)
    n, M = v.size, params.M
    if classify(v, M, params.rho) is Structure.COMP:
        raise ValueError("partition defined only on Incomp")
    order = magnitude_order(v)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    sigma_size = math.ceil(M * params.rho**2 / 2)
    band = spread_set(v, params)
    if band.size < sigma_size:
        raise RuntimeError(
            f"spread set has {band.size} < {sigma_size} members for an Incomp vector"
        )
    sigma = band[np.argsort(rank[band], kind="stable")][:sigma_size]
    tau_prime = order[:M]
    in_sigma = np.zeros(n, dtype=bool)
    in_sigma[sigma] = True
    in_tau = np.zeros(n, dtype=bool)
    in_tau[tau_prime] = True
    in_tau &= ~in_sigma

    sigma_walk = order[in_sigma[order]]
    bar_walk = order[~(in_sigma | in_tau)[order]]
    available = n - int(in_tau.sum())
    size = params.block_size
    k0 = available // size
    clamped = k0 < 1
    if clamped:
        size, k0 = available, 1

    per_block = math.ceil(sigma_walk.size / k0)
    blocks = []
    si = bi = 0
    for _ in range(k0):
        from_sigma = sigma_walk[si:si + min(per_block, size)]
        si += from_sigma.size
        need = size - from_sigma.size
        from_bar = bar_walk[bi:bi + need]
        bi += from_bar.size
        blocks.append(np.sort(np.concatenate([from_sigma, from_bar])))
    J = np.sort(np.concatenate([sigma_walk[si:], bar_walk[bi:]]))
    tau = np.flatnonzero(in_tau)
    return Partition(
        sigma=np.sort(sigma), tau=tau, tau_prime=np.sort(tau_prime), J=J,
        I0=np.sort(np.concatenate([J, tau])), blocks=blocks, block_size=size,
        clamped=clamped, source_params=params,
    )


# -- LCD ----------------------------------------------------------------------

@dataclass(frozen=True)
class LcdResult:
    value: float
    theta_witness: float
    dist_at_witness: float
    threshold_at_witness: float
    search_ceiling: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def to_dict(self) -> dict:
        def enc(t):
            return t if math.isfinite(t) else None
        return {
            "value": enc(self.value),
            "exceeds_ceiling": not self.finite,
            "theta_witness": enc(self.theta_witness),
            "dist_at_witness": enc(self.dist_at_witness),
            "threshold_at_witness": enc(self.threshold_at_witness),
            "search_ceiling": self.search_ceiling,
        }


def lattice_distance(theta, x: np.ndarray) -> np.ndarray:
    """dist(θx, Zⁿ) for a scalar or 1-d array of θ."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    y = th[:, None] * x[None, :]
    d = np.linalg.norm(y - np.rint(y), axis=1)
    return d if np.ndim(theta) else d[0]


def lcd_threshold(theta, delta0: float, p: float):
    """(δ0 p)^(-1/2) · sqrt(log₊(sqrt(δ0 p)·θ))."""
    c = math.sqrt(delta0 * p)
    return np.sqrt(np.maximum(np.log(c * np.asarray(theta, dtype=float)), 0.0)) / c


def _exceeds(ceiling: float) -> LcdResult:
    return LcdResult(math.inf, math.nan, math.nan, math.nan, ceiling)


def lcd(x, delta0: float, p: float, theta_max: float, grid_step: float) -> LcdResult:
    """Least common denominator D(x) = inf{θ > 0 : dist(θx, Zⁿ) < threshold(θ)}.

    The scan runs on a grid of step ``grid_step``. Because dist(θx, Zⁿ) is
    1-Lipschitz in θ and the threshold is nondecreasing, a grid cell [a, b]
    cannot contain a crossing when (dist(a) + dist(b) − (b − a))/2 ≥
    threshold(b). Cells that fail this test are bisected, left half first,
    until the first crossing is pinned to a relative width of 1e-9. The
    reported value is the witness θ at the right end of that bracket.
    """
    x = _check_unit(x)
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    if not 0 < delta0 * p:
        raise ValueError("delta0 * p must be positive")
    floor = 1.0 / (2.0 * np.abs(x).max())
    if theta_max <= floor:
        raise ValueError(
            f"theta_max={theta_max:g} does not exceed the lower bound 1/(2|x|_inf)={floor:g}"
        )
    start = max(1.0 / math.sqrt(delta0 * p), floor)
    if start >= theta_max:
        return _exceeds(theta_max)

    def thr(t):
        return float(lcd_threshold(t, delta0, p))

    def dist(t):
        return float(lattice_distance(t, x))

    def found(t):
        return LcdResult(t, t, dist(t), thr(t), theta_max)

    def search(a, b, da, db):
        if (da + db - (b - a)) / 2.0 >= thr(b):
            return None
        if b - a <= BISECTION_RTOL * b:
            return b if db < thr(b) else None
        m = 0.5 * (a + b)
        dm = dist(m)
        left = search(a, m, da, dm)
        return left if left is not None else search(m, b, dm, db)

    n_cells = math.ceil((theta_max - start) / grid_step)
    first = True
    for c0 in range(0, n_cells, _CHUNK):
        idx = np.arange(c0, min(c0 + _CHUNK, n_cells) + 1)
        th = np.minimum(start + idx * grid_step, theta_max)
        d = lattice_distance(th, x)
        t = lcd_threshold(th, delta0, p)
        if first and d[0] < t[0]:
            return found(float(th[0]))
        first = False
        clear = (d[:-1] + d[1:] - np.diff(th)) / 2.0 >= t[1:]
        for k in np.flatnonzero(~clear):
            hit = search(float(th[k]), float(th[k + 1]), float(d[k]), float(d[k + 1]))
            if hit is not None:
                return found(hit)
    return _exceeds(theta_max)


def block_lcds(v, params: Params, *, theta_max: float | None = None,
               grid_step: float | None = None,
               partition: Partition | None = None) -> list[LcdResult]:
    """LCD of each normalized block of the partition of ``v``."""
    theta_max = params.theta_max if theta_max is None else theta_max
    grid_step = params.grid_step if grid_step is None else grid_step
    part = partition or build_partition(v, params)
    v = np.asarray(v, dtype=float)
    out = []
    for I in part.blocks:
        xb = v[I] / np.linalg.norm(v[I])
        # D(x) ≥ 1/(2‖x‖∞): a block whose floor clears the ceiling exceeds it outright.
        if 1.0 / (2.0 * np.abs(xb).max()) >= theta_max:
            out.append(_exceeds(theta_max))
        else:
            out.append(lcd(xb, params.delta0, params.p, theta_max, grid_step))
    return out


def regularized_lcd(v, params: Params, *, theta_max: float | None = None,
                    grid_step: float | None = None) -> float:
    """Maximum block LCD; +inf when some block exceeds the search ceiling."""
    step = params.grid_step if grid_step is None else grid_step
    value = max(r.value for r in block_lcds(v, params, theta_max=theta_max, grid_step=step))
    floor = 0.5 * params.rho_prime * math.sqrt(params.M)
    if value < floor - step:
        raise RuntimeError(f"regularized LCD {value:g} below its floor {floor:g}")
    return value


LCD_BUCKETS = ("below", "small", "mid", "high")


def lcd_bucket(value: float, params: Params) -> str:
    """Place a regularized LCD relative to (D_low, D_mid, D_high)."""
    if value >= params.D_high:
        return "high"
    if value >= params.D_mid:
        return "mid"
    if value >= params.D_low:
        return "small"
    return "below"


def sparsest_in_span(Q, M: int) -> np.ndarray:
    """A unit vector in span(Q) with as little mass as possible off M coordinates.

    The support is the M rows of ``Q`` with the largest norms; the returned
    vector minimizes the mass outside that support, so its distance to the
    M-sparse vectors is at most the smallest singular value of the remaining
    rows. When dim span(Q) + M > n that value is zero and the vector is exactly
    M-sparse.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1 or Q.shape[1] == 1:
        return Q.reshape(-1).copy()
    n = Q.shape[0]
    if M >= n:
        return Q[:, 0].copy()
    rows = np.argsort(-np.linalg.norm(Q, axis=1), kind="stable")
    off = Q[rows[M:], :]
    _, _, vt = np.linalg.svd(off, full_matrices=True)
    w = Q @ vt[-1]
    return w / np.linalg.norm(w)
