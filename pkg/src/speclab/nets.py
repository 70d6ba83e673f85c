"""Direction nets, interval nets and the union-bound exponent evaluator."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .ensembles import keyed_rng
from .params import DEFAULTS, Params, eps0_at
from .smallball import C_TENSOR
from .structure import lcd

MAX_LATTICE_POINTS = 10**7
# The proof's constant c must stay below 1/(2C) for the tensorized constant C.
C_NET = 1.0 / (4.0 * C_TENSOR)


def beta_for(D0: float, delta0: float, p: float) -> float:
    """Covering radius 2·sqrt(log(2·sqrt(δ0 p)·D0)) / (D0·sqrt(δ0 p))."""
    s = math.sqrt(delta0 * p)
    arg = 2.0 * s * D0
    if arg <= 1.0:
        raise ValueError(f"below beta-validity range: 2 sqrt(delta0 p) D0 = {arg:g} <= 1")
    return 2.0 * math.sqrt(math.log(arg)) / (D0 * s)


def counting_bound(m: int, D0: float, c_bar: float) -> float:
    return (2.0 + c_bar * D0 / math.sqrt(m)) ** m


def min_cbar(count: int, m: int, D0: float) -> float:
    """Smallest c̄ ≥ 0 with (2 + c̄·D0/√m)^m ≥ count."""
    return max(0.0, (count ** (1.0 / m) - 2.0) * math.sqrt(m) / D0)


@dataclass(frozen=True)
class DirectionNet:
    dim: int
    D0: float
    points: np.ndarray
    primitive: np.ndarray = field(repr=False)
    beta: float
    bound: float
    c_bar: float

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def min_cbar(self) -> float:
        return min_cbar(self.size, self.dim, self.D0)

    def to_dict(self) -> dict:
        return {"m": self.dim, "D0": self.D0, "size": self.size,
                "bound": self.bound, "c_bar": self.c_bar, "min_cbar": self.min_cbar,
                "beta": None if math.isnan(self.beta) else self.beta,
                "primitive": self.primitive.tolist()}


def integer_net(m: int, D0: float, c_bar: float = DEFAULTS["c_bar"],
                delta0: float | None = None, p: float | None = None) -> DirectionNet:
    """Directions z/‖z‖ of all integer z with 0 < ‖z‖ ≤ 4·D0.

    Directions are deduplicated exactly through their primitive vectors
    (z divided by the gcd of its entries). ``beta`` is filled in when δ0 and
    p are given and the β formula is valid, NaN otherwise.
    """
    if m not in (1, 2, 3):
        raise ValueError("integer nets are only enumerated for m <= 3")
    if D0 <= 0:
        raise ValueError("D0 must be positive")
    R = int(math.floor(4.0 * D0))
    if (2 * R + 1) ** m > MAX_LATTICE_POINTS:
        raise ValueError(f"enumeration of {(2 * R + 1) ** m} lattice points is too large")
    axis = np.arange(-R, R + 1)
    Z = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    sq = (Z * Z).sum(axis=1)
    Z = Z[(sq > 0) & (sq <= (4.0 * D0) ** 2)]
    if Z.size:
        g = np.gcd.reduce(np.abs(Z), axis=1)
        prim = np.unique(Z // g[:, None], axis=0)
    else:
        prim = np.zeros((0, m), dtype=np.int64)
    pts = prim / np.linalg.norm(prim, axis=1, keepdims=True) if prim.size else prim.astype(float)
    beta = math.nan
    if delta0 is not None and p is not None and 2 * math.sqrt(delta0 * p) * D0 > 1:
        beta = beta_for(D0, delta0, p)
    return DirectionNet(m, D0, pts, prim, beta, counting_bound(m, D0, c_bar), c_bar)


class CoverResult(NamedTuple):
    max_gap: float
    accepted: int
    beta: float
    passed: bool


def net_covering_check(net: DirectionNet, delta0: float, p: float, trials: int,
                       seed: int, grid_step: float = 1e-3) -> CoverResult:
    """Largest distance from a random unit vector with LCD in (D0, 2·D0] to the net."""
    beta = net.beta if not math.isnan(net.beta) else beta_for(net.D0, delta0, p)
    theta_max = 2.0 * net.D0 + grid_step
    rng = keyed_rng(seed, 21)
    gap, accepted = 0.0, 0
    for _ in range(trials):
        x = rng.standard_normal(net.dim)
        x /= np.linalg.norm(x)
        if 1.0 / (2.0 * np.abs(x).max()) >= theta_max:
            continue
        D = lcd(x, delta0, p, theta_max, grid_step).value
        if net.D0 < D <= 2.0 * net.D0:
            accepted += 1
            gap = max(gap, float(np.linalg.norm(net.points - x, axis=1).min()))
    if accepted == 0:
        warnings.warn("no sampled vector had LCD in (D0, 2 D0]", RuntimeWarning)
    return CoverResult(gap, accepted, beta, gap <= beta + grid_step)


def interval_net(radius: float, spacing: float) -> np.ndarray:
    """Evenly spaced points of [−radius, radius] with consecutive gap ≤ spacing."""
    if radius <= 0 or spacing <= 0:
        raise ValueError("radius and spacing must be positive")
    if spacing > 2.0 * radius:
        return np.zeros(1)
    return np.linspace(-radius, radius, math.ceil(2.0 * radius / spacing) + 1)


def _log_binom(n: float, k: float) -> float:
    k = min(max(k, 0.0), n)
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


@dataclass(frozen=True)
class ExponentReport:
    value: float
    regime: str
    D: float
    eps: float
    terms: dict
    flags: list[str]

    def to_dict(self) -> dict:
        return {"exponent_per_n": self.value, "regime": self.regime, "D": self.D,
                "eps": self.eps, "terms_per_n": self.terms, "flags": self.flags}


def union_bound_exponent(params: Params, D: float, regime: str = "mid",
                         c_net: float = C_NET) -> ExponentReport:
    """log(net size × per-point probability) / n for the level set at scale D.

    The product evaluated is
    C(n, 2M)·C(n, Mρ²)·(10K/(c ε ρ′))^{2M}·F^n·log^{1/α}(2D)·(30K k0/(c ε ρ′))^{1/α}·ε^{n−⌈αn⌉}
    with F = 2c̄D/√(αn), ε = ε0(D) in the mid regime, and F = 13,
    ε = ε0′ with the small-regime M in the small regime.
    """
    n, alpha, K = params.n, params.alpha, params.K_opnorm
    flags = []
    if regime == "mid":
        M, rho_prime = params.M, params.rho_prime
        lo, hi = params.D_mid, params.D_high
        eps = eps0_at(params, D)
        log_factor = math.log(2.0 * params.c_bar * D / math.sqrt(alpha * n))
    elif regime == "small":
        M = params.M_small
        rho_prime = (params.rho**2 / 4.0) * math.sqrt(M * alpha / n)
        lo, hi = rho_prime * math.sqrt(M), params.D_mid
        eps = (rho_prime * math.sqrt(params.p * M)) ** -0.5
        log_factor = math.log(13.0)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    if lo > hi:
        flags.append(f"{regime} window inverted at desk scale ({lo:.4g} > {hi:.4g})")
    if not min(lo, hi) * (1 - 1e-12) <= D <= max(lo, hi) * (1 + 1e-12):
        raise ValueError(f"regime mismatch: D={D:g} outside the {regime} window [{lo:g}, {hi:g}]")
    if 2 * M > n:
        flags.append("binomial C(n, 2M) clamped: 2M > n")
    if eps >= 1.0:
        flags.append(f"net scale {eps:.3g} >= 1")

    denom = c_net * eps * rho_prime
    terms = {
        "choose_tau": _log_binom(n, 2 * M),
        "choose_sigma": _log_binom(n, M * params.rho**2),
        "sparse_net": 2 * M * math.log(10.0 * K / denom),
        "direction_net": n * log_factor,
        "lcd_levels": math.log(max(math.log(2.0 * D), 1.0)) / alpha,
        "scale_net": math.log(30.0 * K * params.k0 / denom) / alpha,
        "probability": (n - params.block_size) * math.log(eps),
    }
    value = sum(terms.values()) / n
    if value >= 0:
        flags.append("asymptotic regime not reached")
    return ExponentReport(value, regime, D, eps,
                          {k: v / n for k, v in terms.items()}, flags)
