"""Scalar parameters derived from (n, p), shared by every other module."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

# Knobs a caller may override. Everything else in Params is derived from these.
KNOBS = (
    "rho_base",
    "ell0",
    "alpha",
    "M",
    "K_opnorm",
    "delta0",
    "eps_bar0",
    "c_bar",
    "c_eps",
    "theta_max",
    "grid_step",
)

DEFAULTS: dict[str, float] = {
    "rho_base": 20.0,
    "K_opnorm": 10.0,
    "eps_bar0": 0.1,
    # Net counting constant. 32 clears every enumerated lattice case and keeps
    # the mid-range window [D_mid, D_high] non-empty at n = 10^4, p = 10^-2.
    "c_bar": 32.0,
    "c_eps": 1e-3,
    "grid_step": 1e-3,
}

DELTA0_SAMPLES = 100_000
DELTA0_SEED = 0


@dataclass(frozen=True)
class Params:
    n: int
    p: float
    delta: float
    ell0: int
    rho: float
    rho_base: float
    M: int
    M_small: int
    alpha: float
    rho_prime: float
    block_size: int
    k0: int
    k0_clamped: bool
    K_opnorm: float
    delta0: float
    eps_bar0: float
    D_low: float
    D_mid: float
    D_high: float
    eps0: float
    eps0_prime: float
    c_bar: float
    c_eps: float
    theta_max: float
    grid_step: float

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Params":
        return cls(**{f.name: data[f.name] for f in dataclasses.fields(cls)})


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def ell0_formula(n: int, p: float) -> int:
    """Unclamped ceil(log(1/(8p)) / log(sqrt(pn)))."""
    return math.ceil(math.log(1.0 / (8.0 * p)) / math.log(math.sqrt(p * n)))


def eps0_at(params: Params, D: float) -> float:
    """Mid-range net scale c_eps * sqrt(n) / ((np)^(1/32) * D)."""
    n, p = params.n, params.p
    return params.c_eps * math.sqrt(n) / ((n * p) ** (1 / 32) * D)


def derive_params(
    n: int,
    p: float,
    overrides: Mapping[str, Any] | None = None,
    dist=None,
) -> Params:
    """Derive every parameter for dimension ``n`` and sparsity ``p``.

    ``overrides`` may set any name in ``KNOBS``; derived fields are then
    recomputed from the overridden inputs. When ``delta0`` is not given it is
    estimated by Monte Carlo for ``dist`` (standard gaussian by default) with a
    fixed seed, so the result stays deterministic.
    """
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"n must be an integer, got {n!r}")
    n = int(n)
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if n < 16:
        raise ValueError(f"n must be at least 16, got {n}")
    if n * p <= 1.0:
        raise ValueError(
            f"np = {n * p:g} <= 1: below connectivity scale, formulas degenerate"
        )
    ov = dict(overrides or {})
    unknown = set(ov) - set(KNOBS)
    if unknown:
        raise ValueError(f"cannot override derived fields: {sorted(unknown)}")
    knob = {**DEFAULTS, **ov}

    np_ = n * p
    delta = 1.0 + math.log(p) / math.log(n)
    ell0 = int(knob["ell0"]) if "ell0" in ov else max(1, ell0_formula(n, p))
    if ell0 < 1:
        raise ValueError("ell0 must be >= 1")
    rho_base = float(knob["rho_base"])
    if rho_base <= 1.0:
        raise ValueError("rho_base must exceed 1")
    rho = rho_base ** (-ell0 - 6)

    alpha = float(knob["alpha"]) if "alpha" in ov else np_ ** (-1 / 16)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    # n / (np)^(1/16) is exactly alpha * n, so an alpha override moves M with it.
    M = int(knob["M"]) if "M" in ov else max(1, _round_half_up(alpha * n))
    if not 1 <= M <= n:
        raise ValueError(f"M must lie in [1, n], got {M}")
    M_small = max(1, _round_half_up(n / np_ ** (1 / 8)))

    rho_prime = (rho**2 / 4.0) * math.sqrt(M * alpha / n)
    block_size = math.ceil(alpha * n)
    k0_raw = (n - M) // block_size
    k0 = max(1, k0_raw)

    delta0 = knob.get("delta0")
    if delta0 is None:
        from .ensembles import EntryDist
        from .smallball import estimate_delta0

        delta0 = estimate_delta0(
            dist or EntryDist.gaussian(), p, float(knob["eps_bar0"]),
            DELTA0_SAMPLES, DELTA0_SEED,
        )
    delta0 = float(delta0)
    if not 0.0 < delta0 <= 1.0:
        raise ValueError(f"delta0 must lie in (0, 1], got {delta0}")

    c_bar = float(knob["c_bar"])
    D_low = rho_prime * math.sqrt(M)
    D_mid = math.sqrt(n) / (c_bar * np_ ** (1 / 32))
    D_high = math.exp(np_ ** (1 / 32))
    theta_max = float(knob["theta_max"]) if "theta_max" in ov else 4.0 * D_high
    c_eps = float(knob["c_eps"])
    eps0 = c_eps * math.sqrt(n) / (np_ ** (1 / 32) * D_mid)
    eps0_prime = (rho_prime * math.sqrt(p * M)) ** -0.5

    return Params(
        n=n, p=p, delta=delta, ell0=ell0, rho=rho, rho_base=rho_base,
        M=M, M_small=M_small, alpha=alpha, rho_prime=rho_prime,
        block_size=block_size, k0=k0, k0_clamped=k0_raw < 1,
        K_opnorm=float(knob["K_opnorm"]), delta0=delta0,
        eps_bar0=float(knob["eps_bar0"]), D_low=D_low, D_mid=D_mid,
        D_high=D_high, eps0=eps0, eps0_prime=eps0_prime, c_bar=c_bar,
        c_eps=c_eps, theta_max=theta_max, grid_step=float(knob["grid_step"]),
    )


def validate_regime(params: Params) -> list[str]:
    """Human-readable warnings about desk-scale degeneracies. Never raises."""
    out = []
    if params.D_low > params.D_mid:
        out.append(
            f"small-LCD window empty: D_low={params.D_low:.4g} > D_mid={params.D_mid:.4g}"
        )
    if params.D_mid >= params.D_high:
        out.append(
            f"mid-range window empty at desk scale: D_mid={params.D_mid:.4g} "
            f">= D_high={params.D_high:.4g}"
        )
    pM = params.p * params.M
    if math.isclose(pM, 1.0, rel_tol=1e-12):
        out.append("p = 1/M: at the boundary of the compressible-eigenvector range (pM = 1)")
    elif pM < 1.0:
        out.append(f"p < 1/M (pM = {pM:.4g}): outside the compressible-eigenvector range")
    if not params.k0_clamped:
        lo, hi = 1 / (2 * params.alpha) - 1, 1 / params.alpha
        if not lo <= params.k0 <= hi:
            out.append(f"k0={params.k0} outside [{lo:.3g}, {hi:.3g}]")
    return out
