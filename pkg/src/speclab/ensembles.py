"""Reproducible samplers for sparse symmetric and Erdős–Rényi adjacency matrices.

Randomness is counter-based: row ``i`` reads two Philox streams keyed by
``(seed, i, tag)``, and entry ``(i, j)`` sits at offset ``j - i`` of each. The
value of an entry therefore depends only on ``(seed, i, j)``, not on ``n``, the
traversal order or any chunking, and the leading minor of a sample of size ``n``
equals the sample of size ``n - 1`` with the same seed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

KINDS = ("centered-sparse", "adjacency")
DIST_KINDS = ("gaussian", "rademacher", "uniform", "two-point")

_MASK_STREAM = 0
_VALUE_STREAM = 1
_SEED_LIMIT = 2**64


def keyed_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed plus integer coordinates."""
    if not 0 <= seed < _SEED_LIMIT:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


@dataclass(frozen=True)
class EntryDist:
    """Mean-zero, unit-variance entry law.

    ``two-point`` puts mass ``q`` on ``a`` and ``1 - q`` on ``b``.
    """

    kind: str = "gaussian"
    a: float = 0.0
    b: float = 0.0
    q: float = 0.5
    subgaussian_bound: float = 1.0

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise ValueError(f"unknown entry law {self.kind!r}")
        if self.kind == "two-point":
            if not 0.0 < self.q < 1.0:
                raise ValueError("two-point law needs q in (0, 1)")
            mean = self.q * self.a + (1 - self.q) * self.b
            var = self.q * self.a**2 + (1 - self.q) * self.b**2
            if abs(mean) > 1e-12 or abs(var - 1.0) > 1e-12:
                raise ValueError(
                    f"two-point law must have mean 0 and variance 1 (got {mean:g}, {var:g})"
                )
        if self.subgaussian_bound <= 0:
            raise ValueError("subgaussian_bound must be positive")

    @classmethod
    def gaussian(cls) -> "EntryDist":
        return cls("gaussian", subgaussian_bound=1.0)

    @classmethod
    def rademacher(cls) -> "EntryDist":
        return cls("rademacher", subgaussian_bound=1.0)

    @classmethod
    def uniform(cls) -> "EntryDist":
        return cls("uniform", subgaussian_bound=math.sqrt(3.0))

    @classmethod
    def two_point(cls, a: float, b: float, q: float) -> "EntryDist":
        return cls("two-point", a, b, q, subgaussian_bound=max(abs(a), abs(b)))

    @classmethod
    def parse(cls, text: str) -> "EntryDist":
        """Parse ``gaussian``, ``rademacher``, ``uniform`` or ``two-point:a,b,q``."""
        name, _, args = text.partition(":")
        if name == "two-point":
            a, b, q = (float(t) for t in args.split(","))
            return cls.two_point(a, b, q)
        return {"gaussian": cls.gaussian, "rademacher": cls.rademacher,
                "uniform": cls.uniform}[name]()

    def label(self) -> str:
        if self.kind == "two-point":
            return f"two-point:{self.a!r},{self.b!r},{self.q!r}"
        return self.kind

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return np.where(rng.random(size) < 0.5, -1.0, 1.0)
        if self.kind == "uniform":
            s = math.sqrt(3.0)
            return rng.uniform(-s, s, size)
        return np.where(rng.random(size) < self.q, self.a, self.b)


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    p: float
    dist: EntryDist = field(default_factory=EntryDist.gaussian)
    kind: str = "centered-sparse"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")


def _row_mask(seed: int, i: int, length: int, p: float) -> np.ndarray:
    return keyed_rng(seed, i, _MASK_STREAM).random(length) < p


def sample_sparse_symmetric(spec: EnsembleSpec, seed: int) -> np.ndarray:
    """Symmetric matrix with iid upper-triangle entries (diagonal included) δ·ξ."""
    n, p = spec.n, spec.p
    upper = np.zeros((n, n))
    for i in range(n):
        mask = _row_mask(seed, i, n - i, p)
        vals = spec.dist.sample(keyed_rng(seed, i, _VALUE_STREAM), n - i)
        upper[i, i:] = np.where(mask, vals, 0.0)
    return np.triu(upper) + np.triu(upper, 1).T


def sample_adjacency(n: int, p: float, seed: int) -> np.ndarray:
    """Adjacency matrix of G(n, p): zero diagonal, Bernoulli(p) edges."""
    EnsembleSpec(n, p, kind="adjacency")
    upper = np.zeros((n, n))
    for i in range(n - 1):
        # Same mask stream as the sparse sampler, minus the diagonal slot.
        upper[i, i + 1:] = _row_mask(seed, i, n - i, p)[1:]
    return upper + upper.T


def sample(spec: EnsembleSpec, seed: int) -> np.ndarray:
    if spec.kind == "adjacency":
        return sample_adjacency(spec.n, spec.p, seed)
    return sample_sparse_symmetric(spec, seed)


def _check_adjacency_shape(A: np.ndarray) -> None:
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency input must have zero diagonal")


def center_adjacency(A: np.ndarray, p: float) -> np.ndarray:
    """A - p(J - I); the diagonal stays zero."""
    _check_adjacency_shape(A)
    out = A - p
    np.fill_diagonal(out, 0.0)
    return out


def complement_adjacency(A: np.ndarray) -> np.ndarray:
    """J - I - A, the adjacency matrix of the complement graph."""
    _check_adjacency_shape(A)
    out = 1.0 - A
    np.fill_diagonal(out, 0.0)
    return out


def principal_minor(M: np.ndarray, drop_index: int):
    """Delete row/column ``drop_index``.

    Returns ``(minor, X, corner)`` where ``X`` is the deleted column without its
    diagonal entry and ``corner`` is that diagonal entry.
    """
    n = M.shape[0]
    if not 0 <= drop_index < n:
        raise IndexError(f"drop_index {drop_index} out of range for n={n}")
    keep = np.delete(np.arange(n), drop_index)
    return M[np.ix_(keep, keep)].copy(), M[keep, drop_index].copy(), float(M[drop_index, drop_index])


def zero_row_count(M: np.ndarray) -> int:
    return int(np.count_nonzero(~M.any(axis=1)))


# -- file formats -----------------------------------------------------------

_MM_MAGIC = b"%%MatrixMarket"


def write_matrix(path, M: np.ndarray, fmt: str = "mm") -> None:
    """Write as coordinate MatrixMarket (``mm``) or raw binary (``bin``).

    The binary layout is an 8-byte little-endian unsigned n followed by n*n
    little-endian float64 values in row-major order.
    """
    path = Path(path)
    if fmt == "mm":
        # A file handle stops scipy from appending ".mtx" to the name.
        with open(path, "wb") as fh:
            scipy.io.mmwrite(fh, scipy.sparse.coo_matrix(M), symmetry="symmetric", precision=17)
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(struct.pack("<Q", M.shape[0]))
            fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(_MM_MAGIC))
    if head == _MM_MAGIC:
        with open(path, "rb") as fh:
            return np.asarray(scipy.sparse.coo_matrix(scipy.io.mmread(fh)).toarray(), dtype=float)
    raw = path.read_bytes()
    (n,) = struct.unpack("<Q", raw[:8])
    if len(raw) != 8 + 8 * n * n:
        raise ValueError(f"{path}: binary size does not match header n={n}")
    return np.frombuffer(raw, dtype="<f8", offset=8).reshape(n, n).astype(float)


def write_vector(path, x: np.ndarray) -> None:
    np.savetxt(path, np.asarray(x, dtype=float), fmt="%.17g")


def read_vector(path) -> np.ndarray:
    return np.loadtxt(path, dtype=float, ndmin=1)
