"""Dense linear-algebra kernels and reproducible random streams.

Everything here is pure and reentrant. Random draws are counter based: the
stream of replicate ``i`` depends only on ``(master_seed, i)``, so a Monte
Carlo run gives bitwise identical replicates regardless of how replicates are
scheduled across worker processes.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .exceptions import InvalidInputError, SingularMatrixError, SolverError

EPS = np.finfo(float).eps

#: Replicates are processed in fixed-size chunks; the chunk size must not
#: depend on the worker count or results would change with parallelism.
CHUNK_SIZE = 4096

WORKERS_ENV = "CONERISK_WORKERS"


def as_matrix(A, name: str = "A", ncols: int | None = None) -> np.ndarray:
    """Return ``A`` as a finite 2-D float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1) if A.size else A.reshape(0, ncols or 0)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if ncols is not None and A.shape[1] != ncols:
        raise InvalidInputError(f"{name} must have {ncols} columns, got {A.shape[1]}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def as_vector(x, name: str = "x", dim: int | None = None) -> np.ndarray:
    """Return ``x`` as a finite 1-D float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        x = x.reshape(-1)
    if dim is not None and x.shape[0] != dim:
        raise InvalidInputError(f"{name} must have dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return x


# ---------------------------------------------------------------------------
# QR, least squares, NNLS
# ---------------------------------------------------------------------------

def qr_positive_diag(A) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization of a square matrix with ``diag(R) > 0``.

    The factorization is computed with Householder reflections (LAPACK
    ``geqrf``) and the signs of the columns of ``Q`` and rows of ``R`` are
    flipped afterwards, which makes the factorization unique.

    Raises
    ------
    SingularMatrixError
        If ``A`` is rank deficient (condition estimate above 1e12).
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"A must be square, got shape {A.shape}")
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    absd = np.abs(d)
    if absd.size and (absd.min() == 0.0 or absd.max() / absd.min() > 1e12):
        raise SingularMatrixError("matrix is singular to working precision")
    signs = np.where(d < 0, -1.0, 1.0)
    Q = Q * signs
    R = signs[:, None] * R
    R = np.triu(R)
    return Q, R


def lstsq(G: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of ``G c = x``."""
    return np.linalg.lstsq(G, x, rcond=None)[0]


def nnls(G, x, tol: float = 1e-10, max_pivots: int | None = None) -> np.ndarray:
    """Solve ``min ||x - G lam||`` subject to ``lam >= 0``.

    Lawson-Hanson active-set iteration. A column enters the passive set when
    its gradient component ``G^T (x - G lam)`` exceeds ``tol`` (scaled by the
    problem size); the inner loop backs off along the segment towards the
    unconstrained subproblem solution whenever a passive coefficient would
    turn nonpositive.

    Parameters
    ----------
    G : array_like, shape (n, k)
    x : array_like, shape (n,)
    tol : float
        Relative dual-feasibility tolerance.
    max_pivots : int, optional
        Cap on inner least-squares solves; defaults to ``10 * k * n``.

    Returns
    -------
    lam : ndarray, shape (k,)
    """
    G = as_matrix(G, "G")
    n, k = G.shape
    x = as_vector(x, "x", n)
    if k == 0:
        raise InvalidInputError("G must have at least one column")
    if max_pivots is None:
        max_pivots = max(10 * k * n, 20)

    col_norm = np.sqrt(np.einsum("ij,ij->j", G, G))
    scale = max(1.0, float(np.linalg.norm(x))) * max(1.0, float(col_norm.max()))
    wtol = tol * scale

    lam = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    # columns that failed to enter since lam last moved
    blocked = np.zeros(k, dtype=bool)
    w = G.T @ x
    pivots = 0

    while True:
        cand = ~passive & ~blocked & (w > wtol)
        if not cand.any():
            break
        j = int(np.argmax(np.where(cand, w, -np.inf)))
        passive[j] = True
        first = True
        while True:
            pivots += 1
            if pivots > max_pivots:
                raise SolverError(f"NNLS exceeded {max_pivots} active-set pivots")
            idx = np.flatnonzero(passive)
            s = np.zeros(k)
            s[idx] = lstsq(G[:, idx], x)
            if first and s[j] <= 0.0:
                # degenerate entry; the column cannot carry positive weight
                passive[j] = False
                blocked[j] = True
                break
            first = False
            if np.all(s[idx] > 0.0):
                lam = s
                blocked[:] = False
                break
            neg = idx[s[idx] <= 0.0]
            alpha = np.min(lam[neg] / (lam[neg] - s[neg]))
            lam = lam + alpha * (s - lam)
            passive &= lam > 1e-15 * max(1.0, float(lam.max()))
            lam[~passive] = 0.0
        w = G.T @ (x - G @ lam)
    return lam


def rowspace_membership(v, rows, tol: float = 1e-9) -> bool:
    """Return True if ``v`` lies in the row space of ``rows``.

    Membership is decided by the least-squares residual of fitting ``v`` by a
    linear combination of the rows, compared with ``tol * max(1, ||v||)``.
    """
    v = as_vector(v, "v")
    rows = as_matrix(rows, "rows", ncols=v.shape[0]) if np.size(rows) else np.zeros((0, v.shape[0]))
    bound = tol * max(1.0, float(np.linalg.norm(v)))
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(v) <= bound)
    c = lstsq(rows.T, v)
    return bool(np.linalg.norm(rows.T @ c - v) <= bound)


def orthonormal_complement(V: np.ndarray, n: int, tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis (columns) of the orthogonal complement of span(rows of V)."""
    V = np.asarray(V, dtype=float).reshape(-1, n)
    if V.shape[0] == 0 or not np.any(V):
        return np.eye(n)
    _, s, vt = np.linalg.svd(V, full_matrices=True)
    rank = int(np.sum(s > tol * max(1.0, s.max())))
    return vt[rank:].T.copy()


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RandomStream:
    """Deterministic stream for one Monte Carlo replicate."""

    master_seed: int
    replicate_index: int

    def __post_init__(self):
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise InvalidInputError("master_seed must be a 64-bit nonnegative integer")
        if self.replicate_index < 0:
            raise InvalidInputError("replicate_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng([int(self.master_seed), int(self.replicate_index)])


def gaussian_draw(stream: RandomStream, n: int) -> np.ndarray:
    """Draw ``n`` independent standard normal variates from ``stream``."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    return stream.generator().standard_normal(n)


# ---------------------------------------------------------------------------
# Deterministic chunked execution
# ---------------------------------------------------------------------------

def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit argument, else ``$CONERISK_WORKERS``, else 1."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "").strip()
        if not raw:
            return 1
        try:
            workers = int(raw)
        except ValueError:
            raise InvalidInputError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, int(workers))


def chunk_bounds(total: int, chunk_size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk_size, total)) for lo in range(0, total, chunk_size)]


def run_chunks(kernel: Callable[[int, int], object], total: int,
               workers: int | None = None) -> list:
    """Evaluate ``kernel(lo, hi)`` over fixed chunks of ``range(total)``.

    Results come back in chunk order, so any reduction done by the caller in
    that order is independent of ``workers``.
    """
    bounds = chunk_bounds(total)
    workers = min(resolve_workers(workers), max(1, len(bounds)))
    if workers == 1:
        return [kernel(lo, hi) for lo, hi in bounds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(kernel, lo, hi) for lo, hi in bounds]
        return [f.result() for f in futures]


@dataclass
class Moments:
    """Count, mean and sum of squared deviations, combined in a fixed order."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=float)
        mean = values.mean(axis=0)
        return cls(values.shape[0], mean, ((values - mean) ** 2).sum(axis=0))

    def combine(self, other: "Moments") -> "Moments":
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / n)
        return Moments(n, mean, m2)

    @property
    def std_error(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


def combine_moments(parts: Sequence[Moments]) -> Moments:
    out = parts[0]
    for p in parts[1:]:
        out = out.combine(p)
    return out


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def read_csv_matrix(path: str | Path) -> np.ndarray:
    """Read a headerless comma-separated matrix, one row per line."""
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        return np.zeros((0, 0))
    try:
        data = [[float(tok) for tok in row.split(",")] for row in rows]
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise InvalidInputError(f"{path}: ragged rows")
    return as_matrix(np.array(data), str(path))


def read_csv_vector(path: str | Path) -> np.ndarray:
    """Read a vector stored either as one row or as one column."""
    return as_vector(read_csv_matrix(path).ravel(), str(path))


def format_float(x: float) -> str:
    """Round-trip safe rendering with 17 significant digits."""
    return format(float(x), ".17g")
