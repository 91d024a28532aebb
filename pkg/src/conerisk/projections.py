"""Euclidean projections onto the convex sets used throughout the package.

Each ``project_*`` function returns a :class:`ProjectionResult`; the
underscore-prefixed ``_*_point`` variants return only the projected point and
are what the Monte Carlo loops call.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InvalidInputError, NumericalError
from .numerics import as_matrix, as_vector, nnls, orthonormal_complement


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    residual: np.ndarray
    iterations: int = 0
    converged: bool = True


def _result(x: np.ndarray, point: np.ndarray, iterations: int = 0,
            converged: bool = True) -> ProjectionResult:
    return ProjectionResult(point, x - point, iterations, converged)


# ---------------------------------------------------------------------------
# Orthant, ball
# ---------------------------------------------------------------------------

def project_orthant(x) -> ProjectionResult:
    x = as_vector(x)
    return _result(x, np.maximum(x, 0.0))


def project_ball(x) -> ProjectionResult:
    """Projection onto the closed unit ball, ``x / max(||x||, 1)``."""
    x = as_vector(x)
    return _result(x, x / max(float(np.linalg.norm(x)), 1.0))


# ---------------------------------------------------------------------------
# Pool adjacent violators
# ---------------------------------------------------------------------------

def pava_blocks(values: Sequence, weights: Sequence | None = None) -> list[list]:
    """Weighted pool-adjacent-violators pass.

    Works on any ordered field (floats or :class:`fractions.Fraction`).
    Returns the fitted blocks as ``[level, total_weight, start, stop)``
    lists. Adjacent blocks with exactly equal levels are left unpooled.
    """
    n = len(values)
    if weights is None:
        weights = [1] * n
    stack: list[list] = []
    for i in range(n):
        w = weights[i]
        blk = [values[i], w, i, i + 1]
        while stack and stack[-1][0] > blk[0]:
            prev = stack.pop()
            tw = prev[1] + blk[1]
            level = (prev[0] * prev[1] + blk[0] * blk[1]) / tw
            blk = [level, tw, prev[2], blk[3]]
        stack.append(blk)
    return stack


def pava(values: Sequence, weights: Sequence | None = None) -> list:
    """Weighted isotonic (nondecreasing) least-squares fit as a list."""
    out = [None] * len(values)
    for level, _, lo, hi in pava_blocks(values, weights):
        for i in range(lo, hi):
            out[i] = level
    return out


def _monotone_point(x: np.ndarray) -> np.ndarray:
    if x.shape[0] <= 1 or np.all(x[1:] >= x[:-1]):
        return x.copy()
    out = np.empty_like(x)
    for level, _, lo, hi in pava_blocks(x.tolist()):
        out[lo:hi] = level
    return out


def project_monotone(x) -> ProjectionResult:
    """Projection onto the monotone cone ``{u : u_1 <= ... <= u_n}``."""
    x = as_vector(x)
    return _result(x, _monotone_point(x))


def project_weighted_monotone(y, w) -> np.ndarray:
    """``argmin_{x nondecreasing} sum_j w_j (x_j - y_j)^2``."""
    y = as_vector(y, "y")
    w = as_vector(w, "w", y.shape[0])
    if np.any(w <= 0):
        raise InvalidInputError("weights must be strictly positive")
    return np.asarray(pava(y.tolist(), w.tolist()), dtype=float)


def _check_sizes(sizes: Sequence[int], n: int | None = None) -> tuple[int, ...]:
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise InvalidInputError("block sizes must be positive and nonempty")
    if n is not None and sum(sizes) != n:
        raise InvalidInputError(f"block sizes sum to {sum(sizes)}, expected {n}")
    return sizes


def _block_monotone_point(x: np.ndarray, sizes: tuple[int, ...],
                          starts: np.ndarray) -> np.ndarray:
    means = np.add.reduceat(x, starts) / np.asarray(sizes, dtype=float)
    levels = pava(means.tolist(), list(sizes))
    return np.repeat(np.asarray(levels, dtype=float), sizes)


def project_block_monotone(x, sizes: Sequence[int]) -> ProjectionResult:
    """Projection onto nondecreasing vectors constant on contiguous blocks.

    Block values are the weighted isotonic fit of the block means, with the
    block sizes as weights.
    """
    x = as_vector(x)
    sizes = _check_sizes(sizes, x.shape[0])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return _result(x, _block_monotone_point(x, sizes, starts))


# ---------------------------------------------------------------------------
# Polyhedral cones and polyhedra
# ---------------------------------------------------------------------------

def _polyhedral_cone_point(A: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Moreau: x = P_K(x) + P_{K polar}(x), with K polar = {A^T lam : lam >= 0}
    if A.shape[0] == 0:
        return x.copy(), np.zeros(0)
    lam = nnls(A.T, x)
    return x - A.T @ lam, lam


def project_polyhedral_cone(A, x) -> ProjectionResult:
    """Projection onto ``K = {u : A u <= 0}`` through its polar cone."""
    x = as_vector(x)
    A = as_matrix(A, "A", ncols=x.shape[0])
    point, _ = _polyhedral_cone_point(A, x)
    return _result(x, point)


def polyhedral_cone_multipliers(A, x) -> np.ndarray:
    """NNLS multipliers ``lam`` with ``x - P_K(x) = A^T lam``."""
    x = as_vector(x)
    A = as_matrix(A, "A", ncols=x.shape[0])
    return _polyhedral_cone_point(A, x)[1]


class _EqualityReducedCone:
    """``{u : A u <= 0, E u = 0}`` expressed in coordinates of ``null(E)``."""

    def __init__(self, A: np.ndarray, E: np.ndarray):
        n = A.shape[1] if A.size else E.shape[1]
        self.n = n
        self.basis = orthonormal_complement(E, n)
        self.A_reduced = A @ self.basis if A.shape[0] else np.zeros((0, self.basis.shape[1]))
        if self.A_reduced.shape[0]:
            keep = np.linalg.norm(self.A_reduced, axis=1) > 1e-14 * max(1.0, np.abs(A).max())
            self.A_reduced = self.A_reduced[keep]

    def point(self, x: np.ndarray) -> np.ndarray:
        if self.basis.shape[1] == 0:
            return np.zeros(self.n)
        w = self.basis.T @ x
        pw, _ = _polyhedral_cone_point(self.A_reduced, w)
        return self.basis @ pw


def project_cone_with_equality(A, v, x) -> ProjectionResult:
    """Projection onto ``{u : A u <= 0, <v, u> = 0}``.

    ``v`` may also be a matrix whose rows are several equality normals. With
    ``v = 0`` this is :func:`project_polyhedral_cone`.
    """
    x = as_vector(x)
    n = x.shape[0]
    A = as_matrix(A, "A", ncols=n) if np.size(A) else np.zeros((0, n))
    E = np.asarray(v, dtype=float).reshape(-1, n)
    return _result(x, _EqualityReducedCone(A, E).point(x))


def _halfspace_point(z: np.ndarray, a: np.ndarray, b: float, aa: float) -> np.ndarray:
    excess = a @ z - b
    if excess <= 0.0:
        return z
    return z - (excess / aa) * a


def project_polyhedron(A, b, x, tol: float = 1e-8, step_tol: float = 1e-10,
                       max_sweeps: int = 100_000) -> ProjectionResult:
    """Projection onto ``{u : A u <= b}`` by Dykstra's alternating projections.

    Stops when the largest constraint violation is below
    ``tol * max(1, ||x||)`` and the change over one sweep is below
    ``step_tol * max(1, ||x||)``. When ``max_sweeps`` is exhausted the
    current iterate is returned with ``converged=False``.
    """
    x = as_vector(x)
    n = x.shape[0]
    A = as_matrix(A, "A", ncols=n)
    b = as_vector(b, "b", A.shape[0])
    m = A.shape[0]
    if m == 0 or np.all(A @ x <= b):
        return _result(x, x.copy())
    aa = np.einsum("ij,ij->i", A, A)
    if np.any(aa == 0.0):
        raise InvalidInputError("A has a zero row")
    scale = max(1.0, float(np.linalg.norm(x)))
    z = x.copy()
    incr = np.zeros((m, n))
    rows = [(A[j], float(b[j]), float(aa[j])) for j in range(m)]
    for sweep in range(1, max_sweeps + 1):
        z_old = z
        for j, (a, bj, aj) in enumerate(rows):
            y = z + incr[j]
            znew = _halfspace_point(y, a, bj, aj)
            incr[j] = y - znew
            z = znew
        violation = float(np.max(A @ z - b))
        change = float(np.linalg.norm(z - z_old))
        if violation < tol * scale and change < step_tol * scale:
            return _result(x, z, sweep, True)
    return _result(x, z, max_sweeps, False)


def polish_polyhedron_point(A, b, x, point, tol: float = 1e-6) -> np.ndarray:
    """Refine an approximate projection onto ``{u : A u <= b}``.

    Constraints within ``tol`` of being active at ``point`` are taken as the
    active set ``J``. With ``q`` solving ``A_J q = b_J``, the projection of
    ``x`` onto ``{A_J u <= b_J}`` is ``q + P_K(x - q)`` for the cone
    ``K = {A_J d <= 0}``, computed exactly by NNLS. The refined point is
    returned only if it is feasible for all constraints and no farther from
    ``x`` than ``point``; otherwise ``point`` is returned unchanged.
    """
    A = as_matrix(A, "A")
    x = as_vector(x, "x", A.shape[1])
    b = as_vector(b, "b", A.shape[0])
    point = as_vector(point, "point", A.shape[1])
    scale = tol * np.maximum(1.0, np.abs(b)) * max(1.0, float(np.linalg.norm(x)))
    J = np.flatnonzero(A @ point - b >= -scale)
    if J.size == 0:
        return point
    AJ, bJ = A[J], b[J]
    q = np.linalg.lstsq(AJ, bJ, rcond=None)[0]
    if np.linalg.norm(AJ @ q - bJ) > 1e-10 * max(1.0, float(np.linalg.norm(bJ))):
        return point
    refined = q + _polyhedral_cone_point(AJ, x - q)[0]
    feas = 1e-10 * np.maximum(1.0, np.abs(b)) * max(1.0, float(np.linalg.norm(refined)))
    if np.all(A @ refined - b <= feas) and \
            np.linalg.norm(refined - x) <= np.linalg.norm(point - x) + 1e-9:
        return refined
    return point


# ---------------------------------------------------------------------------
# Parabola epigraph {u in R^2 : u_2 >= u_1^2}
# ---------------------------------------------------------------------------

def _epigraph_root(x1: float, x2: float, max_iter: int = 100) -> float:
    """Root of ``2 t^3 + (1 - 2 x2) t - x1`` on the side of ``x1``.

    Assumes ``x2 < x1^2``. The cubic is convex on the side of ``x1`` and
    positive at ``t = x1``, so Newton started there decreases monotonically
    to the wanted root; bisection on ``[0, x1]`` backs it up.
    """
    if x1 == 0.0:
        return 0.0
    c = 1.0 - 2.0 * x2
    lo, hi = (0.0, x1) if x1 > 0 else (x1, 0.0)
    t = x1
    for _ in range(max_iter):
        f = 2.0 * t**3 + c * t - x1
        fp = 6.0 * t * t + c
        if fp <= 0.0:
            break
        step = f / fp
        t_new = t - step
        if not lo <= t_new <= hi:
            break
        if abs(step) <= 1e-15 * max(1.0, abs(t)):
            return t_new
        t = t_new
    else:
        return t
    # bisection fallback: f(0) = -x1 and f(x1) = 2 x1 (x1^2 - x2) have opposite signs
    f_lo = 2.0 * lo**3 + c * lo - x1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = 2.0 * mid**3 + c * mid - x1
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(mid)):
            return 0.5 * (lo + hi)
    raise NumericalError(f"epigraph root finder failed for x = ({x1}, {x2})")


def _epigraph_point(x: np.ndarray) -> np.ndarray:
    x1, x2 = float(x[0]), float(x[1])
    if x2 >= x1 * x1:
        return x.copy()
    t = _epigraph_root(x1, x2)
    return np.array([t, t * t])


def project_parabola_epigraph(x) -> ProjectionResult:
    """Projection onto ``{u in R^2 : u_2 >= u_1^2}``."""
    x = as_vector(x, dim=2)
    return _result(x, _epigraph_point(x))


def _epigraph_points(X: np.ndarray) -> np.ndarray:
    """Vectorized epigraph projection of the rows of ``X``."""
    out = X.copy()
    x1, x2 = X[:, 0], X[:, 1]
    outside = x2 < x1 * x1
    if not outside.any():
        return out
    a, b = x1[outside], x2[outside]
    c = 1.0 - 2.0 * b
    t = a.copy()
    done = a == 0.0
    t[done] = 0.0
    for _ in range(100):
        f = 2.0 * t**3 + c * t - a
        fp = 6.0 * t * t + c
        ok = fp > 0
        step = np.where(ok, f / np.where(ok, fp, 1.0), 0.0)
        t = np.where(done | ~ok, t, t - step)
        done |= np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(t))
        if done.all():
            break
    bad = ~done | (np.sign(t) * np.sign(a) < 0)
    for i in np.flatnonzero(bad):
        t[i] = _epigraph_root(float(a[i]), float(b[i]))
    out[outside, 0] = t
    out[outside, 1] = t * t
    return out

