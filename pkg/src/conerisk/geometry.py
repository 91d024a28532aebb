"""Conic geometry of polyhedra.

Tangent cones from active constraints, the smallest face of a polyhedral
cone lying in the hyperplane orthogonal to a residual, generator filtering,
core cones and the isometric embedding of block monotone cones.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sets as S
from .exceptions import InvalidInputError
from .numerics import as_matrix, as_vector, nnls, rowspace_membership
from .projections import _polyhedral_cone_point


@dataclass(frozen=True, eq=False)
class TangentConeRep:
    """``T = {u : A_active u <= 0, E u = 0}`` at ``base_point``.

    ``E`` holds equality constraints of the underlying set (block monotone
    cones) and is empty for plain H-representations.
    """

    A_active: np.ndarray
    base_point: np.ndarray
    active_indices: tuple
    equalities: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.equalities is None:
            object.__setattr__(self, "equalities", np.zeros((0, self.base_point.shape[0])))

    @property
    def dim(self) -> int:
        return self.base_point.shape[0]

    def cone(self) -> S.FaceCone:
        return S.FaceCone(self.A_active, self.equalities)

    def face(self, v) -> S.FaceCone:
        """``T`` intersected with the hyperplane orthogonal to ``v``."""
        v = as_vector(v, "v", self.dim)
        return S.FaceCone(self.A_active, np.vstack([self.equalities, v]))


@dataclass(frozen=True, eq=False)
class FaceRep:
    """``{u : A_J u = 0, A_{J^c} u <= 0}`` with ``J`` = ``equality_indices``."""

    A: np.ndarray
    equality_indices: tuple
    inequality_indices: tuple
    normal: np.ndarray

    def cone(self) -> S.FaceCone:
        eq = list(self.equality_indices)
        ineq = list(self.inequality_indices)
        return S.FaceCone(self.A[ineq], self.A[eq])

    def project(self, x) -> np.ndarray:
        return self.cone().project(x).point

    def contains(self, u, tol: float = 1e-9) -> bool:
        return self.cone().contains(u, tol)

    def __str__(self) -> str:
        eq = ",".join(str(j + 1) for j in self.equality_indices)
        ineq = ",".join(str(j + 1) for j in self.inequality_indices)
        return f"equalities={{{eq}}} inequalities={{{ineq}}}"


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """Conic generators stored as the rows of ``generators``."""

    generators: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.generators, dtype=float)
        if G.ndim != 2:
            raise InvalidInputError("generators must be a 2-D array, one generator per row")
        if G.shape[0] and np.any(np.linalg.norm(G, axis=1) == 0.0):
            raise InvalidInputError("zero generator")
        object.__setattr__(self, "generators", G)

    def __len__(self) -> int:
        return self.generators.shape[0]

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def project(self, x) -> np.ndarray:
        """Projection onto ``cone{g_1, ..., g_p}``; ``{0}`` when empty."""
        x = as_vector(x, dim=self.dim)
        if len(self) == 0:
            return np.zeros_like(x)
        G = self.generators.T
        return G @ nnls(G, x)


# ---------------------------------------------------------------------------
# Tangent cones
# ---------------------------------------------------------------------------

def tangent_cone(cset, theta0, tol: float = 1e-9) -> TangentConeRep:
    """Tangent cone of a polyhedral set (or the unit ball) at ``theta0``.

    Constraints with ``|<a_j, theta0> - b_j| <= tol * max(1, |b_j|)`` are
    active. Near-active constraints are kept, which errs on the side of a
    smaller cone.
    """
    n = cset.dim
    theta0 = as_vector(theta0, "theta0", n)
    if isinstance(cset, S.Ball):
        r = float(np.linalg.norm(theta0))
        if r > 1.0 + tol:
            raise InvalidInputError("theta0 is outside the ball")
        if r >= 1.0 - tol:
            return TangentConeRep((theta0 / r).reshape(1, n), theta0, (0,))
        return TangentConeRep(np.zeros((0, n)), theta0, ())
    if isinstance(cset, S.ParabolaEpigraph):
        t1, t2 = theta0
        gap = t2 - t1 * t1
        if gap < -tol * max(1.0, abs(t2)):
            raise InvalidInputError("theta0 is outside the epigraph")
        if gap <= tol * max(1.0, abs(t2)):
            return TangentConeRep(np.array([[2.0 * t1, -1.0]]), theta0, (0,))
        return TangentConeRep(np.zeros((0, 2)), theta0, ())
    if not cset.is_polyhedral:
        raise InvalidInputError(f"tangent cone of {type(cset).__name__} is not supported")
    A, b = cset.halfspaces()
    E = cset.equalities()
    slack = A @ theta0 - b
    scale = tol * np.maximum(1.0, np.abs(b))
    if np.any(slack > scale) or np.any(np.abs(E @ theta0) > tol * max(1.0, np.linalg.norm(theta0))):
        raise InvalidInputError("theta0 is not in the set")
    active = np.flatnonzero(np.abs(slack) <= scale)
    return TangentConeRep(A[active], theta0, tuple(int(j) for j in active), E)


# ---------------------------------------------------------------------------
# Residual faces
# ---------------------------------------------------------------------------

def residual_face(A, y, tol: float = 1e-9) -> FaceRep:
    """Face ``K ∩ v⊥`` of ``K = {u : A u <= 0}`` with a minimal equality set.

    Here ``v = y - P_K(y)``. Starting from the support of the NNLS multipliers
    (``v = A^T lam``) indices are dropped in descending order as long as ``v``
    stays in the row space of the remaining rows. Any superset of the minimal
    index set keeps ``v`` in its row space, so a single pass suffices.
    """
    A = as_matrix(A, "A")
    y = as_vector(y, "y", A.shape[1])
    m = A.shape[0]
    _, lam = _polyhedral_cone_point(A, y)
    v = A.T @ lam if m else np.zeros_like(y)
    J = [int(j) for j in np.flatnonzero(lam > 0.0)]
    if not rowspace_membership(v, A[J] if J else np.zeros((0, A.shape[1])), tol):
        J = list(range(m))
    for j in sorted(J, reverse=True):
        rest = [i for i in J if i != j]
        rows = A[rest] if rest else np.zeros((0, A.shape[1]))
        if rowspace_membership(v, rows, tol):
            J = rest
    J = sorted(J)
    comp = tuple(i for i in range(m) if i not in set(J))
    return FaceRep(A, tuple(J), comp, v)


def face_is_minimal(face: FaceRep, tol: float = 1e-9) -> bool:
    """True if dropping any single equality index loses row-space membership."""
    J = list(face.equality_indices)
    for j in J:
        rest = [i for i in J if i != j]
        rows = face.A[rest] if rest else np.zeros((0, face.A.shape[1]))
        if rowspace_membership(face.normal, rows, tol):
            return False
    return True


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def monotone_generators(n: int) -> GeneratorSet:
    """Rows of the generator matrix of the monotone cone in R^n.

    ``-1``, ``+1`` (all-ones vectors) and the suffix indicators
    ``1{i >= k}`` for ``k = 2..n``.
    """
    if n < 1:
        raise InvalidInputError("n must be positive")
    G = np.zeros((n + 1, n))
    G[0] = -1.0
    G[1] = 1.0
    for k in range(1, n):
        G[k + 1, k:] = 1.0
    return GeneratorSet(G)


def generators_in_hyperplane(G: GeneratorSet, v, tol: float = 1e-9) -> GeneratorSet:
    """Generators orthogonal to ``v``.

    Every generator must satisfy ``<v, g> <= 0``, as happens when ``v`` is the
    residual of a projection onto the generated cone.
    """
    v = as_vector(v, "v", G.dim)
    if len(G) == 0:
        return G
    X = G.generators
    ip = X @ v
    thresh = tol * np.maximum(1.0, np.linalg.norm(X, axis=1) * np.linalg.norm(v))
    bad = np.flatnonzero(ip > thresh)
    if bad.size:
        raise InvalidInputError(f"generator {int(bad[0])} has <v, g> = {ip[bad[0]]:.3g} > 0")
    return GeneratorSet(X[np.abs(ip) <= thresh].reshape(-1, G.dim))


# ---------------------------------------------------------------------------
# Block monotone isometry and core cones
# ---------------------------------------------------------------------------

def block_monotone_embedding(sizes) -> S.PolyhedralCone:
    """``{v in R^m : v_1/sqrt(s_1) <= ... <= v_m/sqrt(s_m)}``.

    The map ``u -> (sqrt(s_j) * u_{I_j})_j`` is an isometry from the block
    monotone cone onto this cone.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise InvalidInputError("block sizes must be positive and nonempty")
    m = len(sizes)
    w = 1.0 / np.sqrt(np.asarray(sizes, dtype=float))
    A = np.zeros((m - 1, m))
    for j in range(m - 1):
        A[j, j] = w[j]
        A[j, j + 1] = -w[j + 1]
    return S.PolyhedralCone(A, validate=False)


def recession_cone_is_trivial(A, tol: float = 1e-9) -> bool:
    """True if ``{u : A u <= 0} = {0}``, i.e. the rows of ``A`` positively span R^n."""
    A = as_matrix(A, "A")
    n = A.shape[1]
    if A.shape[0] == 0:
        return n == 0
    for i in range(n):
        for sign in (1.0, -1.0):
            e = np.zeros(n)
            e[i] = sign
            lam = nnls(A.T, e)
            if np.linalg.norm(A.T @ lam - e) > tol:
                return False
    return True


def core_cone(cset):
    """Intersection of all tangent cones of ``cset``.

    Cones are their own core cone and bounded sets have core cone ``{0}``.
    For an unbounded polyhedron this is its recession cone; for the parabola
    epigraph it is the vertical ray ``{(0, s) : s >= 0}``.
    """
    if cset.is_cone:
        return cset
    if isinstance(cset, S.Ball):
        return S.ZeroCone(cset.n)
    if isinstance(cset, S.Polyhedron):
        if cset.is_bounded:
            return S.ZeroCone(cset.dim)
        return S.PolyhedralCone(cset.A, validate=False)
    if isinstance(cset, S.ParabolaEpigraph):
        return S.FaceCone(np.array([[0.0, -1.0]]), np.array([[1.0, 0.0]]))
    raise InvalidInputError(f"core cone not computable for {type(cset).__name__}")
