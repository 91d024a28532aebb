"""Constraint-set data model.

Every set family is an immutable class exposing ``project`` (one vector,
returns a :class:`~conerisk.projections.ProjectionResult`), ``project_many``
(rows of a matrix, returns the projected rows) and ``contains``. The
module-level :func:`project` and :func:`membership` dispatch to them.

Polyhedral families also expose their H-representation through
``halfspaces()`` (``A u <= b``) and ``equalities()`` (``E u = 0``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from . import projections as P
from .exceptions import InvalidInputError
from .numerics import as_matrix, as_vector, read_csv_matrix, read_csv_vector

DEFAULT_TOL = 1e-9


def _scaled(tol: float, x: np.ndarray) -> float:
    return tol * max(1.0, float(np.linalg.norm(x)))


def _difference_rows(n: int, cuts: Sequence[int]) -> np.ndarray:
    """Rows ``e_i - e_{i+1}`` for the (0-based) indices ``i`` in ``cuts``."""
    D = np.zeros((len(cuts), n))
    for r, i in enumerate(cuts):
        D[r, i] = 1.0
        D[r, i + 1] = -1.0
    return D


def check_nonproportional(A: np.ndarray, b: np.ndarray | None = None,
                          tol: float = 1e-12) -> None:
    """Reject zero rows and pairs of rows ``(a_j, b_j)`` that are scalar multiples."""
    M = A if b is None else np.hstack([A, np.asarray(b, dtype=float).reshape(-1, 1)])
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms == 0.0):
        raise InvalidInputError("constraint matrix has a zero row")
    if M.shape[0] < 2:
        return
    U = M / np.linalg.norm(M, axis=1, keepdims=True)
    C = np.abs(U @ U.T)
    np.fill_diagonal(C, 0.0)
    j, k = np.unravel_index(np.argmax(C), C.shape)
    if C[j, k] >= 1.0 - tol:
        raise InvalidInputError(f"constraint rows {j} and {k} are scalar multiples")


class _SetBase:
    dim: int
    is_cone: bool = False
    is_polyhedral: bool = False
    is_bounded: bool = False
    #: accuracy of the projection routine, relative to the input scale
    projection_tol: float = 0.0

    def _point(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, x) -> P.ProjectionResult:
        x = as_vector(x, dim=self.dim)
        return P._result(x, self._point(x))

    def project_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        out = np.empty_like(X)
        for i in range(X.shape[0]):
            out[i] = self._point(X[i])
        return out

    def precise_point(self, x) -> np.ndarray:
        """Projection computed at the tightest available tolerance."""
        return self._point(as_vector(x, dim=self.dim))

    def contains(self, x, tol: float = DEFAULT_TOL) -> bool:
        raise NotImplementedError

    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        raise InvalidInputError(f"{type(self).__name__} is not polyhedral")

    def equalities(self) -> np.ndarray:
        return np.zeros((0, self.dim))


@dataclass(frozen=True)
class Orthant(_SetBase):
    """Nonnegative orthant of R^n."""

    n: int
    is_cone = True
    is_polyhedral = True

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be positive")

    @property
    def dim(self) -> int:
        return self.n

    def _point(self, x):
        return np.maximum(x, 0.0)

    def project(self, x):
        return P.project_orthant(as_vector(x, dim=self.n))

    def project_many(self, X):
        return np.maximum(np.asarray(X, dtype=float).reshape(-1, self.n), 0.0)

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.n)
        return bool(np.all(x >= -_scaled(tol, x)))

    def halfspaces(self):
        return -np.eye(self.n), np.zeros(self.n)


@dataclass(frozen=True)
class Ball(_SetBase):
    """Closed Euclidean unit ball in R^n."""

    n: int
    is_bounded = True

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be positive")

    @property
    def dim(self) -> int:
        return self.n

    def _point(self, x):
        return x / max(float(np.linalg.norm(x)), 1.0)

    def project_many(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.n)
        return X / np.maximum(np.linalg.norm(X, axis=1), 1.0)[:, None]

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.n)
        return bool(np.linalg.norm(x) <= 1.0 + tol)


@dataclass(frozen=True)
class MonotoneCone(_SetBase):
    """Nondecreasing vectors ``u_1 <= ... <= u_n``."""

    n: int
    is_cone = True
    is_polyhedral = True

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be positive")

    @property
    def dim(self) -> int:
        return self.n

    def _point(self, x):
        return P._monotone_point(x)

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.n)
        return bool(np.all(np.diff(x) >= -_scaled(tol, x)))

    def halfspaces(self):
        return _difference_rows(self.n, range(self.n - 1)), np.zeros(self.n - 1)


@dataclass(frozen=True)
class BlockMonotoneCone(_SetBase):
    """Nondecreasing vectors that are constant on consecutive blocks of given sizes."""

    sizes: tuple
    is_cone = True
    is_polyhedral = True

    def __post_init__(self):
        object.__setattr__(self, "sizes", P._check_sizes(self.sizes))

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    @property
    def _starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(int)

    def _point(self, x):
        return P._block_monotone_point(x, self.sizes, self._starts)

    def project(self, x):
        return P.project_block_monotone(as_vector(x, dim=self.dim), self.sizes)

    def project_many(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        starts = self._starts
        sizes = self.sizes
        return np.stack([P._block_monotone_point(row, sizes, starts) for row in X]) \
            if X.shape[0] else X.copy()

    def _block_ends(self) -> list[int]:
        return [int(e) - 1 for e in np.cumsum(self.sizes)[:-1]]

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.dim)
        t = _scaled(tol, x)
        A, _ = self.halfspaces()
        E = self.equalities()
        return bool(np.all(A @ x <= t) and np.all(np.abs(E @ x) <= t))

    def halfspaces(self):
        ends = self._block_ends()
        return _difference_rows(self.dim, ends), np.zeros(len(ends))

    def equalities(self):
        ends = set(self._block_ends())
        inner = [i for i in range(self.dim - 1) if i not in ends]
        return _difference_rows(self.dim, inner)


@dataclass(frozen=True, eq=False)
class PolyhedralCone(_SetBase):
    """``{u : A u <= 0}``; an empty ``A`` (shape ``(0, n)``) is all of R^n."""

    A: np.ndarray
    validate: bool = field(default=True, repr=False)
    is_cone = True
    is_polyhedral = True
    projection_tol = 1e-10

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise InvalidInputError("A must be 2-D; use shape (0, n) for the full space")
        A = as_matrix(A, "A")
        if self.validate and A.shape[0]:
            check_nonproportional(A)
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def full_space(cls, n: int) -> "PolyhedralCone":
        return cls(np.zeros((0, n)))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def _point(self, x):
        return P._polyhedral_cone_point(self.A, x)[0]

    def project_many(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        if self.A.shape[0] == 0:
            return X.copy()
        out = X.copy()
        # rows already inside the cone are fixed points
        outside = np.flatnonzero(np.any(X @ self.A.T > 0.0, axis=1))
        for i in outside:
            out[i] = self._point(X[i])
        return out

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.dim)
        return bool(np.all(self.A @ x <= _scaled(tol, x)))

    def halfspaces(self):
        return np.array(self.A), np.zeros(self.A.shape[0])


@dataclass(frozen=True, eq=False)
class Polyhedron(_SetBase):
    """``{u : A u <= b}``, projected with Dykstra's algorithm."""

    A: np.ndarray
    b: np.ndarray
    validate: bool = field(default=True, repr=False)
    is_polyhedral = True
    projection_tol = 1e-8

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        b = as_vector(self.b, "b", A.shape[0])
        if self.validate and A.shape[0]:
            check_nonproportional(A, b)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def is_bounded(self) -> bool:
        from .geometry import recession_cone_is_trivial
        return recession_cone_is_trivial(self.A)

    def _point(self, x):
        return P.project_polyhedron(self.A, self.b, x).point

    def project(self, x):
        return P.project_polyhedron(self.A, self.b, as_vector(x, dim=self.dim))

    def precise_point(self, x):
        x = as_vector(x, dim=self.dim)
        rough = P.project_polyhedron(self.A, self.b, x, tol=1e-10, step_tol=1e-12).point
        return P.polish_polyhedron_point(self.A, self.b, x, rough)

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.dim)
        scale = np.maximum(1.0, np.abs(self.b))
        return bool(np.all(self.A @ x - self.b <= tol * scale * max(1.0, np.linalg.norm(x))))

    def halfspaces(self):
        return np.array(self.A), np.array(self.b)


@dataclass(frozen=True)
class ParabolaEpigraph(_SetBase):
    """``{u in R^2 : u_2 >= u_1^2}``."""

    @property
    def dim(self) -> int:
        return 2

    def _point(self, x):
        return P._epigraph_point(x)

    def project(self, x):
        return P.project_parabola_epigraph(x)

    def project_many(self, X):
        return P._epigraph_points(np.asarray(X, dtype=float).reshape(-1, 2))

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=2)
        return bool(x[1] >= x[0] ** 2 - _scaled(tol, x))


@dataclass(frozen=True, eq=False)
class FaceCone(_SetBase):
    """``{u : A u <= 0, E u = 0}``: a polyhedral cone cut by linear equalities.

    Used for tangent cones intersected with the hyperplane orthogonal to the
    residual, and for cones with built-in equalities (block monotone).
    """

    A: np.ndarray
    E: np.ndarray
    is_cone = True
    is_polyhedral = True
    projection_tol = 1e-10

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        A = np.asarray(self.A, dtype=float)
        n = A.shape[1] if A.ndim == 2 and A.shape[1] else E.reshape(-1, E.shape[-1]).shape[1]
        A = A.reshape(-1, n)
        E = E.reshape(-1, n)
        A.setflags(write=False)
        E.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "_reduced", P._EqualityReducedCone(A, E))

    @classmethod
    def from_set(cls, cone: _SetBase, extra_equalities=None) -> "FaceCone":
        A, b = cone.halfspaces()
        if np.any(b != 0):
            raise InvalidInputError("not a cone: nonzero offsets")
        E = cone.equalities()
        if extra_equalities is not None:
            E = np.vstack([E, np.asarray(extra_equalities, dtype=float).reshape(-1, cone.dim)])
        return cls(A, E)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def _point(self, x):
        return self._reduced.point(x)

    def project_many(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        red = self._reduced
        if red.basis.shape[1] == 0:
            return np.zeros_like(X)
        W = X @ red.basis
        out = W.copy()
        if red.A_reduced.shape[0]:
            outside = np.flatnonzero(np.any(W @ red.A_reduced.T > 0.0, axis=1))
            for i in outside:
                out[i] = P._polyhedral_cone_point(red.A_reduced, W[i])[0]
        return out @ red.basis.T

    def contains(self, x, tol=DEFAULT_TOL):
        x = as_vector(x, dim=self.dim)
        t = _scaled(tol, x)
        return bool(np.all(self.A @ x <= t) and np.all(np.abs(self.E @ x) <= t))

    def halfspaces(self):
        return np.array(self.A), np.zeros(self.A.shape[0])

    def equalities(self):
        return np.array(self.E)


@dataclass(frozen=True)
class ZeroCone(_SetBase):
    """The trivial cone ``{0}`` in R^n (core cone of a bounded set)."""

    n: int
    is_cone = True
    is_polyhedral = True
    is_bounded = True

    @property
    def dim(self) -> int:
        return self.n

    def _point(self, x):
        return np.zeros_like(x)

    def project_many(self, X):
        return np.zeros_like(np.asarray(X, dtype=float).reshape(-1, self.n))

    def contains(self, x, tol=DEFAULT_TOL):
        return bool(np.linalg.norm(as_vector(x, dim=self.n)) <= tol)

    def halfspaces(self):
        return np.zeros((0, self.n)), np.zeros(0)

    def equalities(self):
        return np.eye(self.n)


ConstraintSet = Union[Orthant, Ball, MonotoneCone, BlockMonotoneCone, PolyhedralCone,
                      Polyhedron, ParabolaEpigraph, FaceCone, ZeroCone]


def project(cset: ConstraintSet, x) -> P.ProjectionResult:
    """Euclidean projection of ``x`` onto ``cset``."""
    return cset.project(x)


def membership(cset: ConstraintSet, x, tol: float = DEFAULT_TOL) -> bool:
    """True if every defining constraint of ``cset`` holds at ``x`` within ``tol``."""
    return cset.contains(x, tol)


# ---------------------------------------------------------------------------
# Text specs: "orthant:n=3", "blockmonotone:sizes=2,3,2", "cone:A=a.csv", ...
# ---------------------------------------------------------------------------

def _parse_fields(body: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    key = None
    for tok in body.split(","):
        tok = tok.strip()
        if "=" in tok:
            key, _, val = tok.partition("=")
            key = key.strip().lower()
            if key in fields:
                raise InvalidInputError(f"duplicate key {key!r}")
            fields[key] = val.strip()
        elif key is not None and tok:
            fields[key] += "," + tok
        elif tok:
            raise InvalidInputError(f"cannot parse {tok!r}")
    return fields


def _int_field(fields: dict, key: str, kind: str) -> int:
    if key not in fields:
        raise InvalidInputError(f"{kind} needs {key}=...")
    try:
        return int(fields[key])
    except ValueError:
        raise InvalidInputError(f"{key} must be an integer, got {fields[key]!r}") from None


def parse_set_spec(spec: str, base_dir: str | Path | None = None,
                   loader: Callable[[Path], np.ndarray] = read_csv_matrix) -> ConstraintSet:
    """Build a constraint set from its command-line text form.

    Relative CSV paths are resolved against ``base_dir`` when given.
    """
    if not isinstance(spec, str) or not spec.strip():
        raise InvalidInputError("empty set spec")
    kind, _, body = spec.strip().partition(":")
    kind = kind.strip().lower()
    fields = _parse_fields(body) if body else {}

    def path(key: str) -> Path:
        if key not in fields:
            raise InvalidInputError(f"{kind} needs {key}=<csvfile>")
        p = Path(fields[key])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return p

    allowed = {
        "orthant": {"n"}, "ball": {"n"}, "monotone": {"n"}, "blockmonotone": {"sizes"},
        "cone": {"a"}, "polyhedron": {"a", "b"}, "parabola": set(),
    }
    if kind not in allowed:
        raise InvalidInputError(f"unknown set kind {kind!r}")
    extra = set(fields) - allowed[kind]
    if extra:
        raise InvalidInputError(f"unexpected keys for {kind}: {sorted(extra)}")

    if kind == "orthant":
        return Orthant(_int_field(fields, "n", kind))
    if kind == "ball":
        return Ball(_int_field(fields, "n", kind))
    if kind == "monotone":
        return MonotoneCone(_int_field(fields, "n", kind))
    if kind == "blockmonotone":
        if "sizes" not in fields:
            raise InvalidInputError("blockmonotone needs sizes=...")
        try:
            sizes = tuple(int(s) for s in fields["sizes"].split(","))
        except ValueError:
            raise InvalidInputError(f"bad sizes {fields['sizes']!r}") from None
        return BlockMonotoneCone(sizes)
    if kind == "cone":
        return PolyhedralCone(loader(path("a")))
    if kind == "polyhedron":
        A = loader(path("a"))
        b = read_csv_vector(path("b")) if loader is read_csv_matrix else np.ravel(loader(path("b")))
        return Polyhedron(A, b)
    return ParabolaEpigraph()
