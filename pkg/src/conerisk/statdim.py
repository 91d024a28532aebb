"""Statistical dimension of closed convex cones.

``delta(T) = E ||P_T(Z)||^2`` estimated by Monte Carlo, with closed forms for
the monotone cone and for products used as oracles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Sequence

import numpy as np

from .exceptions import ConeriskError, InvalidInputError, NumericalError
from .numerics import Moments, RandomStream, combine_moments, run_chunks

DEFAULT_SAMPLES = 100_000
MIN_SAMPLES = 100
_UNIFORM_HALF_WIDTH = np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Distribution of the noise vector ``Z``.

    ``gaussian``
        Standard normal coordinates.
    ``scaled-uniform``
        Uniform on ``[-sqrt(3), sqrt(3)]``, unit variance.
    ``user-table``
        IID coordinates from a discrete law given as ``values`` with
        ``weights`` summing to one; the mean must be zero.
    """

    tag: str = "gaussian"
    values: np.ndarray | None = field(default=None)
    weights: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.tag not in ("gaussian", "scaled-uniform", "user-table"):
            raise InvalidInputError(f"unknown noise model {self.tag!r}")
        if self.tag != "user-table":
            return
        if self.values is None or self.weights is None:
            raise InvalidInputError("user-table noise needs values and weights")
        vals = np.asarray(self.values, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if vals.shape != w.shape or vals.size == 0:
            raise InvalidInputError("values and weights must be nonempty and of equal length")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(w))) or np.any(w < 0):
            raise InvalidInputError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"weights sum to {w.sum()!r}, expected 1")
        mean = float(vals @ w)
        if abs(mean) > 1e-9 * max(1.0, float(np.abs(vals).max())):
            raise InvalidInputError(f"noise table has nonzero mean {mean!r}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_table(cls, table) -> "NoiseModel":
        """Build a ``user-table`` model from an array of ``(value, weight)`` rows."""
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2:
            raise InvalidInputError("noise table must have two columns: value, weight")
        return cls("user-table", table[:, 0], table[:, 1])

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.tag == "gaussian":
            return rng.standard_normal(n)
        if self.tag == "scaled-uniform":
            return rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, n)
        idx = rng.choice(self.values.size, size=n, p=self.weights)
        return self.values[idx]


GAUSSIAN = NoiseModel()


def parse_noise(text: str, loader=None) -> NoiseModel:
    """``gaussian``, ``scaled-uniform`` or ``table:<csvfile>``."""
    text = text.strip()
    if text.startswith("table:"):
        if loader is None:
            from .numerics import read_csv_matrix as loader
        return NoiseModel.from_table(loader(text[len("table:"):]))
    return NoiseModel(text)


def draw_block(noise: NoiseModel, seed: int, lo: int, hi: int, n: int) -> np.ndarray:
    """Noise for replicates ``lo..hi-1``, one row each, from per-replicate streams."""
    Z = np.empty((hi - lo, n))
    for r, i in enumerate(range(lo, hi)):
        Z[r] = noise.draw(RandomStream(seed, i).generator(), n)
    return Z


def project_rows(cset, X: np.ndarray, first_index: int = 0) -> np.ndarray:
    """Project every row; a failure is reported with its replicate index."""
    try:
        return cset.project_many(X)
    except ConeriskError:
        for r in range(X.shape[0]):
            try:
                cset.project(X[r])
            except ConeriskError as exc:
                raise NumericalError(f"projection failed at replicate {first_index + r}: {exc}") \
                    from exc
        raise


@dataclass(frozen=True)
class StatDimEstimate:
    value: float
    std_error: float
    samples: int
    seed: int
    noise_tag: str = "gaussian"

    def agrees(self, other: "StatDimEstimate | float", k: float = 3.0, slack: float = 0.0) -> bool:
        """``|a - b| <= k * combined SE + slack``."""
        if isinstance(other, StatDimEstimate):
            se = np.hypot(self.std_error, other.std_error)
            b = other.value
        else:
            se, b = self.std_error, float(other)
        return abs(self.value - b) <= k * se + slack


def _statdim_chunk(cone, noise: NoiseModel, seed: int, lo: int, hi: int) -> Moments:
    Z = draw_block(noise, seed, lo, hi, cone.dim)
    P = project_rows(cone, Z, lo)
    return Moments.of(np.einsum("ij,ij->i", P, P))


def mc_statdim(cone, noise: NoiseModel = GAUSSIAN, samples: int = DEFAULT_SAMPLES,
               seed: int = 0, workers: int | None = None) -> StatDimEstimate:
    """Monte Carlo estimate of ``E ||P_cone(Z)||^2``.

    Parameters
    ----------
    cone : constraint set
        Must be a cone (``cone.is_cone``).
    noise : NoiseModel
    samples : int
        At least 100.
    seed : int
        Master seed; replicate ``i`` uses the stream ``(seed, i)``.
    workers : int, optional
        Process count; never changes the result.
    """
    if not getattr(cone, "is_cone", False):
        raise InvalidInputError(f"{type(cone).__name__} is not a cone")
    if samples < MIN_SAMPLES:
        raise InvalidInputError(f"samples must be at least {MIN_SAMPLES}")
    parts = run_chunks(partial(_statdim_chunk, cone, noise, seed), samples, workers)
    mom = combine_moments(parts)
    return StatDimEstimate(float(mom.mean), float(mom.std_error), samples, seed, noise.tag)


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, j) for j in range(1, m + 1)), Fraction(0))


def statdim_monotone_closed(m: int, exact: bool = False):
    """Statistical dimension of the monotone cone in R^m, the harmonic number H_m."""
    if m < 1:
        raise InvalidInputError("m must be positive")
    h = harmonic(m)
    return h if exact else float(h)


def statdim_product(parts: Sequence):
    """Statistical dimension of a product of cones: the sum of the parts."""
    total = 0
    for p in parts:
        if p < 0:
            raise InvalidInputError("statistical dimensions are nonnegative")
        total = total + p
    return total
