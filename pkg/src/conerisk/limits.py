"""Low- and high-noise limits of the normalized risks.

Exact formulas where they exist (orthant, isotonic regression with
equal-size sub-blocks, unit ball) and Monte Carlo statistical dimensions of
tangent-cone faces otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational
from typing import Sequence

import numpy as np

from . import geometry as G
from . import sets as S
from .exceptions import InvalidInputError, NumericalError
from .numerics import as_vector, format_float
from .projections import pava_blocks
from .statdim import (DEFAULT_SAMPLES, GAUSSIAN, NoiseModel, StatDimEstimate, harmonic,
                      mc_statdim)

CLOSED_FORM = "closed-form"
MONTE_CARLO = "monte-carlo"


class WellSpecifiedInput(InvalidInputError):
    """Raised by :func:`ball_limits` when ``theta*`` lies in the ball.

    ``limit`` carries the common limit of both normalized risks,
    the statistical dimension of the tangent cone at ``theta*``.
    """

    def __init__(self, message: str, limit: float):
        super().__init__(message)
        self.limit = limit


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitValue:
    """A limit with its provenance.

    ``value`` is None when the limit is unknown; ``exact`` holds the rational
    value of closed forms computed in exact arithmetic.
    """

    value: float | None
    std_error: float = 0.0
    exactness: str = CLOSED_FORM
    exact: Fraction | None = None
    status: str = "verified"
    reference: float | None = None
    note: str = ""

    @classmethod
    def closed(cls, value, **kw) -> "LimitValue":
        exact = value if isinstance(value, Fraction) else None
        return cls(float(value), 0.0, CLOSED_FORM, exact, **kw)

    @classmethod
    def from_estimate(cls, est: StatDimEstimate, **kw) -> "LimitValue":
        if est.noise_tag == CLOSED_FORM:
            return cls(est.value, 0.0, CLOSED_FORM, **kw)
        return cls(est.value, est.std_error, MONTE_CARLO, **kw)

    def render(self) -> str:
        if self.value is None:
            return "unknown"
        if self.exact is not None:
            return f"{format_float(self.value)} ({self.exact})"
        if self.exactness == MONTE_CARLO:
            return f"{format_float(self.value)} +/- {format_float(self.std_error)}"
        return format_float(self.value)


def _closed_estimate(value) -> StatDimEstimate:
    return StatDimEstimate(float(value), 0.0, 0, 0, CLOSED_FORM)


@dataclass(frozen=True)
class BlockPartition:
    """Level blocks of the isotonic fit and their finest mean-preserving sub-blocks.

    Ranges are 0-based half-open ``(start, stop)`` pairs.
    """

    theta: tuple
    level_blocks: tuple   # ((start, stop, mu), ...)
    sub_blocks: tuple     # per level block, ((start, stop), ...)

    @property
    def K(self) -> int:
        return len(self.level_blocks)

    def sizes(self, k: int) -> tuple[int, ...]:
        return tuple(hi - lo for lo, hi in self.sub_blocks[k])

    def counts(self) -> tuple[int, ...]:
        """``m_k``, the number of sub-blocks in each level block."""
        return tuple(len(sb) for sb in self.sub_blocks)

    def fit(self) -> list:
        out = [None] * len(self.theta)
        for lo, hi, mu in self.level_blocks:
            out[lo:hi] = [mu] * (hi - lo)
        return out

    def __str__(self) -> str:
        def num(x) -> str:
            if isinstance(x, Fraction):
                return str(x.numerator) if x.denominator == 1 else str(x)
            return format(float(x), "g")
        groups = []
        for sb in self.sub_blocks:
            groups.append("[" + ",".join(
                "(" + ",".join(num(self.theta[i]) for i in range(lo, hi)) + ")"
                for lo, hi in sb) + "]")
        return ",".join(groups)


@dataclass
class LimitReport:
    low_sigma: LimitValue
    bellec_bound: LimitValue
    high_sigma: LimitValue
    extras: dict = field(default_factory=dict)
    partition: BlockPartition | None = None

    def lines(self) -> list[str]:
        out = [f"low_sigma = {self.low_sigma.render()}",
               f"low_sigma_exactness = {self.low_sigma.exactness}"]
        for key, val in self.extras.items():
            out.append(f"{key} = {val.render() if isinstance(val, LimitValue) else val}")
        out += [f"bellec_bound = {self.bellec_bound.render()}",
                f"bellec_bound_exactness = {self.bellec_bound.exactness}",
                f"high_sigma = {self.high_sigma.render()}",
                f"high_sigma_status = {self.high_sigma.status}"]
        if self.high_sigma.reference is not None:
            out.append(f"high_sigma_reference = {format_float(self.high_sigma.reference)}")
        if self.high_sigma.note:
            out.append(f"high_sigma_note = {self.high_sigma.note}")
        if self.partition is not None:
            p = self.partition
            out.append(f"partition = {p}")
            for k, (lo, hi, mu) in enumerate(p.level_blocks):
                subs = " ".join(f"{{{a + 1}..{b}}}" for a, b in p.sub_blocks[k])
                out.append(f"level_block_{k + 1} = {{{lo + 1}..{hi}}} mu={mu} sub_blocks={subs}")
        return out


# ---------------------------------------------------------------------------
# Orthant
# ---------------------------------------------------------------------------

def low_sigma_limit_orthant(theta, exact: bool = False):
    """``n_0 / 2 + n_+`` for the nonnegative orthant."""
    theta = as_vector(theta, "theta")
    n_pos = int(np.sum(theta > 0))
    n_zero = int(np.sum(theta == 0))
    val = Fraction(n_zero, 2) + n_pos
    return val if exact else float(val)


def _orthant_tangent_statdim(theta) -> Fraction:
    # coordinates with positive projection are free, the rest are half-lines
    n_pos = int(np.sum(np.asarray(theta) > 0))
    return n_pos + Fraction(len(theta) - n_pos, 2)


# ---------------------------------------------------------------------------
# Isotonic regression
# ---------------------------------------------------------------------------

def _is_exact_input(theta: Sequence) -> bool:
    for t in theta:
        if isinstance(t, (Integral, Rational)):
            continue
        if isinstance(t, (float, np.floating)) and float(t).is_integer():
            continue
        return False
    return True


def _to_fractions(theta: Sequence) -> list[Fraction]:
    return [Fraction(t) if not isinstance(t, (float, np.floating)) else Fraction(float(t))
            for t in theta]


def isotonic_partition(theta: Sequence, tol: float = 1e-9,
                       exact: bool | None = None) -> BlockPartition:
    """Level blocks of the isotonic fit of ``theta`` and their finest sub-blocks.

    Level blocks are maximal runs where the fit is constant, with level
    ``mu_k``. Each level block is cut greedily: a sub-block is closed as soon
    as the running mean since its start equals ``mu_k``.

    Parameters
    ----------
    theta : sequence of numbers
    tol : float
        Relative tolerance for the float path; the running mean over ``L``
        entries matches when ``|mean - mu| <= tol * max(1, |mu|) * L``.
    exact : bool, optional
        Use rational arithmetic. Defaults to True when every entry is an
        integer or a Fraction.
    """
    theta = list(theta)
    if not theta:
        raise InvalidInputError("theta must be nonempty")
    if exact is None:
        exact = _is_exact_input(theta)
    if exact:
        vals = _to_fractions(theta)
    else:
        vals = [float(t) for t in as_vector(theta, "theta")]

    def close(a, b, length: int) -> bool:
        if exact:
            return a == b
        return abs(a - b) <= tol * max(1.0, abs(b)) * length

    merged: list[list] = []
    for level, w, lo, hi in pava_blocks(vals):
        if merged and close(merged[-1][0], level, 1):
            prev = merged.pop()
            level = (prev[0] * prev[1] + level * w) / (prev[1] + w)
            w, lo = prev[1] + w, prev[2]
        merged.append([level, w, lo, hi])

    level_blocks = []
    sub_blocks = []
    for mu, _, lo, hi in merged:
        subs = []
        start, total = lo, 0
        for i in range(lo, hi):
            total += vals[i]
            length = i + 1 - start
            if close(total / length, mu, i + 1 - lo):
                subs.append((start, i + 1))
                start, total = i + 1, 0
        if start != hi:
            raise NumericalError(
                f"could not close the last sub-block of level block {lo + 1}..{hi} "
                f"within tolerance {tol}; use exact arithmetic")
        level_blocks.append((lo, hi, mu))
        sub_blocks.append(tuple(subs))
    return BlockPartition(tuple(vals), tuple(level_blocks), tuple(sub_blocks))


def block_monotone_statdim(sizes: Sequence[int], samples: int = DEFAULT_SAMPLES,
                           seed: int = 0, noise: NoiseModel = GAUSSIAN,
                           workers: int | None = None) -> LimitValue:
    """Statistical dimension of a block monotone cone.

    Equal block sizes give ``H_m`` exactly; otherwise the isometric cone in
    R^m is simulated.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(set(sizes)) == 1:
        return LimitValue.closed(harmonic(len(sizes)))
    est = mc_statdim(G.block_monotone_embedding(sizes), noise, samples, seed, workers)
    return LimitValue.from_estimate(est)


def _sum_limits(parts: Sequence[LimitValue]) -> LimitValue:
    if all(p.exactness == CLOSED_FORM and p.exact is not None for p in parts):
        return LimitValue.closed(sum((p.exact for p in parts), Fraction(0)))
    value = float(sum(p.value for p in parts))
    se = float(np.sqrt(sum(p.std_error ** 2 for p in parts)))
    tag = MONTE_CARLO if any(p.exactness == MONTE_CARLO for p in parts) else CLOSED_FORM
    return LimitValue(value, se, tag)


def low_sigma_limit_isotonic(theta: Sequence, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                             noise: NoiseModel = GAUSSIAN, workers: int | None = None,
                             exact: bool | None = None,
                             partition: BlockPartition | None = None) -> LimitValue:
    """Low-noise limit for isotonic regression: a sum over level blocks of
    block monotone statistical dimensions.

    Level blocks whose sub-blocks all have the same size contribute the
    harmonic number of their sub-block count; the others are simulated,
    each with its own seed offset ``seed + k``.
    """
    part = partition or isotonic_partition(theta, exact=exact)
    parts = [block_monotone_statdim(part.sizes(k), samples, seed + k, noise, workers)
             for k in range(part.K)]
    return _sum_limits(parts)


def _monotone_tangent_statdim(fit: Sequence) -> Fraction:
    # tangent cone at an isotonic fit: product of monotone cones on level sets
    total = Fraction(0)
    run = 1
    for a, b in zip(fit[:-1], fit[1:]):
        if a == b:
            run += 1
        else:
            total += harmonic(run)
            run = 1
    return total + harmonic(run)


# ---------------------------------------------------------------------------
# Ball
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallLimits:
    m_limit: float
    e_limit: float


def ball_limits(theta) -> BallLimits:
    """Low-noise limits of the normalized risks for the unit ball, ``||theta|| > 1``.

    ``M / sigma^2 -> (n - 1) / ||theta||^2`` and
    ``E / sigma^2 -> (n - 1) / ||theta||``.

    Raises
    ------
    WellSpecifiedInput
        If ``||theta|| <= 1``; its ``limit`` is ``n`` inside the ball and
        ``n - 1/2`` on the sphere.
    """
    theta = as_vector(theta, "theta")
    n = theta.shape[0]
    r = float(np.linalg.norm(theta))
    if r <= 1.0:
        limit = n - 0.5 if r == 1.0 else float(n)
        raise WellSpecifiedInput(f"||theta|| = {r!r} <= 1: theta is in the ball", limit)
    return BallLimits((n - 1) / r**2, (n - 1) / r)


# ---------------------------------------------------------------------------
# General polyhedra
# ---------------------------------------------------------------------------

def base_point(cset, theta) -> np.ndarray:
    """``P_C(theta)`` at the tightest available tolerance."""
    return cset.precise_point(theta)


def _active_tol(cset) -> float:
    # Dykstra output is polished, but stay a little looser than for exact projections
    return 1e-7 if isinstance(cset, S.Polyhedron) else 1e-9


def limit_face(cset, theta) -> S.FaceCone:
    """``T_C(P_C(theta))`` cut by the hyperplane orthogonal to ``theta - P_C(theta)``."""
    theta = as_vector(theta, "theta", cset.dim)
    p0 = base_point(cset, theta)
    tc = G.tangent_cone(cset, p0, tol=_active_tol(cset))
    v = theta - p0
    if np.linalg.norm(v) <= 1e-10 * max(1.0, float(np.linalg.norm(theta))):
        return tc.cone()
    return tc.face(v)


def low_sigma_limit_polyhedral(cset, theta, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                               noise: NoiseModel = GAUSSIAN,
                               workers: int | None = None) -> StatDimEstimate:
    """Monte Carlo low-noise limit for a polyhedral set: the statistical
    dimension of the tangent cone at ``P_C(theta)`` intersected with the
    hyperplane orthogonal to the residual ``theta - P_C(theta)``.
    """
    if not cset.is_polyhedral:
        raise InvalidInputError(f"{type(cset).__name__} is not polyhedral")
    return mc_statdim(limit_face(cset, theta), noise, samples, seed, workers)


def bellec_bound(cset, theta, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                 noise: NoiseModel = GAUSSIAN, workers: int | None = None,
                 method: str = "auto") -> StatDimEstimate:
    """Statistical dimension of the full tangent cone at ``P_C(theta)``.

    ``method="auto"`` uses closed forms for the orthant, the monotone cone and
    the ball (a halfspace on the sphere); ``method="mc"`` always simulates.
    Closed forms come back with ``noise_tag="closed-form"`` and zero SE.
    """
    if method not in ("auto", "mc"):
        raise InvalidInputError(f"unknown method {method!r}")
    theta = as_vector(theta, "theta", cset.dim)
    closed = method == "auto" and noise.tag == "gaussian"
    if isinstance(cset, S.Ball):
        r = float(np.linalg.norm(theta))
        if closed:
            return _closed_estimate(cset.n - 0.5 if r >= 1.0 else cset.n)
    if closed and isinstance(cset, S.Orthant):
        return _closed_estimate(_orthant_tangent_statdim(theta))
    if closed and isinstance(cset, S.MonotoneCone):
        fit = [blk[0] for blk in pava_blocks(_to_fractions(theta))
               for _ in range(blk[2], blk[3])]
        return _closed_estimate(_monotone_tangent_statdim(fit))
    p0 = base_point(cset, theta)
    tc = G.tangent_cone(cset, p0, tol=_active_tol(cset))
    return mc_statdim(tc.cone(), noise, samples, seed, workers)


def high_sigma_limit(cset, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                     noise: NoiseModel = GAUSSIAN, workers: int | None = None) -> LimitValue:
    """High-noise limit of the normalized misspecified risk, when known.

    The candidate is the statistical dimension of the core cone. It is
    reported as verified for the orthant and for bounded sets. For other
    cones the sufficient condition is not checked, so the value carries
    ``status="condition unverified"``. For the parabola epigraph the limit is
    reported unknown, with the core-cone value as reference.
    """
    if isinstance(cset, S.Orthant):
        return LimitValue.closed(Fraction(cset.n, 2))
    if cset.is_bounded:
        return LimitValue.closed(Fraction(0))
    if isinstance(cset, S.ParabolaEpigraph):
        return LimitValue(None, status="unknown", reference=0.5,
                          note="the set fails the sufficient condition; "
                               "compare with the core-cone value")
    core = G.core_cone(cset)
    unverified = "condition unverified"
    if isinstance(core, S.MonotoneCone):
        return LimitValue.closed(harmonic(core.n), status=unverified)
    if isinstance(core, S.BlockMonotoneCone):
        lv = block_monotone_statdim(core.sizes, samples, seed, noise, workers)
        return LimitValue(lv.value, lv.std_error, lv.exactness, lv.exact, status=unverified)
    est = mc_statdim(core, noise, samples, seed, workers)
    return LimitValue.from_estimate(est, status=unverified)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def limit_report(cset, theta, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                 noise: NoiseModel = GAUSSIAN, workers: int | None = None,
                 exact: bool | None = None) -> LimitReport:
    """Low-noise limit, upper bound and high-noise limit for one scenario."""
    raw = list(theta)
    theta = as_vector(raw, "theta", cset.dim)
    extras: dict = {}
    partition = None
    gauss = noise.tag == "gaussian"

    if isinstance(cset, S.Orthant) and gauss:
        low = LimitValue.closed(low_sigma_limit_orthant(theta, exact=True))
    elif isinstance(cset, S.MonotoneCone) and gauss:
        partition = isotonic_partition(raw, exact=exact)
        low = low_sigma_limit_isotonic(raw, samples, seed, noise, workers, partition=partition)
    elif isinstance(cset, S.Ball):
        try:
            bl = ball_limits(theta)
            low = LimitValue.closed(bl.m_limit)
            extras["low_sigma_excess"] = LimitValue.closed(bl.e_limit)
        except WellSpecifiedInput as ws:
            low = LimitValue.closed(ws.limit, note="well-specified")
            extras["low_sigma_excess"] = LimitValue.closed(ws.limit)
    elif isinstance(cset, S.ParabolaEpigraph):
        low = LimitValue(None, status="unknown",
                         note="no low-noise formula for this non-polyhedral set")
    else:
        low = LimitValue.from_estimate(
            low_sigma_limit_polyhedral(cset, theta, samples, seed, noise, workers))

    if isinstance(cset, S.ParabolaEpigraph):
        # tangent cone: R^2 in the interior, a halfspace on the boundary
        interior = theta[1] > theta[0] ** 2
        bound = LimitValue.closed(Fraction(2) if interior else Fraction(3, 2))
    else:
        bound = LimitValue.from_estimate(
            bellec_bound(cset, theta, samples, seed + 1000, noise, workers))
    high = high_sigma_limit(cset, samples, seed + 2000, noise, workers)
    return LimitReport(low, bound, high, extras, partition)
