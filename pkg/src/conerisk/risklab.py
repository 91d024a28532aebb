"""Monte Carlo estimates of the normalized misspecified and excess risks.

For ``Y = theta* + sigma Z`` and the projection estimator ``P_C(Y)``:

* misspecified risk ``M = E ||P_C(Y) - P_C(theta*)||^2``
* excess risk ``E = E ||P_C(Y) - theta*||^2 - ||P_C(theta*) - theta*||^2``

Both are reported divided by ``sigma^2``. The same noise draws are reused
for every ``sigma`` of a grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Sequence

import numpy as np

from . import sets as S
from .exceptions import InvalidInputError
from .limits import BlockPartition, isotonic_partition
from .numerics import EPS, Moments, as_vector, combine_moments, format_float, run_chunks
from .projections import pava_blocks
from .statdim import (DEFAULT_SAMPLES, GAUSSIAN, MIN_SAMPLES, NoiseModel, draw_block,
                      harmonic, project_rows)

CSV_HEADER = "sigma,m_norm,m_se,e_norm,e_se,samples,seed"

TABLE1_ROWS = (
    (0, 0, 0, 0, 0, 0),
    (1, -1, 1, -1, 1, -1),
    (5, 3, 1, -1, -3, -5),
    (-1, -1, -1, -1, 2, 2),
    (0, -2, 1, -3, 2, 2),
    (0, 0, -2, -2, 3, 1),
)


def default_sigma_grid(lo: float = 1e-3, hi: float = 1e3, points: int = 41) -> tuple:
    """Logarithmically spaced noise levels."""
    if points < 1 or lo <= 0 or hi < lo:
        raise InvalidInputError("need 0 < lo <= hi and at least one point")
    if points == 1:
        return (float(lo),)
    return tuple(float(s) for s in np.logspace(np.log10(lo), np.log10(hi), points))


@dataclass(frozen=True, eq=False)
class Scenario:
    cset: object
    theta_star: np.ndarray
    noise: NoiseModel = GAUSSIAN
    sigma_grid: tuple = field(default_factory=default_sigma_grid)
    samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        theta = as_vector(self.theta_star, "theta_star", self.cset.dim)
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        grid = tuple(float(s) for s in np.atleast_1d(self.sigma_grid))
        if not grid or any(not np.isfinite(s) or s <= 0 for s in grid):
            raise InvalidInputError("sigma grid must be nonempty and strictly positive")
        if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
            raise InvalidInputError("sigma grid must be strictly increasing")
        object.__setattr__(self, "sigma_grid", grid)
        if self.samples < MIN_SAMPLES:
            raise InvalidInputError(f"samples must be at least {MIN_SAMPLES}")


@dataclass(frozen=True)
class RiskCurvePoint:
    sigma: float
    m_norm: float
    m_se: float
    e_norm: float
    e_se: float
    samples: int
    seed: int

    def csv_row(self) -> str:
        vals = (self.sigma, self.m_norm, self.m_se, self.e_norm, self.e_se)
        return ",".join(format_float(v) for v in vals) + f",{self.samples},{self.seed}"


def _risk_terms(cset, theta: np.ndarray, p0: np.ndarray, Z: np.ndarray, sigma: float,
                first_index: int):
    """Per-replicate normalized M and E terms at one noise level."""
    P = project_rows(cset, theta + sigma * Z, first_index)
    d = P - p0
    dd = np.einsum("ij,ij->i", d, d)
    # ||P - theta||^2 - ||p0 - theta||^2 without cancelling two large numbers
    cross = d @ (p0 - theta)
    s2 = sigma * sigma
    return dd / s2, (dd + 2.0 * cross) / s2


def _risk_chunk(cset, theta, p0, noise, seed, grid, lo, hi):
    Z = draw_block(noise, seed, lo, hi, theta.shape[0])
    m = np.empty((hi - lo, len(grid)))
    e = np.empty_like(m)
    for g, sigma in enumerate(grid):
        m[:, g], e[:, g] = _risk_terms(cset, theta, p0, Z, sigma, lo)
    return Moments.of(m), Moments.of(e)


def simulate_risks(s: Scenario, workers: int | None = None) -> list[RiskCurvePoint]:
    """Normalized risk curves over the scenario's noise grid."""
    theta = s.theta_star
    p0 = s.cset.precise_point(theta)
    kernel = partial(_risk_chunk, s.cset, theta, p0, s.noise, s.seed, s.sigma_grid)
    parts = run_chunks(kernel, s.samples, workers)
    m = combine_moments([p[0] for p in parts])
    e = combine_moments([p[1] for p in parts])
    return [RiskCurvePoint(sig, float(m.mean[g]), float(m.std_error[g]),
                           float(e.mean[g]), float(e.std_error[g]), s.samples, s.seed)
            for g, sig in enumerate(s.sigma_grid)]


def curve_csv(points: Sequence[RiskCurvePoint]) -> str:
    return "\n".join([CSV_HEADER] + [p.csv_row() for p in points]) + "\n"


# ---------------------------------------------------------------------------
# Per-sample chain  0 <= M-term <= E-term <= ||Z||^2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainCheck:
    violations: int
    checked: int
    worst_excess: float


def _chain_chunk(cset, theta, p0, noise, seed, grid, lo, hi):
    Z = draw_block(noise, seed, lo, hi, theta.shape[0])
    z2 = np.einsum("ij,ij->i", Z, Z)
    scale = 1.0 + float(np.linalg.norm(theta))
    bad = 0
    worst = -np.inf
    for g, sigma in enumerate(grid):
        m, e = _risk_terms(cset, theta, p0, Z, sigma, lo)
        size = scale + sigma * np.sqrt(z2)
        slack = (1e-8 * np.maximum(1.0, z2)
                 + (16.0 * EPS + cset.projection_tol) * size * size / (sigma * sigma))
        excess = np.max(np.stack([-m, m - e, e - z2]), axis=0) - slack
        bad += int(np.sum(excess > 0))
        worst = max(worst, float(excess.max()))
    return bad, worst


def per_sample_chain_check(s: Scenario, workers: int | None = None) -> ChainCheck:
    """Count replicates violating ``0 <= m <= e <= ||Z||^2`` beyond rounding slack.

    ``m`` and ``e`` are the normalized per-replicate risk terms. The slack is
    ``1e-8 * max(1, ||Z||^2)`` plus a rounding allowance that grows like
    ``(1 + ||theta*||)^2 / sigma^2``, since both terms are differences of
    quantities of size ``||theta*||`` divided by ``sigma^2``.
    """
    theta = s.theta_star
    p0 = s.cset.precise_point(theta)
    kernel = partial(_chain_chunk, s.cset, theta, p0, s.noise, s.seed, s.sigma_grid)
    parts = run_chunks(kernel, s.samples, workers)
    return ChainCheck(sum(p[0] for p in parts), s.samples * len(s.sigma_grid),
                      max(p[1] for p in parts))


# ---------------------------------------------------------------------------
# Isotonic table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Table1Row:
    theta: tuple
    fit: tuple
    partition: BlockPartition
    limit: Fraction
    expression: str
    m_norm: float | None = None
    m_se: float | None = None

    @property
    def simulated_ok(self) -> bool | None:
        if self.m_norm is None:
            return None
        return abs(self.m_norm - float(self.limit)) <= 3.0 * self.m_se + 0.01


def _fmt_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def isotonic_limit_row(theta: Sequence) -> Table1Row:
    """Exact analytic row: fit, partition, ``sum_k H_{m_k}`` and its expression."""
    part = isotonic_partition(theta, exact=True)
    counts = part.counts()
    for k in range(part.K):
        if len(set(part.sizes(k))) != 1:
            raise InvalidInputError("sub-blocks of unequal size have no harmonic closed form")
    limit = sum((harmonic(m) for m in counts), Fraction(0))
    expr = "+".join(f"H{m}" for m in counts)
    fit = tuple(part.fit())
    return Table1Row(tuple(part.theta), fit, part, limit, expr)


def table1_report(samples: int = DEFAULT_SAMPLES, seed: int = 0, sigma: float = 1e-3,
                  simulate: bool = True, workers: int | None = None,
                  rows: Sequence = TABLE1_ROWS) -> list[Table1Row]:
    """Analytic limits for the six isotonic examples, optionally with the
    simulated normalized misspecified risk at ``sigma``.

    Row ``r`` uses master seed ``seed + r``.
    """
    out = []
    for r, theta in enumerate(rows):
        row = isotonic_limit_row(theta)
        if simulate:
            sc = Scenario(S.MonotoneCone(len(theta)), np.asarray(theta, dtype=float),
                          sigma_grid=(sigma,), samples=samples, seed=seed + r)
            pt = simulate_risks(sc, workers)[0]
            row = Table1Row(row.theta, row.fit, row.partition, row.limit, row.expression,
                            pt.m_norm, pt.m_se)
        out.append(row)
    return out


def table1_lines(rows: Sequence[Table1Row]) -> list[str]:
    out = ["theta | fit | partition | limit | value | m_norm | m_se"]
    for row in rows:
        theta = "(" + ",".join(_fmt_rational(Fraction(t)) for t in row.theta) + ")"
        fit = "(" + ",".join(_fmt_rational(Fraction(t)) for t in row.fit) + ")"
        sim = ("-", "-") if row.m_norm is None else (format_float(row.m_norm),
                                                     format_float(row.m_se))
        out.append(f"{theta} | {fit} | {row.partition} | {row.expression} = "
                   f"{_fmt_rational(row.limit)} | {format_float(row.limit)} | {sim[0]} | {sim[1]}")
    return out


# ---------------------------------------------------------------------------
# Constant fits of isotonic regression for decreasing means
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpikingLevel:
    sigma: float
    constant_fraction: float
    max_mean_gap: float


@dataclass(frozen=True)
class SpikingReport:
    theta: tuple
    levels: tuple
    null_risk: float
    null_risk_se: float
    harmonic_n: float


def _spiking_chunk(theta, noise, seed, sigma, lo, hi):
    Z = draw_block(noise, seed, lo, hi, theta.shape[0])
    const = 0
    gap = 0.0
    for z in Z:
        y = theta + sigma * z
        blocks = pava_blocks(y.tolist())
        if len(blocks) == 1:
            const += 1
            gap = max(gap, abs(blocks[0][0] - float(np.mean(y))))
    return const, gap


def spiking_demo(n: int = 6, samples: int = 10_000, seed: int = 0,
                 sigmas: Sequence[float] = (1e-3, 1e-2), theta: Sequence | None = None,
                 workers: int | None = None) -> SpikingReport:
    """Fraction of constant isotonic fits for a decreasing mean.

    The default mean is the ramp ``(n - 1, n - 3, ..., 1 - n)``. Also
    simulates the normalized risk at ``theta* = 0``, whose exact value is
    ``H_n`` at every noise level.
    """
    if n < 3:
        raise InvalidInputError("n must be at least 3")
    if theta is None:
        theta = [n + 1 - 2 * i for i in range(1, n + 1)]
    theta = as_vector(theta, "theta", n)
    levels = []
    for sigma in sigmas:
        parts = run_chunks(partial(_spiking_chunk, theta, GAUSSIAN, seed, float(sigma)),
                           samples, workers)
        const = sum(p[0] for p in parts)
        gap = max(p[1] for p in parts)
        levels.append(SpikingLevel(float(sigma), const / samples, gap))
    null = simulate_risks(Scenario(S.MonotoneCone(n), np.zeros(n), sigma_grid=(1.0,),
                                   samples=max(samples, MIN_SAMPLES), seed=seed + 1), workers)[0]
    return SpikingReport(tuple(float(t) for t in theta), tuple(levels), null.m_norm, null.m_se,
                         float(harmonic(n)))
