"""Numerical verification suite behind ``conerisk verify``.

Each criterion produces one or more :class:`Check` lines. Monte Carlo checks
compare an estimate with its target using ``k * SE + slack``; ``k`` and
``slack`` are scaled together by ``margin_scale`` (a scale of 0 turns every
stochastic check into an exact-equality test and serves as a negative
control). The report carries no timings so that it is byte-reproducible.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import geometry as G
from . import limits as L
from . import projections as P
from . import risklab as R
from . import sets as S
from .numerics import format_float, nnls, qr_positive_diag
from .statdim import StatDimEstimate, harmonic, mc_statdim

_f = format_float


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class VerifyConfig:
    samples: int = 100_000
    epigraph_samples: int = 1_000_000
    property_inputs: int = 100
    seed: int = 20240607
    margin_scale: float = 1.0
    workers: int | None = None

    @classmethod
    def quick(cls, **kw) -> "VerifyConfig":
        kw.setdefault("samples", 20_000)
        kw.setdefault("epigraph_samples", 400_000)
        return cls(**kw)

    @property
    def k(self) -> float:
        return 3.0 * self.margin_scale

    @property
    def slack(self) -> float:
        return 0.01 * self.margin_scale


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def text(self) -> str:
        lines = [c.line() for c in self.checks]
        passed = sum(c.ok for c in self.checks)
        lines.append(f"SUMMARY {passed}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


def _near(name: str, est: float, se: float, target: float, cfg: VerifyConfig,
          slack: bool = True) -> Check:
    tol = cfg.k * se + (cfg.slack if slack else 0.0)
    ok = abs(est - target) <= tol
    return Check(name, ok, f"estimate {_f(est)} se {_f(se)} target {_f(target)}")


def _agree(name: str, a: StatDimEstimate, b: StatDimEstimate, cfg: VerifyConfig) -> Check:
    se = float(np.hypot(a.std_error, b.std_error))
    ok = abs(a.value - b.value) <= cfg.k * se
    return Check(name, ok, f"{_f(a.value)} vs {_f(b.value)} combined se {_f(se)}")


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

TABLE1_LIMITS = (Fraction(49, 20), Fraction(11, 6), Fraction(1), Fraction(43, 12),
                 Fraction(3), Fraction(2))


def criterion_table1_analytic(cfg: VerifyConfig) -> list[Check]:
    t0 = time.perf_counter()
    rows = R.table1_report(simulate=False)
    elapsed = time.perf_counter() - t0
    got = tuple(r.limit for r in rows)
    return [Check("c1.table1_analytic", got == TABLE1_LIMITS,
                  " ".join(str(g) for g in got)),
            Check("c1.runtime", elapsed < 1.0, "under 1 s" if elapsed < 1.0 else "over 1 s")]


def criterion_table1_simulated(cfg: VerifyConfig) -> list[Check]:
    t0 = time.perf_counter()
    rows = R.table1_report(samples=cfg.samples, seed=cfg.seed, workers=cfg.workers)
    elapsed = time.perf_counter() - t0
    out = [_near(f"c2.table1_row{i + 1}", r.m_norm, r.m_se, float(r.limit), cfg)
           for i, r in enumerate(rows)]
    out.append(Check("c2.runtime", elapsed < 60.0, "under 60 s" if elapsed < 60.0 else "over 60 s"))
    return out


def criterion_orthant(cfg: VerifyConfig) -> list[Check]:
    out = []
    for j, eps in enumerate((0.01, 0.1, 1.0)):
        sc = R.Scenario(S.Orthant(3), [1.0, 1.0, -eps], sigma_grid=(1e-3 * eps, 1e3),
                        samples=cfg.samples, seed=cfg.seed + 10 + j)
        lo, hi = R.simulate_risks(sc, cfg.workers)
        out.append(_near(f"c3.orthant_eps{eps:g}_low", lo.m_norm, lo.m_se, 2.0, cfg))
        out.append(_near(f"c3.orthant_eps{eps:g}_high", hi.m_norm, hi.m_se, 1.5, cfg))
    return out


def criterion_ball(cfg: VerifyConfig) -> list[Check]:
    out = []
    for j, eps in enumerate((0.01, 0.1, 1.0)):
        r = 1.0 + eps
        sc = R.Scenario(S.Ball(3), [r, 0.0, 0.0], sigma_grid=(1e-4 * eps, 1e3),
                        samples=cfg.samples, seed=cfg.seed + 20 + j)
        lo, hi = R.simulate_risks(sc, cfg.workers)
        out.append(_near(f"c4.ball_eps{eps:g}_m", lo.m_norm, lo.m_se, 2.0 / r**2, cfg))
        out.append(_near(f"c4.ball_eps{eps:g}_e", lo.e_norm, lo.e_se, 2.0 / r, cfg))
        out.append(_near(f"c4.ball_eps{eps:g}_high_m", hi.m_norm, hi.m_se, 0.0, cfg))
        out.append(_near(f"c4.ball_eps{eps:g}_high_e", hi.e_norm, hi.e_se, 0.0, cfg))
        if eps == 1.0:
            se = float(np.hypot(lo.m_se, lo.e_se))
            gap = lo.e_norm - lo.m_norm
            out.append(Check("c4.ball_separation", gap > cfg.k * se,
                             f"e - m = {_f(gap)} combined se {_f(se)}"))
    return out


def criterion_statdim(cfg: VerifyConfig) -> list[Check]:
    out = []
    n, seed, w = cfg.samples, cfg.seed + 100, cfg.workers
    for m in range(1, 9):
        est = mc_statdim(S.MonotoneCone(m), samples=n, seed=seed + m, workers=w)
        out.append(_near(f"c5.monotone_m{m}", est.value, est.std_error, float(harmonic(m)),
                         cfg, slack=False))
    half = mc_statdim(S.PolyhedralCone(np.array([[1.0, 0.0, 0.0]])), samples=n,
                      seed=seed + 20, workers=w)
    out.append(_near("c5.halfspace_r3", half.value, half.std_error, 2.5, cfg, slack=False))
    direct = mc_statdim(S.BlockMonotoneCone((1, 18, 1)), samples=n, seed=seed + 21, workers=w)
    embed = mc_statdim(G.block_monotone_embedding((1, 18, 1)), samples=n, seed=seed + 22,
                       workers=w)
    out.append(_agree("c5.block_1_18_1_direct_vs_embedding", direct, embed, cfg))
    out.append(Check("c5.block_1_18_1_near_2", abs(direct.value - 2.0) <= 0.1 * cfg.margin_scale,
                     f"estimate {_f(direct.value)}"))
    e398 = mc_statdim(G.block_monotone_embedding((398, 1, 1)), samples=n, seed=seed + 23,
                      workers=w)
    out.append(Check("c5.block_398_1_1_near_1.75",
                     abs(e398.value - 1.75) <= 0.1 * cfg.margin_scale,
                     f"estimate {_f(e398.value)} se {_f(e398.std_error)}"))
    two = mc_statdim(S.BlockMonotoneCone((3, 5)), samples=n, seed=seed + 24, workers=w)
    out.append(_near("c5.two_blocks", two.value, two.std_error, 1.5, cfg, slack=False))
    return out


def _grid_qp3(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted isotonic fit of three values by coarse-to-fine grid search.

    ``x_3`` is eliminated in closed form (``max(x_2, y_3)``); ``(x_1, x_2)``
    is searched on a 0.01 grid and then on a 1e-4 grid around the best point.
    """
    def objective(x1, x2):
        x3 = np.maximum(x2, y[2])
        f = w[0] * (x1 - y[0]) ** 2 + w[1] * (x2 - y[1]) ** 2 + w[2] * (x3 - y[2]) ** 2
        return np.where(x1 <= x2, f, np.inf)

    lo, hi = float(y.min()) - 0.05, float(y.max()) + 0.05
    grid = np.arange(lo, hi + 0.01, 0.01)
    X1, X2 = np.meshgrid(grid, grid, indexing="ij")
    f = objective(X1, X2)
    i, j = np.unravel_index(np.argmin(f), f.shape)
    c1, c2 = grid[i], grid[j]
    fine = np.arange(-0.02, 0.02 + 1e-4, 1e-4)
    X1, X2 = np.meshgrid(c1 + fine, c2 + fine, indexing="ij")
    f = objective(X1, X2)
    i, j = np.unravel_index(np.argmin(f), f.shape)
    x1, x2 = float(X1[i, j]), float(X2[i, j])
    return np.array([x1, x2, max(x2, float(y[2]))])


def criterion_projection_oracles(cfg: VerifyConfig) -> list[Check]:
    rng = np.random.default_rng([cfg.seed, 6])
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        x = rng.standard_normal(n) * rng.uniform(0.1, 5.0)
        A = np.zeros((n - 1, n))
        for i in range(n - 1):
            A[i, i], A[i, i + 1] = 1.0, -1.0
        a = P.project_monotone(x).point
        b = P.project_polyhedral_cone(A, x).point
        c = P.project_polyhedron(A, np.zeros(n - 1), x).point
        worst = max(worst, float(np.abs(a - b).max()), float(np.abs(a - c).max()))
    out = [Check("c6.pava_nnls_dykstra", worst <= 1e-6, f"max deviation {_f(worst)}")]
    worst = 0.0
    for _ in range(20):
        y = rng.uniform(-2.0, 2.0, 3)
        w = rng.integers(1, 6, 3).astype(float)
        worst = max(worst, float(np.abs(P.project_weighted_monotone(y, w) - _grid_qp3(y, w)).max()))
    out.append(Check("c6.weighted_pava_vs_grid", worst <= 1e-3, f"max deviation {_f(worst)}"))
    return out


def _random_cone_matrix(rng, m: int, n: int) -> np.ndarray:
    return rng.standard_normal((m, n))


def _sample_in(cset, rng, count: int) -> np.ndarray:
    return cset.project_many(rng.standard_normal((count, cset.dim)) * 2.0)


def criterion_properties(cfg: VerifyConfig) -> list[Check]:
    rng = np.random.default_rng([cfg.seed, 7])
    N = cfg.property_inputs
    out = []

    # optimality of projections, general and conic forms
    box = S.Polyhedron(np.vstack([np.eye(3), -np.eye(3)]), np.ones(6))
    families = [S.Orthant(4), S.Ball(4), S.MonotoneCone(5), S.BlockMonotoneCone((2, 1, 2)),
                S.PolyhedralCone(_random_cone_matrix(rng, 3, 4)), box, S.ParabolaEpigraph()]
    worst_gen = worst_cone = 0.0
    for cset in families:
        Z = _sample_in(cset, rng, 20)
        for _ in range(N):
            x = rng.standard_normal(cset.dim) * 3.0
            res = cset.project(x)
            scale = max(1.0, float(x @ x))
            worst_gen = max(worst_gen, float(np.max((Z - res.point) @ res.residual)) / scale)
            if cset.is_cone:
                worst_cone = max(worst_cone, abs(float(res.point @ res.residual)) / scale)
    out.append(Check("c7.optimality_variational", worst_gen <= 1e-8, f"max {_f(worst_gen)}"))
    out.append(Check("c7.optimality_conic", worst_cone <= 1e-8, f"max {_f(worst_cone)}"))

    # per-sample risk chain
    scenarios = [R.Scenario(S.MonotoneCone(6), row, sigma_grid=(1.0,), samples=N, seed=cfg.seed)
                 for row in R.TABLE1_ROWS]
    scenarios.append(R.Scenario(S.Ball(3), [2.0, 0.0, 0.0], sigma_grid=(10.0,), samples=N,
                                seed=cfg.seed))
    scenarios.append(R.Scenario(S.Orthant(3), [1.0, 2.0, 0.5], sigma_grid=(1e-6,), samples=N,
                                seed=cfg.seed))
    bad = sum(R.per_sample_chain_check(sc, cfg.workers).violations for sc in scenarios)
    out.append(Check("c7.risk_chain", bad == 0, f"{bad} violations"))

    # Moreau decomposition
    worst = 0.0
    for _ in range(N):
        A = _random_cone_matrix(rng, int(rng.integers(1, 5)), 4)
        x = rng.standard_normal(4) * 2.0
        res = P.project_polyhedral_cone(A, x)
        xx = float(x @ x)
        pyth = abs(xx - float(res.point @ res.point) - float(res.residual @ res.residual))
        lam = nnls(A.T, res.residual)
        polar = float(np.linalg.norm(A.T @ lam - res.residual))
        worst = max(worst, pyth / max(xx, 1e-300), polar)
    out.append(Check("c7.moreau", worst <= 1e-8, f"max {_f(worst)}"))

    # hyperplane property near a point of the polar cone
    worst = 0.0
    for _ in range(N):
        A = _random_cone_matrix(rng, 3, 4)
        theta = A.T @ rng.uniform(0.0, 1.0, 3)
        r = 1e-4 * float(np.linalg.norm(theta))
        d = rng.standard_normal(4)
        u = theta + r * rng.uniform() * d / np.linalg.norm(d)
        pu = P.project_polyhedral_cone(A, u).point
        worst = max(worst, abs(float(pu @ theta)))
    out.append(Check("c7.hyperplane_property", worst <= 1e-8, f"max |<P(u), theta>| {_f(worst)}"))

    # residual faces
    worst = 0.0
    minimal = True
    for _ in range(N):
        A = _random_cone_matrix(rng, int(rng.integers(2, 6)), 4)
        y = rng.standard_normal(4) * 2.0
        face = G.residual_face(A, y)
        minimal &= G.face_is_minimal(face)
        cone = face.cone()
        for u in cone.project_many(rng.standard_normal((3, 4))):
            worst = max(worst, float(np.max(A @ u, initial=0.0)), abs(float(face.normal @ u)))
        for _k in range(3):
            u = P.project_cone_with_equality(A, face.normal, rng.standard_normal(4)).point
            J = list(face.equality_indices)
            if J:
                worst = max(worst, float(np.abs(A[J] @ u).max()))
    out.append(Check("c7.face_correctness", worst <= 1e-8, f"max violation {_f(worst)}"))
    out.append(Check("c7.face_minimality", bool(minimal), "all minimal" if minimal else "not minimal"))

    # bottom-right entry of R
    worst = 0.0
    for n in range(1, 11):
        M = np.eye(n) - np.eye(n, k=-1)
        _, Rm = qr_positive_diag(M)
        worst = max(worst, abs(Rm[-1, -1] - 1.0 / np.sqrt(n)))
    out.append(Check("c7.qr_corner", worst <= 1e-10, f"max deviation {_f(worst)}"))

    # boundedness gap: tangent cone captures at least the core cone
    worst = -np.inf
    for cset in (S.Ball(3), box, S.Orthant(3), S.ParabolaEpigraph(), S.MonotoneCone(4)):
        core = G.core_cone(cset)
        pts = _sample_in(cset, rng, N)
        for theta0 in pts:
            tc = G.tangent_cone(cset, theta0, tol=1e-7).cone()
            x = rng.standard_normal(cset.dim) * 2.0
            a = tc.project(x).point
            b = core.project(x).point
            worst = max(worst, float(b @ b - a @ a))
    out.append(Check("c7.boundedness_gap", worst <= 1e-8, f"max deficit {_f(worst)}"))
    return out


def criterion_jump(cfg: VerifyConfig) -> list[Check]:
    cone = S.PolyhedralCone(-np.eye(3))
    out = []
    for j, theta in enumerate(([1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [0.5, -2.0, -1.0])):
        low = L.low_sigma_limit_polyhedral(cone, theta, cfg.samples, cfg.seed + 40 + j,
                                           workers=cfg.workers)
        up = L.bellec_bound(cone, theta, cfg.samples, cfg.seed + 50 + j, workers=cfg.workers,
                            method="mc")
        se = float(np.hypot(low.std_error, up.std_error))
        out.append(Check(f"c8.jump_{j + 1}", low.value < up.value - cfg.k * se,
                         f"low {_f(low.value)} bound {_f(up.value)} combined se {_f(se)}"))
    return out


def criterion_epigraph(cfg: VerifyConfig) -> list[Check]:
    sc = R.Scenario(S.ParabolaEpigraph(), [0.0, -1.0], sigma_grid=(1e3,),
                    samples=cfg.epigraph_samples, seed=cfg.seed + 60)
    pt = R.simulate_risks(sc, cfg.workers)[0]
    return [Check("c9.epigraph_above_half", pt.m_norm > 0.5 + cfg.k * pt.m_se,
                  f"m_norm {_f(pt.m_norm)} se {_f(pt.m_se)}")]


CRITERIA = (
    criterion_table1_analytic,
    criterion_table1_simulated,
    criterion_orthant,
    criterion_ball,
    criterion_statdim,
    criterion_projection_oracles,
    criterion_properties,
    criterion_jump,
    criterion_epigraph,
)


def run_verify(cfg: VerifyConfig, criteria=CRITERIA) -> VerifyReport:
    report = VerifyReport()
    for crit in criteria:
        report.checks.extend(crit(cfg))
    return report
