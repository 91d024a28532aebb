from fractions import Fraction

import numpy as np
import pytest

from conerisk import risklab as R
from conerisk import sets as S
from conerisk.exceptions import InvalidInputError
from conerisk.statdim import NoiseModel

N = 20_000


def _point(cset, theta, sigma, samples=N, seed=0):
    return R.simulate_risks(R.Scenario(cset, theta, sigma_grid=(sigma,),
                                       samples=samples, seed=seed))[0]


def _close(pt, target, attr="m"):
    val, se = (pt.m_norm, pt.m_se) if attr == "m" else (pt.e_norm, pt.e_se)
    return abs(val - target) <= 3 * se + 0.01


class TestScenario:
    def test_grid(self):
        g = R.default_sigma_grid()
        assert len(g) == 41
        assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e3)
        assert g[20] == pytest.approx(1.0)
        assert R.default_sigma_grid(2.0, 2.0, 1) == (2.0,)

    @pytest.mark.parametrize("kw", [dict(sigma_grid=(1.0, 0.5)), dict(sigma_grid=(0.0,)),
                                    dict(sigma_grid=()), dict(samples=50)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            R.Scenario(S.Orthant(2), [1.0, -1.0], **kw)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            R.Scenario(S.Orthant(2), [1.0, -1.0, 0.0])


class TestSimulate:
    def test_orthant_low(self):
        pt = _point(S.Orthant(3), [1.0, 1.0, -1.0], 1e-3)
        assert _close(pt, 2.0) and _close(pt, 2.0, "e")

    def test_orthant_high(self):
        pt = _point(S.Orthant(3), [1.0, 1.0, -1.0], 1e3)
        assert _close(pt, 1.5) and _close(pt, 1.5, "e")

    def test_ball_low(self):
        pt = _point(S.Ball(3), [2.0, 0.0, 0.0], 1e-3)
        assert _close(pt, 0.5) and _close(pt, 1.0, "e")
        assert pt.e_norm - pt.m_norm > 3 * np.hypot(pt.e_se, pt.m_se)

    def test_ball_high(self):
        pt = _point(S.Ball(3), [2.0, 0.0, 0.0], 1e3)
        assert _close(pt, 0.0) and _close(pt, 0.0, "e")

    def test_well_specified_monotone(self):
        # risk at theta* = 0 is H_n at every noise level
        for sigma in (1e-3, 1.0, 1e3):
            pt = _point(S.MonotoneCone(4), np.zeros(4), sigma, samples=5000, seed=1)
            assert _close(pt, 25 / 12)

    def test_common_random_numbers(self):
        sc = R.Scenario(S.Orthant(2), [1.0, -1.0], sigma_grid=(1e-3, 1.0), samples=500, seed=3)
        both = R.simulate_risks(sc)
        single = _point(S.Orthant(2), [1.0, -1.0], 1.0, samples=500, seed=3)
        # same draws; only the summation order of the moments differs
        for a in ("m_norm", "m_se", "e_norm", "e_se"):
            assert getattr(both[1], a) == pytest.approx(getattr(single, a), rel=1e-12)

    def test_deterministic_across_workers(self):
        sc = R.Scenario(S.MonotoneCone(5), [2.0, 1.0, 0.0, 3.0, 1.0],
                        sigma_grid=(0.1, 1.0), samples=9000, seed=4)
        assert R.curve_csv(R.simulate_risks(sc, workers=1)) == \
            R.curve_csv(R.simulate_risks(sc, workers=3))

    def test_scaled_uniform(self):
        sc = R.Scenario(S.Orthant(3), [1.0, 1.0, -1.0], NoiseModel("scaled-uniform"),
                        sigma_grid=(1e-3,), samples=5000, seed=5)
        pt = R.simulate_risks(sc)[0]
        assert _close(pt, 2.0)

    def test_csv(self):
        pts = R.simulate_risks(R.Scenario(S.Orthant(2), [1.0, -1.0], sigma_grid=(0.5, 2.0),
                                          samples=100, seed=6))
        text = R.curve_csv(pts)
        lines = text.splitlines()
        assert lines[0] == "sigma,m_norm,m_se,e_norm,e_se,samples,seed"
        assert len(lines) == 3
        fields = lines[1].split(",")
        assert fields[0] == "0.5" and fields[-2:] == ["100", "6"]
        assert float(fields[1]) == pts[0].m_norm


class TestChain:
    @pytest.mark.parametrize("theta", R.TABLE1_ROWS)
    def test_table_rows(self, theta):
        sc = R.Scenario(S.MonotoneCone(6), theta, sigma_grid=(1.0,), samples=2000, seed=7)
        chk = R.per_sample_chain_check(sc)
        assert chk.violations == 0 and chk.checked == 2000

    def test_ball(self):
        sc = R.Scenario(S.Ball(3), [2.0, 0.0, 0.0], sigma_grid=(10.0,), samples=2000, seed=8)
        assert R.per_sample_chain_check(sc).violations == 0

    def test_well_specified_tiny_sigma(self):
        sc = R.Scenario(S.Orthant(3), [1.0, 0.0, 2.0], sigma_grid=(1e-6,), samples=2000, seed=9)
        assert R.per_sample_chain_check(sc).violations == 0

    def test_polyhedron_grid(self):
        box = S.Polyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
        sc = R.Scenario(box, [2.0, 0.5], sigma_grid=(1e-2, 1.0, 100.0), samples=500, seed=10)
        chk = R.per_sample_chain_check(sc)
        assert chk.violations == 0 and chk.checked == 1500


class TestTable1:
    def test_analytic(self):
        rows = R.table1_report(simulate=False)
        assert [r.limit for r in rows] == [Fraction(49, 20), Fraction(11, 6), Fraction(1),
                                           Fraction(43, 12), Fraction(3), Fraction(2)]
        assert [r.expression for r in rows] == ["H6", "H3", "H1", "H4+H2", "H2+H2", "H1+H1"]
        assert rows[4].fit == (-1, -1, -1, -1, 2, 2)
        assert all(r.m_norm is None and r.simulated_ok is None for r in rows)

    def test_lines(self):
        lines = R.table1_lines(R.table1_report(simulate=False))
        assert lines[1] == ("(0,0,0,0,0,0) | (0,0,0,0,0,0) | [(0),(0),(0),(0),(0),(0)] | "
                            "H6 = 49/20 | 2.4500000000000002 | - | -")
        assert lines[5].startswith("(0,-2,1,-3,2,2) | (-1,-1,-1,-1,2,2) | "
                                   "[(0,-2),(1,-3)],[(2),(2)] | H2+H2 = 3 | 3 |")

    def test_simulated(self):
        rows = R.table1_report(samples=5000, seed=11)
        assert all(r.simulated_ok for r in rows)

    def test_unequal_sizes_rejected(self):
        with pytest.raises(InvalidInputError):
            R.isotonic_limit_row([0, 1, 1, -1, -1, 0])


class TestSpiking:
    def test_decreasing_ramp(self):
        rep = R.spiking_demo(n=6, samples=2000, seed=12)
        assert rep.theta == (5.0, 3.0, 1.0, -1.0, -3.0, -5.0)
        assert rep.levels[0].sigma == 1e-3
        assert rep.levels[0].constant_fraction > 0.99
        assert rep.levels[0].max_mean_gap <= 1e-10
        assert rep.levels[0].constant_fraction >= rep.levels[1].constant_fraction
        assert abs(rep.null_risk - rep.harmonic_n) <= 3 * rep.null_risk_se + 0.01

    def test_increasing(self):
        rep = R.spiking_demo(n=4, samples=1000, seed=13, theta=[1.0, 2.0, 3.0, 4.0])
        assert rep.levels[0].constant_fraction == 0.0

    def test_small_n(self):
        with pytest.raises(InvalidInputError):
            R.spiking_demo(n=2)
