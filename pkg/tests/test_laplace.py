import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsum.borel_plane import RayGrid
from qsum.errors import HypothesisFailed, PoleProximity, TailNotConverged
from qsum.laplace import (
    SpiralSet,
    convolution_theorem_check,
    entire_growth_check,
    gevrey_verify,
    lower_upper_gates,
    pole_bound_check,
    qborel_numeric,
    qlaplace,
    residual_in_equation,
    sector_samples,
    watson_check,
)
from qsum.powerseries import Trunc, TSeries, XiSeries, formal_borel
from qsum.qcore import qfactorial

T0 = 0.05 * np.exp(0.3j)


def monomial_grid(n, q=2.0, lam=1.0, k_min=-12, k_max=30, Mz=0):
    return RayGrid.from_series(XiSeries.monomial(n, Trunc(n + 2, Mz)), lam, k_min, k_max, q)


class TestSpiral:
    def test_centers(self):
        s = SpiralSet(1.0, 0.1, 2.0)
        assert s.center(0) == -1.0 and s.center(3) == -8.0
        assert s.contains(-4.0 * (1 + 0.05j)) and not s.contains(4.0)

    @given(q=st.floats(1.2, 5.0), frac=st.floats(0.05, 0.95))
    def test_disjoint_below_threshold(self, q, frac):
        thr = (q - 1) / (q + 1)
        assert SpiralSet(1.0, frac * thr, q).disjoint()
        assert not SpiralSet(1.0, min(thr / frac, 0.999), q).disjoint() or thr / frac >= 0.999

    def test_threshold_value(self):
        assert SpiralSet(1j, 0.1, 3.0).separation_threshold() == pytest.approx(0.5)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            SpiralSet(0.0, 0.1, 2.0)
        with pytest.raises(ValueError):
            SpiralSet(1.0, 0.0, 2.0)


class TestQLaplace:
    @pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
    @pytest.mark.parametrize("n", [0, 1, 3, 6])
    def test_monomial(self, n, q):
        # oracle: L[xi^n](t) = [n]_q! t^{n+1}
        g = monomial_grid(n, q=q, k_min=-40, k_max=40)
        want = qfactorial(n, q) * T0 ** (n + 1)
        assert abs(qlaplace(g, T0, z=0.0) - want) <= 1e-12 * abs(want)

    def test_vectorized(self):
        g = monomial_grid(2)
        ts = np.array([T0, 2 * T0, 0.02j])
        out = qlaplace(g, ts, z=0.0)
        assert out.shape == (3,)
        assert np.allclose(out, 3 * ts**3, rtol=1e-12)  # [2]_2! = 3

    def test_pole_proximity(self):
        g = monomial_grid(1)
        with pytest.raises(PoleProximity):
            qlaplace(g, -0.25 * (1 + 1e-3))

    def test_short_grid_reports_tail(self):
        g = monomial_grid(1, k_max=1)
        with pytest.raises(TailNotConverged):
            qlaplace(g, 0.5)

    def test_report(self):
        rep = {}
        qlaplace(monomial_grid(1), T0, report=rep)
        assert rep["upper_tail"] < 1e-10 and rep["k_lowest"] < -12


class TestQBorel:
    @pytest.mark.parametrize("n", [0, 2, 5])
    def test_monomial(self, n):
        q = 2.0
        for k in (-3, 0, 2):
            xi = q**k
            got = qborel_numeric(lambda t: t ** (n + 1), 1.0, k, q=q)
            want = xi**n / qfactorial(n, q)
            assert abs(got - want) <= 1e-10 * abs(want)

    def test_zpoly_valued(self):
        F = lambda t: np.stack([t, t**2], axis=-1)
        got = qborel_numeric(F, 1.0, 1, q=2.0)
        assert np.allclose(got, [1.0, 2.0], rtol=1e-10)
        assert qborel_numeric(F, 1.0, 1, z=0.5, q=2.0) == pytest.approx(2.0, rel=1e-10)

    def test_borel_of_laplace(self, slope_one):
        g = slope_one.grid
        for k in (-6, -2, 0, 3):
            back = qborel_numeric(lambda t: qlaplace(g, t), g.lam, k, q=2.0)
            want = g.get(k)
            assert np.max(np.abs(back - want)) <= 1e-6 * np.max(np.abs(want))

    def test_laplace_of_borel(self):
        # F(t) = t (1 + t/2) / (1 + t/5), singular at |t| = 5
        q, lam = 2.0, 1.0
        F = lambda t: t * (1 + t / 2) / (1 + 0.2 * t)
        c = np.zeros((30, 1))
        c[1, 0] = 1.0
        for n in range(2, 30):
            c[n, 0] = (-0.2) ** (n - 1) + 0.5 * (-0.2) ** (n - 2)
        taylor = formal_borel(TSeries(c), q)
        k_min, k_max = -8, 30
        vals = [[qborel_numeric(F, lam, k, q=q, pole_radius=5.0)] for k in range(k_min, k_max + 1)]
        g = RayGrid(lam, k_min, k_max, np.array(vals), taylor, q)
        ts = sector_samples(lam, n=20, q=q)
        got = qlaplace(g, ts, z=0.0)
        assert np.max(np.abs(got - F(ts)) / np.abs(F(ts))) < 1e-5


class TestConvolutionTheorem:
    def test_unit_factor(self, slope_one):
        a = XiSeries.monomial(0, Trunc(4, slope_one.grid.Mz))
        ts = sector_samples(1.0, n=5)
        assert convolution_theorem_check(a, slope_one.grid, ts) < 1e-9

    def test_polynomial_factor(self, slope_one):
        c = np.zeros((5, slope_one.grid.Mz + 1))
        c[0, 0], c[1, 0], c[2, 1] = 1.0, -0.5, 0.3
        ts = sector_samples(1.0, n=5)
        assert convolution_theorem_check(XiSeries(c), slope_one.grid, ts, z_samples=(0.0, 0.2)) < 1e-9


class TestGrowthChecks:
    def test_entire_q_exponential(self):
        q = 2.0
        rep = entire_growth_check([1 / qfactorial(n, q) for n in range(30)], q)
        assert rep["ok"] and rep["coefficients"]["H"] == pytest.approx(1.0)

    def test_geometric_is_rejected(self):
        assert not entire_growth_check(np.ones(30), 2.0)["ok"]

    def test_gates_on_slope_one(self, slope_one):
        upper, lower = lower_upper_gates(slope_one.grid)
        assert upper.finite and lower.extra["B_below_q"]

    def test_pole_bound(self, slope_one):
        _, lower = lower_upper_gates(slope_one.grid)
        ts = sector_samples(1.0, n=10, spread=True)
        cert = pole_bound_check(slope_one.grid, max(lower.h, 1.1), ts, 0.05)
        assert math.isfinite(cert.C) and 0 < cert.h <= 1

    def test_pole_bound_needs_decay(self, slope_one):
        with pytest.raises(HypothesisFailed):
            pole_bound_check(slope_one.grid, 2.5, [T0], 0.05)


class TestWatson:
    def test_monomial_remainder_vanishes(self):
        g = monomial_grid(2)
        c = XiSeries.monomial(2, Trunc(6, 0))
        cert = watson_check(g, c, N_max=6)
        # L[xi^2] equals its own expansion from N = 3 on; only N <= 2 leave a remainder
        assert cert.C > 0 and cert.worst <= 1.0 + 1e-12

    def test_slope_one(self, slope_one):
        cert = watson_check(slope_one.grid, slope_one.ceq.u0)
        assert cert.finite and cert.worst <= 1.0 + 1e-12


class TestSummedSolution:
    def test_residual_small(self, slope_one):
        ts = sector_samples(1.0, spread=True)
        assert residual_in_equation(slope_one.eq, slope_one.W, ts) < 1e-10

    def test_residual_with_z(self, slope_one):
        ts = sector_samples(1.0)
        assert residual_in_equation(slope_one.eq, slope_one.W, ts, z_samples=(0.0, 0.1, 0.2j)) < 1e-10

    def test_residual_detects_perturbation(self, slope_one):
        W = slope_one.W

        class Shifted:
            q = W.q

            def zpoly(self, t):
                out = np.array(W.zpoly(t))
                out[..., 0] += 1e-3 * np.asarray(t)
                return out

        ts = sector_samples(1.0)
        assert residual_in_equation(slope_one.eq, Shifted(), ts) > 1e-3

    def test_gevrey_bound(self, slope_one):
        cert = gevrey_verify(slope_one.W, slope_one.sol)
        assert cert.finite and cert.worst <= 1.0 + 1e-12

    def test_gevrey_rejects_large_N(self, slope_one):
        with pytest.raises(ValueError):
            gevrey_verify(slope_one.W, slope_one.sol, N_max=slope_one.sol.n_max + 1)

    def test_head_matches_formal_solution_at_small_t(self, slope_one):
        t = 1e-3 * np.exp(0.3j)
        X = slope_one.sol.series
        assert abs(slope_one.W(t) - X.resized(Mt=6).eval(t)[0]) < 1e-16
