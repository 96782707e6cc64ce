import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from qsum.equation import (
    Equation,
    Term,
    aberth_roots,
    check_assumptions,
    factorial_growth_equation,
    lam_eval,
    newton_polygon,
    ord_t,
    p0_polynomial,
    p1_polynomial,
    sector_lower_bound,
    singular_directions,
    slope_one_equation,
)
from qsum.errors import DegenerateSector, ShapeMismatch, ValidationError
from qsum.powerseries import Trunc, TSeries
from qsum.qcore import QParam


def poly_t(trunc, powers):
    return TSeries.from_terms([(n, 0, c) for n, c in powers.items()], trunc)


class TestEquationModel:
    def test_slope_one_shape(self):
        eq = slope_one_equation()
        assert eq.m == 2 and eq.sigma == 1
        assert [(t.j, t.alpha) for t in eq.terms] == [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0)]

    def test_apply_on_monomial(self):
        # a t (tD_q)^2 t^n + b (tD_q) t^n with everything else vanishing on z-free data
        eq = slope_one_equation(a=2.0, b=3.0, c=0.0, Mt=8, Mz=2)
        x = TSeries.monomial(2, Trunc(8, 2))
        out = eq.apply(x)
        assert out.raw[3, 0] == pytest.approx(2.0 * 9.0)
        assert out.raw[2, 0] == pytest.approx(3.0 * 3.0)

    def test_order_constraint(self):
        tr = Trunc(4, 2)
        with pytest.raises(ValidationError):
            Equation(QParam(2.0), 1, 1, (Term(1, 1, poly_t(tr, {0: 1.0})),), poly_t(tr, {1: 1.0}))

    def test_duplicate_terms(self):
        tr = Trunc(4, 2)
        t = Term(1, 0, poly_t(tr, {0: 1.0}))
        with pytest.raises(ValidationError):
            Equation(QParam(2.0), 1, 2, (t, t), poly_t(tr, {1: 1.0}))

    def test_normalization(self):
        tr = Trunc(4, 2)
        with pytest.raises(ValidationError):
            Equation(QParam(2.0), 1, 2, (Term(1, 0, poly_t(tr, {1: 1.0})),), poly_t(tr, {1: 1.0}))

    def test_ord_t(self):
        tr = Trunc(5, 1)
        assert ord_t(poly_t(tr, {3: 1.0})) == 3
        assert ord_t(TSeries.zeros(tr)) == math.inf


class TestNewtonPolygon:
    def test_slope_one_polygon(self):
        poly = newton_polygon(slope_one_equation())
        assert poly.vertices == ((1, 0), (2, 1))
        assert poly.m0 == 1
        assert poly.slopes == (0.0, 1.0, math.inf)

    def test_interior_points(self):
        poly = newton_polygon(slope_one_equation())
        assert poly.interior(1, 2)
        assert not poly.interior(1, 0)
        assert not poly.interior(2, 5)

    @given(m0=st.integers(0, 3), extra=st.integers(1, 3), raise_=st.integers(0, 3))
    def test_single_edge_detection(self, m0, extra, raise_):
        # points (m0, 0) and (m, m - m0) with any lower-order term placed above the edge
        m = m0 + extra
        tr = Trunc(12, 1)
        terms = [Term(m0, 0, poly_t(tr, {0: 1.0})), Term(m, 0, poly_t(tr, {m - m0: 1.0}))]
        mid = m0 + 1
        if mid < m:
            terms.append(Term(mid, 0, poly_t(tr, {1 + raise_: 1.0})))
        eq = Equation(QParam(2.0), 1, m, tuple(terms), poly_t(tr, {1: 1.0}))
        assert newton_polygon(eq).m0 == m0

    def test_two_slopes_break_detection(self):
        tr = Trunc(12, 1)
        # hull (0,0), (2,1), (3,3): slopes 1/2 and 2
        terms = (
            Term(0, 0, poly_t(tr, {0: 1.0})),
            Term(2, 0, poly_t(tr, {1: 1.0})),
            Term(3, 0, poly_t(tr, {3: 1.0})),
        )
        eq = Equation(QParam(2.0), 1, 3, terms, poly_t(tr, {1: 1.0}))
        rep = check_assumptions(eq)
        assert newton_polygon(eq).m0 is None
        assert not rep.a1 and not rep.summable


class TestAssumptions:
    def test_slope_one_holds(self):
        rep = check_assumptions(slope_one_equation())
        assert rep.ok and rep.order_condition and rep.m0 == 1

    @pytest.mark.parametrize("n1,want", [(1, False), (2, True), (3, True)])
    def test_order_condition_threshold(self, n1, want):
        rep = check_assumptions(slope_one_equation(n1=n1))
        assert rep.ok
        assert rep.order_condition is want

    def test_a3_detects_vanishing_at_origin(self):
        # the (1, 0) coefficient is z: order 0 in t but zero at the origin
        tr = Trunc(6, 2)
        terms = (
            Term(1, 0, TSeries.from_terms([(0, 1, 1.0)], tr)),
            Term(2, 0, poly_t(tr, {1: 1.0})),
        )
        rep = check_assumptions(Equation(QParam(2.0), 1, 2, terms, poly_t(tr, {1: 1.0})))
        assert rep.a1 and not rep.a3 and not rep.summable

    def test_factorial_fixture(self):
        rep = check_assumptions(factorial_growth_equation())
        assert rep.summable and rep.m0 == 1


class TestCharacteristicPolynomial:
    @pytest.mark.parametrize("a,b,q", [(1.0, 1.0, 2.0), (2.0, 0.5, 1.5), (1.0, -3.0, 3.0)])
    def test_singular_root(self, a, b, q):
        eq = slope_one_equation(a=a, b=b, q=q)
        roots = singular_directions(eq).roots
        assert len(roots) == 1
        assert abs(roots[0] - (-q * b / a)) < 1e-10

    def test_p0_rows(self):
        P0 = p0_polynomial(slope_one_equation(a=3.0, b=5.0, q=2.0))
        assert P0[0, 0] == 5.0 and P0[1, 0] == 1.5
        assert abs(lam_eval(P0, -10.0 / 3.0)[0]) < 1e-14

    def test_p1_rows(self):
        P1 = p1_polynomial(slope_one_equation(b=5.0, c=2.0))
        assert P1[0, 0] == 2.0 and P1[1, 0] == 5.0

    def test_p0_needs_polygon(self):
        tr = Trunc(6, 1)
        terms = (Term(0, 0, poly_t(tr, {0: 1.0})), Term(2, 0, poly_t(tr, {1: 1.0})), Term(3, 0, poly_t(tr, {3: 1.0})))
        with pytest.raises(ShapeMismatch):
            p0_polynomial(Equation(QParam(2.0), 1, 3, terms, poly_t(tr, {1: 1.0})))

    @given(roots=st.lists(st.complex_numbers(min_magnitude=0.1, max_magnitude=10), min_size=1, max_size=6))
    def test_aberth_recovers_roots(self, roots):
        # oracle: build the polynomial from known roots; distinct roots only
        r = np.array(roots)
        d = np.abs(r[:, None] - r[None, :]) + np.eye(len(r))
        assume(d.min() >= 1e-2)
        coeffs = np.poly(r)[::-1]
        found = aberth_roots(coeffs)
        for x in r:
            assert np.min(np.abs(found - x)) < 1e-7 * (1 + abs(x))


class TestSector:
    def test_away_from_root(self):
        eq = slope_one_equation()
        delta = sector_lower_bound(eq, 1.0, (-0.5, 0.5), R=0.25)
        assert delta > 0

    def test_root_inside_sector(self):
        eq = slope_one_equation()
        with pytest.raises(DegenerateSector):
            sector_lower_bound(eq, -1.0, (math.pi - 0.2, math.pi + 0.2), R=0.25)

    def test_lambda_outside_interval(self):
        with pytest.raises(ValueError):
            sector_lower_bound(slope_one_equation(), 1j, (-0.1, 0.1), R=0.25)

    def test_exact_coefficients(self):
        tr = Trunc(4, 0)
        one = TSeries.from_terms([(0, 0, Fraction(1))], tr, exact=True)
        top = TSeries.from_terms([(1, 0, Fraction(1))], tr, exact=True)
        rhs = TSeries.from_terms([(1, 0, Fraction(1))], tr, exact=True)
        eq = Equation(QParam(Fraction(2)), 1, 2, (Term(1, 0, one), Term(2, 0, top)), rhs)
        P0 = p0_polynomial(eq)
        assert P0[1, 0] == Fraction(1, 2)
