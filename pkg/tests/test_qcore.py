import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsum.errors import PoleProximity
from qsum.powerseries import XiSeries, formal_qconv
from qsum.qcore import (
    Exp_q,
    PhiSpec,
    QParam,
    exp_q,
    exp_q_log_profile,
    log_exp_q,
    log_phi,
    log_qfactorial,
    phi,
    qfactorial,
    qfactorials,
    qnum,
    qnum_base_identity,
    qshift_product,
)


def series_exp_q(x, q, terms=40):
    # independent oracle: the defining power series
    total, fact = 0j, 1.0
    for n in range(terms):
        if n:
            fact *= (q**n - 1) / (q - 1)
        total += x**n / fact
    return total


def series_phi(m, h, x, q, terms=30):
    return math.fsum(h**i * x ** (m + i) / qfactorial(m + i, q) for i in range(terms))


class TestQParam:
    def test_rejects_q_at_most_one(self):
        with pytest.raises(ValueError):
            QParam(1.0)
        with pytest.raises(ValueError):
            QParam(0.5)

    def test_reciprocal(self):
        assert QParam(3.0).p * 3.0 == pytest.approx(1.0, abs=1e-16)
        assert QParam(Fraction(3, 2)).p == Fraction(2, 3)


class TestQNumbers:
    @pytest.mark.parametrize("n,q,want", [(0, 2.0, 0.0), (1, 2.0, 1.0), (1, 1.7, 1.0), (3, 2.0, 7.0)])
    def test_qnum_values(self, n, q, want):
        assert qnum(n, q) == pytest.approx(want)

    def test_qnum_increasing(self):
        vals = [qnum(n, 1.3) for n in range(30)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_qfactorial_values(self):
        assert qfactorial(0, 2.0) == 1.0
        assert qfactorial(3, 2.0) == 21.0
        q = 1.5
        prod = 1.0
        for k in range(1, 6):
            prod *= (q**k - 1) / (q - 1)
        assert qfactorial(5, q) == pytest.approx(prod, rel=1e-14)
        assert math.log(qfactorial(5, q)) == pytest.approx(log_qfactorial(5, q), rel=1e-14)

    def test_exact_mode(self):
        q = Fraction(3, 2)
        assert qnum(3, q) == Fraction(19, 4)
        assert qfactorial(3, q) == Fraction(1) * Fraction(5, 2) * Fraction(19, 4)

    def test_overflow_is_reported(self):
        with pytest.raises(OverflowError):
            qfactorial(80, 3.0)
        with pytest.raises(OverflowError):
            qfactorials(80, 3.0)

    @pytest.mark.parametrize("q", [1.2, 1.5, 2.0, 3.0])
    def test_factorial_lower_bound(self, q):
        for n in range(31):
            assert log_qfactorial(n, q) >= n * (n - 1) / 2 * math.log(q) - 1e-12


class TestExponentials:
    def test_exp_q_at_zero_and_first_zero(self):
        assert exp_q(0.0, 2.0) == 1.0
        assert exp_q(-2.0 / 1.0, 2.0) == 0.0  # -q/(q-1) at q = 2
        assert abs(exp_q(-1.5 / 0.5, 1.5)) == 0.0

    @pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
    def test_product_matches_series(self, q, rng):
        xs = rng.uniform(-5, 5, 20) + 1j * rng.uniform(-5, 5, 20)
        xs = xs[np.abs(xs) <= 5]
        for x in xs:
            assert abs(exp_q(x, q) - series_exp_q(x, q)) <= 1e-10 * max(1.0, abs(series_exp_q(x, q)))

    def test_exp_q_series_at_one(self):
        assert abs(exp_q(1.0, 2.0) - series_exp_q(1.0, 2.0, 20)) < 1e-13

    def test_Exp_q_is_reciprocal_of_exp_q_reflected(self):
        # Exp_q(x) exp_q(-x) = 1 by the two product forms
        for x in [0.3, 1.0, -2.5, 1 + 1j]:
            assert abs(Exp_q(x, 2.0) * exp_q(-x, 2.0) - 1) < 1e-13

    def test_Exp_q_matches_its_series(self):
        # Exp_q(x) = sum q^{n(n-1)/2} x^n / [n]_q!
        q = 2.0
        for x in [0.1, -0.4, 0.3j]:
            s = sum(q ** (n * (n - 1) / 2) * x**n / qfactorial(n, q) for n in range(40))
            assert abs(Exp_q(x, q) - s) < 1e-12

    def test_Exp_q_pole(self):
        assert Exp_q(0.0, 2.0) == 1.0
        with pytest.raises(PoleProximity):
            Exp_q(2.0, 2.0)  # q/(q-1)
        with pytest.raises(PoleProximity):
            Exp_q(4.0 * (1 + 1e-10), 2.0)

    @pytest.mark.parametrize("q", [1.5, 2.0, 4.0])
    def test_log_profile_bounded(self, q):
        xs = np.geomspace(1e2, 1e4, 25)
        rem = np.array([log_exp_q(x, q) for x in xs]) - exp_q_log_profile(xs, q)
        assert np.ptp(rem) < 0.2
        assert np.all(np.isfinite(rem))


class TestPhi:
    def test_phi_zero_is_exp_q(self):
        for x in [0.0, 0.5, 3.0, 20.0]:
            assert phi(PhiSpec(0, 1.5), x, 2.0) == pytest.approx(exp_q(1.5 * x, 2.0).real, rel=1e-12)

    def test_phi_vanishes_at_zero(self):
        assert phi(PhiSpec(3, 2.0), 0.0, 2.0) == 0.0

    def test_phi_matches_series(self):
        for m in range(4):
            for x in [0.1, 1.0, 7.0]:
                assert phi(PhiSpec(m, 0.7), x, 2.0) == pytest.approx(series_phi(m, 0.7, x, 2.0), rel=1e-12)

    def test_log_phi(self):
        xs = np.array([0.2, 1.0, 30.0])
        assert np.allclose(log_phi(2, 1.1, xs, 1.5), np.log(phi(PhiSpec(2, 1.1), xs, 1.5)), rtol=1e-12)

    @given(m=st.integers(0, 8), h=st.floats(0.1, 5), x=st.floats(0.01, 50))
    def test_phi_exp_bound(self, m, h, x):
        q = 2.0
        lhs = log_phi(m, h, x, q)[0]
        rhs = m * math.log(x) - log_qfactorial(m, q) + log_exp_q(h * x, q)
        assert lhs <= rhs + 1e-12

    @given(
        n=st.integers(1, 10),
        k=st.integers(1, 10),
        h=st.floats(0.2, 4),
        x=st.floats(0.01, 40),
        q=st.sampled_from([1.5, 2.0, 3.0]),
    )
    def test_division_inequality(self, n, k, h, x, q):
        k = min(k, n)
        lhs = log_phi(n, h, x, q)[0] - k * math.log(x)
        rhs = log_qfactorial(n - k, q) - log_qfactorial(n, q) + log_phi(n - k, h, x, q)[0]
        assert lhs <= rhs + 1e-12

    @given(
        N=st.integers(0, 6),
        h=st.floats(0.5, 4),
        frac=st.floats(0.05, 0.9),
        x=st.floats(0.01, 20),
    )
    def test_tail_sum_inequality(self, N, h, frac, x):
        q, B = 2.0, frac * h
        terms = [math.exp(m * math.log(B) + log_phi(m, h, x, q)[0]) for m in range(N, N + 80)]
        lhs = math.fsum(terms)
        rhs = B**N / (1 - B / h) * phi(PhiSpec(N, h), x, q)
        assert lhs <= rhs * (1 + 1e-12)

    @given(m=st.integers(0, 4), n=st.integers(0, 4), h=st.floats(0.5, 3), frac=st.floats(0.05, 0.9))
    def test_convolution_inequality_coefficientwise(self, m, n, h, frac):
        # phi_m(h0) * phi_n(h) is compared coefficient by coefficient with phi_{m+n+1}(h)/(1-h0/h)
        q, h0, M = 2.0, frac * h, 30
        f = qfactorials(M, q)

        def phi_series(mm, hh):
            c = np.zeros((M + 1, 1))
            for i in range(M + 1 - mm):
                c[mm + i, 0] = hh**i / f[mm + i]
            return XiSeries(c)

        conv = formal_qconv(phi_series(m, h0), phi_series(n, h), q).raw[:, 0].real
        bound = phi_series(m + n + 1, h).raw[:, 0].real / (1 - h0 / h)
        assert np.all(conv <= bound * (1 + 1e-12) + 1e-300)


class TestShiftProduct:
    def test_small_cases(self):
        assert qshift_product(2.0, 1.0, 0, 2.0) == 1
        assert qshift_product(2.0, 1.0, 1, 2.0) == pytest.approx(1.5)
        assert qshift_product(3.0, 0.0, 4, 2.0) == pytest.approx(81.0)

    def test_exact(self):
        q = Fraction(2)
        assert qshift_product(Fraction(1), Fraction(1), 2, q) == Fraction(1, 2) * Fraction(3, 4)


class TestBaseChange:
    def test_example_value(self):
        assert qnum_base_identity(2, 2, 2.0) == (5.0, 5.0)

    def test_unit(self):
        for n in range(1, 5):
            lhs, rhs = qnum_base_identity(1, n, 1.7)
            assert lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)

    def test_float(self):
        lhs, rhs = qnum_base_identity(3, 3, 1.5)
        assert abs(lhs - rhs) < 1e-12 * lhs

    @pytest.mark.parametrize("q", [Fraction(3, 2), Fraction(2)])
    def test_exact_grid(self, q):
        for m in range(7):
            for n in range(1, 5):
                lhs, rhs = qnum_base_identity(m, n, q)
                assert lhs == rhs
