"""From the (tD_q)-form to the (t^2 D_q)-form and on to the Borel plane.

``t^n (tD_q)^n`` is rewritten as ``q^{-n(n-1)/2} sum_i H_{n,i} t^{n-i} (t^2D_q)^i``.
After multiplying the tail equation by ``t^{m0}`` this yields coefficients
``A_{i,alpha}``, and the formal Borel transform turns ``(t^2 D_q)^i`` into
multiplication by ``xi^i`` and products into q-convolutions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .equation import ZERO_TOL, Equation, Term, check_assumptions, ord_t, p0_polynomial
from .errors import AssumptionViolated, OrderViolation, TruncationLoss
from .formal_solver import FormalSolution
from .powerseries import (
    Trunc,
    TSeries,
    XiSeries,
    dz_apply,
    formal_borel,
    formal_qconv,
    mul,
    t2Dq_apply,
    tDq_apply,
)
from .qcore import QParam, as_qparam, qnum

__all__ = [
    "HTable",
    "h_table",
    "IDENTITIES",
    "op_identity_lhs_rhs",
    "ReducedEquation",
    "reduce",
    "ConvTerm",
    "ConvEquation",
    "to_conv_equation",
    "default_mu",
    "halve_variable",
    "even_embed",
]


# -- the H_{n,i} table --------------------------------------------------------


@dataclass(frozen=True)
class HTable:
    """Constants ``H_{n,i}``, with ``H_{0,0} = 1`` and ``H_{n,0} = 0`` for ``n >= 1``."""

    q: QParam
    entries: dict

    def __call__(self, n: int, i: int):
        if i == 0:
            return 1 if n == 0 else 0
        return self.entries.get((n, i), 0)

    @property
    def n_cap(self) -> int:
        return max((n for n, _ in self.entries), default=0)


def h_table(n_cap: int, q) -> HTable:
    """Fill ``H_{n,i} = q^{n-i} H_{n-1,i-1} + ([n-1-i]_q - [n-1]_q) H_{n-1,i}``."""
    if n_cap < 1:
        raise ValueError("n_cap must be >= 1")
    qp = as_qparam(q)
    qv = qp.q
    one = Fraction(1) if qp.exact else 1.0
    H = {(0, 0): one}
    for n in range(1, n_cap + 1):
        for i in range(1, n + 1):
            val = qv ** (n - i) * H.get((n - 1, i - 1), 0)
            if i < n:
                val = val + (qnum(n - 1 - i, qv) - qnum(n - 1, qv)) * H.get((n - 1, i), 0)
            H[(n, i)] = val
    del H[(0, 0)]
    return HTable(qp, H)


# -- operator identities on monomials -----------------------------------------


def _mono(k, trunc, exact):
    return TSeries.monomial(k, trunc, exact=exact)


def _t2dq_pow(s, i, q):
    for _ in range(i):
        s = t2Dq_apply(s, q)
    return s


def _tdq_pow(s, i, q):
    for _ in range(i):
        s = tDq_apply(s, q)
    return s


def _shift_id(n, k, q, trunc, exact, i=None):
    # t^n (tD_q) = q^{-n} (tD_q - [n]_q) t^n
    x = _mono(k, trunc, exact)
    lhs = tDq_apply(x, q).shift(n)
    y = x.shift(n)
    rhs = (tDq_apply(y, q) - y.scale(qnum(n, q))).scale(1 / q**n)
    return lhs, rhs


def _t2dq_id(n, k, q, trunc, exact, i=1):
    # (t^2 D_q) t^{n-i} = q^{n-i} t^{n-i} (t^2 D_q) + [n-i]_q t^{n-i+1}
    if not 1 <= i < n:
        raise ValueError("need 1 <= i < n")
    x = _mono(k, trunc, exact)
    lhs = t2Dq_apply(x.shift(n - i), q)
    rhs = t2Dq_apply(x, q).shift(n - i).scale(q ** (n - i)) + x.shift(n - i + 1).scale(qnum(n - i, q))
    return lhs, rhs


def _power_id(n, k, q, trunc, exact, i=None):
    # t^n (tD_q)^n = q^{-n(n-1)/2} sum_i H_{n,i} t^{n-i} (t^2 D_q)^i
    H = h_table(max(n, 1), q)
    x = _mono(k, trunc, exact)
    lhs = _tdq_pow(x, n, q).shift(n)
    rhs = TSeries.zeros(trunc, exact)
    for j in range(1, n + 1):
        rhs = rhs + _t2dq_pow(x, j, q).shift(n - j).scale(H(n, j))
    return lhs, rhs.scale(1 / q ** (n * (n - 1) // 2))


def _base_change_id(n, k, q, trunc, exact, i=None):
    # t D_{q^n} = (q-1)/(q^n-1) sum_{i<n} ((q-1) tD_q + 1)^i (tD_q)
    x = _mono(k, trunc, exact)
    lhs = tDq_apply(x, q**n)
    acc = tDq_apply(x, q)
    rhs = TSeries.zeros(trunc, exact)
    for _ in range(n):
        rhs = rhs + acc
        acc = tDq_apply(acc, q).scale(q - 1) + acc
    return lhs, rhs.scale((q - 1) / (q**n - 1))


IDENTITIES = {
    "shift_commute": _shift_id,
    "t2dq_commute": _t2dq_id,
    "power_expansion": _power_id,
    "base_change": _base_change_id,
}


def op_identity_lhs_rhs(which: str, n: int, k: int, q, i: int = 1, Mt: int | None = None):
    """Both sides of an operator identity applied to ``t^k``.

    ``which`` selects ``shift_commute``, ``t2dq_commute`` (uses ``i``),
    ``power_expansion`` or ``base_change``.  Exact when ``q`` is a Fraction.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    qp = as_qparam(q)
    Mt = 2 * n + k + 2 if Mt is None else Mt
    trunc = Trunc(Mt, 0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationLoss)
        return IDENTITIES[which](n, k, qp.q, trunc, qp.exact, i=i)


# -- reduction to the (t^2 D_q)-form -------------------------------------------


@dataclass
class ReducedEquation:
    """``sum A_{i,alpha}(t,z) (t^2D_q)^i d^alpha X^0 = t^{m0} F^0``, stored at an extended truncation."""

    q: QParam
    sigma: object
    m0: int
    m: int
    mu: int
    Mt: int
    A: dict
    rhs: TSeries
    tail: TSeries | None = None
    F0: TSeries | None = None

    @property
    def trunc(self) -> Trunc:
        return self.rhs.trunc

    def apply(self, X: TSeries) -> TSeries:
        out = TSeries.zeros(X.trunc, X.exact)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationLoss)
            for (i, alpha), a in self.A.items():
                out = out + mul(a, _t2dq_pow(dz_apply(X, alpha), i, self.q.q))
        return out

    def summary(self):
        return {
            "m0": self.m0,
            "m": self.m,
            "mu": self.mu,
            "Mt_ext": self.trunc.Mt,
            "orders": {f"{i},{a}": _ord_json(ord_t(A)) for (i, a), A in sorted(self.A.items())},
        }


def _ord_json(o):
    return o if math.isfinite(o) else "inf"


def _zero_below(s: TSeries, n: int) -> TSeries:
    c = s.coeffs
    c[:n] = 0
    return TSeries(c)


def _is_small(rows, scale, tol):
    if rows.dtype == object:
        return all(v == 0 for v in rows.ravel())
    return float(np.max(np.abs(rows), initial=0.0)) <= tol * max(scale, 1.0)


def reduce(eq: Equation, mu: int, sol, zero_tol: float = ZERO_TOL, rel_tol: float = 1e-9) -> ReducedEquation:
    """Rewrite the tail equation for ``X^0 = sum_{n>mu} X_n t^n`` in the (t^2 D_q)-form.

    ``sol`` is a :class:`FormalSolution` (head and tail are taken from it) or a
    TSeries holding the head ``sum_{n<=mu} X_n t^n``.
    """
    rep = check_assumptions(eq)
    if not rep.summable:
        raise AssumptionViolated("reduction needs A1-A3 and the extra order condition: " + "; ".join(rep.violations))
    if mu < 1:
        raise AssumptionViolated("mu must be >= 1")
    m0, m = rep.m0, eq.m
    q = eq.q.q
    Mt = eq.trunc.Mt
    if mu >= Mt:
        raise AssumptionViolated(f"mu={mu} must be below the truncation Mt={Mt}")
    if isinstance(sol, FormalSolution):
        head, tail = sol.head(mu), sol.tail(mu)
    else:
        head, tail = sol, None
    ext = Mt + mu + m0 + 1
    eqx = eq.resized(Mt=ext)
    headx = head.resized(Mt=ext)

    # F^0 = F - L(head); its first mu+1 coefficients vanish when head solves the recursion
    F0 = eqx.rhs - eqx.apply(headx)
    scale = float(np.max(np.abs(eqx.rhs.raw.astype(complex)), initial=0.0))
    for t in eqx.terms:
        scale = max(scale, float(np.max(np.abs(eqx.apply_term(t, headx).raw.astype(complex)), initial=0.0)))
    if not _is_small(F0.raw[: mu + 1], scale, rel_tol):
        raise AssumptionViolated("the head does not solve the recursion up to mu")
    F0 = _zero_below(F0, mu + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationLoss)
        rhs = F0.shift(m0)

    H = h_table(max(m, 1), eq.q)
    A = {}
    for t in eqx.terms:
        for i in range(0 if t.j == 0 else 1, t.j + 1):
            c = t.coeff.scale(H(t.j, i) / q ** (t.j * (t.j - 1) // 2))
            if i <= m0:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", TruncationLoss)
                    c = c.shift(m0 - i)
            else:
                drop = i - m0
                if not _is_small(c.raw[:drop], 0.0, zero_tol):
                    raise OrderViolation(f"a_{t.j},{t.alpha} is not divisible by t^{drop}")
                c = _zero_below(c, drop).unshift(drop)
            key = (i, t.alpha)
            A[key] = A[key] + c if key in A else c

    for (i, alpha), a in A.items():
        o = ord_t(a, zero_tol)
        if alpha == 0:
            need = m0 - i if i < m0 else 0
        else:
            need = m0 - i + 1 if i < m0 else 2
        if o < need:
            raise OrderViolation(f"ord_t(A_{i},{alpha}) = {o} < {need}")
    P0 = p0_polynomial(eq)
    for i in range(m0, m + 1):
        got = A.get((i, 0), TSeries.zeros(eqx.trunc, eq.exact)).raw[0]
        want = P0[i - m0]
        if not _is_small(np.asarray(got - want), float(np.max(np.abs(want.astype(complex)))), 1e-12):
            raise OrderViolation(f"A_{i},0(0,z) does not match the characteristic coefficient")
    tailx = None if tail is None else tail.resized(Mt=ext)
    return ReducedEquation(eq.q, eq.sigma, m0, m, mu, Mt, A, rhs, tailx, F0)


# -- the q-convolution equation -----------------------------------------------


@dataclass(frozen=True)
class ConvTerm:
    i: int
    alpha: int
    c: XiSeries
    nested: bool


@dataclass
class ConvEquation:
    """``P u + sum c_{i,0} * (xi^i u) + sum c_{i,a} * (1 * (xi^i d^a u)) = f``.

    ``P`` has shape ``(m+1, Mz+1)``: row ``i`` is the ZPoly coefficient of ``xi^i``.
    ``Mt`` is the order up to which formal data (``u0``) is trustworthy.
    """

    P: np.ndarray
    conv_terms: tuple
    f: XiSeries
    m0: int
    m: int
    sigma: object
    q: QParam
    Mt: int
    u0: XiSeries | None = None
    extra: dict = field(default_factory=dict)

    @property
    def trunc(self) -> Trunc:
        return self.f.trunc

    def P_at(self, xi) -> np.ndarray:
        """ZPoly ``P(xi, z)``."""
        acc = np.zeros(self.P.shape[1], dtype=complex)
        for row in self.P[::-1]:
            acc = acc * xi + row.astype(complex)
        return acc

    def apply_formal(self, u: XiSeries, parts: bool = False):
        """Left-hand side with q-convolutions expanded formally; optionally each piece."""
        q = self.q.q
        pieces = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationLoss)
            pu = XiSeries.zeros(u.trunc, u.exact)
            for i, row in enumerate(self.P):
                pu = pu + u.shift(i).mulz(row)
            pieces.append(pu)
            one = XiSeries.monomial(0, u.trunc, exact=u.exact)
            for ct in self.conv_terms:
                g = dz_apply(u, ct.alpha).shift(ct.i)
                if ct.nested:
                    g = formal_qconv(one, g, q)
                pieces.append(formal_qconv(ct.c, g, q))
        total = pieces[0]
        for p in pieces[1:]:
            total = total + p
        return (total, pieces) if parts else total

    def majorant(self) -> "ConvEquation":
        """The same equation with every coefficient replaced by its modulus."""
        terms = tuple(ConvTerm(ct.i, ct.alpha, _abs_series(ct.c), ct.nested) for ct in self.conv_terms)
        P = np.abs(self.P.astype(complex)).astype(complex)
        return ConvEquation(P, terms, _abs_series(self.f), self.m0, self.m, self.sigma, self.q.as_float(), self.Mt)

    def formal_residual(self, u: XiSeries | None = None, n_max: int | None = None) -> float:
        """Relative residual of the formal equation for coefficients ``xi^0..xi^{n_max}``.

        Each coefficient is measured against the majorant equation applied to ``|u|``,
        which bounds the size of every product that enters it.
        """
        u = self.u0 if u is None else u
        n_max = self.Mt - 1 if n_max is None else n_max
        r = np.abs((self.apply_formal(u) - self.f).raw.astype(complex))[: n_max + 1]
        maj = self.majorant()
        scale = np.abs((maj.apply_formal(_abs_series(u)) + maj.f).raw)[: n_max + 1]
        worst = 0.0
        for n in range(n_max + 1):
            s = float(scale[n].max())
            if s > 0:
                worst = max(worst, float(r[n].max()) / s)
        return worst

    def summary(self):
        return {
            "m0": self.m0,
            "m": self.m,
            "Mt": self.Mt,
            "P_at_z0": [[complex(v).real, complex(v).imag] for v in self.P[:, 0]],
            "conv_terms": [
                {"i": ct.i, "alpha": ct.alpha, "nested": ct.nested, "deg": _ord_json(_deg(ct.c))}
                for ct in self.conv_terms
            ],
        }


def _abs_series(s):
    return type(s)(np.abs(s.raw.astype(complex)).astype(complex))


def _deg(s):
    nz = [n for n, row in enumerate(s.raw) if np.any(row != 0)]
    return max(nz) if nz else -math.inf


def to_conv_equation(red: ReducedEquation, q=None) -> ConvEquation:
    q = red.q if q is None else as_qparam(q)
    Mz = red.trunc.Mz
    exact = red.rhs.exact
    P = np.zeros((red.m + 1, Mz + 1), dtype=object if exact else complex)
    if exact:
        P[...] = Fraction(0)
    terms = []
    for (i, alpha), A in sorted(red.A.items()):
        if alpha == 0:
            if i >= red.m0:
                P[i] = A.raw[0]
            c = formal_borel(_zero_below(A, 1), q)
            if ord_t(c) != math.inf:
                terms.append(ConvTerm(i, 0, c, False))
        else:
            if ord_t(A) == math.inf:
                continue
            # A = t * (t A^0) with ord(A) >= 2, so c = B[A/t]
            c = formal_borel(A.unshift(1), q)
            terms.append(ConvTerm(i, alpha, c, True))
    f = formal_borel(red.rhs, q)
    u0 = None if red.tail is None else formal_borel(red.tail, q)
    return ConvEquation(P, tuple(terms), f, red.m0, red.m, red.sigma, q, red.Mt, u0)


def default_mu(eq: Equation, sol: FormalSolution, safety: float = 4.0, mu_min: int = 1) -> int:
    """Smallest ``mu`` for which a conservative contraction proxy drops below 1.

    The Borel-plane fixed-point map gains a factor ``[N]_q!/[N+m0]_q!`` type
    decay per step (N = m0 + mu); we require ``safety * sum_i C_i q^{-N}`` below 1,
    where ``C_i`` bounds the lower-order coefficients relative to the leading one.
    The result is capped at ``(Mt - m0) // 2`` so the Borel-side Taylor data keeps
    enough coefficients to estimate its radius; for q near 1 the proxy alone
    would leave almost nothing.
    """
    rep = check_assumptions(eq)
    m0 = rep.m0 if rep.m0 is not None else 0
    P0 = p0_polynomial(eq) if rep.m0 is not None else None
    lead = abs(complex(P0[0][0])) if P0 is not None else 1.0
    total = 0.0
    for t in eq.active_terms():
        a = np.abs(t.coeff.raw.astype(complex))
        total += float(a[1:].sum()) if t.alpha == 0 else float(a.sum())
    ratio = total / max(lead, 1e-300)
    q = float(eq.q.q)
    mu = mu_min
    cap = max(mu_min, (eq.trunc.Mt - m0) // 2)
    while safety * ratio * q ** (-(m0 + mu)) >= 1 and mu < cap:
        mu += 1
    return mu


# -- the t = tau^2 change of variable ------------------------------------------


def even_embed(s: TSeries, Mt: int | None = None) -> TSeries:
    """``s(tau^2)`` as a TSeries in tau."""
    Mt = 2 * s.Mt if Mt is None else Mt
    out = TSeries.zeros(Trunc(Mt, s.Mz), s.exact).coeffs
    n = min(s.Mt, Mt // 2)
    out[0 : 2 * n + 1 : 2] = s.raw[: n + 1]
    return TSeries(out)


def _b_powers(jmax, q1):
    """Coefficient lists of ``B^j`` in powers of ``tau D_{q1}``."""
    d = qnum(4, q1)
    base = np.array([0.0, 2.0 / d, (q1 - 1.0) / d])
    out = [np.array([1.0])]
    for _ in range(jmax):
        out.append(np.convolve(out[-1], base))
    return out


def halve_variable(eq: Equation) -> Equation:
    """Substitute ``t = tau^2`` and expand in powers of ``tau D_{q^{1/4}}``.

    Each ``tD_q`` becomes ``B = ((q1-1)(tau D_{q1})^2 + 2 tau D_{q1}) / [4]_{q1}``
    with ``q1 = q^{1/4}``; since B has constant coefficients its powers expand
    into a polynomial in ``tau D_{q1}``.  The result has ``m' = 2m``,
    ``sigma' = 2 sigma`` and truncation ``2 Mt``.
    """
    q1 = float(eq.q.q) ** 0.25
    Mt2 = 2 * eq.trunc.Mt
    jmax = max(t.j for t in eq.terms)
    bp = _b_powers(jmax, q1)
    acc = {}
    for t in eq.terms:
        a2 = even_embed(t.coeff.to_float(), Mt2)
        for k, beta in enumerate(bp[t.j]):
            if beta == 0:
                continue
            key = (k, t.alpha)
            acc[key] = acc[key] + a2.scale(beta) if key in acc else a2.scale(beta)
    terms = tuple(Term(k, alpha, c) for (k, alpha), c in acc.items())
    out = Equation(QParam(q1), 2 * eq.sigma, 2 * eq.m, terms, even_embed(eq.rhs.to_float(), Mt2))
    before = check_assumptions(eq)
    if before.ok:
        after = check_assumptions(out)
        if not (after.summable and after.m0 == 2 * before.m0):
            raise AssumptionViolated("halved equation failed its own shape check: " + "; ".join(after.violations))
    return out
