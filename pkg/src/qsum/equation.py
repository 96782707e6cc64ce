"""Linear q-difference-differential equations and their t-Newton polygon.

An :class:`Equation` stores the operator

    sum_{j + sigma*alpha <= m} a_{j,alpha}(t, z) (t D_q)^j d_z^alpha X = F(t, z)

with one space variable, so ``alpha`` is a single integer.  Coefficients and
the right-hand side are :class:`~qsum.series.TSeries` taken to be exact
polynomials (everything past the truncation is zero).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateSector, RootFindingFailure, ShapeMismatch, ValidationError
from .qcore import QParam, as_qparam
from .powerseries import Trunc, TSeries, dz_apply, mul, tDq_apply, zeval

__all__ = [
    "ZERO_TOL",
    "Term",
    "Equation",
    "NewtonPolygon",
    "AssumptionReport",
    "DirectionSet",
    "ord_t",
    "newton_polygon",
    "check_assumptions",
    "p0_polynomial",
    "p1_polynomial",
    "lam_eval",
    "aberth_roots",
    "singular_directions",
    "sector_lower_bound",
    "slope_one_equation",
    "factorial_growth_equation",
]

ZERO_TOL = 1e-13


def _is_zero_row(row, zero_tol=ZERO_TOL) -> bool:
    if row.dtype == object:
        return all(v == 0 for v in row)
    return float(np.max(np.abs(row), initial=0.0)) <= zero_tol


def ord_t(f: TSeries, zero_tol: float = ZERO_TOL):
    """Index of the first t-coefficient that is not identically zero; ``math.inf`` for 0."""
    for n, row in enumerate(f.raw):
        if not _is_zero_row(row, zero_tol):
            return n
    return math.inf


@dataclass(frozen=True)
class Term:
    j: int
    alpha: int
    coeff: TSeries


@dataclass(frozen=True)
class Equation:
    q: QParam
    sigma: Fraction | float
    m: int
    terms: tuple
    rhs: TSeries

    def __post_init__(self):
        object.__setattr__(self, "q", as_qparam(self.q))
        object.__setattr__(self, "terms", tuple(sorted(self.terms, key=lambda t: (t.j, t.alpha))))
        if not self.m >= 1:
            raise ValidationError("m must be a positive integer")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if not self.terms:
            raise ValidationError("equation has no terms")
        keys = [(t.j, t.alpha) for t in self.terms]
        if len(set(keys)) != len(keys):
            raise ValidationError("duplicate (j, alpha) term")
        for t in self.terms:
            if t.j < 0 or t.alpha < 0:
                raise ValidationError(f"negative index in term {(t.j, t.alpha)}")
            if t.j + self.sigma * t.alpha > self.m + 1e-12:
                raise ValidationError(f"term {(t.j, t.alpha)} violates j + sigma*alpha <= m")
            if t.coeff.trunc != self.rhs.trunc:
                raise ValidationError(f"term {(t.j, t.alpha)} has truncation {t.coeff.trunc}, rhs {self.rhs.trunc}")
        orders = [ord_t(t.coeff) for t in self.terms]
        if min(orders) != 0:
            raise ValidationError("normalization requires some coefficient with ord_t = 0")

    @property
    def trunc(self) -> Trunc:
        return self.rhs.trunc

    @property
    def exact(self) -> bool:
        return self.rhs.exact

    def coeff(self, j: int, alpha: int) -> TSeries:
        for t in self.terms:
            if (t.j, t.alpha) == (j, alpha):
                return t.coeff
        return TSeries.zeros(self.trunc, self.exact)

    def active_terms(self):
        """Terms whose coefficient is not identically zero."""
        return [t for t in self.terms if ord_t(t.coeff) != math.inf]

    def apply(self, X: TSeries) -> TSeries:
        """The left-hand side operator applied to a truncated series."""
        out = TSeries.zeros(X.trunc, X.exact)
        for t in self.terms:
            out = out + self.apply_term(t, X)
        return out

    def apply_term(self, t: Term, X: TSeries) -> TSeries:
        """``a_{j,alpha} (tD_q)^j d_z^alpha X`` for a single term."""
        Y = dz_apply(X, t.alpha)
        for _ in range(t.j):
            Y = tDq_apply(Y, self.q.q)
        return mul(t.coeff, Y)

    def with_rhs(self, rhs: TSeries) -> "Equation":
        return Equation(self.q, self.sigma, self.m, self.terms, rhs)

    def resized(self, Mt=None, Mz=None) -> "Equation":
        terms = tuple(Term(t.j, t.alpha, t.coeff.resized(Mt, Mz)) for t in self.terms)
        return Equation(self.q, self.sigma, self.m, terms, self.rhs.resized(Mt, Mz))


# -- Newton polygon -----------------------------------------------------------


@dataclass(frozen=True)
class NewtonPolygon:
    """Lower-right boundary of the convex hull of the quadrants ``x <= j, y >= ord``.

    ``vertices`` run from the right end of the horizontal edge to the foot
    of the vertical edge; ``slopes`` lists 0, the finite edge slopes, then inf.
    """

    vertices: tuple
    m0: int | None
    slopes: tuple
    points: tuple = field(default=())

    def lower_boundary(self, x: float) -> float:
        """Height of the boundary at abscissa ``x`` (``inf`` right of the polygon)."""
        vs = self.vertices
        if x > vs[-1][0]:
            return math.inf
        if x <= vs[0][0]:
            return vs[0][1]
        for (x0, y0), (x1, y1) in zip(vs, vs[1:]):
            if x0 <= x <= x1:
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        return vs[-1][1]

    def contains(self, x, y) -> bool:
        return x <= self.vertices[-1][0] and y >= self.lower_boundary(x)

    def interior(self, x, y) -> bool:
        return x < self.vertices[-1][0] and y > self.lower_boundary(x)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def newton_polygon(eq: Equation) -> NewtonPolygon:
    pts = sorted({(t.j, ord_t(t.coeff)) for t in eq.active_terms()})
    if not pts:
        raise ValueError("equation has only zero coefficients")
    # staircase: lowest point on each vertical line
    lowest = {}
    for x, y in pts:
        lowest[x] = min(y, lowest.get(x, math.inf))
    y_min = min(lowest.values())
    x_start = max(x for x, y in lowest.items() if y == y_min)
    chain_pts = sorted((x, y) for x, y in lowest.items() if x >= x_start)
    hull = []
    for p in chain_pts:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    slopes = [0.0]
    for (x0, y0), (x1, y1) in zip(hull, hull[1:]):
        slopes.append((y1 - y0) / (x1 - x0))
    slopes.append(math.inf)
    m0 = None
    if (
        len(hull) == 2
        and hull[0][1] == 0
        and hull[1][0] == eq.m
        and hull[1][1] == eq.m - hull[0][0]
        and 0 <= hull[0][0] < eq.m
    ):
        m0 = hull[0][0]
    return NewtonPolygon(tuple(hull), m0, tuple(slopes), tuple(pts))


@dataclass
class AssumptionReport:
    """Outcome of the polygon hypotheses A1-A3 and two order conditions.

    ``order_condition``: every d_z term with ``m0 <= j < m`` has ``ord_t >= j - m0 + 2``.
    ``reducible``: the coefficient orders allow the rewrite in powers of ``t^2 D_q``.
    """

    a1: bool
    a2: bool
    a3: bool
    order_condition: bool
    reducible: bool
    m0: int | None
    polygon: NewtonPolygon
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.a1 and self.a2 and self.a3

    @property
    def summable(self) -> bool:
        """All hypotheses of the summability theorem hold."""
        return self.ok and self.order_condition

    def to_dict(self):
        return {
            "A1": self.a1,
            "A2": self.a2,
            "A3": self.a3,
            "order_condition": self.order_condition,
            "reducible": self.reducible,
            "m0": self.m0,
            "vertices": [list(v) for v in self.polygon.vertices],
            "slopes": [s if math.isfinite(s) else "inf" for s in self.polygon.slopes],
            "violations": list(self.violations),
        }


def _origin_value(f: TSeries, n: int):
    """Value at z = 0 of the t^n coefficient."""
    if n > f.Mt:
        return 0
    return f.raw[n][0]


def check_assumptions(eq: Equation) -> AssumptionReport:
    poly = newton_polygon(eq)
    m0 = poly.m0
    violations = []
    a1 = m0 is not None
    if not a1:
        violations.append(f"A1: polygon vertices {list(poly.vertices)} are not (m0,0),(m,m-m0) with m={eq.m}")
        return AssumptionReport(False, False, False, False, False, None, poly, violations)

    a2 = True
    cond = True
    lem = True
    for t in eq.active_terms():
        o = ord_t(t.coeff)
        if t.alpha > 0:
            if not poly.interior(t.j, o):
                a2 = False
                violations.append(f"A2: point ({t.j}, {o}) of term alpha={t.alpha} not interior")
            if m0 <= t.j < eq.m and o < t.j - m0 + 2:
                cond = False
                violations.append(f"order_condition: ord_t(a_{t.j},{t.alpha}) = {o} < {t.j - m0 + 2}")
            if o < max(1, t.j - m0 + 1):
                lem = False
        elif o < max(0, t.j - m0):
            lem = False

    a3 = True
    if _origin_value(eq.coeff(m0, 0), 0) == 0 or abs(_origin_value(eq.coeff(m0, 0), 0)) <= ZERO_TOL:
        a3 = False
        violations.append(f"A3: a_{m0},0(0,0) = 0")
    top = _origin_value(eq.coeff(eq.m, 0), eq.m - m0)
    if top == 0 or abs(top) <= ZERO_TOL:
        a3 = False
        violations.append(f"A3: a_{eq.m},0 / t^{eq.m - m0} vanishes at the origin")
    return AssumptionReport(a1, a2, a3, cond and a2, lem, m0, poly, violations)


# -- characteristic polynomials ----------------------------------------------


def _require_m0(eq: Equation) -> int:
    m0 = newton_polygon(eq).m0
    if m0 is None:
        raise ShapeMismatch("Newton polygon lacks the single slope-one edge; m0 undefined")
    return m0


def p0_polynomial(eq: Equation) -> np.ndarray:
    """Rows ``i = 0..m-m0``: ZPoly coefficient of ``lambda^i`` in P0(lambda, z)."""
    m0 = _require_m0(eq)
    q = eq.q.q
    dtype = object if eq.exact else complex
    out = np.zeros((eq.m - m0 + 1, eq.trunc.Mz + 1), dtype=dtype)
    if dtype is object:
        out[...] = Fraction(0)
    for j in range(m0, eq.m + 1):
        a = eq.coeff(j, 0)
        shift = j - m0
        if any(not _is_zero_row(a.raw[n]) for n in range(min(shift, a.Mt + 1))):
            raise ShapeMismatch(f"a_{j},0 is not divisible by t^{shift}")
        if shift <= a.Mt:
            out[shift] = a.raw[shift] / q ** (j * (j - 1) // 2)
    return out


def p1_polynomial(eq: Equation, m0: int | None = None) -> np.ndarray:
    """Rows ``j = 0..m0``: ``a_{j,0}(0, z)``.  Without a slope-one polygon all j are used."""
    if m0 is None:
        m0 = newton_polygon(eq).m0
        if m0 is None:
            m0 = max(t.j for t in eq.terms)
    dtype = object if eq.exact else complex
    out = np.zeros((m0 + 1, eq.trunc.Mz + 1), dtype=dtype)
    if dtype is object:
        out[...] = Fraction(0)
    for j in range(m0 + 1):
        out[j] = eq.coeff(j, 0).raw[0]
    return out


def lam_eval(P: np.ndarray, lam) -> np.ndarray:
    """Evaluate a polynomial in lambda with ZPoly coefficients; returns a ZPoly."""
    acc = np.zeros(P.shape[1], dtype=P.dtype if P.dtype == object else complex)
    for row in P[::-1]:
        acc = acc * lam + row
    return acc


# -- roots and singular directions -------------------------------------------


def aberth_roots(coeffs, tol: float = 1e-12, max_iter: int = 200, seed: int = 0, restarts: int = 5):
    """All roots of ``sum coeffs[i] x^i`` by Aberth-Ehrlich simultaneous iteration."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    deg = len(c) - 1
    if deg < 1:
        raise ValueError("polynomial must be nonconstant")
    c = c / c[-1]
    if deg == 1:
        return np.array([-c[0]])
    dc = c[1:] * np.arange(1, deg + 1)
    rng = np.random.default_rng(seed)
    # Fujiwara-type bound for the initial circle
    radius = 2 * max(abs(c[deg - k]) ** (1.0 / k) for k in range(1, deg + 1))
    radius = max(radius, 1e-3)
    for _ in range(restarts):
        phase = rng.uniform(0, 2 * np.pi)
        r = radius * (0.5 + rng.uniform(0, 0.5))
        z = r * np.exp(1j * (phase + 2 * np.pi * np.arange(deg) / deg))
        for _ in range(max_iter):
            pz = np.polyval(c[::-1], z)
            dpz = np.polyval(dc[::-1], z)
            ratio = pz / np.where(dpz == 0, 1e-300, dpz)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            w = ratio / (1 - ratio * inv.sum(axis=1))
            z = z - w
            if np.all(np.abs(w) <= tol * (1 + np.abs(z))):
                break
        resid = np.abs(np.polyval(c[::-1], z))
        if np.all(resid <= tol * (1 + np.abs(z)) ** deg * 10):
            return z
    raise RootFindingFailure(f"Aberth iteration did not converge (residuals {resid})")


@dataclass(frozen=True)
class DirectionSet:
    """Roots of P0(lambda, 0) and the arguments of the rays they span."""

    roots: tuple
    angles: tuple

    def distance(self, lam) -> float:
        """Smallest angular distance from ``arg lam`` to a singular ray."""
        a = cmath.phase(lam)
        return min(abs((a - b + math.pi) % (2 * math.pi) - math.pi) for b in self.angles)


def singular_directions(eq: Equation, root_tol: float = 1e-12, seed: int = 0) -> DirectionSet:
    P0 = p0_polynomial(eq)
    c = np.array([complex(row[0]) for row in P0])
    roots = aberth_roots(c, tol=root_tol, seed=seed)
    if np.any(roots == 0):
        raise RootFindingFailure("P0(., 0) has a zero root")
    return DirectionSet(tuple(complex(r) for r in roots), tuple(cmath.phase(r) for r in roots))


def _angle_in(theta, lo, hi) -> bool:
    width = hi - lo
    return (theta - lo) % (2 * math.pi) <= width


def sector_lower_bound(
    eq: Equation,
    lam,
    interval,
    R: float,
    n_angles: int = 16,
    n_radii: int = 40,
    r_range=(1e-3, 1e3),
    n_z: int = 8,
    delta_floor: float = 1e-9,
) -> float:
    """Sampled ``min |P0(xi, z)| / (1 + |xi|)^{m-m0}`` over the sector and ``|z| <= R``."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    lo, hi = interval
    if not _angle_in(cmath.phase(lam), lo, hi):
        raise ValueError("arg(lambda) is outside the interval")
    P0 = p0_polynomial(eq)
    dirs = singular_directions(eq)
    for ang in dirs.angles:
        if _angle_in(ang, lo, hi):
            raise DegenerateSector(f"singular ray at angle {ang:.6g} lies in the sector")
    deg = P0.shape[0] - 1
    radii = np.concatenate([np.geomspace(*r_range, n_radii), np.abs(dirs.roots)])
    angles = np.linspace(lo, hi, n_angles)
    xi = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
    zs = np.concatenate([[0.0], R * np.exp(2j * np.pi * np.arange(n_z) / n_z)])
    P = P0.astype(complex)
    vals = np.zeros((len(xi), len(zs)), dtype=complex)
    for i in range(deg, -1, -1):
        vals = vals * xi[:, None] + zeval(P[i], zs)[None, :]
    delta = float(np.min(np.abs(vals) / (1 + np.abs(xi)[:, None]) ** deg))
    if delta < delta_floor:
        raise DegenerateSector(f"sampled lower bound {delta:.3g} below floor {delta_floor:g}")
    return delta


# -- model equations ----------------------------------------------------------


def _poly_t(trunc, coeffs_by_power):
    return TSeries.from_terms([(n, 0, c) for n, c in coeffs_by_power.items()], trunc)


def slope_one_equation(
    a=1.0, b=1.0, c=0.0, n1=2, n0=1, alpha1=1, alpha0=1, rhs=None, q=2.0, Mt=24, Mz=12
) -> Equation:
    """``a t (tD_q)^2 X + b (tD_q) X + c X + t^n1 d_z^alpha1 (tD_q) X + t^n0 d_z^alpha0 X = F``.

    ``rhs`` is a TSeries, or ``None`` for ``F = t``.  The polygon has m0 = 1, m = 2.
    """
    trunc = Trunc(Mt, Mz)
    sigma = Fraction(1, max(alpha1, 1))
    terms = [
        Term(2, 0, _poly_t(trunc, {1: a})),
        Term(1, 0, _poly_t(trunc, {0: b})),
        Term(0, 0, _poly_t(trunc, {0: c})),
        Term(1, alpha1, _poly_t(trunc, {n1: 1.0})),
        Term(0, alpha0, _poly_t(trunc, {n0: 1.0})),
    ]
    if rhs is None:
        rhs = _poly_t(trunc, {1: 1.0})
    return Equation(QParam(q), sigma, 2, tuple(terms), rhs)


def factorial_growth_equation(a=1.0, b=1.0, alpha=1, q=2.0, Mt=16, Mz=16) -> Equation:
    """``(tD_q + 1) X - t (tD_q)^2 X - b t d_z^alpha X = a t / (1 - z)``.

    Its formal solution grows exactly like ``[n]_q!``, so it is the sharp case
    for the coefficient bound.
    """
    trunc = Trunc(Mt, Mz)
    terms = [
        Term(1, 0, _poly_t(trunc, {0: 1.0})),
        Term(0, 0, _poly_t(trunc, {0: 1.0})),
        Term(2, 0, _poly_t(trunc, {1: -1.0})),
        Term(0, alpha, _poly_t(trunc, {1: -b})),
    ]
    rhs = TSeries.from_terms([(1, k, a) for k in range(Mz + 1)], trunc)
    return Equation(QParam(q), Fraction(2, alpha), 2, tuple(terms), rhs)
