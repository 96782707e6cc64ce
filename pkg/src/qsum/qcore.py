"""q-integers, q-factorials, the two q-exponentials and the phi_m kernels.

Every routine accepts ``q`` either as a :class:`QParam` or as a bare number.
Passing a :class:`fractions.Fraction` switches the purely algebraic routines
(``qnum``, ``qfactorial``, ``qshift_product``, ``qnum_base_identity``) to exact
rational arithmetic; the transcendental ones always work in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number

import numpy as np

from .errors import PoleProximity

__all__ = [
    "QParam",
    "as_qparam",
    "qnum",
    "qfactorial",
    "qnums",
    "qfactorials",
    "log_qfactorial",
    "exp_q",
    "Exp_q",
    "log_exp_q",
    "exp_q_log_profile",
    "PhiSpec",
    "phi",
    "log_phi",
    "qshift_product",
    "qnum_base_identity",
]

PRODUCT_TOL = 1e-14
POLE_GUARD = 1e-8


@dataclass(frozen=True)
class QParam:
    """The base ``q > 1`` together with its reciprocal ``p = 1/q``."""

    q: Number

    def __post_init__(self):
        if isinstance(self.q, QParam):
            object.__setattr__(self, "q", self.q.q)
        if isinstance(self.q, (int, np.integer)) and not isinstance(self.q, bool):
            object.__setattr__(self, "q", float(self.q))
        if not self.q > 1:
            raise ValueError(f"q must be > 1, got {self.q!r}")

    @property
    def p(self):
        return 1 / self.q

    @property
    def exact(self) -> bool:
        return isinstance(self.q, Fraction)

    def as_float(self) -> "QParam":
        return QParam(float(self.q))

    def __float__(self):
        return float(self.q)


def as_qparam(q) -> QParam:
    return q if isinstance(q, QParam) else QParam(q)


def _qval(q):
    return as_qparam(q).q


def qnum(n: int, q) -> Number:
    """``[n]_q = (q^n - 1)/(q - 1)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    q = _qval(q)
    return (q**n - 1) / (q - 1)


def qfactorial(n: int, q) -> Number:
    """``[n]_q! = [1]_q [2]_q ... [n]_q``; raises OverflowError instead of returning inf."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    q = _qval(q)
    out = Fraction(1) if isinstance(q, Fraction) else 1.0
    for k in range(1, n + 1):
        out = out * qnum(k, q)
    if isinstance(out, float) and not math.isfinite(out):
        raise OverflowError(f"[{n}]_q! overflows double precision at q={q}")
    return out


def log_qfactorial(n: int, q) -> float:
    q = float(_qval(q))
    return float(sum(math.log((q**k - 1) / (q - 1)) for k in range(1, n + 1)))


def qnums(n_max: int, q) -> np.ndarray:
    """Array ``[[0]_q, ..., [n_max]_q]`` (object dtype for exact q)."""
    q = _qval(q)
    if isinstance(q, Fraction):
        return np.array([qnum(n, q) for n in range(n_max + 1)], dtype=object)
    n = np.arange(n_max + 1, dtype=float)
    return (q**n - 1.0) / (q - 1.0)


def qfactorials(n_max: int, q) -> np.ndarray:
    q = _qval(q)
    if isinstance(q, Fraction):
        out = np.empty(n_max + 1, dtype=object)
        acc = Fraction(1)
        for n in range(n_max + 1):
            if n:
                acc = acc * qnum(n, q)
            out[n] = acc
        return out
    with np.errstate(over="ignore"):
        vals = np.cumprod(np.concatenate([[1.0], qnums(n_max, q)[1:]]))
    if not np.all(np.isfinite(vals)):
        raise OverflowError(f"q-factorials up to {n_max} overflow at q={q}")
    return vals


def _product_factors(x, q, sign, tol):
    """Yield factors ``1 + sign * q^{-k-1} (q-1) x`` until they deviate from 1 by < tol."""
    x = np.asarray(x, dtype=complex)
    c = (q - 1.0) * x
    scale = 1.0 / q
    k = 0
    while True:
        dev = sign * scale * c
        yield k, 1.0 + dev
        if np.all(np.abs(dev) < tol):
            return
        scale /= q
        k += 1


def exp_q(x, q, tol: float = PRODUCT_TOL):
    """Entire q-exponential ``sum x^n/[n]_q!`` via its Euler product."""
    qf = float(_qval(q))
    log_acc = np.zeros(np.shape(x), dtype=complex)
    zero = np.zeros(np.shape(x), dtype=bool)
    for _, f in _product_factors(x, qf, +1.0, tol):
        zero |= f == 0
        log_acc += np.log(np.where(f == 0, 1.0, f))
    out = np.where(zero, 0.0, np.exp(log_acc))
    return out[()] if out.ndim == 0 else out


def Exp_q(x, q, tol: float = PRODUCT_TOL, pole_guard: float = POLE_GUARD):
    """Meromorphic q-exponential ``1/prod(1 - q^{-m-1}(q-1)x)``.

    Raises :class:`PoleProximity` when a factor is smaller than ``pole_guard``
    in modulus, i.e. ``x`` sits next to a pole ``q^{m+1}/(q-1)``.
    """
    qf = float(_qval(q))
    log_acc = np.zeros(np.shape(x), dtype=complex)
    for k, f in _product_factors(x, qf, -1.0, tol):
        if np.any(np.abs(f) < pole_guard):
            raise PoleProximity(f"Exp_q argument within {pole_guard:g} of the pole q^{k + 1}/(q-1)")
        log_acc -= np.log(f)
    out = np.exp(log_acc)
    return out[()] if out.ndim == 0 else out


def log_exp_q(x: float, q) -> float:
    """``log exp_q(x)`` for real ``x >= 0`` without overflow."""
    qf = float(_qval(q))
    total = 0.0
    for _, f in _product_factors(float(x), qf, +1.0, PRODUCT_TOL):
        total += math.log(f.real)
    return total


def exp_q_log_profile(x, q):
    """Leading terms of ``log exp_q(x)`` as ``x -> +inf``; the remainder is O(1)."""
    lq = math.log(float(_qval(q)))
    lx = np.log(x)
    return lx**2 / (2 * lq) + (-0.5 + math.log(float(_qval(q)) - 1) / lq) * lx


@dataclass(frozen=True)
class PhiSpec:
    """Parameters of ``phi_m(x; h) = sum_i h^i x^{m+i} / [m+i]_q!``."""

    m: int
    h: float
    tail_eps: float = 1e-15

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.tail_eps > 0:
            raise ValueError("tail_eps must be positive")

    def __call__(self, x, q):
        return phi(self, x, q)


def phi(spec: PhiSpec, x, q, max_terms: int = 100_000):
    """Evaluate ``phi_m(x; h)`` for ``x >= 0`` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("phi is defined for x >= 0")
    out = np.array([_phi_scalar(spec, float(v), float(_qval(q)), max_terms) for v in arr.ravel()])
    out = out.reshape(arr.shape)
    return out[()] if out.ndim == 0 else out


def _phi_scalar(spec, x, q, max_terms):
    m, h = spec.m, spec.h
    if x == 0.0:
        return 1.0 if m == 0 else 0.0
    term = math.exp(m * math.log(x) - log_qfactorial(m, q))
    total = term
    n = m
    for _ in range(max_terms):
        n += 1
        ratio = h * x * (q - 1) / (q**n - 1)
        term *= ratio
        total += term
        # ratios decrease in n, so the tail is dominated by a geometric series
        if ratio < 0.5 and term * ratio / (1 - ratio) <= spec.tail_eps * total:
            return total
    raise RuntimeError("phi series did not converge")


def log_phi(m: int, h: float, x, q, tail_eps: float = 1e-15) -> np.ndarray:
    """``log phi_m(x; h)`` for ``x > 0`` without overflow (vectorized over x)."""
    qf = float(_qval(q))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    for idx, v in enumerate(x):
        if v <= 0:
            out[idx] = 0.0 if (v == 0 and m == 0) else -np.inf
            continue
        lt = m * math.log(v) - log_qfactorial(m, qf)
        lead, acc, n = lt, 1.0, m
        while True:
            n += 1
            lt += math.log(h * v * (qf - 1) / (qf**n - 1))
            if lt > lead:
                acc = acc * math.exp(lead - lt) + 1.0
                lead = lt
            else:
                acc += math.exp(lt - lead)
            ratio = h * v * (qf - 1) / (qf ** (n + 1) - 1)
            if ratio < 0.5 and math.exp(lt - lead) * ratio / (1 - ratio) < tail_eps * acc:
                break
        out[idx] = lead + math.log(acc)
    return out


def qshift_product(xi, y, k: int, q):
    """``(xi - p y)(xi - p^2 y) ... (xi - p^k y)``, with value 1 for ``k = 0``."""
    p = as_qparam(q).p
    out = 1
    pk = 1
    for _ in range(k):
        pk = pk * p
        out = out * (xi - pk * y)
    return out


def qnum_base_identity(m: int, n: int, q):
    """Both sides of ``[m]_{q^n} = (1/[n]_q) sum_{i<n} ((q-1)[m]_q + 1)^i [m]_q``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    qv = _qval(q)
    lhs = qnum(m, qv**n)
    base = (qv - 1) * qnum(m, qv) + 1
    rhs = sum(base**i for i in range(n)) * qnum(m, qv) / qnum(n, qv)
    return lhs, rhs
