"""Truncated power series in ``t`` (physical plane) and ``xi`` (Borel plane).

Coefficients are truncated Taylor polynomials in the space variable ``z``.
A ``ZPoly`` is simply a 1-D numpy array ``[c_0, ..., c_Mz]``; a series stores
a 2-D array whose row ``n`` is the ZPoly coefficient of ``t^n`` (or ``xi^n``).
Arrays are complex, or ``object`` holding :class:`fractions.Fraction` values
for exact checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NonzeroConstantTerm, TruncationLoss
from .qcore import as_qparam, qfactorials, qnums

__all__ = [
    "Trunc",
    "TSeries",
    "XiSeries",
    "zmul",
    "zdiv",
    "zdiff",
    "zeval",
    "zinv",
    "sup_norm",
    "tDq_apply",
    "t2Dq_apply",
    "dz_apply",
    "mul",
    "formal_borel",
    "formal_laplace",
    "formal_qconv",
]


@dataclass(frozen=True)
class Trunc:
    """Truncation orders: ``Mt`` in t (or xi), ``Mz`` in z."""

    Mt: int
    Mz: int

    def __post_init__(self):
        if self.Mt < 0 or self.Mz < 0:
            raise ValueError("truncation orders must be nonnegative")

    @property
    def shape(self):
        return (self.Mt + 1, self.Mz + 1)


# -- ZPoly kernels ------------------------------------------------------------


def zmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two ZPolys truncated to the length of ``a``."""
    return np.convolve(a, b)[: len(a)]


def zinv(a: np.ndarray) -> np.ndarray:
    """Reciprocal power series at ``z = 0``; requires ``a[0] != 0``."""
    if a[0] == 0:
        raise ZeroDivisionError("ZPoly reciprocal needs a nonzero constant term")
    n = len(a)
    out = np.zeros_like(a)
    out[0] = 1 / a[0]
    for k in range(1, n):
        acc = a[1 : k + 1] @ out[k - 1 :: -1][:k]
        out[k] = -acc / a[0]
    return out


def zdiv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return zmul(a, zinv(b))


def zdiff(a: np.ndarray, order: int = 1) -> np.ndarray:
    """``order``-fold z-derivative, zero-padded back to the input length."""
    out = np.array(a, copy=True)
    for _ in range(order):
        k = np.arange(1, len(out))
        nxt = np.zeros_like(out)
        nxt[:-1] = out[1:] * k
        out = nxt
    return out


def zeval(a: np.ndarray, z) -> np.ndarray:
    """Evaluate a ZPoly (or the last axis of a stack of them) at ``z``."""
    a = np.asarray(a)
    z = np.asarray(z, dtype=complex)
    out = np.zeros(a.shape[:-1] + z.shape, dtype=complex)
    for k in range(a.shape[-1] - 1, -1, -1):
        out = out * z + _bcast(a[..., k], z)
    return out


def _bcast(c, z):
    c = np.asarray(c, dtype=complex)
    return c.reshape(c.shape + (1,) * z.ndim)


def sup_norm(a: np.ndarray, rho: float, n_points: int = 64) -> float:
    """``max |a(z)|`` over ``n_points`` equispaced points on ``|z| = rho``."""
    zs = rho * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    return float(np.max(np.abs(zeval(a, zs))))


# -- series containers --------------------------------------------------------


def _as_coeff_array(coeffs):
    arr = np.asarray(coeffs)
    if arr.dtype == object:
        return arr
    return arr.astype(complex)


class _Series:
    """Immutable truncated series with ZPoly coefficients."""

    __slots__ = ("_c",)
    var = "?"

    def __init__(self, coeffs):
        arr = _as_coeff_array(coeffs)
        if arr.ndim != 2:
            raise ValueError("series coefficients must be a 2-D array (powers x z-degree)")
        arr = arr.copy()
        arr.flags.writeable = False
        self._c = arr

    # construction
    @classmethod
    def zeros(cls, trunc: Trunc, exact: bool = False):
        if exact:
            arr = np.empty(trunc.shape, dtype=object)
            arr[...] = Fraction(0)
            return cls(arr)
        return cls(np.zeros(trunc.shape, dtype=complex))

    @classmethod
    def monomial(cls, n: int, trunc: Trunc, zcoeff=None, exact: bool = False):
        """``zcoeff(z) * var^n``; ``zcoeff`` defaults to the constant 1."""
        out = cls.zeros(trunc, exact).coeffs
        if zcoeff is None:
            zcoeff = [Fraction(1) if exact else 1.0]
        zcoeff = list(zcoeff)[: trunc.Mz + 1]
        if n <= trunc.Mt:
            out[n, : len(zcoeff)] = zcoeff
        return cls(out)

    @classmethod
    def from_terms(cls, terms, trunc: Trunc, exact: bool = False):
        """Build from ``(n, k, value)`` triples meaning ``value * var^n z^k``."""
        out = cls.zeros(trunc, exact).coeffs
        for n, k, val in terms:
            if n <= trunc.Mt and k <= trunc.Mz:
                out[n, k] += val
        return cls(out)

    # views
    @property
    def coeffs(self) -> np.ndarray:
        """A writable copy of the coefficient array."""
        return self._c.copy()

    @property
    def raw(self) -> np.ndarray:
        return self._c

    @property
    def trunc(self) -> Trunc:
        return Trunc(self._c.shape[0] - 1, self._c.shape[1] - 1)

    @property
    def Mt(self) -> int:
        return self._c.shape[0] - 1

    @property
    def Mz(self) -> int:
        return self._c.shape[1] - 1

    @property
    def exact(self) -> bool:
        return self._c.dtype == object

    def __getitem__(self, n) -> np.ndarray:
        return self._c[n]

    def __len__(self):
        return self._c.shape[0]

    def __repr__(self):
        return f"{type(self).__name__}(Mt={self.Mt}, Mz={self.Mz}, exact={self.exact})"

    # arithmetic
    def _check(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other._c.shape != self._c.shape:
            raise ValueError(f"truncation mismatch: {self.trunc} vs {other.trunc}")

    def __add__(self, other):
        self._check(other)
        return type(self)(self._c + other._c)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self._c - other._c)

    def __neg__(self):
        return type(self)(-self._c)

    def scale(self, c):
        return type(self)(self._c * c)

    def __eq__(self, other):
        if type(other) is not type(self) or other._c.shape != self._c.shape:
            return NotImplemented
        return bool(np.all(self._c == other._c))

    __hash__ = None

    def allclose(self, other, rtol=1e-12, atol=0.0) -> bool:
        self._check(other)
        a = self._c.astype(complex)
        b = other._c.astype(complex)
        scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))
        return bool(np.max(np.abs(a - b), initial=0.0) <= atol + rtol * scale)

    def shift(self, k: int):
        """Multiply by ``var^k`` (k >= 0), dropping what falls past Mt."""
        out = np.zeros_like(self._c)
        if k <= self.Mt:
            out[k:] = self._c[: len(self._c) - k]
        lost = self._c[len(self._c) - k :] if k else self._c[:0]
        if k and np.any(lost != 0):
            warnings.warn(TruncationLoss(f"shift by {k} dropped nonzero coefficients"), stacklevel=2)
        return type(self)(out)

    def unshift(self, k: int):
        """Divide by ``var^k``; the first ``k`` coefficients must vanish."""
        if np.any(self._c[:k] != 0):
            raise ValueError(f"series is not divisible by {self.var}^{k}")
        out = np.zeros_like(self._c)
        out[: len(self._c) - k] = self._c[k:]
        return type(self)(out)

    def resized(self, Mt: int | None = None, Mz: int | None = None):
        """Zero-pad or cut to new truncation orders."""
        Mt = self.Mt if Mt is None else Mt
        Mz = self.Mz if Mz is None else Mz
        out = type(self).zeros(Trunc(Mt, Mz), self.exact).coeffs
        a, b = min(Mt, self.Mt) + 1, min(Mz, self.Mz) + 1
        out[:a, :b] = self._c[:a, :b]
        return type(self)(out)

    def to_float(self):
        return type(self)(self._c.astype(complex))

    def mulz(self, zpoly):
        """Multiply every coefficient by a ZPoly."""
        zpoly = np.asarray(zpoly)
        return type(self)(np.array([zmul(row, zpoly) for row in self._c], dtype=self._c.dtype))

    def at_zero(self) -> np.ndarray:
        """The ZPoly ``s(0, z)``."""
        return self._c[0].copy()

    def eval(self, x, z=None):
        """Evaluate at ``var = x``; returns a ZPoly, or a number if ``z`` is given."""
        acc = np.zeros(self._c.shape[1], dtype=complex)
        for row in self._c[::-1]:
            acc = acc * x + row.astype(complex)
        return acc if z is None else zeval(acc, z)

    # JSON-friendly form: one [[re, im], ...] array per ZPoly
    def to_json(self):
        a = self._c.astype(complex)
        return [[[float(v.real), float(v.imag)] for v in row] for row in a]

    @classmethod
    def from_json(cls, data):
        arr = np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)
        return cls(arr)


class TSeries(_Series):
    """Truncated series ``sum_n a_n(z) t^n``."""

    __slots__ = ()
    var = "t"


class XiSeries(_Series):
    """Truncated series ``sum_n u_n(z) xi^n`` in the Borel plane."""

    __slots__ = ()
    var = "xi"


# -- operators ----------------------------------------------------------------


def _row_scale(arr, factors):
    return arr * factors[:, None]


def tDq_apply(s: TSeries, q) -> TSeries:
    """``tD_q`` scales the coefficient of ``t^n`` by ``[n]_q``."""
    return TSeries(_row_scale(s.raw, qnums(s.Mt, q)))


def t2Dq_apply(s: TSeries, q) -> TSeries:
    """``t^2 D_q``: ``t^n -> [n]_q t^{n+1}``; the top coefficient is dropped with a warning."""
    scaled = _row_scale(s.raw, qnums(s.Mt, q))
    if np.any(scaled[-1] != 0):
        warnings.warn(TruncationLoss("t^2 D_q pushed a nonzero coefficient past Mt"), stacklevel=2)
    out = np.zeros_like(scaled)
    out[1:] = scaled[:-1]
    return TSeries(out)


def dz_apply(s, order: int):
    """Apply ``d^order/dz^order`` to every coefficient."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return s
    return type(s)(np.array([zdiff(row, order) for row in s.raw], dtype=s.raw.dtype))


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated 2-D Cauchy product (rows: series variable, columns: z)."""
    Mt, Mz = a.shape[0] - 1, a.shape[1] - 1
    out = np.zeros_like(a) if a.dtype != object else np.array(a * 0, dtype=object)
    if a.dtype != object and b.dtype != object:
        from scipy.signal import convolve2d

        return convolve2d(a, b)[: Mt + 1, : Mz + 1]
    for k in range(Mt + 1):
        if np.all(a[k] == 0):
            continue
        for i in range(Mt + 1 - k):
            out[k + i] = out[k + i] + zmul(a[k], b[i])
    return out


def mul(a: TSeries, b: TSeries) -> TSeries:
    """Truncated Cauchy product in t with ZPoly products truncated at Mz."""
    a._check(b)
    return TSeries(_cauchy(a.raw, b.raw))


def formal_borel(s: TSeries, q) -> XiSeries:
    """``sum a_n t^{n+1} -> sum a_n xi^n / [n]_q!``."""
    c = s.raw
    if np.any(c[0] != 0):
        raise NonzeroConstantTerm("formal Borel transform needs a series without constant term")
    fact = qfactorials(s.Mt, q)
    out = np.zeros_like(c)
    out[:-1] = c[1:] / fact[:-1, None]
    return XiSeries(out)


def formal_laplace(u: XiSeries, q) -> TSeries:
    """``c_n xi^n -> c_n [n]_q! t^{n+1}``; the top coefficient is dropped with a warning."""
    c = u.raw
    if np.any(c[-1] != 0):
        warnings.warn(TruncationLoss("formal Laplace pushed xi^Mt past the truncation"), stacklevel=2)
    fact = qfactorials(u.Mt, q)
    out = np.zeros_like(c)
    out[1:] = c[:-1] * fact[:-1, None]
    return TSeries(out)


def formal_qconv(a: XiSeries, f: XiSeries, q) -> XiSeries:
    """Formal q-convolution: ``xi^k *_q xi^i = [k]![i]!/[k+i+1]! xi^{k+i+1}``."""
    a._check(f)
    fact = qfactorials(a.Mt + 1, q)
    at = a.raw * fact[: a.Mt + 1, None]
    ft = f.raw * fact[: a.Mt + 1, None]
    prod = _cauchy(at, ft)
    out = np.zeros_like(prod)
    out[1:] = prod[:-1] / fact[1 : a.Mt + 1, None]
    return XiSeries(out)


def qparam_dtype(q):
    return object if as_qparam(q).exact else complex
