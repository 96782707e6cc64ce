"""Numeric q-convolution on the lattice ``lambda q^Z`` and the ray solver.

With the Jackson integral ``int_0^xi g d_p y = (1-p) xi sum_j p^j g(p^j xi)``
the q-convolution of a series ``a = sum a_k xi^k`` with a lattice function g is

    (a *_q g)(xi_K) = sum_k a_k xi_K^{k+1} sum_j w_k[j] g(xi_{K-k-1-j}),
    w_k[j] = q^{-k} (1-p) p^j prod_{l=1..k} (1 - p^{l+j}),

so the value at ``xi_K = lambda q^K`` only reads nodes strictly inside ``K``.
This makes an ascending solve of the convolution equation exact node by node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundUnfittable,
    GridUnderflow,
    NonconvergentTail,
    PivotTooSmall,
    TaylorTrustExceeded,
)
from .formal_solver import GevreyCertificate
from .powerseries import XiSeries, dz_apply, formal_qconv, zdiff, zdiv, zeval, zmul
from .qcore import QParam, as_qparam, log_phi
from .reduction import ConvEquation

__all__ = [
    "ConvGridParams",
    "RayGrid",
    "jackson_integral",
    "jackson_weights",
    "qconv_eval",
    "convergence_radius",
    "continue_on_ray",
    "bound_check",
    "residual_on_grid",
]

JACKSON_MAX_TERMS = 10_000
XI_FAR = 1e6  # default outer end of the ray grid


@dataclass(frozen=True)
class ConvGridParams:
    jackson_eps: float = 1e-12
    kmax_conv: int = 64
    taylor_radius: float | None = None
    delta_floor: float = 1e-9

    def __post_init__(self):
        if not (self.jackson_eps > 0 and self.kmax_conv > 0 and self.delta_floor > 0):
            raise ValueError("grid parameters must be positive")
        if self.taylor_radius is not None and not self.taylor_radius > 0:
            raise ValueError("taylor_radius must be positive")

    def depth(self, q) -> int:
        """Number of Jackson nodes kept: ``p^J < jackson_eps``."""
        return int(math.ceil(-math.log(self.jackson_eps) / math.log(float(as_qparam(q).q)))) + 1


def jackson_integral(g, xi, q, eps: float = 1e-12, max_terms: int = JACKSON_MAX_TERMS):
    """``int_0^xi g(y) d_p y`` truncated once a term drops below ``eps`` times the partial sum."""
    p = float(as_qparam(q).p)
    total = 0.0
    pj = 1.0
    small = 0
    for _ in range(max_terms):
        term = pj * np.asarray(g(pj * xi))
        total = total + term
        mag = float(np.max(np.abs(term)))
        ref = float(np.max(np.abs(total)))
        # two consecutive negligible terms guard against isolated zeros of g
        small = small + 1 if mag <= eps * ref or (mag == 0 and ref == 0 and pj < eps) else 0
        if small >= 2:
            return (1 - p) * xi * total
        pj *= p
    raise NonconvergentTail(f"Jackson sum did not settle within {max_terms} terms")


def jackson_weights(kmax: int, depth: int, q) -> np.ndarray:
    """``w[k, j] = q^{-k} (1-p) p^j prod_{l=1..k} (1 - p^{l+j})``."""
    qf = float(as_qparam(q).q)
    p = 1.0 / qf
    j = np.arange(depth)
    w = np.empty((kmax + 1, depth))
    prod = np.ones(depth)
    for k in range(kmax + 1):
        if k:
            prod = prod * (1 - p ** (k + j))
        w[k] = qf ** (-k) * (1 - p) * p**j * prod
    return w


@dataclass
class RayGrid:
    """Values ``u(lambda q^k, .)`` for ``k_min <= k <= k_max``; Taylor data below."""

    lam: complex
    k_min: int
    k_max: int
    values: np.ndarray
    taylor: XiSeries
    q: QParam
    taylor_radius: float = math.inf
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.q = as_qparam(self.q)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[0] != self.k_max - self.k_min + 1:
            raise ValueError("values must cover k_min..k_max")

    @property
    def Mz(self) -> int:
        return self.values.shape[1] - 1

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def xi(self, k):
        return self.lam * float(self.q.q) ** np.asarray(k, dtype=float)

    def get(self, k: int) -> np.ndarray:
        """ZPoly at node k; below ``k_min`` the Taylor series is used."""
        if k > self.k_max:
            raise GridUnderflow(f"node {k} lies above the grid (k_max={self.k_max})")
        if k >= self.k_min:
            return self.values[k - self.k_min]
        x = self.xi(k)
        if abs(x) > self.taylor_radius:
            raise TaylorTrustExceeded(f"|xi|={abs(x):.3g} exceeds the Taylor trust radius {self.taylor_radius:.3g}")
        return self.taylor.eval(x)

    def index_of(self, xi, rtol: float = 1e-9) -> int:
        k = int(round(math.log(abs(xi / self.lam)) / math.log(float(self.q.q))))
        if abs(xi - self.xi(k)) > rtol * abs(xi):
            raise ValueError("xi is not a node of this ray")
        return k

    def evaluate(self, z) -> np.ndarray:
        """Array ``u(xi_k, z)`` over the grid nodes."""
        return zeval(self.values, z)

    @classmethod
    def from_series(cls, s: XiSeries, lam, k_min, k_max, q, taylor_radius=math.inf):
        """Grid filled by evaluating a series (an oracle fixture)."""
        qf = float(as_qparam(q).q)
        vals = np.array([s.eval(lam * qf**k) for k in range(k_min, k_max + 1)])
        return cls(complex(lam), k_min, k_max, vals, s, q, taylor_radius)

    @classmethod
    def from_function(cls, fn, lam, k_min, k_max, q, taylor: XiSeries, taylor_radius=math.inf):
        """Grid filled from ``fn(xi) -> ZPoly``."""
        qf = float(as_qparam(q).q)
        vals = np.array([fn(lam * qf**k) for k in range(k_min, k_max + 1)])
        return cls(complex(lam), k_min, k_max, vals, taylor, q, taylor_radius)

    def to_rows(self):
        """CSV-ready rows ``(k, Re xi, Im xi, Re c0, Im c0, ...)``."""
        rows = []
        for k, v in zip(self.ks, self.values):
            x = self.xi(k)
            row = [int(k), float(x.real), float(x.imag)]
            for c in v:
                row += [float(c.real), float(c.imag)]
            rows.append(row)
        return rows

    def to_json(self):
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "q": float(self.q.q),
            "k_min": self.k_min,
            "k_max": self.k_max,
            "values": [[[float(c.real), float(c.imag)] for c in v] for v in self.values],
            "taylor": self.taylor.to_json(),
        }


def _coeff_rows(a: XiSeries, cap: int):
    """Nonzero coefficient indices of ``a`` up to ``cap``."""
    raw = a.raw.astype(complex)
    return [k for k in range(min(len(raw) - 1, cap) + 1) if np.any(raw[k] != 0)], raw


def qconv_eval(a: XiSeries, u: RayGrid, xi, params: ConvGridParams = ConvGridParams()) -> np.ndarray:
    """``(a *_q u)(xi, .)`` at a node ``xi`` of the ray (``k <= k_max + 1``)."""
    K = u.index_of(xi)
    if K > u.k_max + 1:
        raise GridUnderflow("xi lies more than one node above the grid")
    depth = params.depth(u.q)
    ks, raw = _coeff_rows(a, params.kmax_conv)
    if not ks:
        return np.zeros(u.Mz + 1, dtype=complex)
    w = jackson_weights(max(ks), depth, u.q)
    xK = u.xi(K)
    out = np.zeros(u.Mz + 1, dtype=complex)
    cache = {}
    for k in ks:
        inner = np.zeros(u.Mz + 1, dtype=complex)
        for j in range(depth):
            node = K - k - 1 - j
            if node not in cache:
                cache[node] = u.get(node)
            inner += w[k, j] * cache[node]
        out += zmul(raw[k], inner) * xK ** (k + 1)
    return out


def convergence_radius(u: XiSeries, n_max: int | None = None, cap: float = 1e6) -> float:
    """Empirical radius from a log-linear fit of ``max_z |u_n|`` over the upper half of indices."""
    n_max = u.Mt if n_max is None else n_max
    mags = np.max(np.abs(u.raw.astype(complex)[: n_max + 1]), axis=1)
    idx = [n for n in range(max(1, n_max // 2), n_max + 1) if mags[n] > 0]
    if len(idx) < 2:
        return cap if not np.any(mags > 0) else cap
    slope = np.polyfit(idx, np.log(mags[idx]), 1)[0]
    return float(min(cap, math.exp(-slope)))


# -- the ray solver ---------------------------------------------------------------


class _Engine:
    """Padded lattice arrays for u and every convolution argument."""

    def __init__(self, ceq: ConvEquation, lam, k_min, k_max, params, u0, taylor_radius):
        self.ceq = ceq
        self.q = float(ceq.q.q)
        self.lam = complex(lam)
        self.params = params
        self.Mz = ceq.trunc.Mz
        self.depth = params.depth(self.q)
        self.terms = []
        dmax = 0
        for ct in ceq.conv_terms:
            ks, raw = _coeff_rows(ct.c, params.kmax_conv)
            if ks:
                dmax = max(dmax, max(ks))
            self.terms.append((ct, ks, raw))
        self.w = jackson_weights(max(dmax, 1), self.depth, self.q)
        self.one = _unit(self.Mz)[None, :]
        self.k_min, self.k_max = k_min, k_max
        self.k_lo = k_min - dmax - self.depth - 2
        n = k_max - self.k_lo + 1
        self.xi = self.lam * self.q ** np.arange(self.k_lo, k_max + 1, dtype=float)
        if abs(self.xi[k_min - self.k_lo]) > taylor_radius:
            raise TaylorTrustExceeded(
                f"seed node |xi|={abs(self.xi[k_min - self.k_lo]):.3g} beyond trust radius {taylor_radius:.3g}"
            )
        self.U = np.zeros((n, self.Mz + 1), dtype=complex)
        self.G = [np.zeros_like(self.U) for _ in self.terms]
        self.Hn = [np.zeros_like(self.U) if ct.nested else None for ct, _, _ in self.terms]
        one = XiSeries.monomial(0, u0.trunc)
        seeds = range(0, k_min - self.k_lo + 1)
        for r in seeds:
            self.U[r] = u0.eval(self.xi[r])
        for t, (ct, _, _) in enumerate(self.terms):
            gser = dz_apply(u0, ct.alpha).shift(ct.i) if ct.i <= u0.Mt else XiSeries.zeros(u0.trunc)
            for r in seeds:
                self.G[t][r] = gser.eval(self.xi[r])
            if ct.nested:
                hser = formal_qconv(one, gser, self.q)
                for r in seeds:
                    self.Hn[t][r] = hser.eval(self.xi[r])

    def row(self, K):
        return K - self.k_lo

    def _conv(self, ks, raw, arr, K):
        r = self.row(K)
        x = self.xi[r]
        out = np.zeros(self.Mz + 1, dtype=complex)
        for k in ks:
            lo = r - k - 1 - self.depth + 1
            if lo < 0:
                raise GridUnderflow("Jackson nodes fell below the padded grid")
            seg = arr[lo : r - k][::-1]
            inner = self.w[k] @ seg
            out += zmul(raw[k], inner) * x ** (k + 1)
        return out

    def conv_sum(self, K, U=None):
        """Sum of all convolution terms at node K, updating nested helpers at K."""
        total = np.zeros(self.Mz + 1, dtype=complex)
        for t, (ct, ks, raw) in enumerate(self.terms):
            if ct.nested:
                self.Hn[t][self.row(K)] = self._conv([0], self.one, self.G[t], K)
                total += self._conv(ks, raw, self.Hn[t], K)
            else:
                total += self._conv(ks, raw, self.G[t], K)
        return total

    def conv_parts(self, K):
        parts = []
        for t, (ct, ks, raw) in enumerate(self.terms):
            src = self.Hn[t] if ct.nested else self.G[t]
            parts.append(self._conv(ks, raw, src, K))
        return parts

    def set_u(self, K, val):
        r = self.row(K)
        self.U[r] = val
        for t, (ct, _, _) in enumerate(self.terms):
            self.G[t][r] = self.xi[r] ** ct.i * zdiff(val, ct.alpha)

    def pivot(self, K):
        x = self.xi[self.row(K)]
        Pk = self.ceq.P_at(x)
        floor = self.params.delta_floor * abs(x) ** self.ceq.m0 * (1 + abs(x)) ** (self.ceq.m - self.ceq.m0)
        if abs(Pk[0]) < floor:
            raise PivotTooSmall(f"|P(xi,0)|={abs(Pk[0]):.3g} below {floor:.3g} at k={K}")
        return Pk


def _unit(Mz):
    e = np.zeros(Mz + 1, dtype=complex)
    e[0] = 1.0
    return e


def _default_k_min(lam, q, radius):
    return int(math.floor(math.log(radius / abs(lam)) / math.log(q)))


def continue_on_ray(
    ceq: ConvEquation,
    lam,
    k_min: int | None = None,
    k_max: int | None = None,
    params: ConvGridParams = ConvGridParams(),
    u0: XiSeries | None = None,
    mode: str = "direct",
    iter_tol: float = 1e-14,
) -> RayGrid:
    """Extend ``u = B[X^0]`` along ``lambda q^Z`` as the solution of the convolution equation.

    Nodes up to ``k_min`` are seeded from the Taylor series ``u0``; above it
    every node is solved from ``P(xi_k, z) u_k = f - (convolutions of inner nodes)``.
    ``mode="iterate"`` runs successive approximation on the same lattice instead.
    """
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    u0 = ceq.u0 if u0 is None else u0
    if u0 is None:
        raise ValueError("no Taylor data for the seed region")
    q = float(ceq.q.q)
    R_est = convergence_radius(u0, ceq.Mt - 1)
    trust = params.taylor_radius if params.taylor_radius is not None else R_est / 2
    if k_min is None:
        k_min = _default_k_min(lam, q, min(trust / 4, 1.0))
    if k_max is None:
        k_max = int(math.ceil(math.log(XI_FAR / abs(lam)) / math.log(q)))
    if k_max <= k_min:
        raise ValueError("need k_max > k_min")
    eng = _Engine(ceq, lam, k_min, k_max, params, u0, trust)
    f = ceq.f
    pivots = {K: eng.pivot(K) for K in range(k_min + 1, k_max + 1)}
    fvals = {K: f.eval(eng.xi[eng.row(K)]) for K in range(k_min + 1, k_max + 1)}
    if mode == "direct":
        for K in range(k_min + 1, k_max + 1):
            rhs = fvals[K] - eng.conv_sum(K)
            eng.set_u(K, zdiv(rhs, pivots[K]))
        n_iter = 0
    elif mode == "iterate":
        for K in range(k_min + 1, k_max + 1):
            eng.set_u(K, zdiv(fvals[K], pivots[K]))
        n_iter = 0
        while True:
            n_iter += 1
            old = eng.U.copy()
            new = {}
            for K in range(k_min + 1, k_max + 1):
                new[K] = zdiv(fvals[K] - eng.conv_sum(K), pivots[K])
            for K, v in new.items():
                eng.set_u(K, v)
            change = np.max(np.abs(eng.U - old))
            if change <= iter_tol * max(1.0, np.max(np.abs(eng.U))) or n_iter > 4 * (k_max - k_min) + 10:
                break
    else:
        raise ValueError(f"unknown mode {mode!r}")
    vals = eng.U[eng.row(k_min) :]
    grid = RayGrid(complex(lam), k_min, k_max, vals, u0, ceq.q, trust)
    grid.extra.update({"mode": mode, "iterations": n_iter, "radius_estimate": R_est, "engine": eng})
    return grid


def _z_samples(radius, n):
    return np.concatenate([[0.0], radius * np.exp(2j * np.pi * np.arange(n) / n)]) if radius > 0 else np.array([0.0])


def bound_check(
    u: RayGrid,
    N: int,
    m0: int,
    m: int,
    z_radius: float = 0.25,
    n_z: int = 8,
    h_range=(1e-3, 1e4),
    n_h: int = 141,
    M_cap: float = 1e300,
    floor: float = 1e-300,
) -> GevreyCertificate:
    """Fit ``|u(xi,z)| <= M1 phi_N(|xi|;h1) / (|xi|^m0 (1+|xi|)^(m-m0))`` at every node."""
    zs = _z_samples(z_radius, n_z)
    vals = np.max(np.abs(u.evaluate(zs)), axis=1)
    x = np.abs(u.xi(u.ks))
    keep = vals > floor
    if not np.any(keep):
        return GevreyCertificate("ray-bound", floor, 1.0, extra={"N": N, "note": "identically zero grid"})
    x, lv = x[keep], np.log(vals[keep])
    lw = m0 * np.log(x) + (m - m0) * np.log1p(x)
    hs = np.geomspace(*h_range, n_h)
    best = None
    for h in hs:
        lb = log_phi(N, h, x, u.q.q) - lw
        logM = float(np.max(lv - lb))
        slack = float(np.mean(logM + lb - lv))
        if best is None or slack < best[0]:
            best = (slack, h, logM)
    slack, h, logM = best
    if h >= hs[-1] or logM > math.log(M_cap):
        raise BoundUnfittable(f"best fit at h={h:.3g}, log M={logM:.3g}")
    lb = log_phi(N, h, x, u.q.q) - lw
    ratios = np.exp(lv - lb - logM)
    return GevreyCertificate(
        "ray-bound", math.exp(logM), float(h), ratios=ratios, worst=float(ratios.max()), extra={"N": N, "slack": slack}
    )


def residual_on_grid(
    ceq: ConvEquation, u: RayGrid, params: ConvGridParams = ConvGridParams(), guard: int = 0
) -> float:
    """Max relative residual of the convolution equation over grid nodes above ``k_min + guard``."""
    eng = _Engine(ceq, u.lam, u.k_min, u.k_max, params, u.taylor, math.inf)
    for K in range(u.k_min + 1, u.k_max + 1):
        eng.set_u(K, u.get(K))
    # nested helpers must be rebuilt from the stored values
    for K in range(u.k_min + 1, u.k_max + 1):
        eng.conv_sum(K)
    worst = 0.0
    for K in range(u.k_min + 1 + guard, u.k_max + 1):
        x = eng.xi[eng.row(K)]
        pu = zmul(ceq.P_at(x), u.get(K))
        parts = eng.conv_parts(K)
        fv = ceq.f.eval(x)
        res = pu + sum(parts) - fv
        scale = np.max(np.abs(pu)) + sum(np.max(np.abs(p)) for p in parts) + np.max(np.abs(fv))
        if scale > 0:
            worst = max(worst, float(np.max(np.abs(res)) / scale))
    return worst
