"""q-Laplace and q-Borel transforms on a ray, and verification of the summed solution.

``L[u](t) = sum_k Exp_q(-q xi_k / t) u(xi_k) xi_k (q - 1)`` over ``xi_k = lambda q^k``;
its poles fill the spiral ``Z_lambda = {-lambda (q-1) q^m}``.  The Borel
transform is the contour integral of ``F(t) exp_q(xi/t) / t^2`` around 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .borel_plane import ConvGridParams, RayGrid, jackson_weights
from .equation import Equation
from .errors import (
    BoundUnfittable,
    HypothesisFailed,
    PoleProximity,
    QuadratureNonconvergence,
    TailNotConverged,
)
from .formal_solver import FormalSolution, GevreyCertificate
from .powerseries import TSeries, XiSeries, formal_qconv, zdiff, zeval, zmul
from .qcore import Exp_q, QParam, as_qparam, exp_q, log_qfactorial, qfactorial

__all__ = [
    "SpiralSet",
    "qlaplace",
    "qborel_numeric",
    "conv_grid",
    "convolution_theorem_check",
    "entire_growth_check",
    "lower_upper_gates",
    "pole_bound_check",
    "watson_check",
    "SummedSolution",
    "sum_solution",
    "residual_in_equation",
    "gevrey_verify",
    "sector_samples",
]

EPS_GUARD = 0.02


@dataclass(frozen=True)
class SpiralSet:
    """The points ``-lambda (q-1) q^m`` and their relative neighbourhoods ``|t - c_m| < eps |t|``."""

    lam: complex
    eps: float
    q: QParam

    def __post_init__(self):
        object.__setattr__(self, "q", as_qparam(self.q))
        if self.lam == 0 or not self.eps > 0:
            raise ValueError("need lambda != 0 and eps > 0")

    def center(self, m: int) -> complex:
        qf = float(self.q.q)
        return -self.lam * (qf - 1) * qf**m

    def _nearest(self, t) -> int:
        qf = float(self.q.q)
        return int(round(math.log(abs(t) / (abs(self.lam) * (qf - 1))) / math.log(qf)))

    def distance(self, t) -> float:
        """``min_m |t - c_m| / |t|``."""
        if t == 0:
            return 0.0
        m = self._nearest(t)
        return min(abs(t - self.center(k)) / abs(t) for k in range(m - 2, m + 3))

    def contains(self, t) -> bool:
        return self.distance(t) < self.eps

    def radial_extent(self, m: int):
        """Radii covered by disk m along its ray: ``|c_m|/(1+eps) .. |c_m|/(1-eps)``."""
        r = abs(self.center(m))
        return r / (1 + self.eps), (r / (1 - self.eps) if self.eps < 1 else math.inf)

    def disjoint(self) -> bool:
        """Adjacent disks are separated (checked directly on one pair; the set is q-invariant)."""
        return self.radial_extent(0)[1] < self.radial_extent(1)[0]

    def separation_threshold(self) -> float:
        qf = float(self.q.q)
        return (qf - 1) / (qf + 1)


# -- q-Laplace ---------------------------------------------------------------


def qlaplace(
    u: RayGrid,
    t,
    z=None,
    lower_tol: float = 1e-14,
    tail_tol: float = 1e-10,
    eps_guard: float = EPS_GUARD,
    max_lower: int = 4000,
    report: dict | None = None,
):
    """``L_q^lambda[u](t)``; a ZPoly (or its value at ``z``) per ``t``.

    Nodes below ``k_min`` use the Taylor series of u.  Raises PoleProximity for t
    near the spiral and TailNotConverged if the last grid terms are not negligible.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=complex))
    qf = float(u.q.q)
    spiral = SpiralSet(u.lam, eps_guard, u.q)
    for tv in t_arr:
        if spiral.contains(tv):
            raise PoleProximity(f"t={tv:.6g} lies within {eps_guard} of the pole spiral")
    xs = u.xi(u.ks)
    E = Exp_q(-qf * xs[None, :] / t_arr[:, None], qf)
    w = E * (xs * (qf - 1))[None, :]
    terms = w[:, :, None] * u.values[None, :, :]
    total = terms.sum(axis=1)
    mag = np.max(np.abs(terms), axis=2)
    ref = np.maximum(np.max(np.abs(total), axis=1), np.max(mag, axis=1) * 1e-300)
    upper = np.max(mag[:, -2:], axis=1)
    if np.any(upper > tail_tol * np.maximum(ref, 1e-300)):
        bad = int(np.argmax(upper / np.maximum(ref, 1e-300)))
        raise TailNotConverged(
            f"upper tail term {upper[bad]:.3g} vs sum {ref[bad]:.3g} at t={t_arr[bad]:.4g}; extend k_max"
        )
    # lower tail from the Taylor series
    k = u.k_min - 1
    quiet = 0
    lowest = 0.0
    for _ in range(max_lower):
        x = u.xi(k)
        val = u.taylor.eval(x)
        wk = Exp_q(-qf * x / t_arr, qf) * x * (qf - 1)
        add = wk[:, None] * val[None, :]
        total = total + add
        m = float(np.max(np.abs(add)))
        lowest = m
        s = float(np.max(np.abs(total)))
        quiet = quiet + 1 if m <= lower_tol * s or (m == 0 and abs(x) < 1e-30) else 0
        if quiet >= 3:
            break
        k -= 1
    else:
        raise TailNotConverged("lower tail did not decay")
    if report is not None:
        report.update({"upper_tail": float(np.max(upper)), "lower_tail": lowest, "k_lowest": k})
    out = total if z is None else zeval(total, z)
    return out[0] if np.ndim(t) == 0 else out


def _rho_default(xi, q):
    return (q - 1) * abs(xi) / math.sqrt(q)


def qborel_numeric(
    F,
    lam,
    k: int,
    z=None,
    n_nodes: int = 256,
    q=2.0,
    rho: float | None = None,
    pole_radius: float | None = None,
    tol: float = 1e-10,
    max_doublings: int = 4,
):
    """``B_q^lambda[F](lambda q^k)`` by the trapezoidal rule on ``|t| = rho``.

    ``F(t)`` returns a number or a ZPoly for an array of t.  The radius sits
    between consecutive pole radii of the spiral, ``(q-1)|xi|/sqrt(q)``, and
    below half of ``pole_radius`` (the nearest singularity of F) when given.
    """
    qf = float(as_qparam(q).q)
    xi = lam * qf**k
    if rho is None:
        rho = _rho_default(xi, qf)
        if pole_radius is not None:
            rho = min(rho, pole_radius / 2)

    def rule(n):
        theta = 2 * np.pi * (np.arange(n) + 0.5) / n
        t = rho * np.exp(1j * theta)
        vals = np.asarray(F(t))
        kern = exp_q(xi / t, qf) / t
        integrand = vals * kern[:, None] if vals.ndim == 2 else vals * kern
        return integrand.mean(axis=0), float(np.max(np.abs(integrand).mean(axis=0)))

    prev, _ = rule(n_nodes)
    n = n_nodes
    for _ in range(max_doublings):
        n *= 2
        cur, l1 = rule(n)
        # a small radius makes exp_q(xi/t) huge and the integral cancels; measure against |integrand|
        scale = max(float(np.max(np.abs(cur))), l1, 1e-300)
        if float(np.max(np.abs(cur - prev))) <= tol * scale:
            return cur if z is None or np.ndim(cur) == 0 else zeval(cur, z)
        prev = cur
    raise QuadratureNonconvergence(f"contour rule not settled after {n} nodes")


# -- convolution on a grid ------------------------------------------------------


def conv_grid(a: XiSeries, u: RayGrid, params: ConvGridParams = ConvGridParams()) -> RayGrid:
    """Grid of ``a *_q u`` on the nodes of ``u`` with Taylor data ``a *_q taylor(u)``."""
    qf = float(u.q.q)
    depth = params.depth(qf)
    a = a.resized(Mz=u.Mz)
    raw = a.raw.astype(complex)
    ks = [k for k in range(min(len(raw) - 1, params.kmax_conv) + 1) if np.any(raw[k] != 0)]
    w = jackson_weights(max(ks + [1]), depth, qf)
    lo = u.k_min - max(ks + [0]) - depth - 2
    cache = {kk: u.get(kk) for kk in range(lo, u.k_max + 1)}
    vals = []
    for K in u.ks:
        xK = u.xi(K)
        acc = np.zeros(u.Mz + 1, dtype=complex)
        for k in ks:
            inner = sum(w[k, j] * cache[K - k - 1 - j] for j in range(depth))
            acc += zmul(raw[k], inner) * xK ** (k + 1)
        vals.append(acc)
    tay = formal_qconv(a.resized(Mt=u.taylor.Mt), u.taylor, qf)
    return RayGrid(u.lam, u.k_min, u.k_max, np.array(vals), tay, u.q, u.taylor_radius)


def convolution_theorem_check(a: XiSeries, u: RayGrid, t_samples, z_samples=(0.0,), **lap) -> float:
    """Max relative gap between ``L[a * u]`` and ``L[a] L[u]`` over the samples."""
    t_samples = np.asarray(t_samples, dtype=complex)
    z_samples = np.asarray(z_samples, dtype=complex)
    au = conv_grid(a, u)
    ag = RayGrid.from_series(a.resized(Mz=u.Mz), u.lam, u.k_min, u.k_max, u.q)
    lhs = qlaplace(au, t_samples, **lap)
    La = qlaplace(ag, t_samples, **lap)
    Lu = qlaplace(u, t_samples, **lap)
    rhs = np.array([zmul(x, y) for x, y in zip(La, Lu)])
    lz, rz = zeval(lhs, z_samples), zeval(rhs, z_samples)
    scale = max(float(np.max(np.abs(rz))), 1e-300)
    return float(np.max(np.abs(lz - rz))) / scale


# -- growth checks ------------------------------------------------------------


def entire_growth_check(coeffs, q, xi_max: float = 1e4, n_x: int = 40, drift_limit: float = math.log(2.0)):
    """Fit both ``|a_n| <= A H^n / [n]_q!`` and ``|f(xi)| <= M |xi|^alpha exp((log|xi|)^2 / (2 log q))``."""
    qf = float(as_qparam(q).q)
    a = np.abs(np.asarray(coeffs, dtype=complex))
    if a.ndim == 2:
        a = a.max(axis=1)
    n = np.arange(len(a))
    logfact = np.array([log_qfactorial(k, qf) for k in n])
    coef = {"ok": True}
    nz = a > 0
    if not np.any(nz):
        coef.update({"A": 0.0, "H": 1.0})
    else:
        r = np.array([math.exp((math.log(a[k]) + logfact[k]) / k) if k and a[k] > 0 else 0.0 for k in n])
        tail = [k for k in range(max(1, len(a) // 2), len(a)) if a[k] > 0]
        if len(tail) >= 3:
            slope = np.polyfit(tail, np.log(r[tail]), 1)[0]
            if slope * (tail[-1] - tail[0]) > drift_limit:
                coef["ok"] = False
        H = float(max(r.max(), 1e-300))
        A = float(max(math.exp(math.log(a[k]) + logfact[k] - k * math.log(H)) for k in n if a[k] > 0))
        coef.update({"A": A, "H": H, "r": r.tolist()})
    xs = np.geomspace(1.0, xi_max, n_x)
    angles = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    f = np.array([np.max(np.abs(np.polyval(np.asarray(coeffs if np.ndim(coeffs) == 1 else np.asarray(coeffs)[:, 0], dtype=complex)[::-1], x * np.exp(1j * angles)))) for x in xs])
    lx = np.log(xs)
    g = np.log(np.maximum(f, 1e-300)) - lx**2 / (2 * math.log(qf))
    quad, alpha, _ = np.polyfit(lx, g, 2)
    alpha_lin = np.polyfit(lx, g, 1)[0]
    M = float(np.exp(np.max(g - alpha_lin * lx)))
    growth = {"M": M, "alpha": float(alpha_lin), "ok": bool(quad <= 0.05 / (2 * math.log(qf)))}
    return {"coefficients": coef, "growth": growth, "ok": coef["ok"] and growth["ok"]}


def _zmax(vals, zs):
    return np.max(np.abs(zeval(vals, zs)), axis=-1)


def lower_upper_gates(u: RayGrid, n_low: int = 20, z_radius: float = 0.25, n_z: int = 8, safety: float = 1.05):
    """Fit ``|u(lambda q^n)| <= C h^n [n]_q!`` (n >= 0) and ``|u(lambda q^-m)| <= A B^m`` (m >= 0).

    Returns the two certificates; the lower one records whether ``B < q``.
    """
    zs = np.concatenate([[0.0], z_radius * np.exp(2j * np.pi * np.arange(n_z) / n_z)])
    qf = float(u.q.q)
    up = [(n, float(_zmax(u.get(n), zs))) for n in range(0, u.k_max + 1)]
    v0 = max(up[0][1], 1e-300)
    rs = [
        math.exp((math.log(v) - log_qfactorial(n, qf)) / n) for n, v in up if n > 0 and v > 0
    ] or [1.0]
    h = safety * max(rs)
    C = max(
        [math.exp(math.log(v) - n * math.log(h) - log_qfactorial(n, qf)) for n, v in up if v > 0] or [1.0]
    )
    upper = GevreyCertificate("upper-gate", C, h, extra={"nodes": len(up)})
    low = [(m, float(_zmax(u.get(-m), zs))) for m in range(0, n_low + 1)]
    v0 = low[0][1]
    if v0 == 0:
        B, A = 0.0, 0.0
    else:
        B = max([(v / v0) ** (1.0 / m) for m, v in low if m > 0] or [0.0])
        A = max(v / B**m if B > 0 else v for m, v in low)
    lower = GevreyCertificate("lower-gate", A, B, extra={"B_below_q": bool(B < qf)})
    return upper, lower


def pole_bound_check(u: RayGrid, B: float, t_samples, eps: float, **lap):
    """Fit ``|L[u](t)| <= (H/eps) |t|^alpha`` with ``alpha = (log q - log B)/log q``."""
    qf = float(u.q.q)
    if not 0 < B < qf:
        raise HypothesisFailed("lower decay", f"need 0 < B < q, got {B}")
    alpha = (math.log(qf) - math.log(B)) / math.log(qf)
    t_samples = np.asarray(t_samples, dtype=complex)
    vals = np.abs(qlaplace(u, t_samples, z=0.0, eps_guard=eps, **lap))
    H = float(np.max(vals * eps / np.abs(t_samples) ** alpha))
    return GevreyCertificate("pole-bound", H, alpha, extra={"eps": eps})


def _fit_mh(logR, Ns, h_range=(1e-3, 1e4), n_h: int = 141):
    """Choose ``H`` minimizing the total log-slack of ``R <= M H^N``; ``M`` is the max ratio."""
    hs = np.geomspace(*h_range, n_h)
    best = None
    for H in hs:
        lb = Ns * math.log(H)
        logM = float(np.max(logR - lb))
        slack = float(np.sum(logM + lb - logR))
        if best is None or slack < best[0]:
            best = (slack, H, logM)
    slack, H, logM = best
    if H >= hs[-1] or H <= hs[0] and np.any(Ns > 0):
        raise BoundUnfittable(f"best H={H:.3g} at the edge of the search range")
    return float(math.exp(logM)), float(H), slack


def sector_samples(lam, r_range=(0.01, 0.1), n: int = 20, offset: float = 0.3, q=2.0, spread: bool = False):
    """Sample points ``|t|`` log-spaced in ``r_range``; along ``arg lambda + offset`` or spread in angle."""
    r = np.geomspace(*r_range, n)
    base = np.angle(lam)
    if spread:
        ang = base + np.linspace(-2.6, 2.6, n)
    else:
        ang = np.full(n, base + offset)
    return r * np.exp(1j * ang)


def watson_check(
    u: RayGrid,
    c: XiSeries,
    N_max: int = 8,
    eps_list=(0.1, 0.05),
    t_samples=None,
    small_radius: float | None = None,
    noise: float = 1e-12,
):
    """Check the growth and Taylor hypotheses on the grid, then fit the Laplace remainder bound.

    Remainders below ``noise`` relative to the transform are rounding and count as zero.
    """
    qf = float(u.q.q)
    upper, lower = lower_upper_gates(u)
    if not (upper.finite and math.isfinite(lower.h)):
        raise HypothesisFailed("growth on the ray", "nonfinite fitted constants")
    # Taylor remainder on small nodes
    r0 = small_radius if small_radius is not None else min(u.taylor_radius, 1.0) / 2
    nodes = [k for k in range(u.k_min - 12, u.k_max + 1) if abs(u.xi(k)) <= r0]
    AN = []
    for N in range(N_max + 1):
        part = c.resized(Mt=max(N - 1, 0), Mz=u.Mz) if N else None
        worst = 0.0
        for k in nodes:
            x = u.xi(k)
            diff = u.get(k) - (part.eval(x) if N else 0)
            worst = max(worst, float(np.max(np.abs(diff))) / abs(x) ** N)
        AN.append(worst)
    A = max(AN[0], 1e-300)
    h1 = max([(AN[N] / A) ** (1.0 / N) for N in range(1, N_max + 1) if AN[N] > 0] or [1.0])
    if not math.isfinite(h1):
        raise HypothesisFailed("Taylor remainder", "no finite h1")
    if t_samples is None:
        t_samples = sector_samples(u.lam, spread=True, q=qf)
    fact = np.array([log_qfactorial(k, qf) for k in range(N_max + 1)])
    logR, Ns, worst_at = [], [], []
    for eps in eps_list:
        ts = [t for t in np.atleast_1d(t_samples) if not SpiralSet(u.lam, eps, u.q).contains(t)]
        if not ts:
            continue
        L = qlaplace(u, np.array(ts), z=0.0, eps_guard=eps)
        for t, val in zip(ts, np.atleast_1d(L)):
            for N in range(N_max + 1):
                partial = sum(complex(c.raw[k][0]) * qfactorial(k, qf) * t ** (k + 1) for k in range(min(N, len(c.raw))))
                R = abs(val - partial)
                if R > noise * abs(val):
                    logR.append(math.log(R * eps) - fact[N] - (N + 1) * math.log(abs(t)))
                    Ns.append(N)
                    worst_at.append((complex(t), N, eps))
    if not logR:
        return GevreyCertificate("asymptotic", 0.0, 1.0, extra={"note": "zero remainder"})
    M, H, slack = _fit_mh(np.array(logR), np.array(Ns))
    ratios = np.exp(np.array(logR) - np.log(M) - np.array(Ns) * math.log(H))
    i = int(np.argmax(ratios))
    return GevreyCertificate(
        "asymptotic",
        M,
        H,
        ratios=ratios,
        worst=float(ratios[i]),
        worst_sample=worst_at[i],
        extra={"A": A, "h1": h1, "upper_gate": upper.to_dict(), "lower_gate": lower.to_dict(), "N_max": N_max},
    )


# -- the summed solution ---------------------------------------------------------


@dataclass
class SummedSolution:
    """``W(t, z) = sum_{n<=mu} X_n(z) t^n + L_q^lambda[u](t, z)``."""

    head: TSeries
    grid: RayGrid
    lam: complex
    mu: int
    q: QParam
    eps_guard: float = EPS_GUARD
    spiral: SpiralSet = field(init=False)

    def __post_init__(self):
        self.spiral = SpiralSet(self.lam, self.eps_guard, self.q)

    def zpoly(self, t) -> np.ndarray:
        """ZPoly ``W(t, .)`` (array of them for array t)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=complex))
        lap = qlaplace(self.grid, t_arr, eps_guard=self.eps_guard)
        head = np.array([self.head.eval(tv) for tv in t_arr])
        out = head + lap
        return out[0] if np.ndim(t) == 0 else out

    def __call__(self, t, z=0.0):
        return zeval(self.zpoly(t), z)


def sum_solution(eq: Equation, sol: FormalSolution, grid: RayGrid, mu: int, eps_guard: float = EPS_GUARD):
    return SummedSolution(sol.head(mu), grid, complex(grid.lam), mu, eq.q, eps_guard)


def _tdq_power(values_at, j, q):
    """``(tD_q)^j`` from values at ``t, qt, ..., q^j t``: ``(q-1)^-j sum_i C(j,i)(-1)^(j-i) f(q^i t)``."""
    out = 0
    for i in range(j + 1):
        out = out + math.comb(j, i) * (-1) ** (j - i) * values_at[i]
    return out / (q - 1) ** j


def residual_in_equation(eq: Equation, W: SummedSolution, t_samples, z_samples=(0.0,), detail: bool = False):
    """Max over samples of ``|L W - F|`` divided by the largest ``|F|`` on the samples.

    ``(tD_q)^j`` is the exact q-difference built from ``W`` at ``q^i t``;
    ``d_z`` acts on the ZPoly of ``W(t, .)``.
    """
    qf = float(eq.q.q)
    jmax = max(t.j for t in eq.terms)
    t_samples = np.atleast_1d(np.asarray(t_samples, dtype=complex))
    z_samples = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    res, fmax, terms_max = [], 0.0, 0.0
    for tv in t_samples:
        Wq = W.zpoly(tv * qf ** np.arange(jmax + 1))
        lhs = np.zeros(eq.trunc.Mz + 1, dtype=complex)
        for term in eq.terms:
            d = np.array([zdiff(w, term.alpha) for w in Wq[: term.j + 1]])
            piece = zmul(term.coeff.eval(tv), _tdq_power(d, term.j, qf))
            lhs = lhs + piece
            terms_max = max(terms_max, float(np.max(np.abs(zeval(piece, z_samples)))))
        F = eq.rhs.eval(tv)
        r = np.abs(zeval(lhs - F, z_samples))
        res.append(float(np.max(r)))
        fmax = max(fmax, float(np.max(np.abs(zeval(F, z_samples)))))
    scale = fmax if fmax > 0 else max(terms_max, 1e-300)
    worst = max(res) / scale
    if detail:
        return worst, np.array(res) / scale
    return worst


def gevrey_verify(
    W: SummedSolution,
    sol: FormalSolution,
    eps_list=(0.1, 0.05),
    N_max: int = 8,
    t_samples=None,
    z_samples=(0.0,),
    noise: float = 1e-12,
) -> GevreyCertificate:
    """Fit ``|W - sum_{n<N} X_n t^n| <= (M H^N / eps) [N]_q! |t|^N`` jointly over N, eps and samples.

    Remainders below ``noise`` relative to ``|W|`` count as zero.
    """
    qf = float(W.q.q)
    if N_max > sol.n_max:
        raise ValueError("N_max exceeds the computed formal coefficients")
    if t_samples is None:
        t_samples = np.concatenate(
            [sector_samples(W.lam, spread=True, q=qf), sector_samples(W.lam, offset=0.3, q=qf)]
        )
    z_samples = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    X = sol.series.raw.astype(complex)
    fact = np.array([log_qfactorial(k, qf) for k in range(N_max + 1)])
    logR, Ns, where = [], [], []
    used = 0
    for eps in eps_list:
        spiral = SpiralSet(W.lam, eps, W.q)
        ts = np.array([t for t in np.atleast_1d(t_samples) if not spiral.contains(t)])
        if ts.size == 0:
            continue
        used += ts.size
        Wz = zeval(W.zpoly(ts), z_samples)
        for t, wv in zip(ts, np.atleast_2d(Wz)):
            partial = np.zeros(len(z_samples), dtype=complex)
            for N in range(N_max + 1):
                R = float(np.max(np.abs(wv - partial)))
                if R > noise * float(np.max(np.abs(wv))):
                    logR.append(math.log(R * eps) - fact[N] - N * math.log(abs(t)))
                    Ns.append(N)
                    where.append((complex(t), N, eps))
                partial = partial + zeval(X[N], z_samples) * t**N
    if not used:
        raise BoundUnfittable("every sample lies in the excluded spiral neighbourhoods")
    if not logR:
        return GevreyCertificate("asymptotic", 0.0, 1.0, extra={"note": "zero remainder"})
    M, H, slack = _fit_mh(np.array(logR), np.array(Ns))
    ratios = np.exp(np.array(logR) - math.log(M) - np.array(Ns) * math.log(H))
    i = int(np.argmax(ratios))
    return GevreyCertificate(
        "asymptotic",
        M,
        H,
        ratios=ratios,
        worst=float(ratios[i]),
        worst_sample=where[i],
        extra={"N_max": N_max, "eps": list(eps_list), "samples": int(used), "slack": slack},
    )
