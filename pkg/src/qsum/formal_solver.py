"""Formal power-series solutions and their q-Gevrey growth.

The coefficient of ``t^n`` in the equation gives

    D_n(z) X_n = F_n - sum a_{j,alpha,l}(z) [n-l]_q^j d_z^alpha X_{n-l}

where ``D_n(z) = sum_j a_{j,0,0}(z) [n]_q^j`` and the sum runs over the
lower-order contributions.  ``D_n`` is inverted as a power series in z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equation import ZERO_TOL, Equation
from .errors import AssumptionViolated, GrowthExceeded, ResonantIndex
from .powerseries import TSeries, sup_norm, zdiff, zdiv, zmul
from .qcore import as_qparam, log_qfactorial, qnum

__all__ = [
    "FormalSolution",
    "GevreyCertificate",
    "solve_formal",
    "factorial_growth_oracle",
    "factorial_growth_lower_bound",
    "growth_certificate",
    "norm_table",
    "recursion_residual",
]


@dataclass
class FormalSolution:
    """Coefficients ``X_0..X_{n_max}`` as a TSeries (rows past ``n_max`` are zero)."""

    series: TSeries
    n_max: int
    q: object
    free_indices: tuple = ()
    norms: dict = field(default_factory=dict)

    def coeff(self, n: int) -> np.ndarray:
        return self.series.raw[n]

    def norm(self, rho: float, n_points: int = 64) -> np.ndarray:
        """``||X_n||_rho`` for n = 0..n_max (cached per rho)."""
        if rho not in self.norms:
            self.norms[rho] = np.array(
                [sup_norm(self.series.raw[n].astype(complex), rho, n_points) for n in range(self.n_max + 1)]
            )
        return self.norms[rho]

    def head(self, mu: int) -> TSeries:
        """``sum_{n <= mu} X_n t^n``."""
        c = self.series.coeffs
        c[mu + 1 :] = 0
        return TSeries(c)

    def tail(self, mu: int) -> TSeries:
        """``sum_{n > mu} X_n t^n``."""
        c = self.series.coeffs
        c[: mu + 1] = 0
        return TSeries(c)


@dataclass
class GevreyCertificate:
    """Fitted constants for a growth or remainder bound.

    ``kind`` is ``"coefficient-growth"`` for ``|X_n| <= C h^n [n]_q!``,
    ``"ray-bound"`` for the Borel-plane majorant, or ``"asymptotic"`` for
    the q-Gevrey remainder bound, in which case ``C, h`` play the role of ``M, H``.
    """

    kind: str
    C: float
    h: float
    R: float | None = None
    rho: float | None = None
    ratios: np.ndarray | None = None
    worst: float = 0.0
    worst_sample: object = None
    extra: dict = field(default_factory=dict)

    @property
    def M(self) -> float:
        return self.C

    @property
    def H(self) -> float:
        return self.h

    @property
    def finite(self) -> bool:
        return math.isfinite(self.C) and math.isfinite(self.h)

    def to_dict(self):
        out = {"kind": self.kind, "C": self.C, "h": self.h, "R": self.R, "rho": self.rho, "worst": self.worst}
        if self.worst_sample is not None:
            out["worst_sample"] = _jsonable(self.worst_sample)
        if self.ratios is not None:
            out["ratios"] = [float(r) for r in np.ravel(self.ratios)]
        out.update({k: _jsonable(v) for k, v in self.extra.items()})
        return out


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.complexfloating):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def _is_zero(row, tol):
    if row.dtype == object:
        return all(v == 0 for v in row)
    return float(np.max(np.abs(row), initial=0.0)) <= tol


def solve_formal(eq: Equation, n_max: int | None = None, zero_tol: float = ZERO_TOL) -> FormalSolution:
    """Coefficients of the formal solution up to ``t^{n_max}``.

    An index whose diagonal ``D_n`` vanishes identically together with the
    right-hand side is free; ``X_n`` is set to zero and the index recorded.
    """
    Mt = eq.trunc.Mt
    n_max = Mt if n_max is None else n_max
    if n_max > Mt:
        raise ValueError(f"n_max={n_max} exceeds the truncation Mt={Mt}")
    q = eq.q.q
    terms = [(t.j, t.alpha, t.coeff.raw) for t in eq.active_terms()]
    for j, alpha, a in terms:
        if alpha > 0 and not _is_zero(a[0], zero_tol):
            raise AssumptionViolated(
                f"term (j={j}, alpha={alpha}) has a nonzero t^0 coefficient; the recursion is not triangular"
            )
    X = eq.rhs.coeffs * 0
    F = eq.rhs.raw
    fscale = max(1.0, float(np.max(np.abs(F.astype(complex)), initial=0.0)))
    free = []
    for n in range(n_max + 1):
        rhs = F[n].copy()
        diag = np.zeros_like(rhs)
        qn = qnum(n, q)
        for j, alpha, a in terms:
            if alpha == 0:
                diag = diag + a[0] * qn**j
            for l in range(1, n + 1):
                if _is_zero(a[l], 0.0):
                    continue
                prev = X[n - l] if alpha == 0 else zdiff(X[n - l], alpha)
                rhs = rhs - zmul(a[l], prev) * qnum(n - l, q) ** j
        if _is_zero(diag[:1], zero_tol):
            if _is_zero(diag, zero_tol) and _is_zero(rhs, zero_tol * fscale):
                free.append(n)
                continue
            raise ResonantIndex(n, complex(diag[0]))
        X[n] = zdiv(rhs, diag)
    return FormalSolution(TSeries(X), n_max, as_qparam(q), tuple(free))


def recursion_residual(eq: Equation, sol: FormalSolution) -> float:
    """Largest relative coefficient residual of the equation for ``n <= n_max``.

    Each coefficient is scaled by the sum of the magnitudes of the terms that
    produce it, so cancellation among huge terms is measured fairly.
    """
    X = sol.series
    total = eq.apply(X).raw.astype(complex) - eq.rhs.raw.astype(complex)
    scale = np.abs(eq.rhs.raw.astype(complex))
    for t in eq.terms:
        scale = scale + np.abs(eq.apply_term(t, X).raw.astype(complex))
    worst = 0.0
    for n in range(sol.n_max + 1):
        s = float(np.max(scale[n]))
        if s > 0:
            worst = max(worst, float(np.max(np.abs(total[n]))) / s)
    return worst


def factorial_growth_oracle(n: int, q, a=1.0, b=1.0, alpha: int = 1, Mz: int = 16) -> np.ndarray:
    """Closed form of ``X_{n+1}`` for ``(tD_q+1)X - t(tD_q)^2 X - b t d^alpha X = a t/(1-z)``.

    ``X_{n+1} = prod_{k<=n}([k]^2 + b d^alpha) / prod_{k<=n+1}([k]+1) applied to a/(1-z)``.
    """
    g = np.full(Mz + 1, complex(a))
    for k in range(1, n + 1):
        g = qnum(k, q) ** 2 * g + b * zdiff(g, alpha)
    den = math.prod(qnum(k, q) + 1 for k in range(1, n + 2))
    return g / den


def factorial_growth_lower_bound(n: int, q, a=1.0) -> float:
    """``[n]_q! / (2^{n+1} (1+q)^n) * a``, a lower bound for ``X_{n+1}(0)``."""
    q = float(as_qparam(q).q)
    return math.exp(log_qfactorial(n, q) - (n + 1) * math.log(2) - n * math.log(1 + q)) * a


def norm_table(sol: FormalSolution, rho: float):
    """Rows ``(n, ||X_n||_rho, r_n)`` with ``r_n = (||X_n||_rho/[n]_q!)^{1/n}``."""
    norms = sol.norm(rho)
    q = float(sol.q.q)
    rows = []
    for n, v in enumerate(norms):
        r = math.exp((math.log(v) - log_qfactorial(n, q)) / n) if n and v > 0 else 0.0
        rows.append((n, float(v), r))
    return rows


def growth_certificate(
    sol: FormalSolution, R: float, rho: float, safety: float = 1.05, drift_limit: float = math.log(2.0)
) -> GevreyCertificate:
    """Fit ``||X_n||_rho <= C h^n [n]_q!`` over all computed indices."""
    if not 0 < rho < R:
        raise ValueError("need 0 < rho < R")
    rows = norm_table(sol, rho)
    norms = np.array([r[1] for r in rows])
    rn = np.array([r[2] for r in rows])
    if not np.any(norms > 0):
        return GevreyCertificate("coefficient-growth", 1.0, 1.0, R, rho, rn, extra={"vacuous": True})
    lo = max(1, sol.n_max // 2)
    window = rn[lo : sol.n_max + 1]
    if not np.all(np.isfinite(window)):
        raise GrowthExceeded("nonfinite growth ratios")
    pos = window > 0
    if pos.sum() >= 3:
        idx = np.arange(lo, sol.n_max + 1)[pos]
        slope = np.polyfit(idx, np.log(window[pos]), 1)[0]
        if slope * (idx[-1] - idx[0]) > drift_limit:
            raise GrowthExceeded(f"r_n keeps increasing over the tail window (log-slope {slope:.3g})")
    h = safety * float(np.max(window)) if np.any(pos) else 1.0
    h = max(h, 1e-300)
    q = float(sol.q.q)
    logratio = [
        math.log(v) - n * math.log(h) - log_qfactorial(n, q) for n, v in enumerate(norms) if v > 0
    ]
    C = math.exp(max(logratio))
    ratios = np.array(
        [v / math.exp(n * math.log(h) + log_qfactorial(n, q)) for n, v in enumerate(norms)]
    ) / C
    return GevreyCertificate("coefficient-growth", C, h, R, rho, ratios, worst=float(ratios.max()))
