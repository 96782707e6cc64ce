"""Independent reference computations shared by the unit and acceptance tests."""

import math

import numpy as np

from qsum.borel_plane import RayGrid, qconv_eval
from qsum.powerseries import XiSeries, formal_qconv


def qint(n, q):
    return (q**n - 1) / (q - 1)


def rand_poly(rng, deg, Mt, Mz):
    c = np.zeros((Mt + 1, Mz + 1), dtype=complex)
    c[: deg + 1] = rng.normal(size=(deg + 1, Mz + 1)) + 1j * rng.normal(size=(deg + 1, Mz + 1))
    return XiSeries(c)


def qconv_case(rng):
    """Relative error of one random lattice q-convolution of two polynomials."""
    q = float(rng.uniform(1.5, 3.0))
    Mz = int(rng.integers(0, 3))
    Mt = 14
    a = rand_poly(rng, int(rng.integers(0, 4)), Mt, Mz)
    u = rand_poly(rng, int(rng.integers(0, 5)), Mt, Mz)
    lam = float(rng.uniform(0.3, 1.5)) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    grid = RayGrid.from_series(u, lam, -6, 3, q)
    K = int(rng.integers(-3, 4))
    xi = grid.xi(K)
    got = qconv_eval(a, grid, xi)
    # the exact convolution of polynomials is again a polynomial
    want = formal_qconv(a, u, q).eval(xi)
    absa, absu = XiSeries(np.abs(a.raw)), XiSeries(np.abs(u.raw))
    scale = np.max(np.abs(formal_qconv(absa, absu, q).eval(abs(xi))))
    return float(np.max(np.abs(got - want)) / scale)


def factorial_fixture_coefficient(n, q, Mz, a=1.0, b=1.0, alpha=1):
    """``X_{n+1}`` of ``(tD_q+1)X - t(tD_q)^2 X - b t d_z^alpha X = a t/(1-z)`` as z-coefficients.

    Matching t^{n+1} gives ``([n+1]+1) X_{n+1} = [n]^2 X_n + b d^alpha X_n``,
    started from ``2 X_1 = a/(1-z)``; here d^alpha is the shift of Taylor coefficients.
    """
    g = [a] * (Mz + 1)
    for k in range(1, n + 1):
        d = [0.0] * (Mz + 1)
        for i in range(Mz + 1 - alpha):
            d[i] = g[i + alpha] * math.prod(range(i + 1, i + alpha + 1))
        g = [qint(k, q) ** 2 * g[i] + b * d[i] for i in range(Mz + 1)]
    den = math.prod(qint(k, q) + 1 for k in range(1, n + 2))
    return np.array(g) / den
