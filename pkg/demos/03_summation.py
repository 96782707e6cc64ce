"""
Summation and the remainder bound
=================================

The q-Laplace transform of u along lambda q^Z gives an actual solution
W = sum_{n<=mu} X_n t^n + L[u] of the equation, holomorphic off a spiral of
poles.  We check that W solves the equation and that its truncated Taylor
sums approximate it with remainders of size [N]_q! |t|^N.
"""

import numpy as np

from qsum import (
    continue_on_ray,
    default_mu,
    gevrey_verify,
    reduce,
    residual_in_equation,
    slope_one_equation,
    solve_formal,
    sum_solution,
    to_conv_equation,
)
from qsum.laplace import sector_samples
from qsum.qcore import qfactorial

q = 2.0
eq = slope_one_equation(q=q)
sol = solve_formal(eq)
mu = default_mu(eq, sol)
grid = continue_on_ray(to_conv_equation(reduce(eq, mu, sol)), 1.0)
W = sum_solution(eq, sol, grid, mu)

ts = sector_samples(1.0, (0.01, 0.1), 20, offset=0.3)
print(f"residual of the equation on 20 samples: {residual_in_equation(eq, W, ts):.2e}")

# remainders at a single point
t = 0.05 * np.exp(0.3j)
w = W(t)
X = sol.series.raw[:, 0]
print(f"\nW({t:.3f}) = {w:.12f}")
print(" N   |W - sum_{n<N} X_n t^n|   [N]_q! |t|^N")
partial = 0j
for N in range(9):
    print(f"{N:2d}   {abs(w - partial):22.4e}   {qfactorial(N, q) * abs(t) ** N:12.4e}")
    partial += X[N] * t**N

cert = gevrey_verify(W, sol)
print(f"\nfitted constants: M = {cert.C:.4g}, H = {cert.h:.4g} over N <= 8, eps in (0.1, 0.05)")
