"""
A divergent formal solution
===========================

The slope-one equation

    t (tD_q)^2 X + (tD_q) X + t^2 d_z (tD_q) X + t d_z X = t

has a unique formal solution X = sum X_n(z) t^n whose coefficients grow
like the q-factorial [n]_q!.  This script prints that growth.
"""

import numpy as np

from qsum import slope_one_equation, solve_formal
from qsum.formal_solver import growth_certificate
from qsum.qcore import log_qfactorial

q = 2.0
eq = slope_one_equation(q=q)
sol = solve_formal(eq)

# sup-norm of X_n on |z| <= 1/2, against [n]_q!
norms = sol.norm(0.5)
print(" n    ||X_n||        ||X_n|| / [n]_q!")
for n in range(1, sol.n_max + 1, 2):
    ratio = np.exp(np.log(norms[n]) - log_qfactorial(n, q))
    print(f"{n:2d}  {norms[n]:12.4e}  {ratio:12.4e}")

# the fitted constants of |X_n| <= C h^n [n]_q!
cert = growth_certificate(sol, R=1.0, rho=0.5)
print(f"\ngrowth bound: C = {cert.C:.4g}, h = {cert.h:.4g}")
print("the series has radius of convergence zero, so it must be summed")
