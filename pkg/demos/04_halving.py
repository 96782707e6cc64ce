"""
Halving the variable
====================

When the d_z terms do not vanish to high enough order in t, summation does
not apply directly.  Substituting t = tau^2 doubles every t-order and the
rewritten equation passes the check; its formal solution is X(tau^2).
"""

import numpy as np

from qsum import check_assumptions, halve_variable, slope_one_equation, solve_formal
from qsum.reduction import even_embed

eq = slope_one_equation(n1=1, Mt=12, Mz=6)
rep = check_assumptions(eq)
print("original:", "summable" if rep.summable else "not summable", rep.violations)

tau = halve_variable(eq)
rep = check_assumptions(tau)
print(f"in tau: summable={rep.summable}, m={tau.m}, m0={rep.m0}, q'={float(tau.q.q):.4f}")

X = solve_formal(eq).series
Y = solve_formal(tau).series
E = even_embed(X).raw
nz = E != 0
gap = np.max(np.abs(Y.raw - E)[nz] / np.abs(E[nz]))
print(f"largest relative gap between Y and X(tau^2): {gap:.2e}")
print("odd powers of tau vanish:", bool(np.all(Y.raw[1::2] == 0)))
