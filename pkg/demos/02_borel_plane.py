"""
The Borel plane
===============

Dropping the first mu coefficients and applying the formal q-Borel transform
turns the equation into a q-convolution equation.  Its solution u(xi, z) is
analytic near 0 and continues along the ray lambda q^Z, where it is computed
node by node because every convolution only reads nodes closer to the origin.
"""

import numpy as np

from qsum import continue_on_ray, default_mu, reduce, slope_one_equation, solve_formal, to_conv_equation
from qsum.borel_plane import bound_check, residual_on_grid

eq = slope_one_equation()
sol = solve_formal(eq)
mu = default_mu(eq, sol)
ceq = to_conv_equation(reduce(eq, mu, sol))
print(f"mu = {mu}; formal residual of the convolution equation: {ceq.formal_residual():.2e}")

# the characteristic polynomial P(xi) vanishes on the singular ray through -2
print("P(-2) =", ceq.P_at(-2.0)[0])

grid = continue_on_ray(ceq, 1.0)
print(f"nodes k = {grid.k_min}..{grid.k_max}, residual on the grid {residual_on_grid(ceq, grid):.2e}")
print("\n  k        xi       |u(xi, 0)|")
for k in range(grid.k_min + 1, grid.k_max + 1, 4):
    print(f"{k:3d}  {grid.xi(k).real:10.3e}  {abs(grid.get(k)[0]):12.4e}")

cert = bound_check(grid, mu + 1, 1, 2)
print(f"\nray bound: M = {cert.C:.3g}, h = {cert.h:.3g}, worst ratio {cert.worst:.3f}")
