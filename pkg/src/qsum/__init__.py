"""q-Borel-Laplace summation of linear q-difference-differential equations.

Pipeline: check the Newton polygon hypotheses, build the formal solution,
reduce to a q-convolution equation in the Borel plane, solve it on a ray
``lambda q^Z`` and resum with the q-Laplace transform.
"""

from .borel_plane import ConvGridParams, RayGrid, bound_check, continue_on_ray, qconv_eval, residual_on_grid
from .equation import (
    Equation,
    Term,
    check_assumptions,
    factorial_growth_equation,
    newton_polygon,
    p0_polynomial,
    singular_directions,
    slope_one_equation,
)
from .errors import QSumError
from .formal_solver import FormalSolution, GevreyCertificate, growth_certificate, solve_formal
from .laplace import (
    SpiralSet,
    SummedSolution,
    gevrey_verify,
    qborel_numeric,
    qlaplace,
    residual_in_equation,
    sum_solution,
    watson_check,
)
from .powerseries import Trunc, TSeries, XiSeries, formal_borel, formal_laplace, formal_qconv
from .qcore import QParam, Exp_q, exp_q, qfactorial, qnum
from .reduction import ConvEquation, default_mu, halve_variable, reduce, to_conv_equation

__version__ = "0.1.0"

__all__ = [
    "ConvGridParams",
    "RayGrid",
    "bound_check",
    "continue_on_ray",
    "qconv_eval",
    "residual_on_grid",
    "Equation",
    "Term",
    "check_assumptions",
    "factorial_growth_equation",
    "newton_polygon",
    "p0_polynomial",
    "singular_directions",
    "slope_one_equation",
    "QSumError",
    "FormalSolution",
    "GevreyCertificate",
    "growth_certificate",
    "solve_formal",
    "SpiralSet",
    "SummedSolution",
    "gevrey_verify",
    "qborel_numeric",
    "qlaplace",
    "residual_in_equation",
    "sum_solution",
    "watson_check",
    "Trunc",
    "TSeries",
    "XiSeries",
    "formal_borel",
    "formal_laplace",
    "formal_qconv",
    "QParam",
    "Exp_q",
    "exp_q",
    "qfactorial",
    "qnum",
    "ConvEquation",
    "default_mu",
    "halve_variable",
    "reduce",
    "to_conv_equation",
]
