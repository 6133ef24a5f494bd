"""Moments of |zeta(1/2+it)| over zero-delimited intervals: evaluation,
zero isolation, Romberg moment quadrature, prediction formulas, local
models, and the statistical analyses built on top of them.
"""

__version__ = "0.1.0"

from .specfun import (EULER_GAMMA, SmoothingKernel, cosine_integral,
                      euler_gamma, expint_e1, kernel_u, kernel_v, theta)
from .zetaeval import (EvalQuality, HeightValue, QualityMissError, ZEvaluator,
                       abs_zeta_line, riemann_siegel_Z, zeta_euler_maclaurin)

__all__ = [
    "EULER_GAMMA", "SmoothingKernel", "cosine_integral", "euler_gamma",
    "expint_e1", "kernel_u", "kernel_v", "theta",
    "EvalQuality", "HeightValue", "QualityMissError", "ZEvaluator",
    "abs_zeta_line", "riemann_siegel_Z", "zeta_euler_maclaurin",
]
