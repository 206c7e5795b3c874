"""Robust monotone mean-variance investment in a one-factor market, solved as a stochastic game."""
from ._kernels import BACKEND
from .errors import (ConfigError, DegenerateER, DegenerateVariance, ExcessiveExcursion, GridTooCoarse,
                     MmvError, NonPositiveF, NonPositiveVolatility, OutOfDomain)
from .model import (FactorMarketModel, ModelFamily, audit_assumptions, black_scholes,
                    constant_coefficients, ou_tanh, with_rho)
from .pde import GridSpec, PdeSolution, default_grid, residual_resulting_equation, solve
from .strategy import Anchor, ControlFields
from .streams import McConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigError", "DegenerateER", "DegenerateVariance", "ExcessiveExcursion",
    "GridTooCoarse", "MmvError", "NonPositiveF", "NonPositiveVolatility", "OutOfDomain",
    "FactorMarketModel", "ModelFamily", "audit_assumptions", "black_scholes", "constant_coefficients",
    "ou_tanh", "with_rho", "GridSpec", "PdeSolution", "default_grid", "residual_resulting_equation",
    "solve", "Anchor", "ControlFields", "McConfig", "__version__",
]
