"""Symbolic regression by Monte Carlo tree search with extreme-bandit
selection and evolution-inspired state-jumping, plus an extreme-bandit
simulator that checks the finite-time bound formulas numerically."""

from .errors import *  # noqa: F401,F403
from . import expr  # noqa: F401

__version__ = "0.1.0"
