"""Exception types shared across the package."""

import numpy as np


class NumericalError(RuntimeError):
    """A numerical routine failed (non-convergence, singular system)."""


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance within the iteration budget.

    Attributes:
        last: the last iterate.
        residual: the residual of ``last``.
        iterations: number of iterations performed.
    """

    def __init__(self, message: str, last=None, residual: float = np.inf, iterations: int = 0):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.last = last
        self.residual = residual
        self.iterations = iterations


class ZeroLikelihoodError(ValueError):
    """An observation had zero probability under the current belief."""
