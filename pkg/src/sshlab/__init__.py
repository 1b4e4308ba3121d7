"""Numerical laboratory for dimerized hopping chains with random couplings."""

__version__ = "0.1.0"

from . import analytic, born, cli, ensemble, invariant, model, spectrum

__all__ = [
    "__version__",
    "analytic",
    "born",
    "cli",
    "ensemble",
    "invariant",
    "model",
    "spectrum",
]
