"""Nonconservative Lagrangian mechanics with doubled degrees of freedom."""

__version__ = "0.1.0"

from .errors import InputError, NonconsError, NumericError
from .mechanics import NonconsSystem, Trajectory, integrate, order_reduce
from .noether import balance_residual, noether_current, total_energy

__all__ = [
    "InputError",
    "NonconsError",
    "NonconsSystem",
    "NumericError",
    "Trajectory",
    "__version__",
    "balance_residual",
    "integrate",
    "noether_current",
    "order_reduce",
    "total_energy",
]
