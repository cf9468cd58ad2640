"""Equations of motion from (L, K), order reduction and integration."""

from .engine import Partition
from .eom import (
    StateRates,
    accelerations,
    doubled_point,
    first_order_coordinates,
    k_value,
    mass_matrix,
    noncons_force,
    order_reduce,
    plus_equation_residual,
    state_rates,
)
from .integrate import history_forces, integrate, rk4_step, solve_memory_system
from .system import MemoryKernel, NonconsSystem, Trajectory

__all__ = [
    "MemoryKernel",
    "NonconsSystem",
    "Partition",
    "StateRates",
    "Trajectory",
    "accelerations",
    "doubled_point",
    "first_order_coordinates",
    "history_forces",
    "integrate",
    "k_value",
    "mass_matrix",
    "noncons_force",
    "order_reduce",
    "plus_equation_residual",
    "rk4_step",
    "solve_memory_system",
    "state_rates",
]
