"""Public equation-of-motion operations."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..autodiff import DoubledPoint
from ..errors import DimensionMismatch, InvalidParams, MissingAcceleration
from .engine import Partition
from .system import NonconsSystem


def _vec(x, n: int, name: str) -> tuple:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (n,):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected ({n},)")
    return tuple(float(a) for a in arr)


def _aux(sys: NonconsSystem, s) -> tuple:
    if sys.aux_dim == 0:
        return ()
    if s is None:
        s = (sys.closure.entropy0,)
    return _vec(s, sys.aux_dim, "s")


def noncons_force(sys: NonconsSystem, t, q, v, a=None, s=None, jerk=None, sdot=None) -> np.ndarray:
    """Generalized nonconservative force [dK/dq- - d/dt dK/dv-]_PL.

    The time derivative is expanded by the chain rule along the physical
    path, so ``a`` is required whenever dK/dv- depends on the velocity. For
    acceleration-dependent K the full ladder is used and ``jerk`` may be
    required as well. Memory forces are not included (they need history).
    """
    N = sys.dim
    q, v = _vec(q, N, "q"), _vec(v, N, "v")
    s = _aux(sys, s)
    eng = sys.engine
    if sys.is_reduced:
        return np.array(eng.reduced_force(t, q, v))
    if sys.k_order == 2:
        if a is None:
            raise MissingAcceleration("acceleration-dependent K needs the acceleration")
        a = _vec(a, N, "a")
        j = None if jerk is None else _vec(jerk, N, "jerk")
        force, _, _ = eng.ladder_at(t, q, v, a, j)
        out = np.array([float(f) for f in force])
        if np.any(np.isnan(out)):
            raise MissingAcceleration("this K needs the jerk (third derivative) as well")
        return out
    pot = eng.potential_parts(t, q, v, s)
    Kvv = np.array(pot["Kvv"], dtype=float).reshape(N, N)
    needs_a = bool(np.any(Kvv != 0.0))
    if needs_a and a is None:
        raise MissingAcceleration("dK/dv- depends on the velocity; pass the acceleration")
    acc = np.zeros(N) if a is None else np.array(_vec(a, N, "a"))
    force = np.array(pot["dq_minus"], dtype=float)
    force -= np.array(pot["Kvq"], dtype=float).reshape(N, N) @ np.array(v)
    force -= Kvv @ acc
    force -= np.array(pot["Kvt"], dtype=float)
    if sys.aux_dim and sdot is not None:
        force -= np.array(pot["Kvs"], dtype=float).reshape(N, sys.aux_dim) @ np.atleast_1d(sdot)
    return force


def mass_matrix(sys: NonconsSystem, t, q, v, s=None) -> np.ndarray:
    """Coefficient matrix of the acceleration in the equation of motion."""
    N = sys.dim
    q, v = _vec(q, N, "q"), _vec(v, N, "v")
    if sys.k_order == 2 and not sys.is_reduced:
        raise InvalidParams("mass_matrix needs k_order <= 1; reduce the system first", "k_order")
    T = sys.engine.fast_terms(t, q, v, _aux(sys, s))
    return np.array(T.M, dtype=float).reshape(N, N)


@dataclass(frozen=True)
class StateRates:
    """Time derivatives at one physical state.

    ``velocity`` includes the solved velocities of massless coordinates;
    ``acceleration`` covers every coordinate.
    """

    velocity: np.ndarray
    acceleration: np.ndarray
    aux_rate: np.ndarray


def state_rates(sys: NonconsSystem, t, q, v, s=None, memory_force: float | None = None, check_condition: bool = True) -> StateRates:
    N = sys.dim
    q, v = _vec(q, N, "q"), _vec(v, N, "v")
    s = _aux(sys, s)
    eng = sys.engine
    extra = None
    if memory_force is not None:
        if sys.memory is None:
            raise InvalidParams("memory_force given for a system without memory", "memory_force")
        extra = [0.0] * N
        extra[sys.memory.coordinate] = float(memory_force)
    part = eng.partition
    vS = [v[i] for i in part.second_order]
    guess = [v[i] for i in part.first_order] or None
    vfull, aS, sdot = eng.rates(t, q, vS, s, extra=extra, guess=guess, check_condition=check_condition)
    a = eng.full_acceleration(t, q, vfull, s, aS) if not sys.is_reduced else list(aS)
    return StateRates(np.array(vfull, dtype=float), np.array([float(x) for x in a]), np.array(sdot, dtype=float))


def accelerations(sys: NonconsSystem, t, q, v, s=None, memory_force: float | None = None) -> np.ndarray:
    """Solve the equation of motion for the accelerations.

    Velocities of massless coordinates in ``v`` are ignored: they are fixed
    by their first-order equations (see :func:`state_rates`). Their entries in
    the result are the time derivative of that solved velocity.
    """
    return state_rates(sys, t, q, v, s, memory_force).acceleration


def first_order_coordinates(sys: NonconsSystem) -> Partition:
    """Which coordinates carry inertia and which obey first-order equations."""
    return sys.engine.partition


def order_reduce(sys: NonconsSystem, iterations: int = 1) -> NonconsSystem:
    """Replace acceleration dependence in K by the lower-order dynamics.

    The leading-order acceleration comes from Lambda with K evaluated at
    zero acceleration. Each further round evaluates the full nonconservative
    force on the Taylor expansion of the previous round's flow.
    """
    if sys.k_order == 1:
        return sys
    if iterations < 1:
        raise InvalidParams("iterations must be at least 1", "iterations")
    if sys.memory is not None or sys.closure is not None:
        raise InvalidParams("order reduction supports plain (L, K) systems only", "k_order")
    reduced = replace(sys, k_order=1, reduction_iterations=int(iterations), parent=sys)
    reduced.engine.reduced_accel(0, 0.0, (0.0,) * sys.dim, (0.0,) * sys.dim)
    return reduced


def plus_equation_residual(sys: NonconsSystem, t, q, v, a, s=None, sdot=None) -> tuple[np.ndarray, np.ndarray]:
    """The '+' Euler-Lagrange expression and dLambda/dv+ at the physical limit.

    Both vanish identically for any K that vanishes at the physical limit.
    """
    N = sys.dim
    s = _aux(sys, s)
    sd = tuple(np.atleast_1d(sdot)) if sdot is not None else (0.0,) * sys.aux_dim
    return sys.engine.plus_equation(t, _vec(q, N, "q"), _vec(v, N, "v"), _vec(a, N, "a"), s, sd)


def doubled_point(sys: NonconsSystem, t, q_plus, q_minus, v_plus, v_minus, a_plus=None, a_minus=None, s=None) -> DoubledPoint:
    """Plain-float doubled point for evaluating K directly."""
    if sys.source.k_order == 2 and a_plus is None:
        a_plus = a_minus = (0.0,) * sys.dim
    return DoubledPoint(t, q_plus, q_minus, v_plus, v_minus, a_plus, a_minus, _aux(sys, s))


def k_value(sys: NonconsSystem, p: DoubledPoint) -> float:
    return float(sys.source.potential(p))
