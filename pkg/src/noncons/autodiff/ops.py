"""Elementary functions that work on every scalar type in the package.

User Lagrangians should call these instead of ``math``/``numpy`` so the same
code runs on plain floats, numpy arrays, dual numbers, Taylor jets and trace
nodes. Each function looks for a ``_<name>`` method on the argument and
otherwise falls back to ``math`` (for scalars) or ``numpy`` (for arrays).
"""

from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np


def _dispatch(name: str, x: Any, scalar_fn, array_fn):
    method = getattr(type(x), name, None)
    if method is not None:
        return method(x)
    if isinstance(x, np.ndarray):
        return array_fn(x)
    return scalar_fn(x)


def _heaviside_scalar(x: float) -> float:
    return 1.0 if x >= 0.0 else 0.0


def _heaviside_array(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0.0, 1.0, 0.0)


def _sign_scalar(x: float) -> float:
    return math.copysign(1.0, x) if x != 0.0 else 0.0


def sin(x):
    return _dispatch("_sin", x, math.sin, np.sin)


def cos(x):
    return _dispatch("_cos", x, math.cos, np.cos)


def exp(x):
    return _dispatch("_exp", x, math.exp, np.exp)


def log(x):
    return _dispatch("_log", x, math.log, np.log)


def sqrt(x):
    return _dispatch("_sqrt", x, math.sqrt, np.sqrt)


def tanh(x):
    return _dispatch("_tanh", x, math.tanh, np.tanh)


def heaviside(x):
    """Unit step, equal to 1 at the origin. Its derivative is taken as 0."""
    return _dispatch("_heaviside", x, _heaviside_scalar, _heaviside_array)


def sign(x):
    return _dispatch("_sign", x, _sign_scalar, np.sign)


def tan(x):
    return sin(x) / cos(x)


def power(x, n: float):
    return x**n


def dot(a: Sequence, b: Sequence):
    """Euclidean inner product of two equal-length sequences of scalars."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch {len(a)} != {len(b)}")
    total = 0.0
    for x, y in zip(a, b):
        total = total + x * y
    return total


def cross(a: Sequence, b: Sequence) -> tuple:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def norm2(a: Sequence):
    return dot(a, a)


def primal(x) -> float:
    """Strip every derivative layer and return the underlying float value."""
    while hasattr(x, "primal"):
        x = x.primal
    return x
