"""Forward-mode automatic differentiation over doubled coordinates."""

from . import ops
from .dual import Dual, grad_of, hess_of, value_of
from .jet import Jet, new_tag
from .point import (
    DoubledPoint,
    DualScalar,
    ScalarField,
    eval_with_gradients,
    hessian_block,
    history_metric,
    parse_direction,
)
from .trace import Kernel, TraceError, Tracer

__all__ = [
    "ops",
    "Dual",
    "DualScalar",
    "Jet",
    "new_tag",
    "DoubledPoint",
    "ScalarField",
    "eval_with_gradients",
    "hessian_block",
    "history_metric",
    "parse_direction",
    "Kernel",
    "Tracer",
    "TraceError",
    "value_of",
    "grad_of",
    "hess_of",
]
