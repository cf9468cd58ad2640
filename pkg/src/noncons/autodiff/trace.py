"""Tracing scalar code into straight-line Python.

Evaluating derivative code with plain Python dual numbers costs tens of
microseconds per call, which is too slow inside an integrator taking tens of
thousands of steps. Instead the generic code is run once on :class:`Node`
placeholders; the recorded expression graph (hash-consed, with constant
folding) is emitted as a flat Python function using ``math`` or ``numpy``
and compiled. Anything that needs a concrete value during tracing (a
comparison, ``float()``, a ``math`` call) raises :class:`TraceError`, and
:class:`Kernel` then falls back to eager evaluation.
"""

from __future__ import annotations

import math
import numbers
from typing import Callable, Sequence

import numpy as np


class TraceError(TypeError):
    """The traced code tried to inspect a concrete value."""


_COMMUTATIVE = {"add", "mul"}
_UNARY = {
    "neg": lambda x: -x,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "tanh": math.tanh,
    "heaviside": lambda x: 1.0 if x >= 0.0 else 0.0,
    "sign": lambda x: math.copysign(1.0, x) if x != 0.0 else 0.0,
    "abs": abs,
}
_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, b: a**b,
}


def _is_const(x) -> bool:
    return not isinstance(x, Node)


class Tracer:
    """Records an expression graph; nodes are shared when structurally equal."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._table: dict[tuple, Node] = {}

    def input(self) -> "Node":
        node = Node(self, "input", (len(self.nodes),), len(self.nodes))
        self.nodes.append(node)
        return node

    def make(self, op: str, args: tuple):
        if all(_is_const(a) for a in args):
            fn = _UNARY.get(op) or _BINARY[op]
            return float(fn(*args))
        simplified = _simplify(op, args)
        if simplified is not None:
            return simplified[0]
        key_args = tuple(("n", a.idx) if isinstance(a, Node) else ("c", float(a)) for a in args)
        if op in _COMMUTATIVE:
            key_args = tuple(sorted(key_args))
        key = (op, key_args)
        node = self._table.get(key)
        if node is None:
            node = Node(self, op, tuple(a if isinstance(a, Node) else float(a) for a in args), len(self.nodes))
            self.nodes.append(node)
            self._table[key] = node
        return node


def _simplify(op: str, args: tuple):
    """Return (result,) for algebraic identities, else None."""
    if op == "add":
        a, b = args
        if _is_const(a) and a == 0.0:
            return (b,)
        if _is_const(b) and b == 0.0:
            return (a,)
    elif op == "sub":
        a, b = args
        if _is_const(b) and b == 0.0:
            return (a,)
        if _is_const(a) and a == 0.0:
            return (b.tracer.make("neg", (b,)),)
        if a is b:
            return (0.0,)
    elif op == "mul":
        a, b = args
        for x, y in ((a, b), (b, a)):
            if _is_const(x):
                if x == 0.0:
                    return (0.0,)
                if x == 1.0:
                    return (y,)
                if x == -1.0:
                    return (y.tracer.make("neg", (y,)),)
    elif op == "div":
        a, b = args
        if _is_const(b) and b == 1.0:
            return (a,)
        if _is_const(a) and a == 0.0:
            return (0.0,)
    elif op == "neg":
        (a,) = args
        if a.op == "neg":
            return (a.args[0],)
    elif op == "pow":
        a, b = args
        if b == 1.0:
            return (a,)
        if b == 0.0:
            return (1.0,)
        if b == 2.0:
            return (a.tracer.make("mul", (a, a)),)
    return None


class Node:
    __slots__ = ("tracer", "op", "args", "idx")
    __array_ufunc__ = None

    def __init__(self, tracer: Tracer, op: str, args: tuple, idx: int):
        self.tracer = tracer
        self.op = op
        self.args = args
        self.idx = idx

    def __repr__(self) -> str:
        return f"Node#{self.idx}({self.op})"

    def _bin(self, op, other, reverse=False):
        if isinstance(other, Node):
            if other.tracer is not self.tracer:
                raise TraceError("nodes from different traces")
        elif not isinstance(other, numbers.Real):
            return NotImplemented
        args = (other, self) if reverse else (self, other)
        return self.tracer.make(op, args)

    def __add__(self, other):
        return self._bin("add", other)

    def __radd__(self, other):
        return self._bin("add", other, True)

    def __sub__(self, other):
        return self._bin("sub", other)

    def __rsub__(self, other):
        return self._bin("sub", other, True)

    def __mul__(self, other):
        return self._bin("mul", other)

    def __rmul__(self, other):
        return self._bin("mul", other, True)

    def __truediv__(self, other):
        return self._bin("div", other)

    def __rtruediv__(self, other):
        return self._bin("div", other, True)

    def __pow__(self, other):
        if isinstance(other, Node):
            raise TraceError("symbolic exponents are not traced")
        return self._bin("pow", other)

    def __rpow__(self, other):
        raise TraceError("symbolic exponents are not traced")

    def __neg__(self):
        return self.tracer.make("neg", (self,))

    def __pos__(self):
        return self

    def __abs__(self):
        return self.tracer.make("abs", (self,))

    def _refuse(self, *_):
        raise TraceError("traced value used in a value-dependent way")

    __bool__ = __float__ = __int__ = __index__ = _refuse
    __lt__ = __le__ = __gt__ = __ge__ = __eq__ = __ne__ = _refuse

    @property
    def primal(self):
        raise TraceError("traced value has no concrete primal")

    def _sin(self):
        return self.tracer.make("sin", (self,))

    def _cos(self):
        return self.tracer.make("cos", (self,))

    def _exp(self):
        return self.tracer.make("exp", (self,))

    def _log(self):
        return self.tracer.make("log", (self,))

    def _sqrt(self):
        return self.tracer.make("sqrt", (self,))

    def _tanh(self):
        return self.tracer.make("tanh", (self,))

    def _heaviside(self):
        return self.tracer.make("heaviside", (self,))

    def _sign(self):
        return self.tracer.make("sign", (self,))


# equality refuses (it would be value-dependent), so hash by identity
Node.__hash__ = object.__hash__


_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "**"}


def _heaviside_np(x):
    return np.where(x >= 0.0, 1.0, 0.0)


def _sign_math(x):
    return math.copysign(1.0, x) if x != 0.0 else 0.0


def _heaviside_math(x):
    return 1.0 if x >= 0.0 else 0.0


_NAMESPACES = {
    "math": {
        "sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log,
        "sqrt": math.sqrt, "tanh": math.tanh, "heaviside": _heaviside_math,
        "sign": _sign_math, "abs": abs,
    },
    "numpy": {
        "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log,
        "sqrt": np.sqrt, "tanh": np.tanh, "heaviside": _heaviside_np,
        "sign": np.sign, "abs": np.abs,
    },
}


def _ref(x) -> str:
    return f"n{x.idx}" if isinstance(x, Node) else repr(float(x))


def generate_source(inputs: Sequence[Node], outputs: Sequence, name: str = "kernel") -> str:
    """Emit Python source for ``outputs`` as a function of ``inputs``."""
    if not inputs:
        raise ValueError("a kernel needs at least one input")
    tracer = inputs[0].tracer
    live = set()
    stack = [o for o in outputs if isinstance(o, Node)]
    while stack:
        node = stack.pop()
        if node.idx in live:
            continue
        live.add(node.idx)
        stack.extend(a for a in node.args if isinstance(a, Node))
    input_ids = {n.idx for n in inputs}
    lines = [f"def {name}({', '.join(_ref(n) for n in inputs)}):"]
    for node in tracer.nodes:
        if node.idx not in live or node.idx in input_ids:
            continue
        if node.op == "input":
            raise TraceError("output depends on an input that was not declared")
        if node.op in _INFIX:
            a, b = node.args
            expr = f"{_ref(a)} {_INFIX[node.op]} {_ref(b)}"
        elif node.op == "neg":
            expr = f"-{_ref(node.args[0])}"
        else:
            expr = f"{node.op}({_ref(node.args[0])})"
        lines.append(f"    n{node.idx} = {expr}")
    lines.append(f"    return ({''.join(_ref(o) + ', ' for o in outputs)})")
    return "\n".join(lines) + "\n"


def compile_trace(inputs: Sequence[Node], outputs: Sequence, backend: str = "math") -> Callable:
    source = generate_source(inputs, outputs)
    namespace = dict(_NAMESPACES[backend])
    exec(compile(source, "<noncons-kernel>", "exec"), namespace)
    return namespace["kernel"]


class Kernel:
    """A function of n scalar inputs returning a tuple of scalars.

    ``fn`` receives a list of inputs and must be written generically. On the
    first call the kernel tries to trace and compile it; the compiled result
    is checked against an eager evaluation before being trusted.
    """

    def __init__(self, fn: Callable[[list], Sequence], n_inputs: int, backend: str = "math", trace: bool = True):
        self.fn = fn
        self.n_inputs = n_inputs
        self.backend = backend
        self._compiled: Callable | None = None
        self._tried = not trace

    @property
    def compiled(self) -> bool:
        return self._compiled is not None

    def eager(self, *args) -> tuple:
        return tuple(self.fn(list(args)))

    def _try_compile(self, args) -> tuple:
        self._tried = True
        expected = self.eager(*args)
        try:
            tracer = Tracer()
            inputs = [tracer.input() for _ in range(self.n_inputs)]
            outputs = [_to_traceable(o) for o in self.fn(list(inputs))]
            compiled = compile_trace(inputs, outputs, self.backend)
            got = compiled(*args)
        except (TraceError, TypeError, ValueError, ZeroDivisionError, OverflowError):
            return expected
        if len(got) == len(expected) and all(_agree(g, e) for g, e in zip(got, expected)):
            self._compiled = compiled
        return expected

    def __call__(self, *args) -> tuple:
        if self._compiled is not None:
            return self._compiled(*args)
        if not self._tried:
            return self._try_compile(args)
        return self.eager(*args)


def _to_traceable(x):
    if isinstance(x, (Node, numbers.Real)):
        return x
    raise TraceError(f"unsupported output type {type(x).__name__}")


def _agree(a, b) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_nan = np.isnan(a) & np.isnan(b)
    close = np.isclose(a, b, rtol=1e-9, atol=1e-12)
    return bool(np.all(close | both_nan))


def first_nonfinite(inputs: Sequence[Node], values: Sequence[float]) -> int | None:
    """Replay a trace on concrete inputs and return the first bad node index."""
    if not inputs:
        return None
    tracer = inputs[0].tracer
    env: dict[int, float] = {n.idx: float(v) for n, v in zip(inputs, values)}

    def arg(x):
        return env[x.idx] if isinstance(x, Node) else x

    for node in tracer.nodes:
        if node.idx in env:
            continue
        fn = _UNARY.get(node.op) or _BINARY.get(node.op)
        try:
            out = float(fn(*(arg(a) for a in node.args)))
        except (ValueError, ZeroDivisionError, OverflowError):
            return node.idx
        if not math.isfinite(out):
            return node.idx
        env[node.idx] = out
    return None
