"""Forward-mode dual numbers with optional exact second derivatives.

A :class:`Dual` carries a value, a sparse gradient ``{direction: partial}``
and, in second-order mode, a sparse upper-triangular Hessian
``{(i, j): partial}`` with ``i <= j``. Component entries may be any scalar
type supporting arithmetic and the functions in :mod:`.ops` (floats, numpy
arrays, Taylor jets, trace nodes), which is how the same Lagrangian code is
reused for vectorized fields, time series expansions and code generation.
"""

from __future__ import annotations

from typing import Any

from . import ops


def _is_zero(x) -> bool:
    return type(x) is float and x == 0.0


class Dual:
    __slots__ = ("value", "grad", "hess")
    __array_ufunc__ = None

    def __init__(self, value, grad: dict | None = None, hess: dict | None = None):
        self.value = value
        self.grad = {} if grad is None else grad
        self.hess = hess

    # -- construction helpers -------------------------------------------------
    @classmethod
    def seed(cls, value, index: int, second: bool = False) -> "Dual":
        return cls(value, {index: 1.0}, {} if second else None)

    @property
    def primal(self):
        return self.value

    @property
    def partials(self) -> dict:
        return self.grad

    @property
    def second(self) -> dict | None:
        return self.hess

    def d(self, i: int):
        """First partial along direction ``i`` (0.0 when absent)."""
        return self.grad.get(i, 0.0)

    def d2(self, i: int, j: int):
        """Second partial along directions ``i`` and ``j`` (0.0 when absent)."""
        if self.hess is None:
            raise ValueError("dual was seeded at first order only")
        key = (i, j) if i <= j else (j, i)
        return self.hess.get(key, 0.0)

    def __repr__(self) -> str:
        if self.hess is None:
            return f"Dual({self.value!r}, {self.grad!r})"
        return f"Dual({self.value!r}, {self.grad!r}, {self.hess!r})"

    # -- core rules -----------------------------------------------------------
    def _chain(self, f0, f1, f2) -> "Dual":
        """Apply a unary function with value f0 and derivatives f1, f2."""
        grad = {k: f1 * x for k, x in self.grad.items()}
        if self.hess is None:
            return Dual(f0, grad)
        hess = {k: f1 * x for k, x in self.hess.items()}
        if not _is_zero(f2):
            items = list(self.grad.items())
            for a, (i, x) in enumerate(items):
                fx = f2 * x
                for j, y in items[a:]:
                    key = (i, j) if i <= j else (j, i)
                    term = fx * y
                    hess[key] = hess[key] + term if key in hess else term
        return Dual(f0, grad, hess)

    def _scale(self, c, value) -> "Dual":
        grad = {k: c * x for k, x in self.grad.items()}
        hess = None if self.hess is None else {k: c * x for k, x in self.hess.items()}
        return Dual(value, grad, hess)

    def _mul_dual(self, other: "Dual") -> "Dual":
        av, bv = self.value, other.value
        grad = {k: bv * x for k, x in self.grad.items()}
        for k, y in other.grad.items():
            term = av * y
            grad[k] = grad[k] + term if k in grad else term
        if self.hess is None and other.hess is None:
            return Dual(av * bv, grad)
        hess = {k: bv * x for k, x in (self.hess or {}).items()}
        for k, y in (other.hess or {}).items():
            term = av * y
            hess[k] = hess[k] + term if k in hess else term
        for i, x in self.grad.items():
            for j, y in other.grad.items():
                if i == j:
                    key, term = (i, i), 2.0 * (x * y)
                else:
                    key, term = ((i, j) if i < j else (j, i)), x * y
                hess[key] = hess[key] + term if key in hess else term
        return Dual(av * bv, grad, hess)

    def _add_dual(self, other: "Dual", sign: float) -> "Dual":
        grad = dict(self.grad)
        for k, y in other.grad.items():
            if k in grad:
                grad[k] = grad[k] + y if sign > 0 else grad[k] - y
            else:
                grad[k] = y if sign > 0 else -y
        value = self.value + other.value if sign > 0 else self.value - other.value
        if self.hess is None and other.hess is None:
            return Dual(value, grad)
        hess = dict(self.hess or {})
        for k, y in (other.hess or {}).items():
            if k in hess:
                hess[k] = hess[k] + y if sign > 0 else hess[k] - y
            else:
                hess[k] = y if sign > 0 else -y
        return Dual(value, grad, hess)

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return self._add_dual(other, 1.0)
        return Dual(self.value + other, dict(self.grad), None if self.hess is None else dict(self.hess))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return self._add_dual(other, -1.0)
        return Dual(self.value - other, dict(self.grad), None if self.hess is None else dict(self.hess))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return self._scale(-1.0, -self.value)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, Dual):
            return self._mul_dual(other)
        return self._scale(other, self.value * other)

    __rmul__ = __mul__

    def _reciprocal(self) -> "Dual":
        v = self.value
        r = 1.0 / v
        r2 = r * r
        return self._chain(r, -r2, 2.0 * (r2 * r))

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self._mul_dual(other._reciprocal())
        return self._scale(1.0 / other, self.value / other)

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, Dual):
            return ops.exp(n * ops.log(self))
        if n == 0:
            return Dual(1.0, {}, None if self.hess is None else {})
        if n == 1:
            return self
        if n == 2:
            return self._mul_dual(self)
        v = self.value
        if isinstance(n, int) and n > 2:
            vn2 = v ** (n - 2)
            vn1 = vn2 * v
            return self._chain(vn1 * v, n * vn1, (n * (n - 1)) * vn2)
        return self._chain(v**n, n * v ** (n - 1), n * (n - 1) * v ** (n - 2))

    def __rpow__(self, base):
        return ops.exp(self * ops.log(base))

    def __abs__(self):
        s = ops.sign(self.value)
        return self._chain(abs(self.value), s, 0.0)

    # comparisons act on values so eager user code may branch on them
    def __lt__(self, other):
        return self.value < _val(other)

    def __le__(self, other):
        return self.value <= _val(other)

    def __gt__(self, other):
        return self.value > _val(other)

    def __ge__(self, other):
        return self.value >= _val(other)

    # -- elementary functions -------------------------------------------------
    def _sin(self):
        s, c = ops.sin(self.value), ops.cos(self.value)
        return self._chain(s, c, -s)

    def _cos(self):
        s, c = ops.sin(self.value), ops.cos(self.value)
        return self._chain(c, -s, -c)

    def _exp(self):
        e = ops.exp(self.value)
        return self._chain(e, e, e)

    def _log(self):
        v = self.value
        r = 1.0 / v
        return self._chain(ops.log(v), r, -(r * r))

    def _sqrt(self):
        s = ops.sqrt(self.value)
        d1 = 0.5 / s
        return self._chain(s, d1, -0.5 * d1 / self.value)

    def _tanh(self):
        th = ops.tanh(self.value)
        d1 = 1.0 - th * th
        return self._chain(th, d1, -2.0 * th * d1)

    def _heaviside(self):
        return self._chain(ops.heaviside(self.value), 0.0, 0.0)

    def _sign(self):
        return self._chain(ops.sign(self.value), 0.0, 0.0)


def _val(x):
    return x.value if isinstance(x, Dual) else x


def value_of(x) -> Any:
    """Value part of a dual, or the argument itself for plain scalars."""
    return x.value if isinstance(x, Dual) else x


def grad_of(x, i: int):
    return x.grad.get(i, 0.0) if isinstance(x, Dual) else 0.0


def hess_of(x, i: int, j: int):
    if not isinstance(x, Dual) or x.hess is None:
        return 0.0
    key = (i, j) if i <= j else (j, i)
    return x.hess.get(key, 0.0)
