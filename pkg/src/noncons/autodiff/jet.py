"""Truncated Taylor series in a single variable (time).

``Jet([c0, c1, ..., cd])`` represents c0 + c1 s + ... + cd s^d. Arithmetic
truncates to the lower of the two degrees. Jets carry a ``tag`` so nested
expansions (a jet whose coefficients are themselves jets) stay separate: a
jet with a larger tag treats one with a smaller tag as a scalar coefficient.
Fresh tags increase monotonically, so an expansion built inside another one
always wraps it.
"""

from __future__ import annotations

import itertools
import math

from . import ops

_tags = itertools.count(1)


def new_tag() -> int:
    return next(_tags)


def _nz(x) -> bool:
    return not (type(x) is float and x == 0.0)


class Jet:
    __slots__ = ("c", "tag")
    __array_ufunc__ = None

    def __init__(self, coeffs, tag: int):
        self.c = list(coeffs)
        self.tag = tag

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    @property
    def primal(self):
        return self.c[0]

    def coeff(self, k: int):
        return self.c[k] if k < len(self.c) else 0.0

    def derivative(self, k: int):
        """k-th derivative at the expansion point."""
        return math.factorial(k) * self.coeff(k)

    def __repr__(self) -> str:
        return f"Jet({self.c!r}, tag={self.tag})"

    # -- classification of the other operand ----------------------------------
    def _kind(self, other) -> str:
        """'jet' (same expansion), 'scalar', or 'defer' (other wraps self)."""
        if isinstance(other, Jet):
            if other.tag == self.tag:
                return "jet"
            return "scalar" if other.tag < self.tag else "defer"
        if hasattr(other, "grad"):  # dual numbers always wrap jets
            return "defer"
        return "scalar"

    def _like(self, coeffs) -> "Jet":
        return Jet(coeffs, self.tag)

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        kind = self._kind(other)
        if kind == "defer":
            return NotImplemented
        if kind == "scalar":
            return self._like([self.c[0] + other] + self.c[1:])
        n = min(len(self.c), len(other.c))
        return self._like([a + b for a, b in zip(self.c[:n], other.c[:n])])

    __radd__ = __add__

    def __neg__(self):
        return self._like([-a for a in self.c])

    def __pos__(self):
        return self

    def __sub__(self, other):
        kind = self._kind(other)
        if kind == "defer":
            return NotImplemented
        if kind == "scalar":
            return self._like([self.c[0] - other] + self.c[1:])
        n = min(len(self.c), len(other.c))
        return self._like([a - b for a, b in zip(self.c[:n], other.c[:n])])

    def __rsub__(self, other):
        kind = self._kind(other)
        if kind == "defer":
            return NotImplemented
        return self._like([other - self.c[0]] + [-a for a in self.c[1:]])

    def __mul__(self, other):
        kind = self._kind(other)
        if kind == "defer":
            return NotImplemented
        if kind == "scalar":
            return self._like([a * other for a in self.c])
        a, b = self.c, other.c
        n = min(len(a), len(b))
        out = []
        for k in range(n):
            acc = 0.0
            for i in range(k + 1):
                if _nz(a[i]) and _nz(b[k - i]):
                    acc = acc + a[i] * b[k - i]
            out.append(acc)
        return self._like(out)

    __rmul__ = __mul__

    def _divide(self, num: list, den: list) -> "Jet":
        n = min(len(num), len(den))
        out = []
        b0 = den[0]
        for k in range(n):
            acc = num[k]
            for j in range(1, k + 1):
                if _nz(den[j]) and _nz(out[k - j]):
                    acc = acc - den[j] * out[k - j]
            out.append(acc / b0)
        return self._like(out)

    def __truediv__(self, other):
        kind = self._kind(other)
        if kind == "defer":
            return NotImplemented
        if kind == "scalar":
            return self._like([a / other for a in self.c])
        return self._divide(self.c, other.c)

    def __rtruediv__(self, other):
        kind = self._kind(other)
        if kind == "defer":
            return NotImplemented
        num = [other] + [0.0] * (len(self.c) - 1)
        return self._divide(num, self.c)

    def __pow__(self, n):
        if hasattr(n, "grad"):
            return NotImplemented
        if isinstance(n, Jet):
            return ops.exp(n * ops.log(self))
        if n == 0:
            return self._like([1.0] + [0.0] * (len(self.c) - 1))
        if isinstance(n, int) or float(n).is_integer():
            n = int(n)
            base = self if n > 0 else 1.0 / self
            result = None
            p = base
            m = abs(n)
            while m:
                if m & 1:
                    result = p if result is None else result * p
                m >>= 1
                if m:
                    p = p * p
            return result
        return ops.exp(ops.log(self) * n)

    def __rpow__(self, base):
        return ops.exp(self * ops.log(base))

    def __abs__(self):
        return self * ops.sign(self.c[0])

    def __lt__(self, other):
        return self.c[0] < _primal(other)

    def __le__(self, other):
        return self.c[0] <= _primal(other)

    def __gt__(self, other):
        return self.c[0] > _primal(other)

    def __ge__(self, other):
        return self.c[0] >= _primal(other)

    # -- elementary functions via the usual ODE recurrences -------------------
    def _exp(self):
        a = self.c
        e = [ops.exp(a[0])]
        for k in range(1, len(a)):
            acc = 0.0
            for j in range(1, k + 1):
                if _nz(a[j]):
                    acc = acc + (j * a[j]) * e[k - j]
            e.append(acc / k)
        return self._like(e)

    def _log(self):
        a = self.c
        out = [ops.log(a[0])]
        for k in range(1, len(a)):
            acc = a[k]
            for j in range(1, k):
                if _nz(a[k - j]) and _nz(out[j]):
                    acc = acc - (j * out[j] * a[k - j]) / k
            out.append(acc / a[0])
        return self._like(out)

    def _sincos(self):
        a = self.c
        s, c = [ops.sin(a[0])], [ops.cos(a[0])]
        for k in range(1, len(a)):
            sk, ck = 0.0, 0.0
            for j in range(1, k + 1):
                if _nz(a[j]):
                    ja = j * a[j]
                    sk = sk + ja * c[k - j]
                    ck = ck - ja * s[k - j]
            s.append(sk / k)
            c.append(ck / k)
        return self._like(s), self._like(c)

    def _sin(self):
        return self._sincos()[0]

    def _cos(self):
        return self._sincos()[1]

    def _sqrt(self):
        a = self.c
        r = [ops.sqrt(a[0])]
        for k in range(1, len(a)):
            acc = a[k]
            for j in range(1, k):
                if _nz(r[j]) and _nz(r[k - j]):
                    acc = acc - r[j] * r[k - j]
            r.append(acc / (2.0 * r[0]))
        return self._like(r)

    def _tanh(self):
        e2 = ops.exp(2.0 * self)
        return (e2 - 1.0) / (e2 + 1.0)

    def _heaviside(self):
        return self._like([ops.heaviside(self.c[0])] + [0.0] * (len(self.c) - 1))

    def _sign(self):
        return self._like([ops.sign(self.c[0])] + [0.0] * (len(self.c) - 1))


def _primal(x):
    return ops.primal(x)


def coeff(x, k: int, tag: int | None = None):
    """Taylor coefficient k of ``x`` in the expansion with the given tag.

    Anything that is not a jet of that expansion is constant in it.
    """
    if isinstance(x, Jet) and (tag is None or x.tag == tag):
        return x.coeff(k)
    return x if k == 0 else 0.0


def variable(t0, degree: int, tag: int) -> Jet:
    """The jet of the expansion variable itself, t0 + s."""
    return Jet([t0, 1.0] + [0.0] * (degree - 1), tag) if degree >= 1 else Jet([t0], tag)
