"""Points in doubled phase space and derivative evaluation on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence, Union

import numpy as np

from ..errors import NonFiniteEvaluation
from .dual import Dual
from .trace import Tracer, TraceError, first_nonfinite

COMPONENTS = ("q_plus", "q_minus", "v_plus", "v_minus", "a_plus", "a_minus")

Direction = Union[str, tuple]


def _tup(x) -> tuple:
    if x is None:
        return None
    return tuple(x)


@dataclass(frozen=True)
class DoubledPoint:
    """A point (t, q+, q-, v+, v-[, a+, a-]) in the +/- basis.

    ``q_plus`` is the average of the two histories and ``q_minus`` their
    difference. ``aux`` holds extra physical state (an entropy, say) that is
    not doubled.
    """

    t: Any
    q_plus: tuple
    q_minus: tuple
    v_plus: tuple
    v_minus: tuple
    a_plus: tuple | None = None
    a_minus: tuple | None = None
    aux: tuple = ()

    def __post_init__(self):
        for name in COMPONENTS:
            object.__setattr__(self, name, _tup(getattr(self, name)))
        object.__setattr__(self, "aux", tuple(self.aux))
        n = len(self.q_plus)
        for name in COMPONENTS:
            value = getattr(self, name)
            if value is not None and len(value) != n:
                raise ValueError(f"{name} has length {len(value)}, expected {n}")
        if (self.a_plus is None) != (self.a_minus is None):
            raise ValueError("a_plus and a_minus must be given together")

    @property
    def dim(self) -> int:
        return len(self.q_plus)

    @classmethod
    def physical(cls, t, q, v, a=None, aux=()) -> "DoubledPoint":
        """The physical-limit point sitting on the physical state (q, v, a)."""
        zeros = (0.0,) * len(q)
        return cls(t, q, zeros, v, zeros, a, None if a is None else zeros, aux)

    def physical_limit(self) -> "DoubledPoint":
        zeros = (0.0,) * self.dim
        return replace(
            self,
            q_minus=zeros,
            v_minus=zeros,
            a_minus=None if self.a_minus is None else zeros,
        )

    # -- (1,2) views ----------------------------------------------------------
    @staticmethod
    def _split(plus, minus):
        if plus is None:
            return None, None
        return (
            tuple(p + 0.5 * m for p, m in zip(plus, minus)),
            tuple(p - 0.5 * m for p, m in zip(plus, minus)),
        )

    @property
    def q1(self) -> tuple:
        return self._split(self.q_plus, self.q_minus)[0]

    @property
    def q2(self) -> tuple:
        return self._split(self.q_plus, self.q_minus)[1]

    @property
    def v1(self) -> tuple:
        return self._split(self.v_plus, self.v_minus)[0]

    @property
    def v2(self) -> tuple:
        return self._split(self.v_plus, self.v_minus)[1]

    def to_12(self) -> dict:
        """Histories 1 and 2 as a dict of tuples (q1, q2, v1, v2, a1, a2)."""
        q1, q2 = self._split(self.q_plus, self.q_minus)
        v1, v2 = self._split(self.v_plus, self.v_minus)
        a1, a2 = self._split(self.a_plus, self.a_minus)
        return {"t": self.t, "q1": q1, "q2": q2, "v1": v1, "v2": v2, "a1": a1, "a2": a2, "aux": self.aux}

    @classmethod
    def from_12(cls, t, q1, q2, v1, v2, a1=None, a2=None, aux=()) -> "DoubledPoint":
        def join(x1, x2):
            if x1 is None:
                return None, None
            return (
                tuple(0.5 * (a + b) for a, b in zip(x1, x2)),
                tuple(a - b for a, b in zip(x1, x2)),
            )

        qp, qm = join(q1, q2)
        vp, vm = join(v1, v2)
        ap, am = join(a1, a2)
        return cls(t, qp, qm, vp, vm, ap, am, aux)

    # -- direction addressing -------------------------------------------------
    def get(self, direction: Direction):
        name, index = parse_direction(direction)
        if name == "t":
            return self.t
        values = getattr(self, name)
        if values is None:
            raise ValueError(f"{name} is not present on this point")
        return values[index]

    def with_values(self, updates: dict) -> "DoubledPoint":
        """Copy with some components replaced; keys are parsed directions."""
        fields = {name: list(getattr(self, name)) if getattr(self, name) is not None else None for name in COMPONENTS}
        fields["aux"] = list(self.aux)
        t = self.t
        for (name, index), value in updates.items():
            if name == "t":
                t = value
            else:
                fields[name][index] = value
        return DoubledPoint(t=t, **{k: v for k, v in fields.items()})


def parse_direction(direction: Direction) -> tuple[str, int]:
    """Normalize ``"t"``, ``"v_minus[1]"`` or ``("v_minus", 1)``."""
    if isinstance(direction, tuple):
        name, index = direction
    elif direction == "t":
        name, index = "t", 0
    else:
        head, _, rest = direction.partition("[")
        name, index = head, int(rest.rstrip("]") or 0)
    if name != "t" and name not in COMPONENTS and name != "aux":
        raise ValueError(f"unknown direction {direction!r}")
    return name, int(index)


def history_metric(basis: str = "pm") -> np.ndarray:
    """The metric c_ab on history labels: diag(1, -1) for (1,2), off-diagonal for (+,-)."""
    if basis == "12":
        return np.array([[1.0, 0.0], [0.0, -1.0]])
    if basis == "pm":
        return np.array([[0.0, 1.0], [1.0, 0.0]])
    raise ValueError(f"unknown basis {basis!r}")


@dataclass(frozen=True)
class ScalarField:
    """A scalar function of a :class:`DoubledPoint` with arity metadata."""

    fn: Callable[[DoubledPoint], Any]
    order: int = 1
    time_dependent: bool = False
    name: str = ""

    def __call__(self, p: DoubledPoint):
        return self.fn(p)


DualScalar = Dual


def _seeded(p: DoubledPoint, dirs: Sequence[tuple], second: bool, values=None) -> DoubledPoint:
    updates = {}
    for k, d in enumerate(dirs):
        base = p.get(d) if values is None else values[k]
        updates[d] = Dual(base, {k: 1.0}, {} if second else None)
    return p.with_values(updates)


def _as_dual(x, second: bool) -> Dual:
    if isinstance(x, Dual):
        return x
    return Dual(x, {}, {} if second else None)


def _locate_nonfinite(f, p: DoubledPoint, dirs: list, second: bool) -> int | None:
    """Index of the first non-finite intermediate, found by tracing."""
    try:
        tracer = Tracer()
        base_dirs = list(dirs)
        # trace every float component so the replay sees the full expression
        all_dirs = [("t", 0)] + [
            (name, i) for name in COMPONENTS if getattr(p, name) is not None for i in range(p.dim)
        ] + [("aux", i) for i in range(len(p.aux))]
        inputs = [tracer.input() for _ in all_dirs]
        values = [float(p.get(d)) for d in all_dirs]
        node_p = p.with_values(dict(zip(all_dirs, inputs)))
        seeded = _seeded(node_p, base_dirs, second, values=[node_p.get(d) for d in base_dirs])
        f(seeded)
        return first_nonfinite(inputs, values)
    except (TraceError, TypeError, ValueError):
        return None


def _check_finite(out: Dual, f, p, dirs, second):
    parts = [out.value, *out.grad.values()]
    if out.hess:
        parts.extend(out.hess.values())
    if all(math.isfinite(float(np.max(np.abs(x)))) for x in parts):
        return
    index = _locate_nonfinite(f, p, dirs, second)
    raise NonFiniteEvaluation(
        f"non-finite value while evaluating {getattr(f, 'name', '') or 'function'}"
        + (f" (sub-expression #{index})" if index is not None else ""),
        index=index,
    )


def eval_with_gradients(f: Callable, p: DoubledPoint, seeds: Iterable[Direction], second: bool = False) -> Dual:
    """Evaluate ``f`` at ``p`` with exact partials along the seeded components.

    The returned dual's gradient is keyed by the position of each direction
    in ``seeds``.
    """
    dirs = [parse_direction(d) for d in seeds]
    if len(set(dirs)) != len(dirs):
        raise ValueError("seed directions must be distinct")
    try:
        out = _as_dual(f(_seeded(p, dirs, second)), second)
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        index = _locate_nonfinite(f, p, dirs, second)
        raise NonFiniteEvaluation(f"evaluation failed: {exc}", index=index) from exc
    _check_finite(out, f, p, dirs, second)
    return out


def hessian_block(f: Callable, p: DoubledPoint, rows: Sequence[Direction], cols: Sequence[Direction]) -> np.ndarray:
    """Matrix of second partials d2f / d(rows_r) d(cols_c)."""
    row_dirs = [parse_direction(d) for d in rows]
    col_dirs = [parse_direction(d) for d in cols]
    dirs = list(dict.fromkeys(row_dirs + col_dirs))
    out = eval_with_gradients(f, p, dirs, second=True)
    pos = {d: k for k, d in enumerate(dirs)}
    block = np.empty((len(row_dirs), len(col_dirs)))
    for r, dr in enumerate(row_dirs):
        for c, dc in enumerate(col_dirs):
            block[r, c] = float(out.d2(pos[dr], pos[dc]))
    return block
