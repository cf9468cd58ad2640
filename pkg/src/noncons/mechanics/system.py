"""System, memory-kernel and trajectory containers."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable, Sequence

import numpy as np

from ..autodiff import DoubledPoint
from ..errors import InvalidParams

if TYPE_CHECKING:
    from ..noether import ClosureHook, NoetherReport, SymmetryGenerator
    from .engine import Engine


@dataclass(frozen=True)
class MemoryKernel:
    """A causal history force acting on one coordinate.

    The force is ``homogeneous_drive(t) + coupling * int_{t0}^{t} kernel(t, s) q(s) ds``.
    Supplying ``lag`` (a function of t - s) marks the kernel as stationary,
    which lets the integrator tabulate it once instead of per step.
    """

    kernel: Callable[[float, float], float]
    homogeneous_drive: Callable[[float], float] | None = None
    coupling: float = 1.0
    quadrature: str = "trapezoid"
    lag: Callable[[float], float] | None = None
    coordinate: int = 0

    def __post_init__(self):
        if self.quadrature != "trapezoid":
            raise InvalidParams(f"unsupported quadrature {self.quadrature!r}", "quadrature")

    def drive(self, t: float) -> float:
        return 0.0 if self.homogeneous_drive is None else float(self.homogeneous_drive(t))

    def is_causal(self, samples: Sequence[tuple[float, float]]) -> bool:
        """Check kernel(t, s) == 0 whenever s > t on the given sample pairs."""
        return all(self.kernel(t, s) == 0.0 for t, s in samples if s > t)


@dataclass(frozen=True, eq=False)
class NonconsSystem:
    """A conservative Lagrangian ``L`` plus a nonconservative potential ``K``.

    ``L(t, q, v)`` receives tuples of scalars (``L(t, q, v, s)`` when the
    system carries an entropy-like state through ``closure``). ``K(p)``
    receives a :class:`~noncons.autodiff.DoubledPoint`. Both must be written
    with :mod:`noncons.autodiff.ops` so they can be differentiated.
    """

    dim: int
    L: Callable
    K: Callable[[DoubledPoint], Any] | None = None
    k_order: int = 1
    memory: MemoryKernel | None = None
    time_dependent: bool = False
    closure: "ClosureHook | None" = None
    generators: tuple = ()
    name: str = ""
    coordinate_names: tuple[str, ...] = ()
    reduction_iterations: int = 0
    parent: "NonconsSystem | None" = None

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise InvalidParams(f"dimension must be a positive integer, got {self.dim!r}", "dim")
        if self.k_order not in (1, 2):
            raise InvalidParams(f"k_order must be 1 or 2, got {self.k_order!r}", "k_order")
        if self.coordinate_names and len(self.coordinate_names) != self.dim:
            raise InvalidParams("coordinate_names length must equal dim", "coordinate_names")
        object.__setattr__(self, "generators", tuple(self.generators))

    @property
    def aux_dim(self) -> int:
        return 0 if self.closure is None else 1

    @property
    def is_reduced(self) -> bool:
        return self.parent is not None

    @property
    def source(self) -> "NonconsSystem":
        """The system whose K defines the nonconservative physics."""
        return self.parent if self.parent is not None else self

    @property
    def labels(self) -> tuple[str, ...]:
        return self.coordinate_names or tuple(str(i) for i in range(self.dim))

    def lagrangian(self, t, q, v, s=()):
        if self.aux_dim:
            return self.L(t, q, v, tuple(s))
        return self.L(t, q, v)

    def potential(self, p: DoubledPoint):
        return 0.0 if self.K is None else self.K(p)

    def doubled_lagrangian(self, p: DoubledPoint):
        """Lambda = L(history 1) - L(history 2) + K."""
        h = p.to_12()
        return (
            self.lagrangian(p.t, h["q1"], h["v1"], p.aux)
            - self.lagrangian(p.t, h["q2"], h["v2"], p.aux)
            + self.potential(p)
        )

    @cached_property
    def engine(self) -> "Engine":
        from .engine import Engine

        return Engine(self)


@dataclass
class Trajectory:
    """Time-ordered physical states of an integrated system.

    ``a`` holds accelerations at each sample (first-order coordinates get
    theirs by differencing the solved velocities). ``memory_force`` is the
    history force at each sample for memory systems.
    """

    times: np.ndarray
    q: np.ndarray
    v: np.ndarray
    a: np.ndarray
    aux: np.ndarray | None = None
    memory_force: np.ndarray | None = None
    system_name: str = ""
    method: str = "rk4"
    dt: float | None = None
    diagnostics: "NoetherReport | None" = None

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def uniform(self) -> bool:
        if len(self.times) < 2:
            return True
        steps = np.diff(self.times)
        return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=1e-14))

    def state(self, i: int):
        from ..noether import PhysicalState

        return PhysicalState(
            t=float(self.times[i]),
            q=tuple(self.q[i]),
            v=tuple(self.v[i]),
            a=tuple(self.a[i]),
            aux=() if self.aux is None else tuple(self.aux[i]),
            memory_force=None if self.memory_force is None else float(self.memory_force[i]),
        )


