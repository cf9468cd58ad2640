"""Energy, momenta and Noether currents with their nonconservative rate laws.

For a system (L, K) the conservative energy function E = v.dL/dv - L is no
longer conserved. Shifting it by the nonconservative momentum
kappa = [dK/dv-]_PL gives calE = E + v.kappa, whose rate is

    d calE/dt = -dL/dt + v.[dK/dq-]_PL + a.kappa.

Likewise a coordinate symmetry omega of L gives J = omega.p and
calJ = J + omega.kappa with d calJ/dt = omega.[dK/dq-]_PL + omega_dot.kappa.
This module evaluates those quantities at single states and checks the rate
laws along integrated trajectories by numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import Dual
from .errors import (
    DimensionMismatch,
    InvalidParams,
    MissingAcceleration,
    NonpositiveTemperature,
    TooFewSamples,
)
from .mechanics.system import NonconsSystem, Trajectory


# -- data types -----------------------------------------------------------------


@dataclass(frozen=True)
class PhysicalState:
    """A physical-limit state with whatever derivatives are known."""

    t: float
    q: tuple
    v: tuple
    a: tuple | None = None
    aux: tuple = ()
    memory_force: float | None = None
    jerk: tuple | None = None
    aux_rate: tuple | None = None

    def __post_init__(self):
        for name in ("q", "v", "a", "jerk", "aux", "aux_rate"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(x) for x in np.atleast_1d(value)))


@dataclass(frozen=True)
class SymmetryGenerator:
    """Infinitesimal transformation delta q = eps * omega(t, q)."""

    label: str
    omega: Callable | None = None
    is_time_translation: bool = False
    dim: int | None = None

    def evaluate(self, t, q) -> tuple:
        if self.is_time_translation:
            raise InvalidParams("time translation has no coordinate generator", "generator")
        out = tuple(self.omega(t, tuple(q)))
        if len(out) != len(q):
            raise DimensionMismatch(f"generator {self.label!r} returned {len(out)} components for {len(q)} coordinates")
        return out

    def rate(self, t, q, v) -> tuple:
        """omega_dot = d omega/dq . v + d omega/dt along the motion."""
        n = len(q)
        qd = tuple(Dual(q[i], {i: 1.0}) for i in range(n))
        td = Dual(t, {n: 1.0})
        out = []
        for w in self.omega(td, qd):
            if isinstance(w, Dual):
                out.append(sum(w.grad.get(i, 0.0) * v[i] for i in range(n)) + w.grad.get(n, 0.0))
            else:
                out.append(0.0)
        return tuple(float(x) for x in out)


def time_translation() -> SymmetryGenerator:
    return SymmetryGenerator("time", None, is_time_translation=True)


def translation(axis: int, dim: int, label: str | None = None) -> SymmetryGenerator:
    """Rigid shift of coordinate ``axis``."""

    def omega(t, q):
        return tuple(1.0 if i == axis else 0.0 for i in range(len(q)))

    return SymmetryGenerator(label or f"P{axis}", omega, dim=dim)


def rotation(axis: int, offset: int = 0, label: str | None = None) -> SymmetryGenerator:
    """Rotation of the 3-vector q[offset:offset+3] about ``axis``.

    omega^i = -eps_ijk q^j with k = axis, e.g. (-y, x, 0) about z.
    """

    def omega(t, q):
        out = [0.0 * q[0]] * len(q)
        x = q[offset : offset + 3]
        for i in range(3):
            acc = 0.0
            for j in range(3):
                e = _levi_civita(i, j, axis)
                if e:
                    acc = acc - e * x[j]
            out[offset + i] = acc
        return tuple(out)

    return SymmetryGenerator(label or "L" + "xyz"[axis], omega)


def _levi_civita(i: int, j: int, k: int) -> int:
    return (i - j) * (j - k) * (k - i) // 2


@dataclass(frozen=True)
class ClosureHook:
    """Internal energy bookkeeping that closes an otherwise open system.

    ``internal_energy`` U(S) enters the Lagrangian as -U(S); the temperature
    is T(S) = dU/dS. ``external_power(t, q, v)`` is the power of forces from
    outside the closed system, so closure means d calE/dt = external power.
    ``dissipation(t, q, v, S)`` is the heating rate used by
    :func:`evolve_entropy` (lambda(S) ddot^2 for the Maxwell element).
    """

    internal_energy: Callable
    entropy0: float = 0.0
    coefficient_maps: dict = field(default_factory=dict)
    external_power: Callable | None = None
    dissipation: Callable | None = None

    def temperature(self, S: float) -> float:
        U = self.internal_energy(Dual(float(S), {0: 1.0}))
        return float(U.grad.get(0, 0.0)) if isinstance(U, Dual) else 0.0


@dataclass
class CurrentSeries:
    J: np.ndarray
    calJ: np.ndarray
    rate_formula: np.ndarray
    rate_numeric: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


@dataclass
class NoetherReport:
    """Per-sample Noether quantities and the rate-law residuals."""

    times: np.ndarray
    E: np.ndarray
    kappa: np.ndarray
    calE: np.ndarray
    rate_formula: np.ndarray
    rate_numeric: np.ndarray
    residual: np.ndarray
    currents: dict[str, CurrentSeries] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))

    @property
    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(self.residual**2)))

    def summary(self) -> dict:
        out = {
            "energy": {"max_residual": self.max_residual, "rms_residual": self.rms_residual},
            "currents": {},
        }
        for label, c in self.currents.items():
            out["currents"][label] = {
                "max_residual": c.max_residual,
                "rms_residual": float(np.sqrt(np.mean(c.residual**2))),
            }
        return out


# -- pointwise quantities ---------------------------------------------------------


def _vec(x, n, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (n,):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected ({n},)")
    return tuple(float(a) for a in arr)


def _aux(sys: NonconsSystem, s) -> tuple:
    if sys.aux_dim == 0:
        return ()
    if s is None or len(s) == 0:
        return (float(sys.closure.entropy0),)
    return tuple(float(x) for x in np.atleast_1d(s))


def energy_function(sys: NonconsSystem, t, q, v, s=None) -> float:
    """E = v . dL/dv - L."""
    N = sys.dim
    q, v = _vec(q, N, "q"), _vec(v, N, "v")
    lag = sys.engine.lagrangian_parts(t, q, v, _aux(sys, s))
    return float(sum(vi * p for vi, p in zip(v, lag["dv"])) - lag["L"])


def momentum(sys: NonconsSystem, t, q, v, s=None) -> np.ndarray:
    """Conservative canonical momentum p = dL/dv."""
    N = sys.dim
    lag = sys.engine.lagrangian_parts(t, _vec(q, N, "q"), _vec(v, N, "v"), _aux(sys, s))
    return np.array(lag["dv"], dtype=float)


def _k_parts(sys: NonconsSystem, t, q, v, s, a=None, jerk=None) -> tuple[np.ndarray, np.ndarray]:
    """([dK/dq-]_PL, kappa) using the appropriate derivative order."""
    eng = sys.engine
    N = sys.dim
    if sys.is_reduced:
        out = eng.kernel("ladder_diag")(t, *q, *v)
        return np.array(out[:N], dtype=float), np.array(out[N:], dtype=float)
    if sys.k_order == 2:
        if a is None:
            raise MissingAcceleration("kappa of an acceleration-dependent K needs the acceleration")
        _, kap, dq = eng.ladder_at(t, q, v, _vec(a, N, "a"), None if jerk is None else _vec(jerk, N, "jerk"))
        kap = np.array([float(x) for x in kap])
        if np.any(np.isnan(kap)):
            raise MissingAcceleration("kappa of this K needs the jerk as well")
        return np.array([float(x) for x in dq]), kap
    pot = eng.potential_parts(t, q, v, s)
    return np.array(pot["dq_minus"], dtype=float), np.array(pot["kappa"], dtype=float)


def kappa(sys: NonconsSystem, t, q, v, a=None, s=None, jerk=None) -> np.ndarray:
    """Nonconservative momentum kappa = [delta S_K / delta v-]_PL."""
    N = sys.dim
    return _k_parts(sys, t, _vec(q, N, "q"), _vec(v, N, "v"), _aux(sys, s), a, jerk)[1]


def _state_parts(sys: NonconsSystem, state: PhysicalState):
    N = sys.dim
    return state.t, _vec(state.q, N, "q"), _vec(state.v, N, "v"), _aux(sys, state.aux)


def total_energy(sys: NonconsSystem, state: PhysicalState) -> float:
    """calE = E + v . kappa."""
    t, q, v, s = _state_parts(sys, state)
    E = energy_function(sys, t, q, v, s)
    kap = _k_parts(sys, t, q, v, s, state.a, state.jerk)[1]
    return float(E + np.dot(v, kap))


def _acceleration(sys: NonconsSystem, state: PhysicalState) -> tuple:
    if state.a is not None:
        return _vec(state.a, sys.dim, "a")
    if sys.k_order == 2 and not sys.is_reduced:
        raise MissingAcceleration("energy rate of an acceleration-dependent K needs the acceleration")
    from .mechanics import state_rates

    return tuple(state_rates(sys, state.t, state.q, state.v, state.aux or None, state.memory_force).acceleration)


def _aux_rate(sys: NonconsSystem, state: PhysicalState, a) -> tuple:
    if not sys.aux_dim:
        return ()
    if state.aux_rate is not None:
        return state.aux_rate
    t, q, v, s = _state_parts(sys, state)
    part = sys.engine.partition
    aS = [a[i] for i in part.second_order]
    return tuple(sys.engine.closure_rate(t, q, v, s, aS))


def _memory_term(sys: NonconsSystem, state: PhysicalState, weights) -> float:
    if sys.memory is None:
        return 0.0
    if state.memory_force is None:
        raise InvalidParams("memory systems need the history force in the state", "memory_force")
    return float(weights[sys.memory.coordinate]) * state.memory_force


def energy_rate(sys: NonconsSystem, state: PhysicalState) -> float:
    """-dL/dt + v.[dK/dq-]_PL + a.kappa (+ v . history force for memory systems).

    For closure systems the time dependence of L through S counts as
    explicit, so -dL/dt includes -dL/dS * sdot.
    """
    t, q, v, s = _state_parts(sys, state)
    a = _acceleration(sys, state)
    dq, kap = _k_parts(sys, t, q, v, s, a, state.jerk)
    lag = sys.engine.lagrangian_parts(t, q, v, s)
    dLdt = lag["dt"]
    if sys.aux_dim:
        sdot = _aux_rate(sys, state, a)
        dLdt += sum(d * r for d, r in zip(lag["ds"], sdot))
    rate = -dLdt + float(np.dot(v, dq)) + float(np.dot(a, kap))
    return rate + _memory_term(sys, state, v)


def _check_generator(sys: NonconsSystem, gen: SymmetryGenerator):
    if gen.dim is not None and gen.dim != sys.dim:
        raise DimensionMismatch(f"generator {gen.label!r} is for dimension {gen.dim}, system has {sys.dim}")


def noether_current(sys: NonconsSystem, gen: SymmetryGenerator, state: PhysicalState) -> tuple[float, float]:
    """(J, calJ) with J = omega.p and calJ = J + omega.kappa.

    For the time-translation generator this is (E, calE).
    """
    _check_generator(sys, gen)
    t, q, v, s = _state_parts(sys, state)
    if gen.is_time_translation:
        return energy_function(sys, t, q, v, s), total_energy(sys, state)
    w = np.array(gen.evaluate(t, q), dtype=float)
    p = momentum(sys, t, q, v, s)
    kap = _k_parts(sys, t, q, v, s, state.a, state.jerk)[1]
    J = float(np.dot(w, p))
    return J, J + float(np.dot(w, kap))


def current_rate(sys: NonconsSystem, gen: SymmetryGenerator, state: PhysicalState) -> float:
    """omega.[dK/dq-]_PL + omega_dot.kappa (+ history force term)."""
    _check_generator(sys, gen)
    if gen.is_time_translation:
        return energy_rate(sys, state)
    t, q, v, s = _state_parts(sys, state)
    a = state.a
    if sys.k_order == 2 and not sys.is_reduced and a is None:
        raise MissingAcceleration("current rate of an acceleration-dependent K needs the acceleration")
    dq, kap = _k_parts(sys, t, q, v, s, a, state.jerk)
    w = np.array(gen.evaluate(t, q), dtype=float)
    wdot = np.array(gen.rate(t, q, v), dtype=float)
    return float(np.dot(w, dq) + np.dot(wdot, kap)) + _memory_term(sys, state, w)


def evolve_entropy(closure: ClosureHook, state: PhysicalState) -> float:
    """Entropy production rate sdot = dissipated power / T(S)."""
    if closure.dissipation is None:
        raise InvalidParams("closure hook has no dissipation function", "dissipation")
    S = state.aux[0] if state.aux else closure.entropy0
    T = closure.temperature(S)
    if not T > 0.0:
        raise NonpositiveTemperature(f"temperature {T!r} at S = {S!r} is not positive")
    return float(closure.dissipation(state.t, state.q, state.v, S)) / T


# -- trajectory diagnostics -------------------------------------------------------


def numeric_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative of uniformly sampled data.

    Central five-point stencil inside, one-sided fourth-order stencils at the
    two samples nearest each end.
    """
    f = np.asarray(f, dtype=float)
    n = len(f)
    if n < 5:
        raise TooFewSamples(f"need at least 5 samples, got {n}")
    d = np.empty(n)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return d


def balance_residual(traj: Trajectory, sys: NonconsSystem, generators: Sequence[SymmetryGenerator] | None = None) -> NoetherReport:
    """Compare numerically differentiated calE, calJ with their formula rates."""
    n = len(traj)
    if n < 5:
        raise TooFewSamples(f"need at least 5 samples, got {n}")
    if not traj.uniform:
        raise InvalidParams("balance_residual needs a uniformly sampled trajectory", "trajectory")
    h = float(traj.times[1] - traj.times[0])
    gens = [g for g in (sys.generators if generators is None else generators) if not g.is_time_translation]
    N = sys.dim
    E = np.empty(n)
    calE = np.empty(n)
    rate = np.empty(n)
    kap = np.empty((n, N))
    Js = {g.label: np.empty(n) for g in gens}
    calJs = {g.label: np.empty(n) for g in gens}
    Jrates = {g.label: np.empty(n) for g in gens}
    eng = sys.engine
    part = eng.partition
    for i in range(n):
        st = traj.state(i)
        t, q, v, s = _state_parts(sys, st)
        a = st.a
        dq, k = _k_parts(sys, t, q, v, s, a)
        lag = eng.lagrangian_parts(t, q, v, s)
        Ei = sum(vi * p for vi, p in zip(v, lag["dv"])) - lag["L"]
        dLdt = lag["dt"]
        if sys.aux_dim:
            sdot = eng.closure_rate(t, q, v, s, [a[j] for j in part.second_order])
            dLdt += sum(d * r for d, r in zip(lag["ds"], sdot))
        E[i] = Ei
        kap[i] = k
        calE[i] = Ei + float(np.dot(v, k))
        rate[i] = -dLdt + float(np.dot(v, dq)) + float(np.dot(a, k)) + _memory_term(sys, st, v)
        for g in gens:
            w = np.array(g.evaluate(t, q))
            wdot = np.array(g.rate(t, q, v))
            J = float(np.dot(w, lag["dv"]))
            Js[g.label][i] = J
            calJs[g.label][i] = J + float(np.dot(w, k))
            Jrates[g.label][i] = float(np.dot(w, dq) + np.dot(wdot, k)) + _memory_term(sys, st, w)
    numeric = numeric_derivative(calE, h)
    currents = {}
    for g in gens:
        num = numeric_derivative(calJs[g.label], h)
        currents[g.label] = CurrentSeries(
            Js[g.label], calJs[g.label], Jrates[g.label], num, np.abs(num - Jrates[g.label])
        )
    report = NoetherReport(
        times=np.asarray(traj.times),
        E=E,
        kappa=kap,
        calE=calE,
        rate_formula=rate,
        rate_numeric=numeric,
        residual=np.abs(numeric - rate),
        currents=currents,
    )
    traj.diagnostics = report
    return report


def external_work(traj: Trajectory, sys: NonconsSystem) -> np.ndarray:
    """Cumulative work of the closure's external power, int_0^t P_ext dt'.

    Integrated with the fourth-order accurate trapezoid rule with endpoint
    derivative corrections (the derivative of P_ext is taken numerically).
    """
    if sys.closure is None or sys.closure.external_power is None:
        return np.zeros(len(traj))
    P = np.array([
        float(sys.closure.external_power(float(t), tuple(q), tuple(v)))
        for t, q, v in zip(traj.times, traj.q, traj.v)
    ])
    return cumulative_integral(P, traj.times)


def cumulative_integral(f: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Running integral of sampled data, fourth-order on uniform grids.

    Each interval uses the trapezoid rule plus the Euler-Maclaurin end
    correction -(h^2/12)(f'(b) - f'(a)), with f' from
    :func:`numeric_derivative`.
    """
    f = np.asarray(f, dtype=float)
    times = np.asarray(times, dtype=float)
    out = np.zeros(len(f))
    if len(f) < 2:
        return out
    h = np.diff(times)
    steps = 0.5 * h * (f[1:] + f[:-1])
    if len(f) >= 5 and np.allclose(h, h[0], rtol=1e-9, atol=1e-14):
        df = numeric_derivative(f, float(h[0]))
        steps = steps - (h**2 / 12.0) * (df[1:] - df[:-1])
    out[1:] = np.cumsum(steps)
    return out


def closure_drift(traj: Trajectory, sys: NonconsSystem) -> np.ndarray:
    """calE(t) - int_0^t P_ext dt' minus its initial value (zero under closure)."""
    report = traj.diagnostics or balance_residual(traj, sys)
    series = report.calE - external_work(traj, sys)
    return series - series[0]
