"""Explicit Runge-Kutta integration of the physical equations of motion.

The integrator state is ``(q, v_S, s)``: all coordinates, velocities of the
inertial coordinates only (massless ones have their velocity solved inside
every stage), and any closure state such as an entropy.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidParams, NonFiniteState, StepRejectionLimit
from .system import MemoryKernel, NonconsSystem, Trajectory

# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _axpy(y, h, k):
    return [a + h * b for a, b in zip(y, k)]


def _combo(y, h, coeffs, ks):
    out = list(y)
    for c, k in zip(coeffs, ks):
        if c != 0.0:
            hc = h * c
            out = [a + hc * b for a, b in zip(out, k)]
    return out


def _check_finite(y, step: int, t: float, labels):
    if not all(math.isfinite(x) for x in y):
        raise NonFiniteState(
            f"non-finite state at step {step}, t = {t!r}",
            {"step": step, "t": t, "state": dict(zip(labels, [float(x) for x in y]))},
        )


def rk4_step(f: Callable, t: float, y: list, h: float, k1: list | None = None) -> list:
    """One classical RK4 step; ``k1`` may be supplied to reuse f(t, y)."""
    k1 = f(t, y) if k1 is None else k1
    k2 = f(t + 0.5 * h, _axpy(y, 0.5 * h, k1))
    k3 = f(t + 0.5 * h, _axpy(y, 0.5 * h, k2))
    k4 = f(t + h, _axpy(y, h, k3))
    h6 = h / 6.0
    return [a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]


class MemoryHistory:
    """Stored past of the memory coordinate and the trapezoid history force.

    For a step starting at grid point n the force at t = t_n + h is

        drive(t) + coupling * [trapezoid over t_0..t_n + P(h)]

    where P covers the partial panel [t_n, t]. At grid points P is the plain
    trapezoid panel. Between them P integrates the quadratic through the
    integrand at t_{n-1}, t_n, t and adds the matching trapezoid error term
    (dt^2/12)(f'(t) - f'(t_n)), so the composite error stays smooth in t.
    A bare half-panel trapezoid would leave an O(dt^3) sawtooth in the stage
    forces and cap the energy balance at third order.
    """

    def __init__(self, mk: MemoryKernel, t0: float, dt: float, n_steps: int, q0: float):
        self.mk = mk
        self.t0, self.dt = t0, dt
        self.q = np.empty(n_steps + 1)
        self.q[0] = q0
        self.n = 0
        self.tables: dict[float, np.ndarray] = {}
        if mk.lag is not None:
            lags = np.arange(n_steps + 2, dtype=float)
            for c in (0.0, 0.5, 1.0):
                self.tables[c] = np.array([mk.lag((m + c) * dt) for m in lags])
            self.g_zero = float(mk.lag(0.0))

    def _grid_kernel(self, t: float, n: int, c: float) -> np.ndarray:
        """G(t, t_{n-m}) for m = 0..n."""
        table = self.tables.get(c)
        if table is not None:
            return table[: n + 1]
        times = self.t0 + (n - np.arange(n + 1)) * self.dt
        return np.array([self.mk.kernel(t, s) for s in times])

    def force(self, t: float, q_now: float) -> float:
        n = self.n
        h = t - (self.t0 + n * self.dt)
        c = round(h / self.dt * 2.0) / 2.0
        if abs(h - c * self.dt) > 1e-9 * self.dt:
            c = -1.0  # off the tabulated stage fractions
        g = self._grid_kernel(t, n, c)
        hist = self.q[n::-1] if n > 0 else self.q[:1]
        total = 0.0
        if n >= 1:
            total = float(np.dot(g, hist)) - 0.5 * (g[0] * self.q[n] + g[n] * self.q[0])
            total *= self.dt
        g_same = self.g_zero if self.tables else self.mk.kernel(t, t)
        f0, fh = g[0] * self.q[n], g_same * q_now
        d = self.dt
        if n == 0 or h <= 1e-12 * d or abs(h - d) <= 1e-12 * d:
            total += 0.5 * h * (f0 + fh)
        else:
            fm = g[1] * self.q[n - 1]
            # quadratic a s^2 + b s + f0 through s = -d, 0, h
            curv = ((fh - f0) / h + (fm - f0) / d) / (h + d)
            wm = -(h**3) / (6.0 * d * (d + h))
            w0 = h * (3.0 * d + h) / (6.0 * d)
            wh = h * (3.0 * d + 2.0 * h) / (6.0 * (d + h))
            total += wm * fm + w0 * f0 + wh * fh + d * d * curv * h / 6.0
        return self.mk.drive(t) + self.mk.coupling * total

    def push(self, q_new: float):
        self.n += 1
        self.q[self.n] = q_new


def history_forces(mk: MemoryKernel, times: np.ndarray, qm: np.ndarray) -> np.ndarray:
    """Trapezoid history force at every sample of a uniform series."""
    n_total = len(times)
    dt = float(times[1] - times[0]) if n_total > 1 else 1.0
    hist = MemoryHistory(mk, float(times[0]), dt, n_total, float(qm[0]))
    out = np.empty(n_total)
    for n in range(n_total):
        if n:
            hist.push(float(qm[n]))
        out[n] = hist.force(float(times[n]), float(qm[n]))
    return out


def _difference(series: np.ndarray, dt: float) -> np.ndarray:
    from ..noether import numeric_derivative

    return numeric_derivative(series, dt)


def _parse_span(t_span) -> tuple[float, float]:
    if isinstance(t_span, (int, float)):
        return 0.0, float(t_span)
    t0, t1 = t_span
    return float(t0), float(t1)


def integrate(
    sys: NonconsSystem,
    init: Sequence,
    t_span,
    dt: float,
    method: str = "rk4",
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_rejections: int = 50,
    max_steps: int = 10_000_000,
) -> Trajectory:
    """Integrate from ``init = (q0, v0)`` or ``(q0, v0, s0)`` over ``t_span``.

    ``rk4`` uses the fixed step ``dt`` (a shorter final step is taken when
    ``dt`` does not divide the span); ``rk45`` treats ``dt`` as the initial
    step of an adaptive Dormand-Prince integration.
    """
    if not dt > 0.0:
        raise InvalidParams(f"dt must be positive, got {dt!r}", "dt")
    if method not in ("rk4", "rk45"):
        raise InvalidParams(f"unknown method {method!r}", "method")
    t0, t1 = _parse_span(t_span)
    if t1 < t0:
        raise InvalidParams("t_span must be increasing", "t_span")
    eng = sys.engine
    N, A = sys.dim, sys.aux_dim
    q0 = [float(x) for x in np.atleast_1d(np.asarray(init[0], dtype=float))]
    v0 = [float(x) for x in np.atleast_1d(np.asarray(init[1], dtype=float))]
    if len(q0) != N or len(v0) != N:
        raise InvalidParams(f"initial state must have {N} coordinates", "init")
    if A:
        s0 = list(np.atleast_1d(init[2] if len(init) > 2 else sys.closure.entropy0).astype(float))
    else:
        s0 = []
    part = eng.partition
    S, F = part.second_order, part.first_order
    nS = len(S)
    y0 = q0 + [v0[i] for i in S] + s0
    labels = [f"q.{l}" for l in sys.labels] + [f"v.{sys.labels[i]}" for i in S] + [f"s.{k}" for k in range(A)]

    memory = sys.memory
    history: MemoryHistory | None = None
    span = t1 - t0
    if method == "rk4":
        n_steps = int(round(span / dt))
        exact = abs(n_steps * dt - span) <= 1e-9 * max(span, dt)
        if not exact:
            n_steps = int(math.floor(span / dt)) + 1
    if memory is not None:
        if method != "rk4":
            raise InvalidParams("memory systems need the fixed-step rk4 method", "method")
        if not exact:
            raise InvalidParams("memory systems need dt to divide the time span", "dt")
        history = MemoryHistory(memory, t0, dt, n_steps, q0[memory.coordinate])

    guess_box = [[v0[i] for i in F] or None]
    mem_coord = memory.coordinate if memory is not None else 0

    def f(t, y):
        q = y[:N]
        extra = None
        if history is not None:
            extra = [0.0] * N
            extra[mem_coord] = history.force(t, q[mem_coord])
        v, aS, sdot = eng.rates(t, q, y[N : N + nS], y[N + nS :], extra=extra, guess=guess_box[0])
        if F:
            guess_box[0] = [v[i] for i in F]
        return list(v) + list(aS) + list(sdot)

    times = [t0]
    ys = [y0]
    derivs = []

    if method == "rk4":
        y = y0
        for k in range(n_steps):
            t = t0 + k * dt
            h = dt if (k < n_steps - 1 or exact) else t1 - t
            k1 = f(t, y)
            derivs.append(k1)
            y = rk4_step(f, t, y, h, k1)
            t_new = t0 + (k + 1) * dt if (k < n_steps - 1 or exact) else t1
            _check_finite(y, k + 1, t_new, labels)
            if history is not None:
                history.push(y[mem_coord])
            times.append(t_new)
            ys.append(y)
        derivs.append(f(times[-1], ys[-1]))
    else:
        _dormand_prince(f, t0, t1, y0, dt, rtol, atol, max_rejections, max_steps, times, ys, derivs, labels)

    T = np.array(times)
    Y = np.array(ys, dtype=float).reshape(len(times), -1)
    D = np.array(derivs, dtype=float).reshape(len(times), -1)
    q_arr = Y[:, :N]
    v_arr = D[:, :N]
    a_arr = np.zeros((len(times), N))
    for k, i in enumerate(S):
        a_arr[:, i] = D[:, N + k]
    if F:
        uniform = len(T) >= 5 and np.allclose(np.diff(T), T[1] - T[0], rtol=1e-9, atol=1e-14)
        for i in F:
            if uniform:
                a_arr[:, i] = _difference(v_arr[:, i], float(T[1] - T[0]))
            else:
                for n in range(len(T)):
                    acc = eng.full_acceleration(float(T[n]), tuple(q_arr[n]), tuple(v_arr[n]), tuple(Y[n, N + nS :]), list(a_arr[n, list(S)]))
                    a_arr[n, i] = acc[i]
    aux = Y[:, N + nS :] if A else None
    mem = None
    if memory is not None:
        mem = history_forces(memory, T, q_arr[:, memory.coordinate])
    return Trajectory(
        times=T,
        q=q_arr,
        v=v_arr,
        a=a_arr,
        aux=aux,
        memory_force=mem,
        system_name=sys.name,
        method=method,
        dt=float(dt) if method == "rk4" else None,
    )


def _dormand_prince(f, t0, t1, y0, h, rtol, atol, max_rejections, max_steps, times, ys, derivs, labels):
    t, y = t0, y0
    k1 = f(t, y)
    derivs.append(k1)
    rejections = 0
    steps = 0
    while t < t1 - 1e-14 * max(1.0, abs(t1)):
        if steps >= max_steps:
            raise StepRejectionLimit(f"exceeded {max_steps} steps", {"t": t})
        h = min(h, t1 - t)
        ks = [k1]
        for i in range(1, 7):
            yi = _combo(y, h, _DP_A[i], ks)
            ks.append(f(t + _DP_C[i] * h, yi))
        y_new = _combo(y, h, _DP_B, ks)
        err_vec = _combo([0.0] * len(y), h, _DP_E, ks)
        scale = [atol + rtol * max(abs(a), abs(b)) for a, b in zip(y, y_new)]
        err = math.sqrt(sum((e / s) ** 2 for e, s in zip(err_vec, scale)) / max(len(y), 1))
        if not math.isfinite(err):
            err = float("inf")
        if err <= 1.0:
            t = t + h
            y = y_new
            _check_finite(y, len(times), t, labels)
            k1 = ks[6]
            times.append(t)
            ys.append(y)
            derivs.append(k1)
            rejections = 0
            steps += 1
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            rejections += 1
            if rejections > max_rejections:
                raise StepRejectionLimit(
                    f"{rejections} consecutive step rejections at t = {t!r}",
                    {"t": t, "h": h, "state": dict(zip(labels, y))},
                )
            factor = max(0.1, 0.9 * err ** -0.2) if math.isfinite(err) else 0.1
        h = h * factor


def solve_memory_system(sys: NonconsSystem, init: Sequence, t_span, dt: float) -> Trajectory:
    """Fixed-step integration of a system whose K includes a history integral."""
    if sys.memory is None:
        raise InvalidParams("system has no memory kernel", "memory")
    return integrate(sys, init, t_span, dt, method="rk4")
