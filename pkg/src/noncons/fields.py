"""Nonconservative scalar field theory in 1+1 dimensions by the method of lines.

Fields live on the nodes of a uniform grid. The discrete doubled Lagrangian
is the node sum of the density Omega = Lag(phi1) - Lag(phi2) + Kdens,
averaged over the forward and backward difference gradients,

    Omega_h = dx * sum_i (Omega(i, D+ phi_i) + Omega(i, D- phi_i)) / 2,

and the semidiscrete equations are its minus-variable Euler-Lagrange
equations at the physical limit. The stencil is symmetric and second order
(the free wave gets the usual three-point Laplacian), and for a closed,
time-independent density the discrete energy :func:`field_energy` is
conserved exactly by the semidiscrete flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .autodiff import Dual, Kernel
from .errors import (
    CflViolation,
    DimensionMismatch,
    InvalidParams,
    NonFiniteState,
    SingularTemporalMass,
    TooFewSamples,
)
from .noether import numeric_derivative

BOUNDARIES = ("periodic", "fixed")
MASS_TOL = 1e-12
CFL_SAFETY = 0.5
COUPLING_MAX = 1.0


def _shift(f: np.ndarray, k: int) -> np.ndarray:
    """Periodic shift along the last axis: out[i] = f[i - k] (k = +-1)."""
    out = np.empty_like(f)
    if k == 1:
        out[..., 1:] = f[..., :-1]
        out[..., 0] = f[..., -1]
    else:
        out[..., :-1] = f[..., 1:]
        out[..., -1] = f[..., 0]
    return out


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid with ``n`` nodes on [x_min, x_max].

    Periodic grids identify x_max with x_min (node spacing L/n); fixed grids
    include both end nodes (spacing L/(n - 1)) and pin the field there.
    """

    x_min: float = 0.0
    x_max: float = 1.0
    n: int = 128
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise InvalidParams(f"grid needs at least 8 nodes, got {self.n!r}", "n")
        if not self.x_max > self.x_min:
            raise InvalidParams("x_max must exceed x_min", "x_max")
        if self.boundary not in BOUNDARIES:
            raise InvalidParams(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}", "boundary")
        object.__setattr__(self, "n", int(self.n))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def dx(self) -> float:
        return self.length / (self.n if self.periodic else self.n - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def forward(self, f: np.ndarray) -> np.ndarray:
        """D+ f at every node (the last fixed node repeats D-)."""
        if self.periodic:
            return (_shift(f, -1) - f) / self.dx
        out = np.empty_like(f)
        out[..., :-1] = np.diff(f, axis=-1) / self.dx
        out[..., -1] = out[..., -2]
        return out

    def backward(self, f: np.ndarray) -> np.ndarray:
        """D- f at every node (the first fixed node repeats D+)."""
        if self.periodic:
            return (f - _shift(f, 1)) / self.dx
        out = np.empty_like(f)
        out[..., 1:] = np.diff(f, axis=-1) / self.dx
        out[..., 0] = out[..., 1]
        return out

    def central(self, f: np.ndarray) -> np.ndarray:
        """Second-order central first derivative (one-sided at fixed edges)."""
        if self.periodic:
            return (_shift(f, -1) - _shift(f, 1)) / (2.0 * self.dx)
        return np.gradient(f, self.dx, axis=-1, edge_order=2)

    def standing_mode(self, mode: int = 1, amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
        """amplitude * cos(k (x - x_min) + phase) with k fitted to the grid."""
        k = self.wavenumber(mode)
        return amplitude * np.cos(k * (self.x - self.x_min) + phase)

    def wavenumber(self, mode: int) -> float:
        if self.periodic:
            return 2.0 * math.pi * mode / self.length
        return math.pi * mode / self.length

    def discrete_wavenumber(self, mode: int) -> float:
        """Effective k of the three-point Laplacian, 2 sin(k dx / 2) / dx."""
        k = self.wavenumber(mode)
        return 2.0 * math.sin(0.5 * k * self.dx) / self.dx


@dataclass(frozen=True)
class FieldPoint:
    """Doubled field data at one node, per-field tuples in the +/- basis."""

    phi_plus: tuple
    phi_minus: tuple
    dt_plus: tuple
    dt_minus: tuple
    dx_plus: tuple
    dx_minus: tuple
    x: object
    t: object

    def history(self, which: int) -> tuple[tuple, tuple, tuple]:
        """(phi, dphi_dt, dphi_dx) of history 1 or 2."""
        sgn = 0.5 if which == 1 else -0.5
        return (
            tuple(p + sgn * m for p, m in zip(self.phi_plus, self.phi_minus)),
            tuple(p + sgn * m for p, m in zip(self.dt_plus, self.dt_minus)),
            tuple(p + sgn * m for p, m in zip(self.dx_plus, self.dx_minus)),
        )


@dataclass
class FieldState:
    t: float
    phi: np.ndarray  # (fields, nodes)
    dphi_dt: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        self.dphi_dt = np.atleast_2d(np.asarray(self.dphi_dt, dtype=float))
        if self.phi.shape != self.dphi_dt.shape or self.phi.shape[1] != self.grid.n:
            raise DimensionMismatch(
                f"field arrays {self.phi.shape} / {self.dphi_dt.shape} do not match a grid of {self.grid.n} nodes"
            )


@dataclass
class FieldSeries:
    """Snapshots of an evolved field."""

    times: np.ndarray
    phi: np.ndarray  # (samples, fields, nodes)
    dphi_dt: np.ndarray
    grid: Grid1D

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> FieldState:
        return FieldState(float(self.times[i]), self.phi[i], self.dphi_dt[i], self.grid)


@dataclass
class StressSample:
    """Nodewise canonical and shifted stress components.

    Index order is T[mu][nu] with 0 = t and 1 = x, e.g. ``T01`` is T_0^1,
    the energy flux. ``kappa0``/``kappa1`` have shape (fields, nodes).
    """

    T00: np.ndarray
    T01: np.ndarray
    T10: np.ndarray
    T11: np.ndarray
    kappa0: np.ndarray
    kappa1: np.ndarray
    calT00: np.ndarray
    calT01: np.ndarray
    calT10: np.ndarray
    calT11: np.ndarray


class _NodeKernel:
    """A traced kernel evaluated on whole grids with the numpy backend.

    The trace is compiled and checked at one node; if tracing is impossible
    the function is evaluated node by node instead.
    """

    def __init__(self, fn: Callable[[list], Sequence], n_inputs: int):
        self.kernel = Kernel(fn, n_inputs, backend="numpy")
        self.primed = False

    def __call__(self, *args) -> list:
        arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
        shape = arrays[0].shape
        if not self.primed:
            self.primed = True
            self.kernel(*[float(a.flat[0]) for a in arrays])
        if self.kernel.compiled:
            # constant outputs stay scalars and broadcast where used
            return list(self.kernel(*arrays))
        flat = [a.ravel() for a in arrays]
        rows = [self.kernel.eager(*[float(a[i]) for a in flat]) for i in range(flat[0].size)]
        return [np.array([float(r[k]) for r in rows]).reshape(shape) for k in range(len(rows[0]))]


def _mk(value, index, second):
    return Dual(value, {index: 1.0}, {} if second else None)


def _hget(h, i, j):
    if not h:
        return 0.0
    return h.get((i, j) if i <= j else (j, i), 0.0)


@dataclass(frozen=True, eq=False)
class FieldSystem:
    """Lagrangian density ``lagrangian_density(phi, dphi_dt, dphi_dx, x, t)``
    plus an optional nonconservative density ``noncons_density(p)`` taking a
    :class:`FieldPoint`. Per-field arguments are tuples of scalars.
    """

    n_fields: int
    lagrangian_density: Callable
    grid: Grid1D
    noncons_density: Callable[[FieldPoint], object] | None = None
    wave_speed: float = 1.0
    name: str = ""
    field_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_fields < 1:
            raise InvalidParams("need at least one field", "n_fields")
        if not self.wave_speed > 0.0:
            raise InvalidParams("wave_speed must be positive", "wave_speed")
        if self.field_names and len(self.field_names) != self.n_fields:
            raise InvalidParams("field_names length must equal n_fields", "field_names")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.field_names or tuple(str(i) for i in range(self.n_fields))

    def omega(self, p: FieldPoint):
        """Doubled density Lag(history 1) - Lag(history 2) + Kdens."""
        h1, h2 = p.history(1), p.history(2)
        val = self.lagrangian_density(*h1, p.x, p.t) - self.lagrangian_density(*h2, p.x, p.t)
        if self.noncons_density is not None:
            val = val + self.noncons_density(p)
        return val

    def _split(self, args):
        F = self.n_fields
        t, x = args[0], args[1]
        return t, x, tuple(args[2 : 2 + F]), tuple(args[2 + F : 2 + 2 * F]), tuple(args[2 + 2 * F : 2 + 3 * F])

    def _node_outputs(self, args) -> list:
        """P, Pi_x, W, B_phi, B_phix, B_t from one second-order pass."""
        F = self.n_fields
        t, x, phi, phit, phix = self._split(args)
        rng = range(F)
        p = FieldPoint(
            phi_plus=tuple(_mk(phi[i], 3 * F + i, True) for i in rng),
            phi_minus=tuple(_mk(0.0, i, True) for i in rng),
            dt_plus=tuple(_mk(phit[i], 4 * F + i, True) for i in rng),
            dt_minus=tuple(_mk(0.0, F + i, True) for i in rng),
            dx_plus=tuple(_mk(phix[i], 5 * F + i, True) for i in rng),
            dx_minus=tuple(_mk(0.0, 2 * F + i, True) for i in rng),
            x=x,
            t=_mk(t, 6 * F, True),
        )
        om = self.omega(p)
        if not isinstance(om, Dual):
            om = Dual(om, {}, {})
        g, h = om.grad, om.hess
        out = [g.get(i, 0.0) for i in rng] + [g.get(2 * F + i, 0.0) for i in rng]
        for base in (4 * F, 3 * F, 5 * F):
            for i in rng:
                out += [_hget(h, F + i, base + j) for j in rng]
        out += [_hget(h, F + i, 6 * F) for i in rng]
        return out

    def _stress_outputs(self, args) -> list:
        """Lag, dLag/dphi_t, dLag/dphi_x, dLag/dt and the Kdens derivatives."""
        F = self.n_fields
        t, x, phi, phit, phix = self._split(args)
        rng = range(F)
        L = self.lagrangian_density(
            tuple(_mk(phi[i], i, False) for i in rng),
            tuple(_mk(phit[i], F + i, False) for i in rng),
            tuple(_mk(phix[i], 2 * F + i, False) for i in rng),
            x,
            _mk(t, 3 * F, False),
        )
        if not isinstance(L, Dual):
            L = Dual(L, {})
        out = [L.value] + [L.grad.get(F + i, 0.0) for i in rng] + [L.grad.get(2 * F + i, 0.0) for i in rng]
        out.append(L.grad.get(3 * F, 0.0))
        if self.noncons_density is None:
            return out + [0.0] * (3 * F)
        p = FieldPoint(
            phi_plus=tuple(phi),
            phi_minus=tuple(_mk(0.0, i, False) for i in rng),
            dt_plus=tuple(phit),
            dt_minus=tuple(_mk(0.0, F + i, False) for i in rng),
            dx_plus=tuple(phix),
            dx_minus=tuple(_mk(0.0, 2 * F + i, False) for i in rng),
            x=x,
            t=t,
        )
        K = self.noncons_density(p)
        g = K.grad if isinstance(K, Dual) else {}
        out += [g.get(F + i, 0.0) for i in rng] + [g.get(2 * F + i, 0.0) for i in rng]
        out += [g.get(i, 0.0) for i in rng]
        return out

    @cached_property
    def node_kernel(self) -> _NodeKernel:
        return _NodeKernel(self._node_outputs, 2 + 3 * self.n_fields)

    @cached_property
    def stress_kernel(self) -> _NodeKernel:
        return _NodeKernel(self._stress_outputs, 2 + 3 * self.n_fields)


# -- dynamics -----------------------------------------------------------------------


def _check_state(fs: FieldSystem, state: FieldState):
    if state.phi.shape[0] != fs.n_fields:
        raise DimensionMismatch(f"state has {state.phi.shape[0]} fields, system has {fs.n_fields}")
    if state.grid != fs.grid:
        raise DimensionMismatch("state grid differs from the system grid")


def _node_terms(fs: FieldSystem, t, phi, phit, grad):
    F = fs.n_fields
    args = [t, fs.grid.x, *phi, *phit, *grad]
    out = fs.node_kernel(*args)
    P, Pix = out[:F], out[F : 2 * F]
    o = 2 * F
    blocks = []
    for _ in range(3):
        blocks.append([out[o + i * F : o + (i + 1) * F] for i in range(F)])
        o += F * F
    W, Bp, Bx = blocks
    Bt = out[o : o + F]
    return P, Pix, W, Bp, Bx, Bt


def _accelerations(fs: FieldSystem, t: float, phi: np.ndarray, phit: np.ndarray) -> np.ndarray:
    grid = fs.grid
    F, n = phi.shape
    rhs = np.zeros((F, n))
    W = [[0.0] * F for _ in range(F)]
    fluxes = []
    for grad, dgrad_t in ((grid.forward(phi), grid.forward(phit)), (grid.backward(phi), grid.backward(phit))):
        P, Pix, Wk, Bp, Bx, Bt = _node_terms(fs, t, phi, phit, grad)
        for i in range(F):
            r = P[i] - Bt[i]
            for j in range(F):
                r = r - Bp[i][j] * phit[j] - Bx[i][j] * dgrad_t[j]
                W[i][j] = W[i][j] + 0.5 * Wk[i][j]
            rhs[i] += 0.5 * r
        fluxes.append(np.array([np.broadcast_to(f, (n,)) for f in Pix]))
    flux_plus, flux_minus = fluxes
    # gradient part of dOmega_h/dphi-_i
    dx = grid.dx
    if grid.periodic:
        div = (_shift(flux_plus, 1) - flux_plus + flux_minus - _shift(flux_minus, -1)) / (2 * dx)
    else:
        div = np.zeros_like(flux_plus)
        div[:, 1:-1] = (flux_plus[:, :-2] - flux_plus[:, 1:-1] + flux_minus[:, 1:-1] - flux_minus[:, 2:]) / (2 * dx)
    rhs += div
    acc = _solve_temporal_mass(W, rhs, grid, t)
    if not grid.periodic:
        acc[:, [0, -1]] = 0.0
    return acc


def _solve_temporal_mass(W, rhs: np.ndarray, grid: Grid1D, t: float) -> np.ndarray:
    F, n = rhs.shape
    interior = np.ones(n, dtype=bool)
    if not grid.periodic:
        interior[[0, -1]] = False
    if all(np.ndim(w) == 0 for row in W for w in row):
        Wc = np.array(W, dtype=float)
        if abs(np.linalg.det(Wc)) <= MASS_TOL:
            raise SingularTemporalMass("temporal mass matrix is singular", {"t": t})
        if F == 1:
            return rhs / Wc[0, 0]
        return np.linalg.solve(Wc, rhs)
    Wn = np.empty((n, F, F))
    for i in range(F):
        for j in range(F):
            Wn[:, i, j] = W[i][j]
    det = np.linalg.det(Wn)
    bad = (np.abs(det) <= MASS_TOL) & interior
    if np.any(bad):
        raise SingularTemporalMass(f"temporal mass vanishes at node {int(np.argmax(bad))}", {"t": t})
    Wn[np.abs(det) <= MASS_TOL] = np.eye(F)
    return np.linalg.solve(Wn, rhs.T[..., None])[..., 0].T


def semidiscrete_rhs(fs: FieldSystem, state: FieldState) -> np.ndarray:
    """Field accelerations d2phi/dt2 at every node, shape (fields, nodes)."""
    _check_state(fs, state)
    return _accelerations(fs, state.t, state.phi, state.dphi_dt)


def max_stable_dt(fs: FieldSystem) -> float:
    return CFL_SAFETY * fs.grid.dx / fs.wave_speed


def evolve_field(fs: FieldSystem, state0: FieldState, t_span, dt: float, save_every: int = 1) -> FieldSeries:
    """Classical RK4 on the semidiscrete system; snapshots every ``save_every`` steps.

    A ``dt`` that does not divide the span is shortened so that it does.
    """
    _check_state(fs, state0)
    if isinstance(t_span, (int, float)):
        t0, t1 = state0.t, state0.t + float(t_span)
    else:
        t0, t1 = map(float, t_span)
    if not dt > 0.0:
        raise InvalidParams(f"dt must be positive, got {dt!r}", "dt")
    limit = max_stable_dt(fs)
    if dt > limit * (1.0 + 1e-12):
        raise CflViolation(f"dt = {dt:g} exceeds the stability limit {limit:g} (0.5 dx / c)")
    n_steps = max(int(math.ceil((t1 - t0) / dt - 1e-9)), 0)
    h = (t1 - t0) / n_steps if n_steps else 0.0
    phi = state0.phi.copy()
    v = state0.dphi_dt.copy()
    if not fs.grid.periodic:
        v[:, [0, -1]] = 0.0
    times, phis, vs = [t0], [phi.copy()], [v.copy()]

    def f(t, p, w):
        return w, _accelerations(fs, t, p, w)

    for k in range(n_steps):
        t = t0 + k * h
        k1p, k1v = f(t, phi, v)
        k2p, k2v = f(t + 0.5 * h, phi + 0.5 * h * k1p, v + 0.5 * h * k1v)
        k3p, k3v = f(t + 0.5 * h, phi + 0.5 * h * k2p, v + 0.5 * h * k2v)
        k4p, k4v = f(t + h, phi + h * k3p, v + h * k3v)
        phi = phi + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(v))):
            bad = int(np.argmax(~(np.isfinite(phi) & np.isfinite(v)).all(axis=0)))
            raise NonFiniteState(
                f"non-finite field at step {k + 1}, t = {t + h!r}, node {bad}",
                {"step": k + 1, "t": t + h, "node": bad, "phi": phi[:, bad].tolist(), "dphi_dt": v[:, bad].tolist()},
            )
        if (k + 1) % save_every == 0 or k + 1 == n_steps:
            times.append(t0 + (k + 1) * h)
            phis.append(phi.copy())
            vs.append(v.copy())
    return FieldSeries(np.array(times), np.array(phis), np.array(vs), fs.grid)


# -- stress bookkeeping -------------------------------------------------------------


def _stress_parts(fs: FieldSystem, t, phi, phit, grad):
    F = fs.n_fields
    n = fs.grid.n
    out = [np.broadcast_to(o, (n,)) for o in fs.stress_kernel(t, fs.grid.x, *phi, *phit, *grad)]
    L = out[0]
    dLt = np.array(out[1 : 1 + F])
    dLx = np.array(out[1 + F : 1 + 2 * F])
    dLdt = out[1 + 2 * F]
    o = 2 + 2 * F
    k0 = np.array(out[o : o + F])
    k1 = np.array(out[o + F : o + 2 * F])
    kq = np.array(out[o + 2 * F : o + 3 * F])
    return L, dLt, dLx, dLdt, k0, k1, kq


def stress_tensor(fs: FieldSystem, state: FieldState) -> StressSample:
    """Canonical T_mu^nu and the shifted calT_mu^nu = T_mu^nu + d_mu phi kappa^nu.

    Spatial gradients use the central difference at each node.
    """
    _check_state(fs, state)
    phi, phit = state.phi, state.dphi_dt
    phix = fs.grid.central(phi)
    L, dLt, dLx, _, k0, k1, _ = _stress_parts(fs, state.t, phi, phit, phix)
    T00 = np.sum(phit * dLt, axis=0) - L
    T01 = np.sum(phit * dLx, axis=0)
    T10 = np.sum(phix * dLt, axis=0)
    T11 = np.sum(phix * dLx, axis=0) - L
    return StressSample(
        T00, T01, T10, T11, k0, k1,
        calT00=T00 + np.sum(phit * k0, axis=0),
        calT01=T01 + np.sum(phit * k1, axis=0),
        calT10=T10 + np.sum(phix * k0, axis=0),
        calT11=T11 + np.sum(phix * k1, axis=0),
    )


def field_energy(fs: FieldSystem, state: FieldState, shifted: bool = False) -> float:
    """Discrete total energy dx * sum of T_0^0 averaged over D+ and D- gradients.

    This is the energy of the discrete Lagrangian, so it is exactly
    conserved by the semidiscrete equations of a closed, static system.
    ``shifted`` adds the kappa^0 term of calT_0^0.
    """
    _check_state(fs, state)
    grid = fs.grid
    phi, phit = state.phi, state.dphi_dt
    total = np.zeros(grid.n)
    for grad, mask in ((grid.forward(phi), slice(None, -1)), (grid.backward(phi), slice(1, None))):
        L, dLt, _, _, k0, _, _ = _stress_parts(fs, state.t, phi, phit, grad)
        dens = np.sum(phit * dLt, axis=0) - L
        if shifted:
            dens = dens + np.sum(phit * k0, axis=0)
        if grid.periodic:
            total += 0.5 * dens
        else:
            total[mask] += 0.5 * dens[mask]
    return float(grid.dx * np.sum(total))


def field_momentum(fs: FieldSystem, state: FieldState) -> float:
    """dx * sum of T_1^0 with central gradients (conserved for free periodic waves)."""
    s = stress_tensor(fs, state)
    return float(fs.grid.dx * np.sum(s.T10))


@dataclass
class StressBalance:
    times: np.ndarray
    residual: np.ndarray  # (samples, nodes)
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def rms_residual(self) -> float:
        return float(np.sqrt(np.mean(self.residual**2)))


def stress_balance_residual(series: FieldSeries, fs: FieldSystem) -> StressBalance:
    """Residual of d_t calT_0^0 + d_x calT_0^1 against its source.

    The source is -dLag/dt + phi_t [dK/dphi-] + phi_tt kappa^0 + phi_xt kappa^1.
    Time derivatives are fourth-order finite differences of the snapshots,
    space derivatives second-order central differences. Fixed-boundary edge
    nodes are excluded.
    """
    n = len(series)
    if n < 5:
        raise TooFewSamples(f"need at least 5 snapshots, got {n}")
    steps = np.diff(series.times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-14):
        raise InvalidParams("stress balance needs uniformly spaced snapshots", "series")
    h = float(steps[0])
    grid = fs.grid
    calT00 = np.empty((n, grid.n))
    flux = np.empty((n, grid.n))
    src = np.empty((n, grid.n))
    kap0 = np.empty((n, fs.n_fields, grid.n))
    for k in range(n):
        st = series.state(k)
        phix = grid.central(st.phi)
        L, dLt, dLx, dLdt, k0, k1, kq = _stress_parts(fs, st.t, st.phi, st.dphi_dt, phix)
        T00 = np.sum(st.dphi_dt * dLt, axis=0) - L
        calT00[k] = T00 + np.sum(st.dphi_dt * k0, axis=0)
        flux[k] = np.sum(st.dphi_dt * dLx, axis=0) + np.sum(st.dphi_dt * k1, axis=0)
        phixt = grid.central(st.dphi_dt)
        src[k] = -dLdt + np.sum(st.dphi_dt * kq, axis=0) + np.sum(phixt * k1, axis=0)
        kap0[k] = k0
    phitt = numeric_derivative_axis(series.dphi_dt, h)
    src += np.sum(phitt * kap0, axis=1)
    lhs = numeric_derivative_axis(calT00, h) + grid.central(flux)
    res = lhs - src
    if not grid.periodic:
        res = res[:, 1:-1]
        lhs, src = lhs[:, 1:-1], src[:, 1:-1]
    return StressBalance(np.asarray(series.times), res, lhs, src)


def numeric_derivative_axis(f: np.ndarray, h: float) -> np.ndarray:
    """:func:`numeric_derivative` applied along the first axis."""
    f = np.asarray(f, dtype=float)
    flat = f.reshape(f.shape[0], -1)
    out = np.empty_like(flat)
    for j in range(flat.shape[1]):
        out[:, j] = numeric_derivative(flat[:, j], h)
    return out.reshape(f.shape)


# -- catalog field systems ----------------------------------------------------------


def wave(c: float = 1.0, gamma: float = 0.0, grid: Grid1D | None = None, variant: str = "q") -> FieldSystem:
    """Free scalar wave with optional linear damping gamma.

    ``variant='q'`` uses Kdens = -gamma phi- d_t phi+ (no kappa); ``'v'`` uses
    -gamma (d_t phi-) phi+, which carries kappa^0 = -gamma phi. The two differ
    by a sign and a total time derivative, so ``'v'`` pumps energy in at
    rate gamma (d_t phi)^2 instead of removing it.
    """
    if not c > 0.0:
        raise InvalidParams("wave speed must be positive", "c")
    if gamma < 0.0:
        raise InvalidParams("gamma must be nonnegative", "gamma")
    if variant not in ("q", "v"):
        raise InvalidParams("variant must be 'q' or 'v'", "variant")
    grid = grid or Grid1D()

    def Lag(phi, phit, phix, x, t):
        return 0.5 * phit[0] * phit[0] - 0.5 * c * c * phix[0] * phix[0]

    K = None
    if gamma:
        if variant == "q":
            def K(p):
                return -gamma * p.phi_minus[0] * p.dt_plus[0]
        else:
            def K(p):
                return -gamma * p.dt_minus[0] * p.phi_plus[0]

    return FieldSystem(1, Lag, grid, K, wave_speed=c, name="wave", field_names=("phi",))


def coupled_scalars(
    g: float = 0.1,
    grid: Grid1D | None = None,
    background: float | None = None,
    n: int = 128,
    length: float = 1.0,
) -> FieldSystem:
    """Two scalar fields (phi, chi) with the cubic vertex (g/2) phi^2 chi, c = 1.

    With ``background`` set, phi is a fluctuation about that constant value
    and only the quadratic part g * background * phi * chi of the vertex is
    kept. Each Fourier mode then decouples into the two-oscillator system.

    The cubic potential is unbounded, so |g| is limited to 1; with O(1)
    amplitudes that keeps runs of a few tens of time units stable.
    """
    g = float(g)
    if not math.isfinite(g) or abs(g) > COUPLING_MAX:
        raise InvalidParams(f"|g| must be at most {COUPLING_MAX}, got {g!r}", "g")
    grid = grid or Grid1D(0.0, float(length), int(n), "periodic")

    if background is None:
        def Lag(f, ft, fx, x, t):
            phi, chi = f
            return 0.5 * (ft[0] * ft[0] - fx[0] * fx[0]) + 0.5 * (ft[1] * ft[1] - fx[1] * fx[1]) + 0.5 * g * phi * phi * chi
    else:
        gb = g * float(background)

        def Lag(f, ft, fx, x, t):
            phi, chi = f
            return 0.5 * (ft[0] * ft[0] - fx[0] * fx[0]) + 0.5 * (ft[1] * ft[1] - fx[1] * fx[1]) + gb * phi * chi

    return FieldSystem(2, Lag, grid, None, wave_speed=1.0, name="coupled_scalars_1d", field_names=("phi", "chi"))


def mode_oscillator_params(fs_grid: Grid1D, mode: int, g: float, background: float) -> dict:
    """Two-oscillator parameters equivalent to one linearized Fourier mode."""
    k = fs_grid.discrete_wavenumber(mode)
    return {"m": 1.0, "omega": k, "M": 1.0, "Omega": k, "lam": g * background}
