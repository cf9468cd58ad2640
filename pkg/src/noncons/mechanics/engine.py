"""Equation-of-motion assembly for a :class:`NonconsSystem`.

Everything is derived from the doubled Lagrangian

    Lambda(q+, q-, v+, v-, t) = L(q1, v1, t) - L(q2, v2, t) + K

evaluated with dual numbers at the physical limit (q- = v- = 0). Seeding
the minus variables as rows and the plus variables (and time) as columns of
a second-order dual gives, in one pass,

* ``P``  = dLambda/dq-          (force side of the equation of motion)
* ``Pi`` = dLambda/dv-          (total momentum p + kappa)
* ``M``  = d2Lambda/dv- dv+     (mass matrix, coefficient of the acceleration)
* ``Bq`` = d2Lambda/dv- dq+, ``Bt`` = d2Lambda/dv- dt, ``Bs`` = d2Lambda/dv- ds

so the minus-equation d/dt Pi = P expands by the chain rule into

    M a = P - Bq v - Bt - Bs sdot.

Coordinates with no inertia (zero row and column of ``M``) are solved from
the same rows as an algebraic equation for their velocity, using
``Jv`` = d2Lambda/dq- dv+ as the Newton Jacobian.

The generic functions below work on any scalar type; :class:`Kernel` traces
them once per system into compiled straight-line code for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..autodiff import DoubledPoint, Dual, Jet, Kernel, new_tag, ops
from ..autodiff.jet import coeff
from ..errors import (
    MissingAcceleration,
    NonpositiveTemperature,
    NotReducible,
    NotReduced,
    SingularMassMatrix,
    UnderdeterminedCoordinate,
)
from .. import linalg

NEWTON_MAX_ITER = 30
NEWTON_TOL = 1e-13


@dataclass
class Terms:
    """Physical-limit derivatives of Lambda (lists of scalars)."""

    P: list
    Pi: list
    M: list
    Bq: list
    Bt: list
    Bs: list
    Jv: list

    def rhs(self, rows: Sequence[int], v: Sequence, sdot: Sequence = (), extra: Sequence | None = None) -> list:
        out = []
        for i in rows:
            r = self.P[i] - self.Bt[i]
            for j, vj in enumerate(v):
                b = self.Bq[i][j]
                if not (type(b) is float and b == 0.0):
                    r = r - b * vj
            for k, sk in enumerate(sdot):
                r = r - self.Bs[i][k] * sk
            if extra is not None:
                r = r + extra[i]
            out.append(r)
        return out


@dataclass(frozen=True)
class Partition:
    """Split of coordinates into inertial (second-order) and massless ones."""

    second_order: tuple[int, ...]
    first_order: tuple[int, ...]
    labels: tuple[str, ...]

    def as_labels(self) -> dict[str, list[str]]:
        return {
            "second_order": [self.labels[i] for i in self.second_order],
            "first_order": [self.labels[i] for i in self.first_order],
        }


def _hget(h: dict | None, i: int, j: int):
    if not h:
        return 0.0
    return h.get((i, j) if i <= j else (j, i), 0.0)


def _as_dual(x, second: bool) -> Dual:
    return x if isinstance(x, Dual) else Dual(x, {}, {} if second else None)


def _mk(value, index: int, second: bool) -> Dual:
    return Dual(value, {index: 1.0}, {} if second else None)


def flow_jet(accel: Callable, t, q: Sequence, v: Sequence, degree: int):
    """Taylor coefficients of the solution of q'' = accel(t, q, q') through (q, v).

    Returns ``(tag, coeffs)`` where ``coeffs[i][k]`` is the s^k coefficient
    of coordinate i, k = 0..degree. Each pass evaluates ``accel`` on jets of
    increasing degree and reads off one new coefficient.
    """
    tag = new_tag()
    qc = [[qi, vi] for qi, vi in zip(q, v)]
    for k in range(degree - 1):
        T = Jet([t, 1.0] + [0.0] * (k - 1), tag) if k >= 1 else Jet([t], tag)
        Q = [Jet(c[: k + 1], tag) for c in qc]
        V = [Jet([(j + 1) * c[j + 1] for j in range(k + 1)], tag) for c in qc]
        A = accel(T, Q, V)
        for c, ai in zip(qc, A):
            c.append(coeff(ai, k, tag) / ((k + 2) * (k + 1)))
    return tag, qc


def jets_from_coeffs(tag: int, qc: Sequence[Sequence], degree: int):
    """Position, velocity and acceleration jets of the given degree."""

    def c(ci, k):
        return ci[k] if k < len(ci) else float("nan")

    Q = [Jet([c(ci, j) for j in range(degree + 1)], tag) for ci in qc]
    V = [Jet([(j + 1) * c(ci, j + 1) for j in range(degree + 1)], tag) for ci in qc]
    A = [Jet([(j + 1) * (j + 2) * c(ci, j + 2) for j in range(degree + 1)], tag) for ci in qc]
    return Q, V, A


class Engine:
    """Per-system cache of traced kernels and solvers."""

    def __init__(self, system):
        self.sys = system
        self.N = system.dim
        self.A = system.aux_dim
        self.n_in = 1 + 2 * self.N + self.A
        self.source = system.source
        self._kernels: dict[str, Kernel] = {}
        self._partition: Partition | None = None

    # -- argument helpers -------------------------------------------------------
    def split(self, args: Sequence):
        N = self.N
        return args[0], tuple(args[1 : 1 + N]), tuple(args[1 + N : 1 + 2 * N]), tuple(args[1 + 2 * N :])

    def pack(self, t, q, v, s=()) -> tuple:
        return (t, *q, *v, *s)

    def kernel(self, name: str) -> Kernel:
        k = self._kernels.get(name)
        if k is None:
            builders = {
                "terms": (lambda a: self._flat_terms(a, "full"), self.n_in),
                "mrhs": (self._mrhs_outputs, 1 + 2 * self.N),
                "plus": (self._plus_outputs, self.n_in),
                "lag": (self._lag_outputs, self.n_in),
                "pot": (self._pot_outputs, self.n_in),
                "reduced": (self._reduced_outputs, 1 + 2 * self.N),
                "ladder_diag": (self._ladder_diag_outputs, 1 + 2 * self.N),
            }
            fn, n_in = builders[name]
            k = self._kernels[name] = Kernel(fn, n_in)
        return k

    # -- doubled seeding ----------------------------------------------------------
    def doubled_point(self, t, q, v, s=(), second=True, zero_accel=None) -> DoubledPoint:
        """Seed q-, v-, q+, v+, t, s as directions 0..4N+A (in that order)."""
        N = self.N
        qm = tuple(_mk(0.0, i, second) for i in range(N))
        vm = tuple(_mk(0.0, N + i, second) for i in range(N))
        qp = tuple(_mk(q[i], 2 * N + i, second) for i in range(N))
        vp = tuple(_mk(v[i], 3 * N + i, second) for i in range(N))
        tt = _mk(t, 4 * N, second)
        ss = tuple(_mk(s[k], 4 * N + 1 + k, second) for k in range(len(s)))
        a = None
        if zero_accel or (zero_accel is None and self.source.k_order == 2):
            a = (0.0,) * N
        return DoubledPoint(tt, qp, qm, vp, vm, a, a, ss)

    def lam(self, p: DoubledPoint, mode: str):
        """Lambda at p. ``mode`` 'full' includes K, 'none' drops it."""
        h = p.to_12()
        src = self.source
        val = src.lagrangian(p.t, h["q1"], h["v1"], p.aux) - src.lagrangian(p.t, h["q2"], h["v2"], p.aux)
        if mode == "full" and src.K is not None:
            val = val + src.K(p)
        return val

    def terms(self, t, q, v, s=(), mode: str = "full") -> Terms:
        """Generic (eager) evaluation of the physical-limit derivatives."""
        N, A = self.N, len(s)
        lam = _as_dual(self.lam(self.doubled_point(t, q, v, s), mode), True)
        g, h = lam.grad, lam.hess
        QP, VP, T, S = 2 * N, 3 * N, 4 * N, 4 * N + 1
        rng = range(N)
        return Terms(
            P=[g.get(i, 0.0) for i in rng],
            Pi=[g.get(N + i, 0.0) for i in rng],
            M=[[_hget(h, N + i, VP + j) for j in rng] for i in rng],
            Bq=[[_hget(h, N + i, QP + j) for j in rng] for i in rng],
            Bt=[_hget(h, N + i, T) for i in rng],
            Bs=[[_hget(h, N + i, S + k) for k in range(A)] for i in rng],
            Jv=[[_hget(h, i, VP + j) for j in rng] for i in rng],
        )

    def _flat_terms(self, args, mode) -> list:
        t, q, v, s = self.split(args)
        T = self.terms(t, q, v, s, mode)
        out = list(T.P) + list(T.Pi)
        for block in (T.M, T.Bq):
            for row in block:
                out.extend(row)
        out.extend(T.Bt)
        for row in T.Bs:
            out.extend(row)
        for row in T.Jv:
            out.extend(row)
        return out

    def _mrhs_outputs(self, args) -> list:
        """Mass matrix and force side for systems without aux state."""
        t, q, v, _ = self.split(args)
        T = self.terms(t, q, v, (), "full")
        out = []
        for row in T.M:
            out.extend(row)
        return out + T.rhs(range(self.N), v)

    def fast_terms(self, t, q, v, s=()) -> Terms:
        out = self.kernel("terms")(t, *q, *v, *s)
        N, A = self.N, self.A
        NN = N * N
        o = 2 * N
        M = [out[o + i * N : o + (i + 1) * N] for i in range(N)]
        o += NN
        Bq = [out[o + i * N : o + (i + 1) * N] for i in range(N)]
        o += NN
        Bt = out[o : o + N]
        o += N
        Bs = [out[o + i * A : o + (i + 1) * A] for i in range(N)]
        o += N * A
        Jv = [out[o + i * N : o + (i + 1) * N] for i in range(N)]
        return Terms(out[:N], out[N : 2 * N], M, Bq, Bt, Bs, Jv)

    # -- plus equation (should vanish identically at the physical limit) -------
    def _plus_outputs(self, args) -> list:
        t, q, v, s = self.split(args)
        N, A = self.N, len(s)
        lam = _as_dual(self.lam(self.doubled_point(t, q, v, s), "full"), True)
        g, h = lam.grad, lam.hess
        QP, VP, T, S = 2 * N, 3 * N, 4 * N, 4 * N + 1
        out = [g.get(QP + i, 0.0) for i in range(N)] + [g.get(VP + i, 0.0) for i in range(N)]
        for i in range(N):
            out += [_hget(h, VP + i, QP + j) for j in range(N)]
            out += [_hget(h, VP + i, VP + j) for j in range(N)]
            out += [_hget(h, VP + i, T)]
            out += [_hget(h, VP + i, S + k) for k in range(A)]
        return out

    def plus_equation(self, t, q, v, a, s=(), sdot=()) -> tuple[np.ndarray, np.ndarray]:
        """Return ([d/dt dL/dv+ - dL/dq+]_PL, [dL/dv+]_PL) for Lambda."""
        out = self.kernel("plus")(t, *q, *v, *s)
        N, A = self.N, self.A
        gq, gv = np.array(out[:N]), np.array(out[N : 2 * N])
        width = 2 * N + 1 + A
        res = np.empty(N)
        for i in range(N):
            row = out[2 * N + i * width : 2 * N + (i + 1) * width]
            hq, hv, ht, hs = row[:N], row[N : 2 * N], row[2 * N], row[2 * N + 1 :]
            res[i] = (
                sum(hq[j] * v[j] for j in range(N))
                + sum(hv[j] * a[j] for j in range(N))
                + ht
                + sum(hs[k] * sdot[k] for k in range(A))
                - gq[i]
            )
        return res, gv

    # -- physical Lagrangian and potential derivatives -------------------------
    def _lag_outputs(self, args) -> list:
        t, q, v, s = self.split(args)
        N, A = self.N, len(s)
        qd = tuple(_mk(q[i], i, False) for i in range(N))
        vd = tuple(_mk(v[i], N + i, False) for i in range(N))
        td = _mk(t, 2 * N, False)
        sd = tuple(_mk(s[k], 2 * N + 1 + k, False) for k in range(A))
        L = _as_dual(self.source.lagrangian(td, qd, vd, sd), False)
        g = L.grad
        return (
            [L.value]
            + [g.get(i, 0.0) for i in range(N)]
            + [g.get(N + i, 0.0) for i in range(N)]
            + [g.get(2 * N, 0.0)]
            + [g.get(2 * N + 1 + k, 0.0) for k in range(A)]
        )

    def lagrangian_parts(self, t, q, v, s=()) -> dict:
        out = self.kernel("lag")(t, *q, *v, *s)
        N = self.N
        return {
            "L": out[0],
            "dq": list(out[1 : 1 + N]),
            "dv": list(out[1 + N : 1 + 2 * N]),
            "dt": out[1 + 2 * N],
            "ds": list(out[2 + 2 * N :]),
        }

    def _pot_outputs(self, args) -> list:
        t, q, v, s = self.split(args)
        N, A = self.N, len(s)
        if self.source.K is None:
            return [0.0] * (1 + 2 * N + 2 * N * N + N + N * A)
        K = _as_dual(self.source.K(self.doubled_point(t, q, v, s)), True)
        g, h = K.grad, K.hess
        QP, VP, T, S = 2 * N, 3 * N, 4 * N, 4 * N + 1
        out = [K.value] + [g.get(i, 0.0) for i in range(N)] + [g.get(N + i, 0.0) for i in range(N)]
        for i in range(N):
            out += [_hget(h, N + i, QP + j) for j in range(N)]
        for i in range(N):
            out += [_hget(h, N + i, VP + j) for j in range(N)]
        out += [_hget(h, N + i, T) for i in range(N)]
        for i in range(N):
            out += [_hget(h, N + i, S + k) for k in range(A)]
        return out

    def potential_parts(self, t, q, v, s=()) -> dict:
        """K and its physical-limit derivatives for first-order K."""
        out = self.kernel("pot")(t, *q, *v, *s)
        N, A = self.N, self.A
        it = iter(out)
        take = lambda n: [next(it) for _ in range(n)]  # noqa: E731
        K = next(it)
        KQ, kappa = take(N), take(N)
        Kvq = [take(N) for _ in range(N)]
        Kvv = [take(N) for _ in range(N)]
        Kvt = take(N)
        Kvs = [take(A) for _ in range(N)]
        return {"K": K, "dq_minus": KQ, "kappa": kappa, "Kvq": Kvq, "Kvv": Kvv, "Kvt": Kvt, "Kvs": Kvs}

    # -- higher-derivative ladder ----------------------------------------------
    def ladder(self, t_jet, Q, V, A) -> tuple[list, list, list]:
        """Force, kappa and dK/dq- from K evaluated on time jets.

        Q = dK/dq- - d/dt dK/dv- + d2/dt2 dK/da-  and
        kappa = dK/dv- - d/dt dK/da-, all at the physical limit.
        """
        N = self.N
        tag = t_jet.tag
        qm = tuple(_mk(0.0, i, False) for i in range(N))
        vm = tuple(_mk(0.0, N + i, False) for i in range(N))
        am = tuple(_mk(0.0, 2 * N + i, False) for i in range(N))
        K = self.source.K
        if K is None:
            zero = [0.0] * N
            return zero, list(zero), list(zero)
        val = _as_dual(K(DoubledPoint(t_jet, Q, qm, V, vm, A, am)), False)
        g = val.grad
        force, kappa, dq = [], [], []
        for i in range(N):
            gq, gv, ga = g.get(i, 0.0), g.get(N + i, 0.0), g.get(2 * N + i, 0.0)
            dq.append(coeff(gq, 0, tag))
            force.append(coeff(gq, 0, tag) - coeff(gv, 1, tag) + 2.0 * coeff(ga, 2, tag))
            kappa.append(coeff(gv, 0, tag) - coeff(ga, 1, tag))
        return force, kappa, dq

    def ladder_at(self, t, q, v, a=None, jerk=None, snap=None):
        """Ladder quantities from explicitly supplied time derivatives.

        Unknown derivatives enter as NaN; since Taylor arithmetic never lets
        higher coefficients leak into lower ones, a NaN result means the
        formula genuinely needs the missing input.
        """
        nan = float("nan")
        N = self.N
        derivs = [a, jerk, snap]
        qc = []
        for i in range(N):
            c = [q[i], v[i]]
            for k, d in enumerate(derivs):
                c.append(nan if d is None else d[i] / math.factorial(k + 2))
            qc.append(c)
        tag = new_tag()
        Q, V, A = jets_from_coeffs(tag, qc, 2)
        return self.ladder(Jet([t, 1.0, 0.0], tag), Q, V, A)

    # -- order reduction -------------------------------------------------------
    def reduced_accel(self, n: int, t, q, v) -> list:
        """Acceleration after n rounds of order reduction (generic scalars)."""
        if n == 0:
            T = self.terms(t, q, v, (), "full")
            rhs = T.rhs(range(self.N), v)
            try:
                return linalg.solve(T.M, rhs)
            except SingularMassMatrix as exc:
                raise NotReducible(f"leading-order system is singular: {exc}") from exc
        tag, qc = flow_jet(lambda T_, Q_, V_: self.reduced_accel(n - 1, T_, Q_, V_), t, q, v, 4)
        Q, V, A = jets_from_coeffs(tag, qc, 2)
        force, _, _ = self.ladder(Jet([t, 1.0, 0.0], tag), Q, V, A)
        T = self.terms(t, q, v, (), "none")
        rhs = T.rhs(range(self.N), v)
        rhs = [r + f for r, f in zip(rhs, force)]
        try:
            return linalg.solve(T.M, rhs)
        except SingularMassMatrix as exc:
            raise NotReducible(f"conservative mass matrix is singular: {exc}") from exc

    def _reduced_outputs(self, args) -> list:
        t, q, v, _ = self.split(list(args))
        return self.reduced_accel(self.sys.reduction_iterations, t, q, v)

    def reduced_force(self, t, q, v) -> list:
        """Nonconservative force used by the reduced equation of motion."""
        n = self.sys.reduction_iterations
        tag, qc = flow_jet(lambda T_, Q_, V_: self.reduced_accel(n - 1, T_, Q_, V_), t, q, v, 4)
        Q, V, A = jets_from_coeffs(tag, qc, 2)
        force, _, _ = self.ladder(Jet([t, 1.0, 0.0], tag), Q, V, A)
        return [float(f) for f in force]

    def _ladder_diag_outputs(self, args) -> list:
        """dK/dq- and kappa along the reduced flow through (t, q, v)."""
        t, q, v, _ = self.split(list(args))
        n = self.sys.reduction_iterations
        tag, qc = flow_jet(lambda T_, Q_, V_: self.reduced_accel(n, T_, Q_, V_), t, q, v, 3)
        Q, V, A = jets_from_coeffs(tag, qc, 2)
        _, kappa, dq = self.ladder(Jet([t, 1.0, 0.0], tag), Q, V, A)
        return list(dq) + list(kappa)

    # -- structure -------------------------------------------------------------
    def probe_states(self, count: int = 3):
        rng = np.random.default_rng(20240917)
        for _ in range(count):
            t = float(rng.uniform(0.1, 1.0))
            q = tuple(float(x) for x in rng.uniform(0.2, 1.2, self.N))
            v = tuple(float(x) for x in rng.uniform(0.2, 1.2, self.N))
            s = ()
            if self.A:
                s0 = float(getattr(self.sys.closure, "entropy0", 1.0))
                s = (s0 + float(rng.uniform(0.1, 0.5)),)
            yield t, q, v, s

    @property
    def partition(self) -> Partition:
        if self._partition is None:
            self._partition = self._detect_partition()
        return self._partition

    def _detect_partition(self) -> Partition:
        N = self.N
        labels = self.sys.labels
        if self.sys.is_reduced:
            return Partition(tuple(range(N)), (), labels)
        massless = [True] * N
        samples = []
        for t, q, v, s in self.probe_states():
            T = self.terms(t, q, v, s, "full")
            samples.append(T)
            for i in range(N):
                if any(float(T.M[i][j]) != 0.0 or float(T.M[j][i]) != 0.0 for j in range(N)):
                    massless[i] = False
        first = tuple(i for i in range(N) if massless[i])
        second = tuple(i for i in range(N) if not massless[i])
        for T in samples:
            if first:
                J = [[float(T.Jv[i][j]) - float(T.Bq[i][j]) for j in first] for i in first]
                try:
                    linalg.lu_factor(J)
                except SingularMassMatrix:
                    bad = [labels[i] for i, row in zip(first, J) if all(x == 0.0 for x in row)] or [
                        labels[i] for i in first
                    ]
                    raise UnderdeterminedCoordinate(
                        f"coordinate(s) {', '.join(bad)} have neither inertia nor a solvable first-order equation"
                    ) from None
        return Partition(second, first, labels)

    # -- accelerations ---------------------------------------------------------
    def rates(self, t, q, vS, s=(), extra=None, guess=None, check_condition=False):
        """Velocities, second-order accelerations and aux rates at a state.

        ``vS`` holds velocities of the second-order coordinates only; the
        velocities of massless coordinates are solved for. Returns
        ``(v_full, a_S, sdot)`` as lists.
        """
        sys = self.sys
        if sys.is_reduced:
            a = list(self.kernel("reduced")(t, *q, *vS))
            return list(vS), a, []
        if self.source.k_order == 2:
            raise NotReduced(
                f"{sys.name or 'system'} has acceleration-dependent K; apply order_reduce before integrating"
            )
        part = self.partition
        S, F = part.second_order, part.first_order
        N = self.N
        if not F and not self.A:
            out = self.kernel("mrhs")(t, *q, *vS)
            NN = N * N
            rhs = out[NN:]
            if extra is not None:
                rhs = [r + e for r, e in zip(rhs, extra)]
            M = [out[i * N : (i + 1) * N] for i in range(N)]
            return list(vS), linalg.solve(M, rhs, check_condition=check_condition), []
        v = [0.0] * N
        for k, i in enumerate(S):
            v[i] = vS[k]
        sdot = [0.0] * self.A
        if F:
            if guess is not None:
                for k, i in enumerate(F):
                    v[i] = guess[k]
            T = self._solve_massless(t, q, v, s, sdot, extra)
        else:
            T = self.fast_terms(t, q, v, s)
        aS = self._solve_inertial(T, S, v, sdot, extra, check_condition)
        if self.A:
            sdot = self.closure_rate(t, q, v, s, aS, T)
            if any(T.Bs[i][k] != 0.0 for i in range(N) for k in range(self.A)):
                aS = self._solve_inertial(T, S, v, sdot, extra, check_condition)
        return v, aS, sdot

    def _solve_inertial(self, T: Terms, S, v, sdot, extra, check_condition) -> list:
        if not S:
            return []
        rhs = T.rhs(S, v, sdot, extra)
        M = [[T.M[i][j] for j in S] for i in S]
        return linalg.solve(M, rhs, check_condition=check_condition)

    def _solve_massless(self, t, q, v, s, sdot, extra) -> Terms:
        F = self.partition.first_order
        for _ in range(NEWTON_MAX_ITER):
            T = self.fast_terms(t, q, v, s)
            R = T.rhs(F, v, sdot, extra)
            scale = 1.0 + max(abs(T.P[i]) + abs(T.Bt[i]) for i in F)
            if max(abs(r) for r in R) <= NEWTON_TOL * scale:
                return T
            J = [[T.Jv[i][j] - T.Bq[i][j] for j in F] for i in F]
            step = linalg.solve(J, R)
            for k, i in enumerate(F):
                v[i] = v[i] - step[k]
        raise UnderdeterminedCoordinate("first-order velocity equation did not converge")

    def closure_rate(self, t, q, v, s, aS, T: Terms | None = None) -> list:
        """Entropy rate enforcing d(calE)/dt = external power.

        With T(S) = -dL/dS this is
        sdot = (P_ext + dL/dt - v . dK/dq- - a . kappa) / T(S).
        """
        closure = self.sys.closure
        lag = self.lagrangian_parts(t, q, v, s)
        pot = self.potential_parts(t, q, v, s)
        temperature = -lag["ds"][0]
        if not temperature > 0.0:
            raise NonpositiveTemperature(f"temperature {temperature!r} is not positive", {"t": t, "s": list(s)})
        part = self.partition
        a = [0.0] * self.N
        for k, i in enumerate(part.second_order):
            a[i] = aS[k]
        if any(pot["kappa"][i] != 0.0 for i in part.first_order):
            a = self.full_acceleration(t, q, v, s, aS)
        power = float(closure.external_power(t, tuple(q), tuple(v))) if closure.external_power else 0.0
        num = power + lag["dt"]
        num -= sum(vi * k for vi, k in zip(v, pot["dq_minus"]))
        num -= sum(ai * k for ai, k in zip(a, pot["kappa"]))
        return [num / temperature]

    def full_acceleration(self, t, q, v, s, aS) -> list:
        """Accelerations including massless coordinates.

        The massless rows R_F(t, q, v) = 0 are differentiated along the flow
        with a degree-1 time jet: dR/dt (at a_F = 0) + J a_F = 0.
        """
        part = self.partition
        S, F = part.second_order, part.first_order
        N = self.N
        a = [0.0] * N
        for k, i in enumerate(S):
            a[i] = aS[k]
        if not F:
            return a
        tag = new_tag()
        tj = Jet([t, 1.0], tag)
        qj = [Jet([q[i], v[i]], tag) for i in range(N)]
        vj = [Jet([v[i], a[i]], tag) for i in range(N)]
        sj = tuple(s)
        T = self.terms(tj, qj, vj, sj, "full")
        R = T.rhs(F, vj)
        dR = [coeff(r, 1, tag) for r in R]
        Tf = self.fast_terms(t, q, v, s)
        J = [[Tf.Jv[i][j] - Tf.Bq[i][j] for j in F] for i in F]
        aF = linalg.solve(J, [-x for x in dR])
        for k, i in enumerate(F):
            a[i] = aF[k]
        return a


def require_acceleration(a, why: str):
    if a is None:
        raise MissingAcceleration(why)
    return a
