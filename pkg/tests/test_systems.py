"""Catalog constructors against independent references."""

from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import solve_ivp

from noncons.errors import InputError
from noncons.mechanics import first_order_coordinates, integrate, order_reduce, state_rates
from noncons.noether import balance_residual
from noncons.systems import (
    CATALOG,
    Drive,
    ald_charge,
    as_drive,
    coupled_oscillators,
    get_entry,
    list_systems,
    maxwell_element_closed,
    rlc_charges,
    rlc_circuit,
)

RNG = np.random.default_rng(20240611)

MECHANICS = [e for e in list_systems() if e.kind == "mechanics"]

PARAMS = {
    "damped_oscillator": dict(m=1.3, k=0.7, lam=0.2, F=Drive("sin", 0.4, 1.1)),
    "maxwell_element": dict(m=0.8, k=1.7, lam=0.6, F=Drive("cos", 0.3, 0.9)),
    "maxwell_element_closed": dict(m=1.1, k=1.4, lam_tilde=lambda S: 0.5 * (1.0 + S), U=lambda S: 2.0 * S, F=Drive("sin", 0.2, 1.7)),
    "ald_charge": dict(m=1.2, tau=0.03, F=Drive("circular", 0.5, 0.8)),
    "rlc": dict(R=0.9, L=1.3, C=0.6, V=Drive("sin", 1.0, 1.0), Q_C0=0.2),
    "coupled_oscillators": dict(m=1.0, omega=1.2, M=0.7, Omega=0.9, lam=0.15),
}


def framework_rates(entry, kw, t, q, v, s):
    built = entry.build(**kw)
    if entry.ident == "coupled_oscillators":
        built = built[0]
    if entry.extra.get("needs_reduction"):
        built = order_reduce(built, 1)
    r = state_rates(built, t, q, v, s if built.aux_dim else None)
    part = first_order_coordinates(built)
    out = []
    for i in range(built.dim):
        out.append(r.velocity[i] if i in part.first_order else r.acceleration[i])
    return np.array(out + list(r.aux_rate))


class TestReferenceRhs:
    @pytest.mark.parametrize("entry", MECHANICS, ids=lambda e: e.ident)
    def test_random_states(self, entry):
        kw = PARAMS[entry.ident]
        ref = entry.reference_rhs(**kw)
        n = len(entry.coordinates)
        for _ in range(25):
            t = RNG.uniform(0, 5)
            q = RNG.uniform(-1, 1, n)
            v = RNG.uniform(-1, 1, n)
            s = (RNG.uniform(0, 2),)
            got = framework_rates(entry, kw, t, q, v, s)
            want = np.atleast_1d(np.asarray(ref(t, q, v, s), dtype=float))
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def doubled_kirchhoff(R, L, C, Q_C0):
    """Loop equations from the doubled action, derived symbolically."""
    t = sp.symbols("t")
    V = sp.Function("V")(t)
    q1p, q2p, q1m, q2m = (sp.Function(n)(t) for n in ("q1p", "q2p", "q1m", "q2m"))

    def Lprime(q1, q2):
        return sp.Rational(1, 2) * L * sp.diff(q2, t) ** 2 - (-q1 + q2 + Q_C0) ** 2 / (2 * C)

    half = sp.Rational(1, 2)
    lam = (
        Lprime(q1p + half * q1m, q2p + half * q2m)
        - Lprime(q1p - half * q1m, q2p - half * q2m)
        + q2m * V
        - R * q1m * sp.diff(q1p, t)
    )
    pl = {q1m: 0, q2m: 0}
    eqs = []
    for qm in (q1m, q2m):
        el = sp.diff(lam, qm) - sp.diff(sp.diff(lam, sp.diff(qm, t)), t)
        el = el.subs({sp.diff(q1m, t, 2): 0, sp.diff(q2m, t, 2): 0, sp.diff(q1m, t): 0, sp.diff(q2m, t): 0}).subs(pl)
        eqs.append(sp.simplify(el))
    return t, V, q1p, q2p, eqs


class TestKirchhoff:
    def test_loop_equations_at_random_states(self):
        R, L, C, Q_C0 = 0.9, 1.3, 0.6, 0.2
        t, V, q1, q2, eqs = doubled_kirchhoff(R, L, C, Q_C0)
        q1d, q2d, q2dd = sp.symbols("q1d q2d q2dd")
        x1, x2, tv, Vv = sp.symbols("x1 x2 tv Vv")
        subs = lambda e: e.subs({sp.diff(q2, t, 2): q2dd, sp.diff(q1, t): q1d, sp.diff(q2, t): q2d}).subs(
            {q1: x1, q2: x2, V: Vv}
        )
        # solve the symbolic loop equations for (q1', q2'')
        sol = sp.solve([subs(e) for e in eqs], [q1d, q2dd], dict=True)[0]
        f_q1d = sp.lambdify((x1, x2, Vv), sol[q1d])
        f_q2dd = sp.lambdify((x1, x2, Vv), sol[q2dd])
        sys = rlc_circuit(R, L, C, Drive("sin", 1.0, 1.0), Q_C0)
        for _ in range(50):
            tt = RNG.uniform(0, 10)
            q = RNG.uniform(-2, 2, 2)
            v = RNG.uniform(-2, 2, 2)
            r = state_rates(sys, tt, q, v)
            Vt = math.sin(tt)
            assert r.velocity[0] == pytest.approx(f_q1d(*q, Vt), rel=1e-10, abs=1e-12)
            assert r.acceleration[1] == pytest.approx(f_q2dd(*q, Vt), rel=1e-10, abs=1e-12)
            # resistor loop: R I_R = Q_C / C
            Q = rlc_charges(q, Q_C0)
            assert R * r.velocity[0] == pytest.approx(Q["Q_C"] / C, rel=1e-10, abs=1e-12)
            # inductor loop as derived from L' and K: L I_L' + Q_C / C = V
            assert L * r.acceleration[1] + Q["Q_C"] / C == pytest.approx(Vt, rel=1e-10, abs=1e-12)

    def test_driven_solution(self):
        R, L, C = 1.0, 1.0, 1.0
        sys = rlc_circuit(R, L, C, Drive("sin", 1.0, 1.0))
        traj = integrate(sys, [[0.0, 0.0], [0.0, 0.0]], (0, 10), 1e-3)

        def rhs(t, y):
            q1, q2, i2 = y
            qc = -q1 + q2
            return [qc / (R * C), i2, (math.sin(t) - qc / C) / L]

        ref = solve_ivp(rhs, (0, 10), [0, 0, 0], t_eval=traj.times, method="DOP853", rtol=1e-12, atol=1e-13)
        assert np.max(np.abs(traj.q[:, 1] - ref.y[1])) < 1e-6
        assert np.max(np.abs(traj.q[:, 0] - ref.y[0])) < 1e-6

    def test_equilibrium(self):
        traj = integrate(rlc_circuit(), [[0.0, 0.0], [0.0, 0.0]], (0, 1), 0.01)
        np.testing.assert_array_equal(traj.q, 0.0)

    def test_lc_limit(self):
        # a huge resistance freezes q1, leaving an LC loop at 1/sqrt(LC)
        sys = rlc_circuit(R=1e9, L=2.0, C=0.5)
        traj = integrate(sys, [[0.0, 1.0], [0.0, 0.0]], (0, 6), 1e-3)
        np.testing.assert_allclose(traj.q[:, 1], np.cos(traj.times), atol=1e-6)


class TestAld:
    def test_circular_orbit_power(self):
        m, tau, w, r = 1.0, 0.01, 0.5, 1.0
        sys = order_reduce(ald_charge(m, tau, Drive("circular", m * w * w * r, w)), 2)
        traj = integrate(sys, [[r, 0, 0], [0, r * w, 0]], (0, 20), 1e-2)
        power = tau * np.sum(traj.a**2, axis=1)
        np.testing.assert_allclose(power, tau * w**4 * r**2, rtol=0.01)

    def test_current_shift_matches_display(self):
        from noncons.noether import PhysicalState, noether_current

        sys = ald_charge(1.3, 0.02)
        for _ in range(20):
            x, v, a = RNG.normal(size=(3, 3))
            st = PhysicalState(0.0, tuple(x), tuple(v), a=tuple(a))
            # calJ = x cross (m v - tau a)
            want = np.cross(x, 1.3 * v - 0.02 * a)
            for k, label in enumerate(("Lx", "Ly", "Lz")):
                g = next(g for g in sys.generators if g.label == label)
                assert noether_current(sys, g, st)[1] == pytest.approx(want[k], rel=1e-10, abs=1e-12)


class TestCoupled:
    def test_uncoupled_independent(self):
        closed, _ = coupled_oscillators(omega=1.0, Omega=2.0, lam=0.0)
        traj = integrate(closed, [[1.0, 0.5], [0.0, 0.0]], (0, 5), 1e-2)
        np.testing.assert_allclose(traj.q[:, 0], np.cos(traj.times), atol=1e-8)
        np.testing.assert_allclose(traj.q[:, 1], 0.5 * np.cos(2 * traj.times), atol=1e-7)

    def test_closed_energy(self):
        closed, _ = coupled_oscillators(lam=0.3)
        traj = integrate(closed, [[1.0, -0.2], [0.1, 0.0]], (0, 10), 1e-3)
        assert np.ptp(balance_residual(traj, closed).calE) < 1e-8


class TestClosedMaxwell:
    def test_linear_heating(self):
        sys = maxwell_element_closed(lam_tilde=0.7, S0=0.3)
        traj = integrate(sys, [[1.0, 0.0], [0.0, 0.0], [0.3]], (0, 5), 1e-3)
        S = traj.aux[:, 0]
        ddot = traj.v[:, 1]
        # S = S0 + lam int ddot^2 (T = 1)
        from noncons.noether import cumulative_integral

        np.testing.assert_allclose(S, 0.3 + 0.7 * cumulative_integral(ddot**2, traj.times), atol=1e-8)
        assert np.all(np.diff(S) >= 0)

    def test_growing_damping_still_monotone(self):
        sys = maxwell_element_closed(lam_tilde=lambda S: 0.5 * (1 + S), F=Drive("sin", 1.0, 2.0))
        traj = integrate(sys, [[1.0, 0.0], [0.0, 0.0]], (0, 10), 2e-3)
        assert np.all(np.diff(traj.aux[:, 0]) >= 0)


class TestRegistry:
    def test_sorted_and_complete(self):
        ids = [e.ident for e in list_systems()]
        assert ids == sorted(ids)
        for name in ("damped_oscillator", "rlc", "coupled_scalars_1d", "maxwell_element", "ald_charge"):
            assert name in CATALOG

    def test_tags_are_descriptive(self):
        assert "Kirchhoff voltage law" in get_entry("rlc").tags
        assert "linear damping" in get_entry("damped_oscillator").tags
        assert "two scalar fields" in get_entry("coupled_scalars_1d").tags

    def test_unknown_suggests(self):
        with pytest.raises(InputError, match="damped_oscillator"):
            get_entry("damped_osc")

    def test_schema(self):
        schema = get_entry("damped_oscillator").schema()
        assert schema["m"]["kind"] == "positive"
        assert schema["F"]["kind"] == "drive"

    @pytest.mark.parametrize("bad", [dict(m=-1.0), dict(k=0.0), dict(lam=-0.1), dict(m=float("nan"))])
    def test_invalid_params(self, bad):
        with pytest.raises(InputError):
            get_entry("damped_oscillator").build(**bad)

    def test_drive_presets(self):
        assert as_drive(None)(3.0) == 0.0
        assert as_drive(2.5)(1.0) == 2.5
        assert as_drive({"kind": "step", "amplitude": 2.0, "offset": 1.0})(0.5) == 0.0
        assert as_drive({"kind": "step", "amplitude": 2.0, "offset": 1.0})(1.5) == 2.0
        assert Drive("sin", 2.0, 3.0)(0.5) == pytest.approx(2.0 * math.sin(1.5))
        np.testing.assert_allclose(Drive("circular", 1.0, 1.0)(0.0), (-1.0, 0.0, 0.0))
        with pytest.raises(InputError):
            Drive("square")
