"""Acceptance criteria 1 to 9, one test class per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

from __future__ import annotations

import math
import time
import zlib

import numpy as np
import pytest
from scipy.integrate import cumulative_simpson, solve_ivp

from noncons.autodiff import Dual, DoubledPoint, eval_with_gradients, parse_direction
from noncons.fields import (
    FieldPoint,
    FieldState,
    Grid1D,
    coupled_scalars,
    evolve_field,
    field_energy,
    max_stable_dt,
    stress_balance_residual,
    wave,
)
from noncons.mechanics import integrate, order_reduce, state_rates
from noncons.noether import (
    PhysicalState,
    balance_residual,
    current_rate,
    energy_rate,
    noether_current,
    numeric_derivative,
    total_energy,
)
from noncons.systems import Drive, ald_charge, coupled_oscillators, get_entry, list_systems, maxwell_element_closed, rlc_circuit

RNG = np.random.default_rng(7)


def criterion(number: int, title: str):
    return pytest.mark.criterion(number, title)


def report(number: int, text: str):
    print(f"[criterion {number}] {text}")


# --------------------------------------------------------------------------- 1


@criterion(1, "damped oscillator closed form, rk4 dt=1e-3, err < 1e-6, < 1 s")
def test_c1_damped_oscillator():
    sys = get_entry("damped_oscillator").build(m=1.0, k=1.0, lam=0.1)
    start = time.perf_counter()
    traj = integrate(sys, [[1.0], [0.0]], (0.0, 10.0), 1e-3)
    elapsed = time.perf_counter() - start
    t = traj.times
    wd = math.sqrt(1.0 - 0.05**2)
    exact = np.exp(-0.05 * t) * (np.cos(wd * t) + 0.05 / wd * np.sin(wd * t))
    err = float(np.max(np.abs(traj.q[:, 0] - exact)))
    report(1, f"max error {err:.3e}, runtime {elapsed:.3f} s")
    assert t[-1] == pytest.approx(10.0)
    assert err < 1e-6
    assert elapsed < 1.0


# --------------------------------------------------------------------------- 2

# every mechanics entry of the catalog, with a nontrivial drive where it has one
ENERGY_CASES = {
    "damped_oscillator": (dict(m=1.0, k=1.0, lam=0.1, F=Drive("sin", 0.5, 1.3)), [[1.0], [0.0]]),
    "maxwell_element": (dict(m=1.0, k=2.0, lam=0.5, F=Drive("cos", 0.3, 0.9)), [[1.0, 0.2], [0.0, 0.0]]),
    "maxwell_element_closed": (
        dict(m=1.0, k=1.4, lam_tilde=lambda S: 0.5 * (1 + S), U=lambda S: 2.0 * S, F=Drive("sin", 0.2, 1.7)),
        [[1.0, 0.0], [0.0, 0.0], [0.1]],
    ),
    "ald_charge": (dict(m=1.0, tau=0.01, F=Drive("circular", 0.25, 0.5)), [[1.0, 0.0, 0.0], [0.0, 0.5, 0.0]]),
    "rlc": (dict(R=0.9, L=1.3, C=0.6, V=Drive("sin", 1.0, 1.0), Q_C0=0.2), [[0.0, 0.0], [0.0, 0.0]]),
    "coupled_oscillators": (dict(m=1.0, omega=1.0, M=1.0, Omega=1.0, lam=0.1), None),
}


def energy_systems():
    out = []
    for entry in list_systems():
        if entry.kind != "mechanics":
            continue
        params, init = ENERGY_CASES[entry.ident]
        built = entry.build(**params)
        if entry.ident == "coupled_oscillators":
            closed, opened = built
            out.append(("coupled_oscillators/closed", closed, [[1.0, 0.0], [0.0, 0.0]], True))
            out.append(("coupled_oscillators/open", opened, [[1.0], [0.0]], False))
            continue
        if entry.extra.get("needs_reduction"):
            # three substitutions push the reduction floor below the integrator's
            built = order_reduce(built, 3)
        out.append((entry.ident, built, init, False))
    return out


@criterion(2, "energy law residual < 1e-7 at dt=1e-3 and O(dt^4) for every catalog system, < 10 s")
def test_c2_energy_law_every_system():
    covered = {e.ident for e in list_systems() if e.kind == "mechanics"}
    assert covered == set(ENERGY_CASES)
    start = time.perf_counter()
    failures = []
    for name, sys, init, conservative_linear in energy_systems():
        fine = balance_residual(integrate(sys, init, (0.0, 2.0), 1e-3), sys).max_residual
        # at dt = 1e-3 most residuals sit at round-off (or, for the reduced ALD
        # system, at the reduction floor), so the order is read off the finest
        # halving that is still truncation dominated: 100x above that level
        ladder = (0.1, 0.05, 0.025, 0.0125, 0.00625)
        res = [balance_residual(integrate(sys, init, (0.0, 2.0), dt), sys).max_residual for dt in ladder]
        usable = [i for i in range(len(ladder) - 1) if res[i + 1] >= 100.0 * fine]
        i = usable[-1]
        ratio = res[i] / res[i + 1]
        if conservative_linear:
            # no source term: the leading dt^4 coefficient vanishes for a linear
            # flow and the residual falls like dt^5, which is still O(dt^4)
            ok_ratio = ratio >= 16.0 * 0.75
        else:
            ok_ratio = abs(ratio - 16.0) <= 16.0 * 0.25
        report(2, f"{name}: residual {fine:.2e} at dt=1e-3, ratio {ratio:.2f} for dt {ladder[i]} -> {ladder[i + 1]}")
        if not (fine < 1e-7 and ok_ratio):
            failures.append(name)
    elapsed = time.perf_counter() - start
    report(2, f"total runtime {elapsed:.2f} s")
    assert not failures
    assert elapsed < 10.0


# --------------------------------------------------------------------------- 3


@criterion(3, "open (memory) vs closed two-oscillator q(t), gap < 1e-4, converging in dt, < 30 s")
def test_c3_integrate_out_consistency():
    closed, opened = coupled_oscillators(1.0, 1.0, 1.0, 1.0, 0.1)
    start = time.perf_counter()
    gaps = []
    for dt in (4e-3, 2e-3, 1e-3):
        a = integrate(closed, [[1.0, 0.0], [0.0, 0.0]], (0.0, 10.0), dt)
        b = integrate(opened, [[1.0], [0.0]], (0.0, 10.0), dt)
        np.testing.assert_allclose(a.times, b.times)
        gaps.append(float(np.max(np.abs(a.q[:, 0] - b.q[:, 0]))))
    elapsed = time.perf_counter() - start
    orders = [math.log2(gaps[i] / gaps[i + 1]) for i in range(2)]
    report(3, f"gaps {gaps}, observed orders {orders}, runtime {elapsed:.2f} s")
    assert gaps[-1] < 1e-4
    # at least first order (the trapezoid history rule delivers second)
    assert all(p >= 0.75 for p in orders)
    assert elapsed < 30.0


# --------------------------------------------------------------------------- 4


@criterion(4, "ALD: Larmor balance residual < 1e-6 (circular drive); Schott-shifted E and J at random states to 1e-10")
class TestC4RadiationReaction:
    def test_larmor_balance(self):
        m, tau, w, r = 1.0, 0.01, 0.5, 1.0
        F = Drive("circular", m * w * w * r, w)
        sys = order_reduce(ald_charge(m, tau, F), 1)
        traj = integrate(sys, [[r, 0.0, 0.0], [0.0, r * w, 0.0]], (0.0, 20.0), 1e-3)
        v, a = traj.v, traj.a
        # the displayed energy and its displayed rate, assembled by hand
        calE = 0.5 * m * np.sum(v * v, axis=1) - tau * np.sum(v * a, axis=1)
        Ft = np.array([F(t) for t in traj.times])
        residual = numeric_derivative(calE, traj.dt) + tau * np.sum(a * a, axis=1) - np.sum(v * Ft, axis=1)
        worst = float(np.max(np.abs(residual)))
        report(4, f"Larmor balance residual {worst:.2e}")
        assert worst < 1e-6

    def test_displays_at_random_states(self):
        m, tau = 1.3, 0.02
        F = Drive("circular", 0.7, 1.1)
        sys = ald_charge(m, tau, F)
        labels = ("Lx", "Ly", "Lz")
        gens = {g.label: g for g in sys.generators}
        worst = 0.0
        for _ in range(100):
            t = RNG.uniform(0, 10)
            x, v, a = RNG.normal(size=(3, 3))
            st = PhysicalState(t, tuple(x), tuple(v), a=tuple(a))
            Ft = np.asarray(F(t))
            want_E = 0.5 * m * v @ v - tau * v @ a
            want_dE = -tau * a @ a + v @ Ft
            want_J = np.cross(x, m * v - tau * a)
            want_dJ = -tau * np.cross(v, a) + np.cross(x, Ft)
            got = [total_energy(sys, st), energy_rate(sys, st)]
            want = [want_E, want_dE]
            for k, label in enumerate(labels):
                got += [noether_current(sys, gens[label], st)[1], current_rate(sys, gens[label], st)]
                want += [want_J[k], want_dJ[k]]
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)
            worst = max(worst, float(np.max(np.abs(np.subtract(got, want)))))
        report(4, f"max display mismatch {worst:.1e}")


# --------------------------------------------------------------------------- 5


@criterion(5, "closed Maxwell element: calE - int x'F constant to 1e-6 on [0,20], S nondecreasing")
def test_c5_closed_maxwell():
    m, k, T0 = 1.0, 1.5, 2.0
    lam_tilde = lambda S: 0.8 * (1.0 + 0.5 * S)  # noqa: E731
    U = lambda S: T0 * S  # noqa: E731
    F = Drive("sin", 0.6, 1.3)
    sys = maxwell_element_closed(m, k, lam_tilde, U, F, S0=0.2)
    traj = integrate(sys, [[1.0, 0.0], [0.0, 0.0], [0.2]], (0.0, 20.0), 1e-3)
    x, d = traj.q[:, 0], traj.q[:, 1]
    xdot, S = traj.v[:, 0], traj.aux[:, 0]
    # mechanical plus internal energy, and the work done by the drive
    calE = 0.5 * m * xdot**2 + 0.5 * k * (x - d) ** 2 + U(S)
    work = cumulative_simpson(xdot * np.array([F(t) for t in traj.times]), x=traj.times, initial=0.0)
    drift = calE - work - (calE[0] - work[0])
    worst = float(np.max(np.abs(drift)))
    steps = np.diff(S)
    report(5, f"max closure drift {worst:.2e}, min entropy step {steps.min():.2e}, S: {S[0]:.3f} -> {S[-1]:.3f}")
    assert worst < 1e-6
    assert np.all(steps >= 0.0)
    assert S[-1] > S[0]


# --------------------------------------------------------------------------- 6


@criterion(6, "RLC: loop equations at random states to 1e-10, driven solution vs linear ODE to 1e-6")
class TestC6Kirchhoff:
    def test_loop_equations_symbolic(self):
        from test_systems import doubled_kirchhoff

        import sympy as sp

        R, L, C, Q_C0 = 0.7, 1.9, 0.4, -0.3
        t, V, q1, q2, eqs = doubled_kirchhoff(R, L, C, Q_C0)
        q1d, q2d, q2dd, x1, x2, Vv = sp.symbols("q1d q2d q2dd x1 x2 Vv")
        swap = {sp.diff(q2, t, 2): q2dd, sp.diff(q1, t): q1d, sp.diff(q2, t): q2d}
        sol = sp.solve([e.subs(swap).subs({q1: x1, q2: x2, V: Vv}) for e in eqs], [q1d, q2dd], dict=True)[0]
        f1 = sp.lambdify((x1, x2, Vv), sol[q1d])
        f2 = sp.lambdify((x1, x2, Vv), sol[q2dd])
        sys = rlc_circuit(R, L, C, Drive("cos", 1.5, 0.7), Q_C0)
        worst = 0.0
        for _ in range(100):
            tt = RNG.uniform(0, 10)
            q, v = RNG.uniform(-2, 2, (2, 2))
            r = state_rates(sys, tt, q, v)
            Vt = 1.5 * math.cos(0.7 * tt)
            got = np.array([r.velocity[0], r.acceleration[1]])
            want = np.array([f1(*q, Vt), f2(*q, Vt)], dtype=float)
            np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)
            # the two loops: R I_R = Q_C / C and L I_L' + Q_C / C = V
            Q_C = -q[0] + q[1] + Q_C0
            np.testing.assert_allclose(R * got[0], Q_C / C, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(L * got[1] + Q_C / C, Vt, rtol=1e-10, atol=1e-12)
            worst = max(worst, float(np.max(np.abs(got - want))))
        report(6, f"max loop-equation mismatch {worst:.1e}")

    def test_driven_solution(self):
        R, L, C = 1.2, 0.8, 0.5
        V = Drive("sin", 2.0, 1.7)
        sys = rlc_circuit(R, L, C, V)
        traj = integrate(sys, [[0.0, 0.0], [0.0, 0.0]], (0.0, 10.0), 1e-3)

        # charges (q1, q2) and inductor current, written from the circuit directly
        A = np.array([[-1 / (R * C), 1 / (R * C), 0.0], [0.0, 0.0, 1.0], [1 / (L * C), -1 / (L * C), 0.0]])
        b = np.array([0.0, 0.0, 1.0 / L])
        ref = solve_ivp(
            lambda t, y: A @ y + b * V(t), (0.0, 10.0), [0.0, 0.0, 0.0],
            t_eval=traj.times, method="DOP853", rtol=1e-12, atol=1e-14,
        )
        err = float(np.max(np.abs(np.column_stack([traj.q, traj.v[:, 1]]) - ref.y.T)))
        report(6, f"driven solution error {err:.2e}")
        assert err < 1e-6


# --------------------------------------------------------------------------- 7


def _damped_wave_balance(n: int, dt: float, t_final: float, every: int = 1):
    fs = wave(gamma=0.2, grid=Grid1D(0.0, 1.0, n))
    phi = fs.grid.standing_mode(1)[None]
    series = evolve_field(fs, FieldState(0.0, phi, 0.3 * phi, fs.grid), t_final, dt, save_every=every)
    return stress_balance_residual(series, fs)


@criterion(7, "field balance O(dt^4 + dx^2), monotone damped energy, n=256 conservation to 1e-6, < 60 s")
class TestC7FieldBalance:
    ELAPSED: list[float] = []

    @pytest.fixture(autouse=True)
    def _timed(self):
        start = time.perf_counter()
        yield
        self.ELAPSED.append(time.perf_counter() - start)

    def test_time_order(self):
        # Richardson on the residual field: the dx^2 part cancels between runs
        # on the same grid, leaving the dt^4 part
        runs = [_damped_wave_balance(16, dt, 1.0, every) for dt, every in ((0.025, 1), (0.0125, 2), (0.00625, 4))]
        d1 = np.max(np.abs(runs[0].residual - runs[1].residual))
        d2 = np.max(np.abs(runs[1].residual - runs[2].residual))
        order = math.log2(d1 / d2)
        report(7, f"time order {order:.3f}")
        assert abs(order - 4.0) <= 0.25 * 4.0

    def test_space_order(self):
        res = [_damped_wave_balance(n, 0.25 / 256, 0.5).max_residual for n in (32, 64, 128)]
        orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
        report(7, f"space orders {orders}")
        assert all(abs(p - 2.0) <= 0.25 * 2.0 for p in orders)

    @pytest.mark.parametrize("gamma", [0.05, 0.3, 1.0])
    def test_energy_monotone(self, gamma):
        fs = wave(gamma=gamma, grid=Grid1D(0.0, 1.0, 64))
        g = fs.grid
        phi = np.exp(-((g.x - 0.4) ** 2) / 0.02)[None]
        series = evolve_field(fs, FieldState(0.0, phi, -g.central(phi), g), 3.0, max_stable_dt(fs))
        E = np.array([field_energy(fs, series.state(i)) for i in range(len(series))])
        assert np.all(np.diff(E) <= 0.0)
        assert E[-1] < E[0]

    def test_conservation_ten_crossings(self):
        fs = wave(grid=Grid1D(0.0, 1.0, 256))
        g = fs.grid
        phi = np.exp(-((g.x - 0.5) ** 2) / 0.01)[None]
        # domain length 1 at c = 1: ten crossings take t = 10
        series = evolve_field(fs, FieldState(0.0, phi, -g.central(phi), g), 10.0, max_stable_dt(fs), save_every=64)
        E = np.array([field_energy(fs, series.state(i)) for i in range(len(series))])
        drift = float(np.max(np.abs(E - E[0])) / E[0])
        report(7, f"relative energy drift over 10 crossings {drift:.2e}")
        assert drift < 1e-6

    def test_runtime(self):
        # runs last in the class: the sum covers every criterion 7 check above
        elapsed = sum(self.ELAPSED)
        report(7, f"criterion 7 runtime {elapsed:.2f} s over {len(self.ELAPSED)} checks")
        assert elapsed < 60.0


# --------------------------------------------------------------------------- 8


def _random_point(sys, rng) -> DoubledPoint:
    n = sys.dim
    second = sys.source.k_order == 2
    return DoubledPoint(
        float(rng.uniform(0, 5)),
        tuple(rng.uniform(-1.5, 1.5, n)), tuple(rng.uniform(-1.5, 1.5, n)),
        tuple(rng.uniform(-1.5, 1.5, n)), tuple(rng.uniform(-1.5, 1.5, n)),
        tuple(rng.uniform(-1.5, 1.5, n)) if second else None,
        tuple(rng.uniform(-1.5, 1.5, n)) if second else None,
        tuple(rng.uniform(0.1, 2.0, sys.aux_dim)),
    )


def _directions(sys) -> list[str]:
    names = ["q_plus", "q_minus", "v_plus", "v_minus"]
    if sys.source.k_order == 2:
        names += ["a_plus", "a_minus"]
    dirs = ["t"] + [f"{c}[{i}]" for c in names for i in range(sys.dim)]
    return dirs + [f"aux[{i}]" for i in range(sys.aux_dim)]


def _shift(p: DoubledPoint, direction: str, h: float) -> DoubledPoint:
    d = parse_direction(direction)
    return p.with_values({d: p.get(d) + h})


def _check_gradients(f, points, dirs) -> float:
    worst = 0.0
    for p in points:
        ad = eval_with_gradients(f, p, dirs)
        for k, d in enumerate(dirs):
            x = float(p.get(parse_direction(d)))
            h = 1e-5 * max(1.0, abs(x))
            fd = (float(f(_shift(p, d, h))) - float(f(_shift(p, d, -h)))) / (2 * h)
            got = float(ad.d(k))
            # relative tolerance with a floor for derivatives that vanish
            scale = max(abs(got), abs(fd), 1e-3)
            worst = max(worst, abs(got - fd) / scale)
    return worst


def catalog_functions():
    for name, sys, _, _ in energy_systems():
        base = sys.parent if sys.is_reduced else sys
        yield f"{name}:L", base, lambda p, s=base: s.lagrangian(p.t, p.q_plus, p.v_plus, p.aux)
        yield f"{name}:K", base, base.potential
        yield f"{name}:Lambda", base, base.doubled_lagrangian


def _field_gradient_check(fs, rng) -> float:
    nf = fs.n_fields
    worst = 0.0
    for _ in range(100):
        vals = [list(rng.uniform(-1.5, 1.5, nf)) for _ in range(6)] + [float(rng.uniform(0, 1)), float(rng.uniform(0, 5))]
        flat = [(i, j) for i in range(6) for j in range(nf)] + [(6, None), (7, None)]

        def build(seeded=None, bump=None):
            parts = [list(v) if isinstance(v, list) else v for v in vals]
            if seeded is not None:
                for k, (i, j) in enumerate(flat):
                    base = parts[i][j] if j is not None else parts[i]
                    dual = Dual(base, {k: 1.0})
                    if j is None:
                        parts[i] = dual
                    else:
                        parts[i][j] = dual
            if bump is not None:
                (i, j), h = bump
                if j is None:
                    parts[i] = parts[i] + h
                else:
                    parts[i][j] = parts[i][j] + h
            return FieldPoint(*(tuple(p) if isinstance(p, list) else p for p in parts))

        ad = fs.omega(build(seeded=True))
        for k, (i, j) in enumerate(flat):
            x = vals[i][j] if j is not None else vals[i]
            h = 1e-5 * max(1.0, abs(x))
            fd = (float(fs.omega(build(bump=((i, j), h)))) - float(fs.omega(build(bump=((i, j), -h))))) / (2 * h)
            got = float(ad.d(k)) if isinstance(ad, Dual) else 0.0
            worst = max(worst, abs(got - fd) / max(abs(got), abs(fd), 1e-3))
    return worst


@criterion(8, "AD first derivatives of catalog L, K and field densities vs central differences, rel 1e-6, 100 points each")
class TestC8Derivatives:
    @pytest.mark.parametrize("name, sys, f", list(catalog_functions()), ids=lambda x: x if isinstance(x, str) else "")
    def test_mechanics(self, name, sys, f):
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        worst = _check_gradients(f, [_random_point(sys, rng) for _ in range(100)], _directions(sys))
        report(8, f"{name}: worst relative mismatch {worst:.1e}")
        assert worst < 1e-6

    @pytest.mark.parametrize(
        "label, fs",
        [
            ("wave", wave(c=1.3)),
            ("wave damped", wave(gamma=0.4)),
            ("wave damped variant v", wave(gamma=0.4, variant="v")),
            ("coupled scalars", coupled_scalars(0.6)),
        ],
        ids=lambda x: x if isinstance(x, str) else "",
    )
    def test_fields(self, label, fs):
        worst = _field_gradient_check(fs, np.random.default_rng(zlib.crc32(label.encode())))
        report(8, f"{label}: worst relative mismatch {worst:.1e}")
        assert worst < 1e-6


# --------------------------------------------------------------------------- 9


@criterion(9, "oddness, plus-equation triviality and K=0 conservation property suites, zero failures")
class TestC9Invariants:
    def test_k_oddness(self):
        import test_properties as props

        props.test_k_odd_under_minus_flip()
        props.test_doubled_lagrangian_odd()
        props.test_field_density_odd()

    def test_plus_equation_trivial(self):
        import test_properties as props

        props.test_plus_equation_vanishes()

    def test_conservation_without_k(self):
        import test_properties as props

        props.test_pointwise_rates_vanish()
        props.test_trajectory_conserves_energy_and_angular_momentum()
        props.test_coupled_scalars_energy()
