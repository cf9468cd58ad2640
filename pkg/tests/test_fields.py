"""1+1D fields: semidiscrete dynamics, stress bookkeeping and mode reduction."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncons.errors import CflViolation, InputError, NonFiniteState, TooFewSamples
from noncons.fields import (
    FieldState,
    Grid1D,
    coupled_scalars,
    evolve_field,
    field_energy,
    field_momentum,
    max_stable_dt,
    mode_oscillator_params,
    semidiscrete_rhs,
    stress_balance_residual,
    stress_tensor,
    wave,
)
from noncons.mechanics import integrate
from noncons.systems import coupled_oscillators


def standing(fs, mode=1, amp=1.0, vel=0.0):
    g = fs.grid
    phi = np.array([g.standing_mode(mode, amp)] * fs.n_fields)
    return FieldState(0.0, phi, vel * phi, g)


def projection(grid, f, mode):
    c = grid.standing_mode(mode)
    return float(np.dot(f, c) / np.dot(c, c))


class TestGrid:
    def test_spacing(self):
        assert Grid1D(0, 1, 10).dx == pytest.approx(0.1)
        assert Grid1D(0, 1, 11, "fixed").dx == pytest.approx(0.1)

    @pytest.mark.parametrize("kw", [dict(n=4), dict(x_max=-1.0), dict(boundary="open")])
    def test_invalid(self, kw):
        with pytest.raises(InputError):
            Grid1D(**kw)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(8, 64), st.integers(1, 3))
    def test_periodic_differences_annihilate_constants(self, n, mode):
        g = Grid1D(0, 2, n)
        np.testing.assert_allclose(g.forward(np.full(n, 3.0)), 0.0, atol=1e-12)
        # sum of a periodic difference telescopes to zero
        assert abs(np.sum(g.central(g.standing_mode(mode)))) < 1e-10


class TestSemidiscrete:
    def test_standing_mode_acceleration(self):
        errs = []
        for n in (32, 64):
            fs = wave(c=1.5, grid=Grid1D(0, 2, n))
            st = standing(fs, 2)
            acc = semidiscrete_rhs(fs, st)[0]
            k = fs.grid.wavenumber(2)
            kd = fs.grid.discrete_wavenumber(2)
            # exact for the three-point stencil, O(dx^2) against the continuum
            np.testing.assert_allclose(acc, -(1.5 * kd) ** 2 * st.phi[0], atol=1e-10)
            errs.append(np.max(np.abs(acc + (1.5 * k) ** 2 * st.phi[0])))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_constant_field(self):
        fs = wave(grid=Grid1D(0, 1, 16))
        st = FieldState(0.0, np.full((1, 16), 2.0), np.zeros((1, 16)), fs.grid)
        np.testing.assert_allclose(semidiscrete_rhs(fs, st), 0.0, atol=1e-14)

    def test_fixed_edges_pinned(self):
        fs = wave(grid=Grid1D(0, 1, 17, "fixed"))
        st = standing(fs, 1)
        series = evolve_field(fs, FieldState(0.0, np.sin(math.pi * fs.grid.x)[None], np.zeros((1, 17)), fs.grid), 0.5, 0.02)
        np.testing.assert_allclose(series.phi[:, 0, [0, -1]], 0.0, atol=1e-14)


class TestEvolve:
    def test_energy_and_momentum_conserved(self):
        fs = wave(grid=Grid1D(0, 1, 128))
        phi = np.exp(-((fs.grid.x - 0.5) ** 2) / 0.01)[None]
        st0 = FieldState(0.0, phi, -fs.grid.central(phi), fs.grid)
        series = evolve_field(fs, st0, 2.0, 0.5 * max_stable_dt(fs), save_every=32)
        E = [field_energy(fs, series.state(i)) for i in range(len(series))]
        P = [field_momentum(fs, series.state(i)) for i in range(len(series))]
        assert np.ptp(E) < 1e-6 * E[0]
        assert np.ptp(P) < 1e-6 * abs(P[0])

    def test_damped_mode_envelope(self):
        gamma = 0.1
        fs = wave(gamma=gamma, grid=Grid1D(0, 1, 16))
        dt = 0.5 * max_stable_dt(fs)
        series = evolve_field(fs, standing(fs, 1), 100.0, dt, save_every=10)
        kd = fs.grid.discrete_wavenumber(1)
        wd = math.sqrt(kd**2 - gamma**2 / 4)
        t = series.times
        exact = np.exp(-gamma * t / 2) * (np.cos(wd * t) + gamma / (2 * wd) * np.sin(wd * t))
        got = np.array([projection(fs.grid, series.phi[i, 0], 1) for i in range(len(t))])
        assert np.max(np.abs(got - exact) / np.exp(-gamma * t / 2)) < 0.01

    def test_energy_monotone_with_damping(self):
        fs = wave(gamma=0.3, grid=Grid1D(0, 1, 32))
        series = evolve_field(fs, standing(fs, 2, vel=1.0), 3.0, max_stable_dt(fs))
        E = np.array([field_energy(fs, series.state(i)) for i in range(len(series))])
        assert np.all(np.diff(E) <= 0.0)

    def test_dispersion_error_order(self):
        errs = []
        for n in (16, 32):
            g = Grid1D(0, 1, n)
            errs.append(abs(g.discrete_wavenumber(3) - g.wavenumber(3)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)

    def test_cfl(self):
        fs = wave(c=2.0, grid=Grid1D(0, 1, 16))
        with pytest.raises(CflViolation):
            evolve_field(fs, standing(fs), 1.0, 0.05)

    def test_blow_up(self):
        fs = coupled_scalars(g=1.0, n=16)
        st0 = FieldState(0.0, np.full((2, 16), 50.0), np.zeros((2, 16)), fs.grid)
        with np.errstate(all="ignore"), pytest.raises(NonFiniteState):
            evolve_field(fs, st0, 20.0, 0.01)


class TestStress:
    def test_free_wave_density(self):
        fs = wave(c=0.8, grid=Grid1D(0, 1, 32))
        st0 = standing(fs, 1, vel=0.5)
        s = stress_tensor(fs, st0)
        phix = fs.grid.central(st0.phi[0])
        np.testing.assert_allclose(s.T00, 0.5 * st0.dphi_dt[0] ** 2 + 0.5 * 0.64 * phix**2, atol=1e-14)

    def test_damping_without_kappa(self):
        fs = wave(gamma=0.4, grid=Grid1D(0, 1, 32))
        s = stress_tensor(fs, standing(fs, 1, vel=0.5))
        np.testing.assert_array_equal(s.kappa0, 0.0)
        np.testing.assert_array_equal(s.calT00, s.T00)

    def test_integrated_by_parts_variant(self):
        fs = wave(gamma=0.4, grid=Grid1D(0, 1, 32), variant="v")
        st0 = standing(fs, 1, vel=0.5)
        s = stress_tensor(fs, st0)
        np.testing.assert_allclose(s.kappa0[0], -0.4 * st0.phi[0], atol=1e-15)
        np.testing.assert_allclose(s.calT00 - s.T00, -0.4 * st0.phi[0] * st0.dphi_dt[0], atol=1e-15)

    def test_variant_is_antidamping(self):
        # -gamma phi-' phi+ = +gamma phi- phi+' - d/dt(gamma phi- phi+)
        g = Grid1D(0, 1, 32)
        st0 = standing(wave(grid=g), 2, vel=0.7)
        free = semidiscrete_rhs(wave(grid=g), st0)
        a = semidiscrete_rhs(wave(gamma=0.4, grid=g), st0) - free
        b = semidiscrete_rhs(wave(gamma=0.4, grid=g, variant="v"), st0) - free
        np.testing.assert_allclose(a, -0.4 * st0.dphi_dt, atol=1e-12)
        np.testing.assert_allclose(b, -a, atol=1e-12)

    def test_static_field_balance(self):
        fs = wave(grid=Grid1D(0, 1, 16))
        st0 = FieldState(0.0, np.full((1, 16), 0.3), np.zeros((1, 16)), fs.grid)
        bal = stress_balance_residual(evolve_field(fs, st0, 0.2, 0.02), fs)
        assert bal.max_residual == 0.0

    def test_damped_balance_converges_in_space(self):
        res = []
        for n in (32, 64):
            fs = wave(gamma=0.2, grid=Grid1D(0, 1, n))
            series = evolve_field(fs, standing(fs, 1, vel=0.3), 0.5, 0.25 / 128)
            bal = stress_balance_residual(series, fs)
            res.append(bal.max_residual)
            # the formula side carries the damping power -gamma phi_t^2
            np.testing.assert_allclose(bal.rhs, -0.2 * series.dphi_dt[:, 0] ** 2, atol=1e-14)
        assert res[0] / res[1] == pytest.approx(4.0, rel=0.1)

    def test_needs_snapshots(self):
        fs = wave(grid=Grid1D(0, 1, 16))
        with pytest.raises(TooFewSamples):
            stress_balance_residual(evolve_field(fs, standing(fs), 0.06, 0.02), fs)


class TestCoupledScalars:
    def test_uncoupled_fields_are_free_waves(self):
        g = Grid1D(0, 1, 32)
        st0 = FieldState(0.0, [g.standing_mode(1), g.standing_mode(2, 0.5)], np.zeros((2, 32)), g)
        a = semidiscrete_rhs(coupled_scalars(0.0, grid=g), st0)
        b0 = semidiscrete_rhs(wave(grid=g), FieldState(0.0, st0.phi[:1], st0.dphi_dt[:1], g))
        b1 = semidiscrete_rhs(wave(grid=g), FieldState(0.0, st0.phi[1:], st0.dphi_dt[1:], g))
        np.testing.assert_allclose(a, np.vstack([b0, b1]), atol=1e-12)

    def test_coupling_bound(self):
        with pytest.raises(InputError):
            coupled_scalars(g=1.5)

    def test_energy_conserved(self):
        fs = coupled_scalars(g=0.1, n=256)
        g = fs.grid
        st0 = FieldState(0.0, [g.standing_mode(1, 0.5), g.standing_mode(2, 0.3)], np.zeros((2, 256)), g)
        series = evolve_field(fs, st0, 20.0, max_stable_dt(fs), save_every=256)
        E = np.array([field_energy(fs, series.state(i)) for i in range(len(series))])
        assert np.max(np.abs(E - E[0])) < 1e-5

    def test_mode_reduction(self):
        g_, phibar, mode = 0.4, 0.5, 2
        fs = coupled_scalars(g_, n=32, background=phibar)
        grid = fs.grid
        st0 = FieldState(0.0, [grid.standing_mode(mode, 1.0), grid.standing_mode(mode, 0.0)], np.zeros((2, 32)), grid)
        dt = 0.5 * max_stable_dt(fs)
        series = evolve_field(fs, st0, 5.0, dt)
        closed, _ = coupled_oscillators(**mode_oscillator_params(grid, mode, g_, phibar))
        traj = integrate(closed, [[1.0, 0.0], [0.0, 0.0]], (0, 5.0), series.times[1] - series.times[0])
        proj = np.array([[projection(grid, series.phi[i, f], mode) for f in (0, 1)] for i in range(len(series))])
        np.testing.assert_allclose(proj, traj.q, atol=1e-8)
