"""Exponential-integrator solver: propagators, nonlinear terms, runs."""

import numpy as np
import pytest
import scipy.integrate
import scipy.interpolate
import scipy.linalg

from chemorelax.hpc_solver import (
    HpcState,
    PropagatorTables,
    SolverConfig,
    build_initial_data,
    equilibrium_psi,
    gaussian_bump,
    hybrid_aggregate,
    linear_propagator,
    mode_bump,
    nonlinear_rhs,
    run,
    step,
)
from chemorelax.linear_analysis import eigenvalues, symbol_matrix
from chemorelax.model import ModelParams, PressureLaw
from chemorelax.spectral import SpectralField, make_grid


@pytest.fixture(scope="module")
def solver_params():
    return ModelParams(eps=0.25, mu=1.0, a=1.0, b=1.0, rho_bar=1.0,
                       pressure=PressureLaw(kappa=1.0, gamma=2.0), j_offset=0)


@pytest.fixture(scope="module")
def grid1d():
    return make_grid(1, 128, 2 * np.pi)


def small_state(grid, params, target=0.01, width=0.5):
    state, _ = build_initial_data(grid, params, n_profile=gaussian_bump(grid, width=width),
                                  target_x0=target)
    return state


class TestLinearPropagator:
    def test_dt_zero_identity(self, solver_params):
        m, s = linear_propagator(1.7, 0.0, solver_params)
        assert np.allclose(m, np.eye(3)) and s == 1.0

    def test_zero_mode_closed_form(self, solver_params):
        p = solver_params
        dt = 0.37
        m, s = linear_propagator(0.0, dt, p)
        # n frozen; psi relaxes toward (c1/b) n; u factor exp(-dt/eps)
        assert np.isclose(s, np.exp(-dt / p.eps), atol=1e-14)
        assert np.isclose(m[0, 0], 1.0) and np.allclose(m[0, 1:], 0.0)
        assert np.isclose(m[2, 2], np.exp(-p.b * dt), atol=1e-13)
        assert np.isclose(m[2, 0], p.c1 / p.b * (1 - np.exp(-p.b * dt)), atol=1e-13)

    def test_semigroup_composition(self, solver_params):
        for xi in (0.0, 1.3, 8.0):
            m1, s1 = linear_propagator(xi, 0.2, solver_params)
            m2, s2 = linear_propagator(xi, 0.4, solver_params)
            assert np.max(np.abs(m1 @ m1 - m2)) <= 1e-10
            assert abs(s1 * s1 - s2) <= 1e-12

    def test_tables_match_expm(self, solver_params, grid1d):
        tab = PropagatorTables(grid1d, solver_params, 0.1)
        mags = np.unique(grid1d.xi_mag_diff)
        for i in (0, 3, len(mags) - 1):
            ref = scipy.linalg.expm(0.1 * symbol_matrix(float(mags[i]), solver_params).matrix)
            assert np.max(np.abs(tab.E3[i] - ref)) <= 1e-12


class TestNonlinearRhs:
    def test_rest_state_only_h_survives(self, grid1d):
        # gamma = 3 so H is nonzero; u = 0 kills the transport terms
        params = ModelParams(eps=0.25, pressure=PressureLaw(1.0, 3.0))
        n = SpectralField.from_physical(grid1d, 0.05 * gaussian_bump(grid1d)[None])
        state = HpcState(0.0, n, SpectralField.zeros(grid1d, 1),
                         SpectralField.zeros(grid1d, 1), params)
        nn, nu, npsi = nonlinear_rhs(state)
        assert nn.l2_norm() <= 1e-14
        assert nu.l2_norm() <= 1e-14
        assert npsi.l2_norm() > 0

    def test_gamma2_has_zero_psi_source(self, solver_params, grid1d, rng):
        n = SpectralField.from_physical(grid1d, 0.1 * gaussian_bump(grid1d)[None])
        u = SpectralField.from_physical(grid1d, 0.05 * rng.standard_normal((1,) + grid1d.shape))
        state = HpcState(0.0, n, u, SpectralField.zeros(grid1d, 1), solver_params)
        _, _, npsi = nonlinear_rhs(state)
        assert npsi.l2_norm() <= 1e-14

    def test_advection_trig_identity(self, solver_params, grid1d):
        """u = sin x: u u_x = sin x cos x = sin(2x)/2, so N_u = -sin(2x)/2."""
        x = grid1d.x_axes[0]
        u = SpectralField.from_physical(grid1d, np.sin(x)[None])
        state = HpcState(0.0, SpectralField.zeros(grid1d, 1), u,
                         SpectralField.zeros(grid1d, 1), solver_params)
        _, nu, _ = nonlinear_rhs(state)
        assert np.allclose(nu.to_physical()[0], -0.5 * np.sin(2 * x), atol=1e-12)


class TestStep:
    def test_zero_data_stays_zero(self, solver_params, grid1d):
        state = HpcState(0.0, SpectralField.zeros(grid1d, 1), SpectralField.zeros(grid1d, 1),
                         SpectralField.zeros(grid1d, 1), solver_params)
        out = step(state, 0.1)
        assert out.n.l2_norm() == 0.0 and out.u.l2_norm() == 0.0 and out.psi.l2_norm() == 0.0

    def test_linear_regime_matches_propagator_per_step(self, solver_params, grid1d):
        state = small_state(grid1d, solver_params, target=1e-10)
        dt = 1e-3
        tab = PropagatorTables(grid1d, solver_params, dt)
        out = step(state, dt, tab, True, state.mass_perturbation())
        en, eu, ep = tab.apply_exp(state.n.coef, state.u.coef, state.psi.coef)
        scale = np.max(np.abs(state.n.coef))
        dev = max(np.max(np.abs(out.n.coef - en)), np.max(np.abs(out.u.coef - eu)),
                  np.max(np.abs(out.psi.coef - ep)))
        assert dev <= 1e-12 * scale

    def test_second_order_self_convergence(self, solver_params, grid1d):
        state = small_state(grid1d, solver_params, target=0.05)

        def advance(dt):
            tab = PropagatorTables(grid1d, solver_params, dt)
            cur = state.copy()
            target = state.mass_perturbation()
            for _ in range(round(1.0 / dt)):
                cur = step(cur, dt, tab, True, target)
            return cur

        sols = {dt: advance(dt) for dt in (0.1, 0.05, 0.0125)}

        def dist(a, b):
            return max(np.max(np.abs(a.n.coef - b.n.coef)),
                       np.max(np.abs(a.u.coef - b.u.coef)),
                       np.max(np.abs(a.psi.coef - b.psi.coef)))

        e_coarse = dist(sols[0.1], sols[0.0125])
        e_fine = dist(sols[0.05], sols[0.0125])
        order = np.log2(e_coarse / e_fine)
        assert 1.5 <= order <= 2.5


class TestRun:
    def test_equilibrium_fixed_point(self, solver_params, grid1d):
        state, _ = build_initial_data(grid1d, solver_params, n_profile=None, target_x0=0.0)
        traj = run(state, SolverConfig(dt=0.05, t_end=1.0, snap_dt=0.25))
        assert traj.status == "completed"
        for s in traj.states:
            assert s.n.l2_norm() == 0.0 and s.u.l2_norm() == 0.0 and s.psi.l2_norm() == 0.0

    def test_mass_conservation(self, solver_params, grid1d):
        traj = run(small_state(grid1d, solver_params, target=0.05),
                   SolverConfig(dt=0.02, t_end=5.0, snap_dt=0.5))
        assert traj.status == "completed"
        mass = traj.series.column("mass")
        drift = np.max(np.abs(mass - mass[0])) / abs(mass[0]) / 5.0
        assert drift <= 1e-10

    def test_aggregate_bounded_small_data(self, solver_params, grid1d):
        traj = run(small_state(grid1d, solver_params, target=0.01),
                   SolverConfig(dt=0.02, t_end=10.0, snap_dt=0.5))
        assert traj.status == "completed"
        agg = traj.series.column("x_aggregate")
        assert np.max(agg) <= 10.0 * agg[0]

    def test_linear_regime_per_mode_fidelity(self, solver_params, grid1d):
        """Per-mode amplitudes after T match exp(T A) applied per mode to 1e-10."""
        state = small_state(grid1d, solver_params, target=1e-10)
        T, dt = 0.5, 0.01
        traj = run(state, SolverConfig(dt=dt, t_end=T, snap_dt=T))
        out = traj.final
        scale = np.max(np.abs(state.n.coef))
        worst = 0.0
        for idx in range(grid1d.N):
            xi = float(grid1d.xi_mag_diff[idx])
            xi_v = grid1d.xi_diff[0, idx]
            em = scipy.linalg.expm(T * symbol_matrix(xi, solver_params).matrix)
            mhat = 1j * xi_v * state.u.coef[0, idx] / xi if xi > 0 else 0.0
            y = em @ np.array([state.n.coef[0, idx], mhat, state.psi.coef[0, idx]])
            if xi > 0:
                u_ref = -1j * (xi_v / xi) * y[1]
            else:
                u_ref = np.exp(-T / solver_params.eps) * state.u.coef[0, idx]
            worst = max(worst,
                        abs(out.n.coef[0, idx] - y[0]),
                        abs(out.psi.coef[0, idx] - y[2]),
                        abs(out.u.coef[0, idx] - u_ref))
        assert worst <= 1e-10 * scale

    def test_mean_psi_ode(self):
        """The zero mode of psi follows dpsi/dt = -b psi + c1 n + mean(H(n))."""
        params = ModelParams(eps=0.25, mu=1.0, a=1.0, b=1.0, rho_bar=1.0,
                             pressure=PressureLaw(1.0, 3.0), j_offset=0)
        grid = make_grid(1, 64, 2 * np.pi)
        # non-mean-zero bump so the mean channel is actually exercised
        n_prof = 0.05 * (gaussian_bump(grid, width=0.6, mean_zero=False))
        state, _ = build_initial_data(grid, params, n_profile=n_prof)
        dt = 0.005
        traj = run(state, SolverConfig(dt=dt, t_end=10.0, snap_dt=dt))
        t = traj.series.column("t")
        mean_n = traj.series.column("mean_n")
        mean_h = traj.series.column("mean_H")
        mean_psi = traj.series.column("mean_psi")
        source = scipy.interpolate.CubicSpline(t, params.c1 * mean_n + mean_h)
        sol = scipy.integrate.solve_ivp(
            lambda tt, y: -params.b * y + source(tt), (t[0], t[-1]),
            [mean_psi[0]], t_eval=t, rtol=1e-11, atol=1e-13)
        assert np.max(np.abs(sol.y[0] - mean_psi)) <= 1e-8

    def test_reality_preserved(self, solver_params, grid1d):
        traj = run(small_state(grid1d, solver_params, target=0.05),
                   SolverConfig(dt=0.05, t_end=1.0, snap_dt=0.5))
        s = traj.final
        scale = max(np.max(np.abs(s.n.to_physical())), 1e-30)
        assert s.n.max_imag_physical() <= 1e-12 * scale

    def test_unstable_band_growth_rate(self):
        """With a negative margin the lowest torus mode grows at the positive
        eigenvalue rate from the spectrum (10% tolerance in early time)."""
        params = ModelParams(eps=0.5, mu=3.0, a=1.0, b=1.0, rho_bar=1.0,
                             pressure=PressureLaw(kappa=1.0, gamma=1.0), j_offset=0)
        assert params.stability_margin < 0
        # unstable band |xi|^2 < c1 mu - b = 2; put the lowest mode at |xi| = 1
        grid = make_grid(1, 64, 2 * np.pi)
        n_prof = 1e-6 * mode_bump(grid, [([1], 1.0, 0.3)])
        state, _ = build_initial_data(grid, params, n_profile=n_prof)
        rate = eigenvalues(1.0, params).max_real
        assert rate > 0
        # measure on the tail, once the decaying branches have died out
        T = 24.0
        traj = run(state, SolverConfig(dt=0.02, t_end=T, snap_dt=T / 4))
        amp = [np.abs(s.n.coef[0, 1]) for s in traj.states]
        measured = np.log(amp[-1] / amp[-2]) / (T / 4)
        assert abs(measured - rate) <= 0.1 * rate

    def test_large_data_blowup_reported(self, solver_params, grid1d):
        n_prof = 0.9 * gaussian_bump(grid1d, width=0.4)
        state, _ = build_initial_data(grid1d, solver_params, n_profile=n_prof)
        u_big = SpectralField.from_physical(
            grid1d, 60.0 * np.sin(grid1d.x_axes[0])[None])
        state.u = u_big
        traj = run(state, SolverConfig(dt=0.05, t_end=5.0, snap_dt=0.5))
        assert traj.status == "blowup"
        assert traj.message


class TestBuildInitialData:
    def test_zero_target(self, solver_params, grid1d):
        state, parts = build_initial_data(grid1d, solver_params,
                                          n_profile=gaussian_bump(grid1d), target_x0=0.0)
        assert state.n.l2_norm() == 0.0
        assert parts["low"] == 0.0

    def test_target_matched_to_1e10(self, solver_params, grid1d):
        state, _ = build_initial_data(grid1d, solver_params,
                                      n_profile=gaussian_bump(grid1d), target_x0=0.01)
        x0, _ = hybrid_aggregate(state)
        assert abs(x0 - 0.01) <= 1e-10 * 0.01

    def test_well_prepared_effective_concentration_vanishes(self, grid1d):
        params = ModelParams(eps=0.25, pressure=PressureLaw(1.0, 3.0))
        state, _ = build_initial_data(grid1d, params, n_profile=gaussian_bump(grid1d),
                                      target_x0=0.01)
        residual = state.psi - equilibrium_psi(state.n, params)
        assert residual.l2_norm() <= 1e-10 * max(state.psi.l2_norm(), 1e-30)

    def test_zero_profile_nonzero_target_rejected(self, solver_params, grid1d):
        with pytest.raises(ValueError):
            build_initial_data(grid1d, solver_params, n_profile=None, target_x0=0.01)


