import math

import numpy as np
import pytest

from periodic_chain.solver import potentials
from periodic_chain.solver.chain import ChainConfig, ChainState, ForcingSpectrum, hamiltonian_samples
from periodic_chain.solver.exceptions import (
    BlowUpError,
    ConfigurationError,
    ConvergenceError,
    SingularError,
    UsageError,
)
from periodic_chain.solver.spectral import series_solve
from periodic_chain.solver.time_domain import (
    IntegratorConfig,
    decay_rate,
    decay_rate_table,
    distinct_orbits,
    double_well_seed,
    drift_matrix,
    integrate,
    linear_periodic_via_monodromy,
    newton_periodic,
    period_map,
    single_oscillator_exact,
    single_oscillator_gap,
    single_oscillator_gap_scan,
    static_equilibria,
    strobe_decay_rate,
    stroboscopic_distance,
)


def oscillator_config(omega, omega0=1.0, gamma=0.5, amplitude=1.0):
    return ChainConfig.from_frequency(
        omega, N=0, omega0=omega0, gamma=gamma, nu=0.0, forcing=ForcingSpectrum.single(amplitude),
    )


class TestIntegratorConfig:

    @pytest.mark.parametrize('kwargs', [
        {'steps_per_period': 128},
        {'steps_per_period': 300},
        {'periods': -1},
        {'start_time': 1.0},
        {'method': 'leapfrog'},
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ConfigurationError):
            IntegratorConfig(**kwargs)

    def test_defaults(self):
        icfg = IntegratorConfig()
        assert icfg.steps_per_period == 1024
        assert icfg.method == 'rk4'


class TestSingleOscillator:

    @pytest.mark.parametrize('gamma', [0.25, 1.0, 2.0])
    def test_rk4_matches_closed_form(self, gamma):
        cfg = oscillator_config(2.0, gamma=gamma)
        traj = integrate(cfg, ChainState(np.array([0.3]), np.array([-0.2])),
                         IntegratorConfig(steps_per_period=1024, periods=5))
        q, p = single_oscillator_exact(cfg, 0.3, -0.2, traj.strobe_times)
        np.testing.assert_allclose(traj.q[:, 0], q, atol=1e-9)
        np.testing.assert_allclose(traj.p[:, 0], p, atol=1e-9)

    def test_undamped_resonance_grows_linearly(self):
        cfg = oscillator_config(1.0, gamma=0.0)
        traj = integrate(cfg, ChainState(np.array([0.0]), np.array([0.0])),
                         IntegratorConfig(steps_per_period=1024, periods=3))
        q, p = single_oscillator_exact(cfg, 0.0, 0.0, traj.strobe_times)
        np.testing.assert_allclose(traj.q[:, 0], q, atol=1e-8)
        np.testing.assert_allclose(traj.p[:, 0], p, atol=1e-8)
        # q = t sin(t) / 2 vanishes at every strobe time while p(2 pi k) = pi k
        np.testing.assert_allclose(q, 0.0, atol=1e-10)
        np.testing.assert_allclose(p, math.pi * np.arange(len(p)), atol=1e-10)
        assert abs(traj.p[-1, 0]) > abs(traj.p[1, 0]) > 1.0

    def test_closed_form_needs_a_single_oscillator(self, sin2_chain):
        with pytest.raises(UsageError):
            single_oscillator_exact(sin2_chain, 0.0, 0.0, [0.0])

    @pytest.mark.parametrize('omega0, gamma, omega, expected', [
        (1.0, 1.0, 3.0, (1.0, None)),
        (2.0, 0.1, 3.0, (4.0, None)),
        (1.0, 0.5, 2.0, (1.0, math.sqrt(13.0))),
    ])
    def test_gap_examples(self, omega0, gamma, omega, expected):
        delta, delta_odd = single_oscillator_gap(oscillator_config(omega, omega0, gamma))
        assert delta == pytest.approx(expected[0])
        if expected[1] is not None:
            assert delta_odd == pytest.approx(expected[1])

    @pytest.mark.parametrize('omega0, gamma, omega', [
        (1.0, 0.5, 2.0),
        (3.0, 0.05, 0.7),
        (5.0, 0.3, 1.1),
        (1.0, 0.8, 0.2),
    ])
    def test_gap_matches_scan(self, omega0, gamma, omega):
        cfg = oscillator_config(omega, omega0, gamma)
        exact = single_oscillator_gap(cfg)
        scanned = single_oscillator_gap_scan(cfg, m_max=2000)
        assert exact == pytest.approx(scanned, rel=1e-12)

    def test_drift_rate(self, oscillator):
        assert decay_rate(drift_matrix(oscillator)) == pytest.approx(0.5, rel=1e-12)


class TestLinearChain:

    def test_decay_rate_table(self, sin2_chain):
        rows = decay_rate_table(sin2_chain, [1, 2, 4])
        assert [r['N'] for r in rows] == [1, 2, 4]
        rates = [r['decay_rate'] for r in rows]
        assert all(r > 0 for r in rates)
        assert rates[0] > rates[1] > rates[2]

    def test_no_damping_no_decay(self, sin2_chain):
        assert decay_rate(drift_matrix(sin2_chain.with_changes(gamma=0.0))) == pytest.approx(0.0, abs=1e-12)

    def test_monodromy_matches_series(self, sin2_chain):
        cfg = sin2_chain.with_changes(N=3, nu=0.0)
        linear = linear_periodic_via_monodromy(cfg, M=16)
        series, _ = series_solve(cfg, M=16)
        np.testing.assert_allclose(linear.field.coefficients, series.field.coefficients, atol=1e-11)

    def test_monodromy_needs_linear_chain(self, sin2_chain):
        with pytest.raises(UsageError):
            linear_periodic_via_monodromy(sin2_chain)

    def test_monodromy_needs_damping(self, sin2_chain):
        with pytest.raises(SingularError):
            linear_periodic_via_monodromy(sin2_chain.with_changes(nu=0.0, gamma=0.0))


class TestIntegration:

    def test_energy_balance(self, chain_factory):
        cfg = chain_factory(N=2)
        traj = integrate(cfg, ChainState.at_rest(cfg), IntegratorConfig(steps_per_period=1024, periods=4))
        assert np.max(np.abs(traj.energy_residual())) < 1e-8
        assert traj.work[-1] > 0

    def test_unforced_linear_energy_never_grows(self, rng):
        cfg = ChainConfig.from_frequency(2.0, N=3, omega0=1.0, gamma=0.5, nu=0.0)
        initial = ChainState(rng.standard_normal(cfg.size), rng.standard_normal(cfg.size))
        traj = integrate(cfg, initial, IntegratorConfig(steps_per_period=512, periods=10))
        assert np.all(np.diff(traj.energy) <= 1e-12 * traj.energy[0])
        assert traj.energy[-1] < traj.energy[0]
        np.testing.assert_array_equal(traj.work, 0.0)

    def test_dense_output(self, chain_factory):
        cfg = chain_factory(N=1)
        traj = integrate(cfg, ChainState.at_rest(cfg),
                         IntegratorConfig(steps_per_period=256, periods=2, dense_stride=64))
        assert traj.dense_q.shape == (8, 3)
        assert traj.dense_times[1] == pytest.approx(cfg.theta / 4)

    def test_wrong_initial_size(self, sin2_chain):
        with pytest.raises(ConfigurationError):
            integrate(sin2_chain, ChainState(np.zeros(3), np.zeros(3)))

    def test_blow_up_reported(self):
        cfg = ChainConfig.from_frequency(3.0, N=0, omega0=1.0, gamma=0.1, nu=1.0, V=potentials.cubic())
        with np.errstate(all='ignore'), pytest.raises(BlowUpError) as info:
            integrate(cfg, ChainState(np.array([-10.0]), np.array([0.0])),
                      IntegratorConfig(steps_per_period=256, periods=3))
        assert info.value.last_time == 0.0

    def test_strobe_rate_of_a_pure_exponential(self):
        theta = 2.0
        k = np.arange(40)
        assert strobe_decay_rate(3.0 * np.exp(-0.4 * theta * k), theta) == pytest.approx(0.4)

    def test_strobe_rate_needs_data(self):
        with pytest.raises(ConvergenceError):
            strobe_decay_rate([1.0, 1e-20, 1e-20, 1e-20], 1.0)


class TestPeriodMap:

    def test_jacobian_matches_finite_differences(self, chain_factory, rng):
        cfg = chain_factory(N=1)
        icfg = IntegratorConfig(steps_per_period=256)
        z = 0.1 * rng.standard_normal(2 * cfg.size)
        _, jac = period_map(cfg, z, icfg, with_jacobian=True)
        h = 1e-6
        for i in range(z.size):
            e = np.zeros(z.size)
            e[i] = h
            column = (period_map(cfg, z + e, icfg) - period_map(cfg, z - e, icfg)) / (2 * h)
            np.testing.assert_allclose(jac[:, i], column, atol=1e-6)

    def test_newton_recovers_the_spectral_orbit(self, chain_factory):
        cfg = chain_factory(N=1)
        sol, _ = series_solve(cfg)
        state = newton_periodic(cfg, sol.initial_state(), icfg=IntegratorConfig(steps_per_period=1024))
        np.testing.assert_allclose(state.q, sol.initial_state().q, atol=1e-8)
        np.testing.assert_allclose(state.p, sol.initial_state().p, atol=1e-8)

    @pytest.mark.slow
    def test_newton_from_random_seeds_finds_one_orbit(self, chain_factory, rng):
        cfg = chain_factory(N=1)
        sol, _ = series_solve(cfg)
        target = sol.initial_state()
        icfg = IntegratorConfig(steps_per_period=1024)
        found = []
        for _ in range(20):
            seed = ChainState(0.5 * rng.standard_normal(cfg.size), 0.5 * rng.standard_normal(cfg.size))
            state = newton_periodic(cfg, seed, icfg=icfg)
            np.testing.assert_allclose(state.q, target.q, atol=1e-8)
            np.testing.assert_allclose(state.p, target.p, atol=1e-8)
            found.append(state)
        assert len(distinct_orbits(found)) == 1

    def test_newton_needs_damping(self, chain_factory):
        cfg = chain_factory(N=1, gamma=0.0)
        with pytest.raises(UsageError):
            newton_periodic(cfg, ChainState.at_rest(cfg))


class TestDoubleWell:

    def test_static_roots(self, chain_factory):
        cfg = chain_factory(N=1, nu=-1.5)
        roots = static_equilibria(cfg)
        assert len(roots) == 2
        seed = double_well_seed(cfg)
        assert seed.q[0] == pytest.approx(1.1397, abs=1e-3)
        curvature = 1.0 - 1.5 * float(cfg.V.second_derivative(seed.q[0]))
        assert curvature == pytest.approx(2.95, abs=0.01)

    def test_no_well_without_negative_coupling(self, sin2_chain):
        with pytest.raises(ConfigurationError):
            double_well_seed(sin2_chain)

    def test_two_distinct_periodic_orbits(self, chain_factory):
        cfg = chain_factory(N=1, nu=-1.5)
        icfg = IntegratorConfig(steps_per_period=512)
        sol, report = series_solve(cfg)
        assert report.odd_projection
        near_zero = newton_periodic(cfg, sol.initial_state(), icfg=icfg)
        in_well = newton_periodic(cfg, double_well_seed(cfg), icfg=icfg)
        groups = distinct_orbits([near_zero, in_well, near_zero])
        assert len(groups) == 2
        assert in_well.q.mean() > 1.0


@pytest.mark.slow
class TestAgreement:

    def test_spectral_orbit_is_periodic_under_rk4(self, sin2_chain):
        sol, _ = series_solve(sin2_chain)
        traj = integrate(sin2_chain, sol.initial_state(), IntegratorConfig(steps_per_period=1024, periods=20))
        assert np.max(stroboscopic_distance(traj, sol)) < 1e-7

    def test_rest_is_attracted_at_the_linear_rate(self, chain_factory):
        cfg = chain_factory(N=1, nu=0.0)
        sol, _ = series_solve(cfg)
        traj = integrate(cfg, ChainState.at_rest(cfg), IntegratorConfig(steps_per_period=512, periods=150))
        distances = stroboscopic_distance(traj, sol)
        assert distances[-1] < 1e-6 * distances[0]
        rate = strobe_decay_rate(distances, cfg.theta, start=20, floor=1e-8)
        assert rate == pytest.approx(decay_rate(drift_matrix(cfg)), rel=0.2)

    def test_long_chain_from_rest_is_held_back_by_the_slowest_mode(self, chain_factory):
        cfg = chain_factory(nu=0.0)
        periods = 200
        sol, _ = series_solve(cfg)
        traj = integrate(cfg, ChainState.at_rest(cfg), IntegratorConfig(steps_per_period=256, periods=periods))
        ref = sol.initial_state()
        error_energy = hamiltonian_samples(traj.q - ref.q, traj.p - ref.p, cfg)
        assert np.all(np.diff(error_energy) <= 1e-9 * error_energy[0])
        distances = stroboscopic_distance(traj, sol)
        assert distances[-1] < distances[0]
        # the mode nearest the band top barely touches the damped ends, so a
        # 1e-6 reduction needs more than this horizon
        rate = decay_rate(drift_matrix(cfg))
        assert rate * periods * cfg.theta < math.log(1e6)
        assert distances[-1] > 1e-6 * distances[0]

    def test_nonlinear_chain_is_attracted(self, chain_factory):
        cfg = chain_factory(N=1, nu=0.2)
        sol, _ = series_solve(cfg)
        traj = integrate(cfg, ChainState.at_rest(cfg), IntegratorConfig(steps_per_period=512, periods=150))
        distances = stroboscopic_distance(traj, sol)
        assert distances[-1] < 1e-6 * distances[0]
