import math

import numpy as np
import pytest

from periodic_chain.solver import potentials
from periodic_chain.solver.chain import (
    ChainConfig,
    ChainState,
    ForcingSpectrum,
    bonds,
    eom_rhs,
    force_field,
    force_field_derivative,
    hamiltonian,
    hamiltonian_samples,
    laplacian_matrix,
    neumann_laplacian,
    period_mean_norm,
    sequence_norm,
)
from periodic_chain.solver.exceptions import ConfigurationError
from periodic_chain.solver.fields import HarmonicField, collocation_size


class TestForcingSpectrum:

    def test_zero_mode_rejected(self):
        with pytest.raises(ConfigurationError, match='F_0 = 0'):
            ForcingSpectrum(((0, 1.0),))

    def test_duplicate_mode_rejected(self):
        with pytest.raises(ConfigurationError, match='duplicate'):
            ForcingSpectrum(((1, 1.0), (1, 0.5)))

    def test_negative_mode_rejected(self):
        with pytest.raises(ConfigurationError):
            ForcingSpectrum(((-1, 1.0),))

    def test_modes_sorted_and_parity(self):
        forcing = ForcingSpectrum(((3, 0.1), (1, 0.2j)))
        assert [m for m, _ in forcing.modes] == [1, 3]
        assert forcing.is_odd
        assert forcing.max_mode == 3
        assert not ForcingSpectrum(((2, 1.0),)).is_odd

    def test_single_mode_is_a_cosine(self):
        forcing = ForcingSpectrum.single(0.5)
        t = np.linspace(0.0, 2.0, 11)
        np.testing.assert_allclose(forcing.evaluate(t, 3.0), 0.5 * np.cos(3.0 * t), atol=1e-15)

    def test_coefficients_array(self):
        forcing = ForcingSpectrum(((2, 1 + 1j),))
        c = forcing.coefficients(4)
        assert c.shape == (5,)
        assert c[2] == 1 + 1j
        assert np.count_nonzero(c) == 1


class TestChainConfig:

    def test_from_frequency(self):
        cfg = ChainConfig.from_frequency(3.0, N=2, omega0=1.0, gamma=0.5, nu=0.0)
        assert cfg.omega == pytest.approx(3.0)
        assert cfg.omega_upper == pytest.approx(math.sqrt(5.0))
        assert cfg.size == 5
        assert list(cfg.sites) == [-2, -1, 0, 1, 2]

    @pytest.mark.parametrize('changes, field', [
        ({'theta': 0.0}, 'theta'),
        ({'theta': -1.0}, 'theta'),
        ({'omega0': 0.0}, 'omega0'),
        ({'gamma': -0.1}, 'gamma'),
        ({'N': -1}, 'N'),
        ({'N': 1.5}, 'N'),
    ])
    def test_invalid_fields_named(self, changes, field):
        base = dict(N=2, omega0=1.0, gamma=0.5, nu=0.0, theta=1.0)
        base.update(changes)
        with pytest.raises(ConfigurationError, match=f'chain.{field}'):
            ChainConfig(**base)

    def test_damping_vector(self):
        cfg = ChainConfig(N=2, omega0=1.0, gamma=0.3, nu=0.0, theta=1.0)
        np.testing.assert_array_equal(cfg.damping_vector(), [0.3, 0, 0, 0, 0.3])
        single = cfg.with_changes(N=0)
        np.testing.assert_array_equal(single.damping_vector(), [0.6])

    def test_coupling_bound_and_odd_hypothesis(self):
        cfg = ChainConfig(N=1, omega0=1.0, gamma=0.3, nu=0.1, theta=1.0,
                          V=potentials.sin2n(), U=potentials.cosine(0.5),
                          forcing=ForcingSpectrum.single(1.0))
        assert cfg.coupling_bound == pytest.approx(2.0 + 1.5)
        assert cfg.odd_hypothesis
        assert not cfg.with_changes(V=potentials.cubic()).odd_hypothesis

    def test_config_hash_is_stable(self, sin2_chain):
        assert sin2_chain.config_hash() == sin2_chain.with_changes().config_hash()
        assert sin2_chain.config_hash() != sin2_chain.with_changes(nu=0.3).config_hash()


class TestOperators:

    def test_laplacian_matrix_small(self):
        expected = np.array([[-1, 1, 0], [1, -2, 1], [0, 1, -1]], dtype=float)
        np.testing.assert_array_equal(laplacian_matrix(1), expected)
        np.testing.assert_array_equal(laplacian_matrix(0), [[0.0]])

    def test_laplacian_annihilates_constants(self):
        np.testing.assert_array_equal(neumann_laplacian(np.full(7, 2.5)), np.zeros(7))

    def test_laplacian_acts_on_last_axis(self, rng):
        f = rng.standard_normal((4, 9))
        stacked = neumann_laplacian(f)
        np.testing.assert_allclose(stacked, f @ laplacian_matrix(4).T, atol=1e-14)

    def test_bonds_include_zero_boundary_bonds(self):
        b = bonds(np.array([1.0, 3.0, 6.0]))
        np.testing.assert_array_equal(b, [0.0, 2.0, 3.0, 0.0])

    def test_laplacian_is_self_adjoint_and_nonpositive(self, rng):
        for N in (0, 1, 4, 9):
            f = rng.standard_normal(2 * N + 1)
            g = rng.standard_normal(2 * N + 1)
            assert np.dot(neumann_laplacian(f), g) == pytest.approx(np.dot(f, neumann_laplacian(g)), abs=1e-12)
            form = -np.dot(neumann_laplacian(f), f)
            assert form == pytest.approx(np.sum(bonds(f) ** 2), abs=1e-12)
            assert -1e-12 <= form <= 4.0 * np.dot(f, f)
            assert np.sum(neumann_laplacian(f) ** 2) <= 16.0 * np.dot(f, f)

    def test_laplacian_bound_is_nearly_reached_by_alternating_sites(self):
        f = (-1.0) ** np.arange(41)
        ratio = np.sum(neumann_laplacian(f) ** 2) / np.dot(f, f)
        assert 15.0 < ratio <= 16.0

    def test_empty_site_array_rejected(self):
        with pytest.raises(ConfigurationError):
            neumann_laplacian(np.zeros(0))

    def test_force_field_quadratic_pinning(self, rng):
        cfg = ChainConfig(N=3, omega0=1.0, gamma=0.1, nu=1.0, theta=1.0,
                          V=potentials.quadratic(2.0))
        q = rng.standard_normal(7)
        np.testing.assert_allclose(force_field(q, cfg), 2.0 * q, atol=1e-15)

    def test_force_field_quadratic_interaction(self, rng):
        cfg = ChainConfig(N=3, omega0=1.0, gamma=0.1, nu=1.0, theta=1.0,
                          U=potentials.quadratic(0.5))
        q = rng.standard_normal(7)
        np.testing.assert_allclose(force_field(q, cfg), -0.5 * neumann_laplacian(q), atol=1e-14)

    def test_force_field_derivative_matches_finite_difference(self, rng):
        cfg = ChainConfig(N=2, omega0=1.0, gamma=0.1, nu=1.0, theta=1.0,
                          V=potentials.sin2n(), U=potentials.cosine(0.3))
        q = rng.standard_normal(5)
        dq = rng.standard_normal(5)
        h = 1e-6
        fd = (force_field(q + h * dq, cfg) - force_field(q - h * dq, cfg)) / (2 * h)
        np.testing.assert_allclose(force_field_derivative(q, dq, cfg), fd, atol=1e-8)

    def test_force_field_derivative_broadcasts_tangent_columns(self, rng):
        cfg = ChainConfig(N=1, omega0=1.0, gamma=0.1, nu=1.0, theta=1.0, V=potentials.sin2n())
        q = rng.standard_normal(3)
        tangents = np.eye(3)
        jac = force_field_derivative(q, tangents, cfg)
        for i in range(3):
            np.testing.assert_allclose(jac[i], force_field_derivative(q, tangents[i], cfg))


class TestEnergy:

    def test_rest_has_zero_energy(self, sin2_chain):
        assert hamiltonian(ChainState.at_rest(sin2_chain), sin2_chain) == 0.0

    def test_harmonic_energy(self):
        cfg = ChainConfig(N=1, omega0=2.0, gamma=0.0, nu=0.0, theta=1.0)
        state = ChainState(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        # kinetic 1/2, bond (0-1)^2/2, pinning 4/2
        assert hamiltonian(state, cfg) == pytest.approx(0.5 + 0.5 + 2.0)

    def test_samples_match_single_evaluation(self, sin2_chain, rng):
        q = 0.3 * rng.standard_normal((6, sin2_chain.size))
        p = 0.3 * rng.standard_normal((6, sin2_chain.size))
        batch = hamiltonian_samples(q, p, sin2_chain)
        single = [hamiltonian(ChainState(q[i], p[i]), sin2_chain) for i in range(6)]
        np.testing.assert_allclose(batch, single, rtol=1e-13)

    def test_eom_at_rest_is_the_force(self, sin2_chain):
        state = ChainState.at_rest(sin2_chain, t=0.0)
        a = eom_rhs(state, sin2_chain)
        expected = np.zeros(sin2_chain.size)
        expected[sin2_chain.N] = 0.5
        np.testing.assert_allclose(a, expected, atol=1e-15)

    def test_eom_of_a_single_oscillator(self, rng):
        cfg = ChainConfig.from_frequency(2.5, N=0, omega0=1.3, gamma=0.4, nu=0.3,
                                         V=potentials.sin2n(), forcing=ForcingSpectrum.single(0.7))
        for _ in range(20):
            q, p, t = rng.standard_normal(), rng.standard_normal(), rng.uniform(0.0, 10.0)
            a = eom_rhs(ChainState(np.array([q]), np.array([p]), t), cfg)
            expected = (-1.3 ** 2 * q - 2 * 0.4 * p - 0.3 * float(cfg.V.first_derivative(q))
                        + 0.7 * math.cos(2.5 * t))
            assert a[0] == pytest.approx(expected, abs=1e-13)

    def test_linear_energy_is_the_quadratic_form(self, rng):
        for N in (0, 2, 5):
            cfg = ChainConfig(N=N, omega0=1.7, gamma=0.3, nu=0.0, theta=1.0)
            q = rng.standard_normal(2 * N + 1)
            p = rng.standard_normal(2 * N + 1)
            K = 1.7 ** 2 * np.eye(2 * N + 1) - laplacian_matrix(N)
            expected = 0.5 * p @ p + 0.5 * q @ K @ q
            assert hamiltonian(ChainState(q, p), cfg) == pytest.approx(expected, rel=1e-13)


class TestNorms:

    def test_period_mean_norm_of_a_cosine(self):
        t = np.arange(64) / 64
        samples = np.cos(2 * np.pi * t)[:, None] * np.array([[1.0, 2.0]])
        assert period_mean_norm(samples) == pytest.approx(math.sqrt(0.5 * 5.0))

    def test_period_mean_norm_rejects_empty(self):
        with pytest.raises(ConfigurationError):
            period_mean_norm(np.zeros((0, 3)))

    def test_sequence_norm_matches_samples(self, rng):
        M, size, omega = 6, 5, 2.0
        field_ = HarmonicField(
            rng.standard_normal((M + 1, size)) + 1j * rng.standard_normal((M + 1, size)), omega,
        )
        q, p = field_.samples()
        assert sequence_norm(field_.coefficients) == pytest.approx(period_mean_norm(q), rel=1e-12)
        sobolev = math.sqrt(period_mean_norm(q) ** 2 + period_mean_norm(p) ** 2)
        assert field_.norm(order=1) == pytest.approx(sobolev, rel=1e-12)

    def test_collocation_size_respects_aliasing_guard(self):
        for M in (1, 16, 100):
            T = collocation_size(M)
            assert T >= 8 * (2 * M + 1)
            assert T & (T - 1) == 0

    def test_field_rejects_small_grid(self):
        with pytest.raises(ConfigurationError, match='aliasing'):
            HarmonicField(np.zeros((17, 3)), 1.0, grid_size=64)
