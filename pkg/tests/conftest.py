"""
Shared fixtures: the canonical sin^2 chain driven at omega = 3 above the
band of omega0 = 1, the damped single oscillator, and a seeded generator.
"""

import numpy as np
import pytest

from periodic_chain.solver import potentials
from periodic_chain.solver.chain import ChainConfig, ForcingSpectrum


def make_chain(N=8, nu=0.2, gamma=0.5, omega=3.0, omega0=1.0, amplitude=0.5, V=None, U=None):
    return ChainConfig.from_frequency(
        omega,
        N=N,
        omega0=omega0,
        gamma=gamma,
        nu=nu,
        V=V or potentials.sin2n(),
        U=U or potentials.zero(),
        forcing=ForcingSpectrum.single(amplitude),
    )


@pytest.fixture
def chain_factory():
    return make_chain


@pytest.fixture
def sin2_chain():
    return make_chain()


@pytest.fixture
def oscillator():
    """N = 0, omega0 = 1, gamma = 0.5, linear, F(t) = cos(2t)."""
    return ChainConfig.from_frequency(
        2.0, N=0, omega0=1.0, gamma=0.5, nu=0.0, forcing=ForcingSpectrum.single(1.0),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toml_text():
    return """
[chain]
N = 4
omega0 = 1.0
gamma = 0.5
nu = 0.1
omega = 3.0

[potential.V]
kind = "sin2n"
a = 1.0
n = 1

[forcing]
modes = [[1, 0.25, 0.0]]
"""
