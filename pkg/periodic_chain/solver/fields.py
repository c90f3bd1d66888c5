"""
Harmonic and sampled representations of periodic chain motions.
"""

import logging
from dataclasses import dataclass, field, asdict
from functools import cached_property
from typing import Optional

import numpy as np

from .chain import ChainState, sequence_norm
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

OVERSAMPLING = 8


def collocation_size(M):
    """Smallest power of two T with T >= 8 (2M + 1)."""
    need = OVERSAMPLING * (2 * M + 1)
    return 1 << (need - 1).bit_length()


@dataclass(frozen=True, eq=False)
class HarmonicField:
    """Time harmonics q_x(m), stored as ``coefficients[m, x + N]`` for m = 0..M.

    Negative harmonics follow from q_x(-m) = conj(q_x(m)), so the synthesized
    motion is real. ``grid_size`` is the number of uniform samples per period
    used for collocation.
    """

    coefficients: np.ndarray
    omega: float
    grid_size: int = 0

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex)
        if c.ndim != 2 or c.shape[0] == 0 or c.shape[1] == 0:
            raise ConfigurationError(f"harmonic coefficients must be (M+1, 2N+1), got {c.shape}")
        c[0] = c[0].real
        c.setflags(write=False)
        object.__setattr__(self, 'coefficients', c)
        M = c.shape[0] - 1
        T = self.grid_size or collocation_size(M)
        if T < OVERSAMPLING * (2 * M + 1):
            raise ConfigurationError(
                f"collocation grid T={T} violates the aliasing guard T >= {OVERSAMPLING * (2 * M + 1)}"
            )
        object.__setattr__(self, 'grid_size', int(T))

    @classmethod
    def zeros(cls, M, size, omega, grid_size=0):
        return cls(np.zeros((M + 1, size), dtype=complex), omega, grid_size)

    @classmethod
    def analyze(cls, samples, omega, M, grid_size=0):
        """Harmonics of uniform samples ``(T, 2N+1)`` taken over one period."""
        samples = np.asarray(samples, dtype=float)
        T = samples.shape[0]
        if M >= T // 2:
            raise ConfigurationError(f"cannot resolve M={M} harmonics from {T} samples")
        c = np.fft.rfft(samples, axis=0)[:M + 1] / T
        return cls(c, omega, grid_size)

    @property
    def M(self):
        return self.coefficients.shape[0] - 1

    @property
    def size(self):
        return self.coefficients.shape[1]

    @property
    def N(self):
        return (self.size - 1) // 2

    @property
    def theta(self):
        return 2.0 * np.pi / self.omega

    def like(self, coefficients):
        return HarmonicField(coefficients, self.omega, self.grid_size)

    def __add__(self, other):
        return self.like(self.coefficients + other.coefficients)

    def __sub__(self, other):
        return self.like(self.coefficients - other.coefficients)

    def scaled(self, factor):
        return self.like(factor * self.coefficients)

    def derivative(self):
        """Harmonics of d/dt: multiply by i m omega."""
        m = np.arange(self.M + 1)[:, None]
        return self.like(1j * m * self.omega * self.coefficients)

    def norm(self, order=0):
        """Period-mean norm computed from harmonics; ``order`` 1 gives the Sobolev variant."""
        return sequence_norm(self.coefficients, self.omega, order)

    def project_odd(self):
        """Drop every even harmonic, including the mean."""
        c = self.coefficients.copy()
        c[0::2] = 0.0
        return self.like(c)

    def top_octave_fraction(self):
        """Share of the l2 energy carried by harmonics above M/2."""
        per_mode = np.sum(np.abs(self.coefficients) ** 2, axis=1)
        per_mode[1:] *= 2.0
        total = per_mode.sum()
        if total == 0.0:
            return 0.0
        return float(per_mode[self.M // 2 + 1:].sum() / total)

    def resized(self, M):
        """Truncate or zero-pad to M harmonics with the matching grid."""
        c = np.zeros((M + 1, self.size), dtype=complex)
        keep = min(M, self.M) + 1
        c[:keep] = self.coefficients[:keep]
        return HarmonicField(c, self.omega)

    def time_grid(self):
        return np.arange(self.grid_size) * (self.theta / self.grid_size)

    def samples(self):
        """(q, p) on the collocation grid, each of shape ``(T, 2N+1)``."""
        T = self.grid_size
        spectrum = np.zeros((T // 2 + 1, self.size), dtype=complex)
        spectrum[:self.M + 1] = T * self.coefficients
        q = np.fft.irfft(spectrum, n=T, axis=0)
        spectrum[:self.M + 1] = T * self.derivative().coefficients
        p = np.fft.irfft(spectrum, n=T, axis=0)
        return q, p

    def synthesize(self, t):
        """(q, p) at arbitrary times ``t``, each of shape ``(len(t), 2N+1)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        m = np.arange(1, self.M + 1)
        phase = np.exp(1j * self.omega * np.outer(t, m))
        c = self.coefficients
        q = c[0].real + 2.0 * np.real(phase @ c[1:])
        p = 2.0 * np.real(phase @ (1j * self.omega * m[:, None] * c[1:]))
        return q, p


@dataclass(frozen=True, eq=False)
class PeriodicSolution:
    """A converged periodic steady state of a chain configuration."""

    field: HarmonicField
    cfg: object
    method: str
    series_state: Optional[object] = None

    @cached_property
    def grid_samples(self):
        return self.field.samples()

    def state_at(self, t=0.0):
        q, p = self.field.synthesize([t])
        return ChainState(q[0], p[0], t)

    def initial_state(self):
        return self.state_at(0.0)

    def norm(self, order=0):
        return self.field.norm(order)


@dataclass
class ConvergenceReport:
    """Iteration record of a series or fixed-point solve."""

    method: str
    converged: bool = False
    iterations: int = 0
    norms: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    residual: float = float('nan')
    sobolev_residual: float = float('nan')
    defect: float = float('nan')
    tail_bound: float = float('nan')
    nu: float = 0.0
    nu0: float = float('nan')
    contraction_factor: float = float('nan')
    odd_projection: bool = False
    M: int = 0
    grid_size: int = 0
    wall_time: float = 0.0

    def to_dict(self):
        """Serializable form. Wall time is left out so repeated runs match byte for byte."""
        data = asdict(self)
        data.pop('wall_time')
        return data
