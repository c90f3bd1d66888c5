"""
Chain model: configuration, discrete operators, equations of motion,
Hamiltonian and the norms used by the convergence checks.

Sites are x = -N..N, stored at array index x + N. Every operator acts on the
last axis so that stacks of time samples (shape ``(T, 2N+1)``) go through
the same code as single configurations.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import potentials
from .exceptions import ConfigurationError
from .potentials import Potential

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForcingSpectrum:
    """Fourier coefficients F_m of the driving force, stored for m >= 1.

    F(t) = sum over m != 0 of F_m e^{i m omega t}, with F_{-m} = conj(F_m),
    so only positive modes are kept and F_0 = 0 cannot be represented.
    """

    modes: tuple

    def __post_init__(self):
        seen = set()
        normalized = []
        for m, value in self.modes:
            if int(m) != m:
                raise ConfigurationError(f"forcing mode index must be an integer, got {m!r}")
            m = int(m)
            if m == 0:
                raise ConfigurationError("forcing: F_0 = 0 required, mode m=0 is not allowed")
            if m < 0:
                raise ConfigurationError(
                    f"forcing: give mode {m} as its conjugate partner m={-m}"
                )
            if m in seen:
                raise ConfigurationError(f"forcing: duplicate mode m={m}")
            seen.add(m)
            normalized.append((m, complex(value)))
        normalized.sort()
        object.__setattr__(self, 'modes', tuple(normalized))

    @classmethod
    def single(cls, amplitude, m=1):
        """F(t) = amplitude cos(m omega t)."""
        return cls(((m, 0.5 * amplitude),))

    @classmethod
    def none(cls):
        return cls(())

    @property
    def max_mode(self):
        return self.modes[-1][0] if self.modes else 0

    @property
    def is_zero(self):
        return all(v == 0 for _, v in self.modes)

    @property
    def is_odd(self):
        return all(m % 2 == 1 for m, v in self.modes if v != 0)

    @property
    def sobolev_weight(self):
        """sum of (m |F_m|)^2 over stored modes."""
        return float(sum((m * abs(v)) ** 2 for m, v in self.modes))

    def coefficients(self, M):
        """Dense array of F_m for m = 0..M."""
        out = np.zeros(M + 1, dtype=complex)
        for m, v in self.modes:
            if m <= M:
                out[m] = v
        return out

    def evaluate(self, t, omega):
        """Real force F(t) at times ``t``."""
        t = np.asarray(t, dtype=float)
        total = np.zeros_like(t)
        for m, v in self.modes:
            total = total + 2.0 * np.real(v * np.exp(1j * m * omega * t))
        return total

    def describe(self):
        return [[m, v.real, v.imag] for m, v in self.modes]


@dataclass(frozen=True)
class ChainConfig:
    """All physical parameters of the driven chain.

    The period theta is stored and omega = 2 pi / theta is derived.
    """

    N: int
    omega0: float
    gamma: float
    nu: float
    theta: float
    V: Potential = field(default_factory=potentials.zero)
    U: Potential = field(default_factory=potentials.zero)
    forcing: ForcingSpectrum = field(default_factory=ForcingSpectrum.none)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ConfigurationError(f"chain.N must be a nonnegative integer, got {self.N!r}")
        object.__setattr__(self, 'N', int(self.N))
        if not self.omega0 > 0:
            raise ConfigurationError(f"chain.omega0 must be positive, got {self.omega0!r}")
        if not self.gamma >= 0:
            raise ConfigurationError(f"chain.gamma must be nonnegative, got {self.gamma!r}")
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ConfigurationError(f"chain.theta must be positive, got {self.theta!r}")
        if not math.isfinite(self.nu):
            raise ConfigurationError(f"chain.nu must be finite, got {self.nu!r}")

    @classmethod
    def from_frequency(cls, omega, **kwargs):
        return cls(theta=2.0 * math.pi / omega, **kwargs)

    @property
    def omega(self):
        return 2.0 * math.pi / self.theta

    @property
    def omega_upper(self):
        return math.sqrt(self.omega0 ** 2 + 4.0)

    @property
    def size(self):
        return 2 * self.N + 1

    @property
    def sites(self):
        return np.arange(-self.N, self.N + 1)

    @property
    def coupling_bound(self):
        """||V''|| + 3 ||U''||, the constant dividing the resonance gap."""
        return self.V.second_derivative_bound + 3.0 * self.U.second_derivative_bound

    @property
    def odd_hypothesis(self):
        """Even potentials with forcing on odd harmonics only."""
        return self.V.is_even and self.U.is_even and self.forcing.is_odd

    def damping_vector(self):
        """Per-site friction; at N = 0 both ends coincide and give 2 gamma."""
        d = np.zeros(self.size)
        d[0] += self.gamma
        d[-1] += self.gamma
        return d

    def with_changes(self, **changes):
        return replace(self, **changes)

    def describe(self):
        return {
            'N': self.N,
            'omega0': self.omega0,
            'gamma': self.gamma,
            'nu': self.nu,
            'theta': self.theta,
            'V': self.V.describe(),
            'U': self.U.describe(),
            'forcing': self.forcing.describe(),
        }

    def config_hash(self):
        payload = json.dumps(self.describe(), sort_keys=True, default=repr)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()


@dataclass(frozen=True, eq=False)
class ChainState:
    """Positions and momenta of all 2N+1 sites at time t."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.ndim != 1 or q.shape != p.shape:
            raise ConfigurationError(
                f"state arrays must be 1-d with equal length, got {q.shape} and {p.shape}"
            )
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'p', p)

    @classmethod
    def at_rest(cls, cfg, t=0.0):
        return cls(np.zeros(cfg.size), np.zeros(cfg.size), t)

    @classmethod
    def from_vector(cls, z, t=0.0):
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n].copy(), z[n:].copy(), t)

    def as_vector(self):
        return np.concatenate([self.q, self.p])


def _check_sites(f, cfg=None):
    f = np.asarray(f)
    if f.shape[-1] == 0:
        raise ConfigurationError("site array is empty")
    if cfg is not None and f.shape[-1] != cfg.size:
        raise ConfigurationError(f"expected {cfg.size} sites, got {f.shape[-1]}")
    return f


def _reflect(f):
    widths = [(0, 0)] * (f.ndim - 1) + [(1, 1)]
    return np.pad(f, widths, mode='edge')


def neumann_laplacian(f):
    """Second difference with the reflecting extension f_{N+1} = f_N, f_{-N-1} = f_{-N}."""
    f = _check_sites(f)
    g = _reflect(f)
    return g[..., 2:] + g[..., :-2] - 2.0 * f


def laplacian_matrix(N):
    """Dense Neumann Laplacian built from its action on unit vectors."""
    return neumann_laplacian(np.eye(2 * N + 1))


def bonds(f):
    """Bond lengths f_x - f_{x-1} for x = -N..N+1, boundary bonds are zero."""
    return np.diff(_reflect(np.asarray(f, dtype=float)), axis=-1)


def force_field(f, cfg):
    """W_x(f) = V'(f_x) - [U'(f_{x+1} - f_x) - U'(f_x - f_{x-1})]."""
    f = _check_sites(np.asarray(f, dtype=float), cfg)
    b = bonds(f)
    du = cfg.U.first_derivative(b)
    return cfg.V.first_derivative(f) - (du[..., 1:] - du[..., :-1])


def force_field_derivative(f, df, cfg):
    """Directional derivative of W at f along df.

    ``df`` may carry extra leading axes (tangent columns) as long as the site
    axis is last and broadcasts against ``f``.
    """
    f = np.asarray(f, dtype=float)
    b = bonds(f)
    db = bonds(df)
    ddu = cfg.U.second_derivative(b) * db
    return cfg.V.second_derivative(f) * df - (ddu[..., 1:] - ddu[..., :-1])


def acceleration(t, q, p, cfg):
    """Right-hand side of the momentum equation for raw arrays."""
    a = neumann_laplacian(q) - cfg.omega0 ** 2 * q - cfg.damping_vector() * p
    if cfg.nu != 0.0:
        a = a - cfg.nu * force_field(q, cfg)
    a[..., cfg.N] += cfg.forcing.evaluate(t, cfg.omega)
    return a


def eom_rhs(state, cfg):
    """Acceleration of every site for the given state."""
    _check_sites(state.q, cfg)
    return acceleration(state.t, state.q, state.p, cfg)


def hamiltonian(state, cfg):
    """Total energy of the undriven, undamped chain at ``state``."""
    q, p = state.q, state.p
    _check_sites(q, cfg)
    b = bonds(q)[..., :-1]
    energy = 0.5 * np.sum(p * p) + 0.5 * np.sum(b * b) + 0.5 * cfg.omega0 ** 2 * np.sum(q * q)
    if cfg.nu != 0.0:
        energy += cfg.nu * (np.sum(cfg.V.value(q)) + np.sum(cfg.U.value(b)))
    return float(energy)


def hamiltonian_samples(q, p, cfg):
    """Hamiltonian along a stack of samples of shape ``(T, 2N+1)``."""
    b = bonds(q)[..., :-1]
    energy = 0.5 * np.sum(p * p, axis=-1) + 0.5 * np.sum(b * b, axis=-1)
    energy = energy + 0.5 * cfg.omega0 ** 2 * np.sum(q * q, axis=-1)
    if cfg.nu != 0.0:
        energy = energy + cfg.nu * (np.sum(cfg.V.value(q), axis=-1) + np.sum(cfg.U.value(b), axis=-1))
    return energy


def site_norm(f):
    """(sum_x f_x^2)^{1/2} over the last axis."""
    f = _check_sites(f)
    return np.sqrt(np.sum(np.abs(f) ** 2, axis=-1))


def period_mean_norm(samples):
    """((1/theta) int_0^theta ||F(t)||^2 dt)^{1/2} from uniform samples over one period.

    The periodic Riemann sum is exact for trigonometric polynomials whose
    degree is below half the number of samples.
    """
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ConfigurationError("period_mean_norm needs a non-empty (T, sites) sample array")
    return float(np.sqrt(np.mean(np.sum(np.abs(samples) ** 2, axis=-1))))


def sequence_norm(coefficients, omega=None, order=0):
    """l2 norm of harmonic coefficients ``[m, x]`` for m = 0..M.

    Each m > 0 stands for the pair +-m and is counted twice. With
    ``order`` k > 0 the terms are weighted by (1 + (m omega)^2)^k, which gives
    the Sobolev variant of the period-mean norm.
    """
    c = np.asarray(coefficients)
    if c.size == 0:
        raise ConfigurationError("sequence_norm of an empty array")
    per_mode = np.sum(np.abs(c) ** 2, axis=-1)
    weights = np.full(per_mode.shape[0], 2.0)
    weights[0] = 1.0
    if order:
        m = np.arange(per_mode.shape[0])
        weights = weights * (1.0 + (m * omega) ** 2) ** order
    return float(np.sqrt(np.sum(weights * per_mode)))
