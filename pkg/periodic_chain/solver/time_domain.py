"""
Time-domain ground truth for the chain.

Fixed-step RK4 integration with work and dissipation accounting, the
stroboscopic (period) map and its Newton refinement, linear stability of
the damped harmonic chain, and the closed forms of the single driven
oscillator.
"""

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .. import settings
from .chain import (
    ChainState,
    acceleration,
    force_field_derivative,
    hamiltonian_samples,
    laplacian_matrix,
    neumann_laplacian,
    site_norm,
)
from .exceptions import (
    BlowUpError,
    ConfigurationError,
    ConvergenceError,
    SingularError,
    UsageError,
)
from .fields import HarmonicField, PeriodicSolution, collocation_size

logger = logging.getLogger(__name__)

MIN_STEPS_PER_PERIOD = 256
SERIES_SWITCH = 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 settings.

    ``start_time`` is the time s <= 0 at which the initial condition is
    imposed; strobe samples are taken at s + k theta.
    """

    steps_per_period: int = settings.STEPS_PER_PERIOD
    periods: int = settings.INTEGRATION_PERIODS
    start_time: float = 0.0
    dense_stride: int = 0
    method: str = 'rk4'

    def __post_init__(self):
        n = self.steps_per_period
        if n < MIN_STEPS_PER_PERIOD or n & (n - 1):
            raise ConfigurationError(
                f"integrator.steps_per_period must be a power of two >= {MIN_STEPS_PER_PERIOD}, got {n}"
            )
        if self.periods < 0:
            raise ConfigurationError(f"integrator.periods must be nonnegative, got {self.periods}")
        if self.start_time > 0:
            raise ConfigurationError(f"integrator.start_time must be <= 0, got {self.start_time}")
        if self.method != 'rk4':
            raise ConfigurationError(f"unsupported integrator method '{self.method}'")


@dataclass(eq=False)
class Trajectory:
    """Strobe samples of an integration with energy-balance accounting.

    ``work`` and the two dissipation arrays are cumulative integrals from the
    start time up to each strobe time.
    """

    strobe_times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    work: np.ndarray
    dissipation_left: np.ndarray
    dissipation_right: np.ndarray
    energy: np.ndarray
    dense_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dense_q: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    dense_p: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def periods(self):
        return len(self.strobe_times) - 1

    def state(self, k):
        return ChainState(self.q[k], self.p[k], float(self.strobe_times[k]))

    def final_state(self):
        return self.state(-1)

    def energy_residual(self):
        """H(t_k) - H(t_0) + dissipation - work at every strobe time."""
        return (self.energy - self.energy[0]
                + self.dissipation_left + self.dissipation_right - self.work)


def _augmented_rhs(t, y, cfg, n):
    q, p = y[:n], y[n:2 * n]
    out = np.empty_like(y)
    out[:n] = p
    out[n:2 * n] = acceleration(t, q, p, cfg)
    out[2 * n] = p[cfg.N] * cfg.forcing.evaluate(t, cfg.omega)
    out[2 * n + 1] = cfg.gamma * p[0] ** 2
    out[2 * n + 2] = cfg.gamma * p[-1] ** 2
    return out


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(cfg, initial, icfg=None):
    """Integrate the chain from ``initial`` at ``icfg.start_time`` over ``icfg.periods`` periods.

    Raises:
        BlowUpError: The state became non-finite; carries the last strobe
            time at which it was finite.
    """
    icfg = icfg or IntegratorConfig()
    n = cfg.size
    if initial.q.size != n:
        raise ConfigurationError(f"initial state has {initial.q.size} sites, expected {n}")
    h = cfg.theta / icfg.steps_per_period
    s = icfg.start_time
    y = np.concatenate([initial.q, initial.p, np.zeros(3)])

    def rhs(t, y):
        return _augmented_rhs(t, y, cfg, n)

    K = icfg.periods
    strobes = np.empty((K + 1, 2 * n + 3))
    strobes[0] = y
    dense_t, dense_y = [], []
    stride = icfg.dense_stride
    logger.info(f"Integrating N={cfg.N} over {K} periods ({icfg.steps_per_period} steps/period)")
    for k in range(K):
        for j in range(icfg.steps_per_period):
            t = s + (k * icfg.steps_per_period + j) * h
            if stride and j % stride == 0:
                dense_t.append(t)
                dense_y.append(y[:2 * n].copy())
            y = _rk4_step(rhs, t, y, h)
        if not np.all(np.isfinite(y)):
            raise BlowUpError(s + k * cfg.theta)
        strobes[k + 1] = y
    times = s + cfg.theta * np.arange(K + 1)
    q, p = strobes[:, :n], strobes[:, n:2 * n]
    traj = Trajectory(
        strobe_times=times,
        q=q,
        p=p,
        work=strobes[:, 2 * n],
        dissipation_left=strobes[:, 2 * n + 1],
        dissipation_right=strobes[:, 2 * n + 2],
        energy=hamiltonian_samples(q, p, cfg),
    )
    if stride:
        traj.dense_times = np.array(dense_t)
        dense = np.array(dense_y)
        traj.dense_q, traj.dense_p = dense[:, :n], dense[:, n:]
    logger.info(f"✓ Integration finished at t={times[-1]:.6g}")
    return traj


def _require_single_oscillator(cfg, what):
    if cfg.N != 0:
        raise UsageError(f"{what} needs N=0, got N={cfg.N}")


def _sinhc(eps, t):
    """sinh(eps t) / eps, with its Taylor series near eps t = 0."""
    z = eps * t
    if abs(z) < SERIES_SWITCH:
        return t * (1.0 + z * z / 6.0 + z ** 4 / 120.0)
    return cmath.sinh(z) / eps


def single_oscillator_exact(cfg, q0, p0, t):
    """Closed-form motion of the driven, damped single oscillator.

    Solves q'' + 2 gamma q' + omega0^2 q = 2 Re(F_1 e^{i omega t}) with
    q(0) = q0, p(0) = p0. The homogeneous part uses eps = sqrt(gamma^2 -
    omega0^2) in complex arithmetic, which covers the over-, under- and
    critically damped cases. The undamped resonant case omega = omega0 uses
    the secular particular solution.

    Returns:
        (q, p) arrays matching the shape of ``t``.
    """
    _require_single_oscillator(cfg, 'single_oscillator_exact')
    if cfg.nu != 0.0:
        raise UsageError("single_oscillator_exact needs nu=0")
    if any(m != 1 for m, _ in cfg.forcing.modes):
        raise UsageError("single_oscillator_exact needs forcing on the first harmonic only")
    F = cfg.forcing.coefficients(1)[1]
    w, w0, g = cfg.omega, cfg.omega0, cfg.gamma
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * w * t)

    if g == 0.0 and abs(w - w0) <= 1e-12 * w0:
        c = F / (1j * w0)
        qs = np.real(c * t * phase)
        ps = np.real(c * (1.0 + 1j * w0 * t) * phase)
        d0, d1 = q0, p0 - F.imag / w0
    else:
        response = F / (w0 ** 2 - w ** 2 + 2j * g * w)
        qs = 2.0 * np.real(response * phase)
        ps = 2.0 * np.real(1j * w * response * phase)
        d0 = q0 - 2.0 * response.real
        d1 = p0 - 2.0 * np.real(1j * w * response)

    eps = cmath.sqrt(g * g - w0 * w0)
    flat = t.ravel()
    B = np.array([(cmath.exp(-g * s) * _sinhc(eps, s)).real for s in flat]).reshape(t.shape)
    A = np.array([(cmath.exp(-g * s) * (cmath.cosh(eps * s) + g * _sinhc(eps, s))).real
                  for s in flat]).reshape(t.shape)
    q = qs + d0 * A + d1 * B
    p = ps + d0 * (-w0 * w0 * B) + d1 * (A - 2.0 * g * B)
    return q, p


def _gap_profile(cfg, m):
    s = (np.asarray(m, dtype=float) * cfg.omega) ** 2
    return np.sqrt((cfg.omega0 ** 2 - s) ** 2 + 4.0 * cfg.gamma ** 2 * s)


def single_oscillator_gap(cfg):
    """Gaps (delta, delta_odd) of the single oscillator, friction included.

    phi(m) = |omega0^2 - (m omega)^2 + 2 i gamma m omega| is minimized over
    m >= 0 and over odd m. phi^2 is a convex quadratic in s = (m omega)^2
    with vertex s* = omega0^2 - 2 gamma^2, so only the integers bracketing
    sqrt(s*) / omega need to be compared.
    """
    _require_single_oscillator(cfg, 'single_oscillator_gap')
    w0, g, w = cfg.omega0, cfg.gamma, cfg.omega
    s_star = w0 * w0 - 2.0 * g * g
    if s_star > 0:
        m_star = int(math.floor(math.sqrt(s_star) / w))
        delta = float(min(_gap_profile(cfg, m_star), _gap_profile(cfg, m_star + 1)))
    else:
        delta = w0 * w0
    if s_star < w * w:
        delta_odd = float(_gap_profile(cfg, 1))
    else:
        m_star = int(math.floor(math.sqrt(s_star) / w))
        below = m_star if m_star % 2 else m_star - 1
        candidates = [m for m in (below, below + 2) if m >= 1]
        delta_odd = float(min(_gap_profile(cfg, m) for m in candidates))
    return delta, delta_odd


def single_oscillator_gap_scan(cfg, m_max=10 ** 6):
    """Brute-force (delta, delta_odd) over m <= m_max, the oracle for the closed form."""
    _require_single_oscillator(cfg, 'single_oscillator_gap_scan')
    phi = _gap_profile(cfg, np.arange(m_max + 1))
    return float(phi.min()), float(phi[1::2].min())


@dataclass(frozen=True, eq=False)
class DriftMatrix:
    """Generator of the damped harmonic chain, z' = A z with z = (q, p)."""

    matrix: np.ndarray
    N: int

    @property
    def size(self):
        return 2 * self.N + 1

    def eigenvalues(self):
        try:
            return linalg.eigvals(self.matrix)
        except linalg.LinAlgError as e:
            raise ConvergenceError(f"eigenvalue solver failed for N={self.N}") from e


def drift_matrix(cfg):
    """A = [[0, I], [Delta - omega0^2 I, -gamma E]] with E the boundary friction pattern."""
    n = cfg.size
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = laplacian_matrix(cfg.N) - cfg.omega0 ** 2 * np.eye(n)
    A[n:, n:] = -np.diag(cfg.damping_vector())
    return DriftMatrix(A, cfg.N)


def decay_rate(A):
    """lambda_N = -max Re(eig A)."""
    rate = float(-np.max(A.eigenvalues().real))
    logger.debug(f"Decay rate for N={A.N}: {rate:.6e}")
    return rate


def decay_rate_table(cfg, N_list):
    """Rows (N, lambda_N, lambda_N N^3) for comparison with the cubic lower-bound shape."""
    rows = []
    for N in N_list:
        rate = decay_rate(drift_matrix(cfg.with_changes(N=N)))
        rows.append({'N': N, 'decay_rate': rate, 'scaled': rate * max(N, 1) ** 3})
    return rows


def _forced_generator(cfg):
    """Block generator [[A, B], [0, R]] whose last rows rotate (cos, sin) of each forcing mode."""
    n = cfg.size
    modes = cfg.forcing.modes
    k = 2 * len(modes)
    G = np.zeros((2 * n + k, 2 * n + k))
    G[:2 * n, :2 * n] = drift_matrix(cfg).matrix
    u0 = np.zeros(k)
    for i, (m, F) in enumerate(modes):
        c, s = 2 * n + 2 * i, 2 * n + 2 * i + 1
        w = m * cfg.omega
        G[c, s], G[s, c] = -w, w
        G[n + cfg.N, c] = 2.0 * F.real
        G[n + cfg.N, s] = -2.0 * F.imag
        u0[2 * i] = 1.0
    return G, u0


def linear_periodic_via_monodromy(cfg, M=None, grid_size=0):
    """Periodic solution of the linear (nu = 0) chain from the monodromy matrix.

    The periodic point is z* = (I - e^{A theta})^{-1} c, where c is the state
    reached from rest after one period. c comes from the exponential of the
    forcing-augmented generator, so the forcing integral carries no
    quadrature error. The orbit is then propagated one period on the
    collocation grid and analyzed into harmonics.

    Raises:
        UsageError: nu != 0.
        SingularError: gamma = 0 or I - e^{A theta} singular.
    """
    if cfg.nu != 0.0:
        raise UsageError("linear_periodic_via_monodromy needs nu=0")
    if cfg.gamma <= 0.0:
        raise SingularError("monodromy I - e^{A theta} is singular without damping (gamma=0)")
    n = cfg.size
    M = M or max(4 * cfg.forcing.max_mode, 16)
    T = grid_size or collocation_size(M)
    G, u0 = _forced_generator(cfg)
    full = linalg.expm(G * cfg.theta)
    monodromy = full[:2 * n, :2 * n]
    c = full[:2 * n, 2 * n:] @ u0
    try:
        z = linalg.solve(np.eye(2 * n) - monodromy, c)
    except linalg.LinAlgError as e:
        raise SingularError("I - e^{A theta} is singular") from e
    step = linalg.expm(G * (cfg.theta / T))
    y = np.concatenate([z, u0])
    samples = np.empty((T, n))
    for j in range(T):
        samples[j] = y[:n]
        y = step @ y
    field_ = HarmonicField.analyze(samples, cfg.omega, M, T)
    logger.info(f"✓ Linear periodic orbit from monodromy (N={cfg.N}, M={M})")
    return PeriodicSolution(field_, cfg, 'monodromy')


def stroboscopic_distance(traj, sol):
    """d_k = ||q(s + k theta) - q_p(s)|| + ||p(s + k theta) - p_p(s)||."""
    ref = sol.state_at(float(traj.strobe_times[0]))
    return site_norm(traj.q - ref.q) + site_norm(traj.p - ref.p)


def strobe_decay_rate(distances, theta, start=0, floor=1e-12):
    """Least-squares decay rate (per unit time) of strobe distances above ``floor``."""
    d = np.asarray(distances, dtype=float)[start:]
    k = np.arange(start, start + d.size)
    keep = d > floor
    if keep.sum() < 3:
        raise ConvergenceError("too few strobe distances above the floor to fit a rate")
    slope, _ = np.polyfit(k[keep], np.log(d[keep]), 1)
    return float(-slope / theta)


def period_map(cfg, z, icfg=None, with_jacobian=False, t0=0.0):
    """Flow z -> Phi_theta(z) over one period starting at ``t0``.

    With ``with_jacobian`` the variational equations are integrated with the
    same RK4 steps and the monodromy matrix d Phi / dz is returned too.
    """
    icfg = icfg or IntegratorConfig()
    n = cfg.size
    h = cfg.theta / icfg.steps_per_period
    q, p = np.array(z[:n], dtype=float), np.array(z[n:], dtype=float)
    damping = cfg.damping_vector()

    def rhs(t, q, p, dq, dp):
        a = acceleration(t, q, p, cfg)
        if dq is None:
            return p, a, None, None
        da = neumann_laplacian(dq) - cfg.omega0 ** 2 * dq - damping * dp
        if cfg.nu != 0.0:
            da = da - cfg.nu * force_field_derivative(q, dq, cfg)
        return p, a, dp, da

    dq = dp = None
    if with_jacobian:
        eye = np.eye(2 * n)
        dq, dp = eye[:, :n].copy(), eye[:, n:].copy()
    for j in range(icfg.steps_per_period):
        t = t0 + j * h
        k1 = rhs(t, q, p, dq, dp)
        k2 = rhs(t + h / 2, *_advance((q, p, dq, dp), k1, h / 2))
        k3 = rhs(t + h / 2, *_advance((q, p, dq, dp), k2, h / 2))
        k4 = rhs(t + h, *_advance((q, p, dq, dp), k3, h))
        q, p, dq, dp = (
            None if x is None else x + (h / 6.0) * (a + 2 * b + 2 * c + d)
            for x, a, b, c, d in zip((q, p, dq, dp), k1, k2, k3, k4)
        )
    out = np.concatenate([q, p])
    if not np.all(np.isfinite(out)):
        raise BlowUpError(t0)
    if not with_jacobian:
        return out
    return out, np.concatenate([dq, dp], axis=1).T


def _advance(y, k, h):
    return tuple(None if x is None else x + h * dx for x, dx in zip(y, k))


def newton_periodic(cfg, guess, tol=None, icfg=None, max_iterations=None):
    """Fixed point of the period map by Newton's method with step halving.

    Solves Phi_theta(z) - z = 0 using the monodromy matrix from the
    variational equations.

    Raises:
        UsageError: gamma = 0.
        SingularError: I - monodromy is singular.
        ConvergenceError: No convergence within ``max_iterations``.
    """
    tol = settings.NEWTON_TOL if tol is None else tol
    max_iterations = settings.NEWTON_MAX_ITERATIONS if max_iterations is None else max_iterations
    if cfg.gamma <= 0.0:
        raise UsageError("newton_periodic needs gamma > 0")
    icfg = icfg or IntegratorConfig()
    t0 = guess.t
    z = guess.as_vector()
    eye = np.eye(z.size)
    image, jac = period_map(cfg, z, icfg, True, t0)
    residual = image - z
    norm = float(np.linalg.norm(residual))
    for iteration in range(1, max_iterations + 1):
        try:
            dz = linalg.solve(jac - eye, -residual)
        except linalg.LinAlgError as e:
            raise SingularError("I - monodromy is singular at the Newton iterate") from e
        step = 1.0
        while True:
            candidate = z + step * dz
            try:
                image_c, jac_c = period_map(cfg, candidate, icfg, True, t0)
                norm_c = float(np.linalg.norm(image_c - candidate))
            except BlowUpError:
                norm_c = math.inf
            if norm_c < norm or step < 1e-4:
                break
            step *= 0.5
        if not math.isfinite(norm_c):
            raise ConvergenceError("Newton step left the finite region of the period map")
        z, image, jac, norm = candidate, image_c, jac_c, norm_c
        residual = image - z
        logger.debug(f"Newton iteration {iteration}: |G(z)|={norm:.3e} (step {step:g})")
        if norm < tol:
            logger.info(f"✓ Newton converged in {iteration} iterations (|G|={norm:.3e})")
            return ChainState.from_vector(z, t0)
    raise ConvergenceError(f"Newton did not converge within {max_iterations} iterations (|G|={norm:.3e})")


def static_equilibria(cfg, q_max=10.0, samples=4001):
    """Nonzero roots of omega0^2 q + nu V'(q) = 0, the uniform static states of the chain."""
    def g(q):
        return cfg.omega0 ** 2 * q + cfg.nu * float(cfg.V.first_derivative(q))

    grid = np.linspace(-q_max, q_max, samples)
    values = np.array([g(x) for x in grid])
    roots = []
    for a, b, ga, gb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if ga == 0.0:
            roots.append(float(a))
        elif ga * gb < 0:
            roots.append(float(optimize.brentq(g, a, b, xtol=1e-15)))
    return [r for r in roots if abs(r) > 1e-9]


def double_well_seed(cfg):
    """Uniform state at the smallest positive statically stable root q_bar.

    Raises:
        ConfigurationError: No such root exists.
    """
    for r in sorted(x for x in static_equilibria(cfg) if x > 0):
        curvature = cfg.omega0 ** 2 + cfg.nu * float(cfg.V.second_derivative(r))
        if curvature > 0:
            logger.info(f"Double-well seed at q_bar={r:.12g} (curvature {curvature:.6g})")
            return ChainState(np.full(cfg.size, r), np.zeros(cfg.size), 0.0)
    raise ConfigurationError("no stable nonzero uniform equilibrium for this pinning potential")


def distinct_orbits(states, atol=1e-6):
    """Group fixed points of the period map that lie within ``atol`` of each other."""
    groups = []
    for s in states:
        z = s.as_vector()
        for group in groups:
            if np.linalg.norm(group[0].as_vector() - z) < atol:
                group.append(s)
                break
        else:
            groups.append([s])
    return groups
