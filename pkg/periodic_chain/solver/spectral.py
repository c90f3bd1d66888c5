"""
Harmonic-domain solvers for the periodic steady state.

Two constructive methods are provided: the power series in the coupling
strength nu, built order by order from the dissipative kernels, and the
contraction map f -> T f iterated to its fixed point. Both share the
collocation step that turns a field into the harmonics of the nonlinear
force, and both are gated by the resonance gap.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import settings
from .chain import force_field, neumann_laplacian
from .exceptions import ConfigurationError, ConvergenceError, ResonanceError
from .fields import ConvergenceReport, HarmonicField, PeriodicSolution, collocation_size
from .greens import build_kernel_set, harmonic_band_distance
from .time_domain import single_oscillator_gap

logger = logging.getLogger(__name__)

DIVERGENCE_WINDOW = 5


def _scan_limit(cfg):
    return math.ceil(cfg.omega_upper / cfg.omega) + 1


def resonance_gap(cfg):
    """Smallest distance of any (m omega)^2 to the squared band; 0 when resonant.

    Beyond |m| = ceil(omega_u / omega) + 1 the distance only grows, so the
    scan stops there.
    """
    return min(harmonic_band_distance(m, cfg) for m in range(_scan_limit(cfg) + 1))


def odd_resonance_gap(cfg):
    """Same as :func:`resonance_gap` over odd harmonics only."""
    return min(harmonic_band_distance(m, cfg) for m in range(1, _scan_limit(cfg) + 3, 2))


@dataclass(frozen=True)
class CouplingRadius:
    """Resonance gaps and the convergence radii they imply."""

    delta: float
    delta_odd: float
    coupling_bound: float
    nu0: float
    nu0_odd: float
    unbounded: bool = False
    single_oscillator: Optional[dict] = None

    def __iter__(self):
        return iter((self.nu0, self.nu0_odd))

    def to_dict(self):
        return {
            'delta': self.delta,
            'delta_odd': self.delta_odd,
            'coupling_bound': self.coupling_bound,
            'nu0': self.nu0,
            'nu0_odd': self.nu0_odd,
            'unbounded_radius': self.unbounded,
            'single_oscillator': self.single_oscillator,
        }


def _radius(delta, bound):
    if bound == 0.0:
        return math.inf
    if math.isinf(bound):
        return 0.0
    return delta / bound


def coupling_radius(cfg):
    """nu0 = delta / (||V''|| + 3||U''||) and its odd-harmonic counterpart.

    A vanishing bound gives an infinite radius, flagged as ``unbounded``.
    For a single oscillator the sharper gaps that account for friction are
    reported alongside.
    """
    delta = resonance_gap(cfg)
    delta_odd = odd_resonance_gap(cfg)
    bound = cfg.coupling_bound
    single = None
    if cfg.N == 0:
        d, d_odd = single_oscillator_gap(cfg)
        single = {'delta': d, 'delta_odd': d_odd,
                  'nu0': _radius(d, bound), 'nu0_odd': _radius(d_odd, bound)}
    return CouplingRadius(
        delta=delta,
        delta_odd=delta_odd,
        coupling_bound=bound,
        nu0=_radius(delta, bound),
        nu0_odd=_radius(delta_odd, bound),
        unbounded=(bound == 0.0),
        single_oscillator=single,
    )


def initial_truncation(cfg):
    return max(4 * cfg.forcing.max_mode, 16)


def harmonic_base_solution(cfg, kernels, grid_size=0):
    """Exact nu = 0 periodic solution q_x(m) = F_m H_m(x, 0)."""
    if cfg.forcing.max_mode > kernels.M:
        raise ConfigurationError(
            f"kernel set stops at M={kernels.M} but forcing reaches m={cfg.forcing.max_mode}"
        )
    F = cfg.forcing.coefficients(kernels.M)
    return HarmonicField(F[:, None] * kernels.column(0), cfg.omega, grid_size)


def nonlinearity_harmonics(Q, cfg):
    """Harmonics of v = -W(Q(t)) by collocation on the field's time grid."""
    if Q.grid_size < 8 * (2 * Q.M + 1):
        raise ConfigurationError(f"aliasing guard violated: T={Q.grid_size}, M={Q.M}")
    q, _ = Q.samples()
    w = force_field(q, cfg)
    return HarmonicField.analyze(-w, cfg.omega, Q.M, Q.grid_size)


def apply_kernels(kernels, v):
    return v.like(kernels.apply(v.coefficients))


def contraction_map(f, cfg, kernels, base, project_odd=False):
    """T f = base + nu H v(f)."""
    out = base + apply_kernels(kernels, nonlinearity_harmonics(f, cfg)).scaled(cfg.nu)
    return out.project_odd() if project_odd else out


def harmonic_defect(field_, cfg):
    """Residual of the harmonic-coefficient system.

    For every m: (omega0^2 - (m omega)^2 - Delta + i m omega D) q(m)
    - F_m delta_0 - nu v(m), measured in the period-mean norm.
    """
    c = field_.coefficients
    m = np.arange(field_.M + 1)[:, None]
    w = m * cfg.omega
    lhs = (cfg.omega0 ** 2 - w * w) * c - neumann_laplacian(c) + 1j * w * cfg.damping_vector() * c
    rhs = np.zeros_like(c)
    rhs[:, cfg.N] = cfg.forcing.coefficients(field_.M)
    if cfg.nu != 0.0:
        rhs = rhs + cfg.nu * nonlinearity_harmonics(field_, cfg).coefficients
    return field_.like(lhs - rhs).norm()


@dataclass
class SeriesState:
    """Orders q^(l) and partial sums Q^(L) = sum_{l <= L} nu^l q^(l)."""

    nu: float
    orders: list = field(default_factory=list)
    partials: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    delta: float = float('nan')
    nu0: float = float('nan')

    @property
    def order(self):
        return len(self.orders) - 1

    @property
    def partial(self):
        return self.partials[-1]

    def extend(self, q):
        L = len(self.orders)
        increment = q.scaled(self.nu ** L) if L else q
        self.partials.append(self.partials[-1] + increment if L else q)
        self.orders.append(q)
        self.norms.append(q.norm())


def perturbative_step(state, cfg, kernels, grid_size=0, project_odd=False):
    """Next order of the series.

    Order 0 is the base solution. Order L >= 1 is H applied to
    [v(Q^(L-1)) - v(Q^(L-2))] / nu^(L-1), with v(Q^(-1)) = 0.
    """
    if state is None or not state.orders:
        return harmonic_base_solution(cfg, kernels, grid_size)
    L = state.order + 1
    v = nonlinearity_harmonics(state.partials[-1], cfg)
    if L >= 2:
        v = v - nonlinearity_harmonics(state.partials[-2], cfg)
        v = v.scaled(1.0 / cfg.nu ** (L - 1))
    q = apply_kernels(kernels, v)
    return q.project_odd() if project_odd else q


def _gate(cfg, radius, strict):
    """Decide the contraction ratio and whether to restrict to odd harmonics.

    Raises:
        ResonanceError: Some harmonic lies in the band.
    """
    if radius.delta <= 0.0:
        m = next(m for m in range(_scan_limit(cfg) + 1) if harmonic_band_distance(m, cfg) <= 0.0)
        raise ResonanceError(m, f"harmonic m={m} (m*omega={m * cfg.omega:.6g}) lies in the band")
    a = abs(cfg.nu)
    if a == 0.0:
        return 0.0, False
    if a < radius.nu0:
        return a / radius.nu0, False
    if cfg.odd_hypothesis and a < radius.nu0_odd:
        logger.warning(
            f"|nu|={a:.6g} exceeds nu0={radius.nu0:.6g}; proceeding on odd harmonics "
            f"(nu0_odd={radius.nu0_odd:.6g})"
        )
        return a / radius.nu0_odd, True
    message = (f"|nu|={a:.6g} is outside the convergence radius "
               f"(nu0={radius.nu0:.6g}, nu0_odd={radius.nu0_odd:.6g})")
    if strict:
        raise ConvergenceError(message)
    logger.warning(f"{message}; iterating with divergence detection")
    return math.nan, cfg.odd_hypothesis


def choose_truncation(cfg, method=None):
    """Smallest M (doubling from :func:`initial_truncation`) whose base solution
    has a negligible top octave.

    Returns:
        (M, kernels) with the kernel set already built for that M.
    """
    method = method or settings.GREENS_METHOD
    M = initial_truncation(cfg)
    while True:
        kernels = build_kernel_set(cfg, M, method)
        fraction = harmonic_base_solution(cfg, kernels).top_octave_fraction()
        if fraction < settings.TOP_OCTAVE_TOLERANCE or 2 * M > settings.MAX_HARMONICS:
            logger.debug(f"Truncation M={M} (base top-octave fraction {fraction:.3e})")
            return M, kernels
        M *= 2


def _with_refinement(cfg, run, M=None, grid_size=0, kernels=None, method=None):
    """Run ``run(kernels, grid_size)`` and double M until the top octave is negligible."""
    method = method or settings.GREENS_METHOD
    if kernels is not None:
        return run(kernels, grid_size)
    fixed = M is not None
    if fixed:
        kernels = build_kernel_set(cfg, M, method)
    else:
        M, kernels = choose_truncation(cfg, method)
    while True:
        sol, report = run(kernels, grid_size)
        fraction = sol.field.top_octave_fraction()
        if fixed or fraction < settings.TOP_OCTAVE_TOLERANCE:
            return sol, report
        if 2 * M > settings.MAX_HARMONICS:
            logger.warning(f"Top-octave fraction {fraction:.3e} at M={M}; harmonic ceiling reached")
            return sol, report
        logger.info(f"Top-octave fraction {fraction:.3e} at M={M}; doubling to M={2 * M}")
        M *= 2
        grid_size = 0
        kernels = build_kernel_set(cfg, M, method)


def series_solve(cfg, tol=None, max_order=None, M=None, grid_size=0, kernels=None):
    """Sum the perturbative series until the tail is below ``tol``.

    Returns:
        (PeriodicSolution, ConvergenceReport)

    Raises:
        ConvergenceError: |nu| outside every applicable radius, or no
            convergence within ``max_order`` orders.
        ResonanceError: A harmonic lies in the band.
    """
    tol = settings.SOLVER_TOL if tol is None else tol
    max_order = settings.MAX_ORDER if max_order is None else max_order
    radius = coupling_radius(cfg)
    ratio, odd = _gate(cfg, radius, strict=True)
    nu0 = radius.nu0_odd if odd else radius.nu0
    logger.info(f"Series solve: N={cfg.N}, nu={cfg.nu}, nu0={nu0:.6g}, tol={tol:g}")

    def run(kernels, T):
        started = time.perf_counter()
        state = SeriesState(nu=cfg.nu, delta=radius.delta, nu0=nu0)
        state.extend(perturbative_step(None, cfg, kernels, T, odd))
        report = ConvergenceReport(method='series', nu=cfg.nu, nu0=nu0, odd_projection=odd,
                                   M=kernels.M, grid_size=state.partial.grid_size)
        q0_norm = state.norms[0]
        tail = 0.0
        while True:
            L = state.order
            tail = ratio ** L * q0_norm / (1.0 - ratio) if ratio else 0.0
            increment = abs(cfg.nu) ** L * state.norms[-1] if L else q0_norm
            logger.debug(f"order {L}: |||q|||={state.norms[-1]:.3e} increment={increment:.3e} tail={tail:.3e}")
            if cfg.nu == 0.0 or tail < tol or (L > 0 and increment < tol):
                break
            if L >= max_order:
                raise ConvergenceError(
                    f"series did not reach tol={tol:g} within {max_order} orders (tail bound {tail:.3e})"
                )
            state.extend(perturbative_step(state, cfg, kernels, T, odd))
        Q = state.partial
        base = state.orders[0]
        defect = contraction_map(Q, cfg, kernels, base, odd) - Q
        report.converged = True
        report.iterations = state.order
        report.norms = [float(n) for n in state.norms]
        report.ratios = [float(b / a) if a else 0.0 for a, b in zip(state.norms, state.norms[1:])]
        report.tail_bound = float(tail)
        report.contraction_factor = float(ratio)
        report.residual = defect.norm()
        report.sobolev_residual = defect.norm(order=1)
        report.defect = harmonic_defect(Q, cfg)
        report.wall_time = time.perf_counter() - started
        logger.info(f"✓ Series converged at order {state.order} (residual {report.residual:.3e})")
        return PeriodicSolution(Q, cfg, 'series', state), report

    return _with_refinement(cfg, run, M, grid_size, kernels)


def fixed_point_solve(cfg, tol=None, max_iterations=None, M=None, grid_size=0, kernels=None, start=None):
    """Iterate the contraction map from the base solution until |||T f - f||| < tol.

    Raises:
        ConvergenceError: Divergence (residual growth over five consecutive
            iterations) or no convergence within ``max_iterations``.
    """
    tol = settings.SOLVER_TOL if tol is None else tol
    max_iterations = settings.MAX_ITERATIONS if max_iterations is None else max_iterations
    radius = coupling_radius(cfg)
    ratio, odd = _gate(cfg, radius, strict=False)
    nu0 = radius.nu0_odd if odd else radius.nu0
    logger.info(f"Fixed-point solve: N={cfg.N}, nu={cfg.nu}, nu0={nu0:.6g}, tol={tol:g}")

    def run(kernels, T):
        started = time.perf_counter()
        base = harmonic_base_solution(cfg, kernels, T)
        if odd:
            base = base.project_odd()
        f = base if start is None else start.resized(kernels.M)
        report = ConvergenceReport(method='fixed-point', nu=cfg.nu, nu0=nu0, odd_projection=odd,
                                   contraction_factor=float(ratio), M=kernels.M, grid_size=base.grid_size)
        growth = 0
        previous = math.inf
        for iteration in range(1, max_iterations + 1):
            g = contraction_map(f, cfg, kernels, base, odd)
            residual = (g - f).norm()
            report.norms.append(float(residual))
            if math.isfinite(previous) and previous > 0:
                report.ratios.append(float(residual / previous))
            logger.debug(f"iteration {iteration}: |||Tf - f|||={residual:.3e}")
            f = g
            if residual < tol:
                report.converged = True
                report.iterations = iteration
                report.residual = float(residual)
                report.sobolev_residual = (contraction_map(f, cfg, kernels, base, odd) - f).norm(order=1)
                report.defect = harmonic_defect(f, cfg)
                if ratio and math.isfinite(ratio):
                    report.tail_bound = float(ratio * residual / (1.0 - ratio))
                report.wall_time = time.perf_counter() - started
                logger.info(f"✓ Fixed point reached after {iteration} iterations (residual {residual:.3e})")
                return PeriodicSolution(f, cfg, 'fixed-point'), report
            growth = growth + 1 if residual > previous else 0
            if growth >= DIVERGENCE_WINDOW or not math.isfinite(residual):
                raise ConvergenceError(
                    f"fixed-point iteration diverged at iteration {iteration} (residual {residual:.3e})"
                )
            previous = residual
        raise ConvergenceError(
            f"fixed-point iteration did not reach tol={tol:g} within {max_iterations} iterations"
        )

    return _with_refinement(cfg, run, M, grid_size, kernels)


def random_field(rng, M, size, omega, scale=1.0, grid_size=0):
    """Random real-valued field with harmonics decaying like 1/(1 + m^2)."""
    c = rng.standard_normal((M + 1, size)) + 1j * rng.standard_normal((M + 1, size))
    c *= scale / (1.0 + np.arange(M + 1) ** 2)[:, None]
    return HarmonicField(c, omega, grid_size)


def measure_contraction(cfg, kernels, rng, pairs=8, scale=1.0):
    """Largest observed |||T f2 - T f1||| / |||f2 - f1||| over random pairs."""
    base = harmonic_base_solution(cfg, kernels)
    worst = 0.0
    for _ in range(pairs):
        f1 = random_field(rng, kernels.M, cfg.size, cfg.omega, scale)
        f2 = random_field(rng, kernels.M, cfg.size, cfg.omega, scale)
        num = (contraction_map(f2, cfg, kernels, base) - contraction_map(f1, cfg, kernels, base)).norm()
        worst = max(worst, num / (f2 - f1).norm())
    logger.debug(f"Measured contraction factor {worst:.6g} over {pairs} pairs")
    return worst


def synthesize(field_, t_grid=None):
    """Sample q and p = dq/dt of a harmonic field; the collocation grid by default."""
    if t_grid is None:
        return field_.samples()
    return field_.synthesize(t_grid)


def even_harmonic_residual(sol):
    """max over x and even m != 0 of |q_x(m)|, relative to the field norm."""
    c = sol.field.coefficients
    total = sol.field.norm()
    if total == 0.0 or sol.field.M < 2:
        return 0.0
    return float(np.max(np.abs(c[2::2])) / total)


def solve(cfg, method='series', **kwargs):
    """Dispatch to :func:`series_solve` or :func:`fixed_point_solve`."""
    if method == 'series':
        kwargs.pop('max_iterations', None)
        return series_solve(cfg, **kwargs)
    if method in ('fixed', 'fixed-point'):
        kwargs.pop('max_order', None)
        return fixed_point_solve(cfg, **kwargs)
    raise ConfigurationError(f"unknown solver method '{method}'")


__all__ = [
    'CouplingRadius', 'SeriesState', 'apply_kernels', 'choose_truncation', 'collocation_size', 'contraction_map',
    'coupling_radius', 'even_harmonic_residual', 'fixed_point_solve', 'harmonic_base_solution',
    'harmonic_defect', 'initial_truncation', 'measure_contraction', 'nonlinearity_harmonics',
    'odd_resonance_gap', 'perturbative_step', 'random_field', 'resonance_gap', 'series_solve',
    'solve', 'synthesize',
]
