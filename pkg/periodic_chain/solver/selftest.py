"""
Embedded oracle suites run by the ``selftest`` subcommand.

Each suite compares a solver component against an independent computation
and returns a result row; :func:`run_all` raises :class:`OracleFailure`
if any row fails.
"""

import logging
import math

import numpy as np
from scipy import integrate as quadrature

from .. import settings
from .chain import ChainConfig, ChainState, ForcingSpectrum
from .exceptions import OracleFailure
from .greens import (
    dense_resolvent,
    dissipative_greens,
    infinite_greens,
    neumann_greens_table,
)
from .spectral import series_solve
from .time_domain import (
    IntegratorConfig,
    integrate,
    single_oscillator_exact,
    single_oscillator_gap,
    single_oscillator_gap_scan,
)

logger = logging.getLogger(__name__)

GREENS_TOLERANCE = 1e-12
QUADRATURE_TOLERANCE = 1e-10
CLOSED_FORM_TOLERANCE = 1e-9


def _off_band_lambda(rng, omega0, reach=30.0):
    """Random real lambda = -Omega^2 with Omega^2 at least 0.2 away from the band."""
    lo, hi = omega0 ** 2, omega0 ** 2 + 4.0
    if rng.random() < 0.5 and lo > 0.2:
        w = rng.uniform(0.0, lo - 0.2)
    else:
        w = rng.uniform(hi + 0.2, hi + reach)
    return -w


def _relative(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def greens_dense_oracle(rng, trials=200):
    """Dissipative kernel vs the dense complex solve, and images/eigen/dense agreement."""
    worst = 0.0
    for _ in range(trials):
        N = int(rng.integers(0, 7))
        omega0 = rng.uniform(0.5, 2.0)
        lam = _off_band_lambda(rng, omega0)
        sigma = rng.uniform(0.0, 2.0)
        H = dissipative_greens(lam, sigma, N, omega0)
        worst = max(worst, _relative(H, dense_resolvent(lam, sigma, N, omega0)))
        tables = [neumann_greens_table(lam, N, omega0, m) for m in ('images', 'eigen', 'dense')]
        worst = max(worst, _relative(tables[0], tables[2]), _relative(tables[1], tables[2]))
    return {'name': 'greens_dense', 'trials': trials, 'max_error': worst,
            'passed': worst < GREENS_TOLERANCE}


def greens_quadrature_oracle(rng, points=50):
    """Infinite-lattice kernel vs the Fourier integral evaluated by quadrature."""
    worst = 0.0
    for _ in range(points):
        omega0 = rng.uniform(0.5, 2.0)
        lam = _off_band_lambda(rng, omega0, reach=6.0)
        x = int(rng.integers(0, 4))

        def integrand(u):
            return math.cos(2.0 * math.pi * u * x) / (lam + 4.0 * math.sin(math.pi * u) ** 2 + omega0 ** 2)

        exact, _ = quadrature.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
        value = complex(infinite_greens(lam, x, omega0))
        worst = max(worst, abs(value - exact) / max(abs(exact), 1e-300))
    return {'name': 'greens_quadrature', 'trials': points, 'max_error': worst,
            'passed': worst < QUADRATURE_TOLERANCE}


def _single_oscillator(nu=0.0, gamma=0.3, omega=3.0, amplitude=1.0):
    return ChainConfig.from_frequency(
        omega, N=0, omega0=1.0, gamma=gamma, nu=nu,
        forcing=ForcingSpectrum.single(amplitude),
    )


def rk4_order_oracle():
    """Error of RK4 against the closed form must drop by about 16 when h halves."""
    cfg = _single_oscillator()
    initial = ChainState(np.array([0.2]), np.array([-0.1]))
    errors = []
    for steps in (256, 512):
        traj = integrate(cfg, initial, IntegratorConfig(steps_per_period=steps, periods=2))
        q, p = single_oscillator_exact(cfg, 0.2, -0.1, traj.strobe_times)
        errors.append(max(np.max(np.abs(traj.q[:, 0] - q)), np.max(np.abs(traj.p[:, 0] - p))))
    order = math.log2(errors[0] / errors[1]) if errors[1] > 0 else math.inf
    return {'name': 'rk4_order', 'trials': 2, 'max_error': float(errors[1]), 'order': order,
            'passed': 3.6 < order < 4.4}


def closed_form_oracle():
    """N = 0 spectral steady state vs the closed form, and the gap formula vs a brute scan."""
    cfg = _single_oscillator()
    sol, _ = series_solve(cfg)
    start = sol.initial_state()
    t = np.linspace(0.0, 3.0 * cfg.theta, 61)
    q, p = single_oscillator_exact(cfg, start.q[0], start.p[0], t)
    q_s, p_s = sol.field.synthesize(t)
    worst = max(np.max(np.abs(q - q_s[:, 0])), np.max(np.abs(p - p_s[:, 0])))
    for omega0, gamma, omega in ((1.0, 1.0, 3.0), (2.0, 0.1, 3.0), (1.0, 0.5, 2.0), (3.0, 0.05, 0.7)):
        case = ChainConfig.from_frequency(omega, N=0, omega0=omega0, gamma=gamma, nu=0.0)
        closed = np.array(single_oscillator_gap(case))
        scanned = np.array(single_oscillator_gap_scan(case, m_max=10 ** 5))
        worst = max(worst, _relative(closed, scanned))
    return {'name': 'closed_forms', 'trials': 5, 'max_error': float(worst),
            'passed': worst < CLOSED_FORM_TOLERANCE}


def run_all(seed=None):
    """Run every suite with a seeded generator.

    Raises:
        OracleFailure: At least one suite failed; ``results`` holds every row.
    """
    seed = settings.SELFTEST_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    results = []
    for suite in (lambda: greens_dense_oracle(rng), lambda: greens_quadrature_oracle(rng),
                  rk4_order_oracle, closed_form_oracle):
        row = suite()
        mark = '✓' if row['passed'] else '✗'
        logger.info(f"{mark} {row['name']}: max error {row['max_error']:.3e}")
        results.append(row)
    failed = [r['name'] for r in results if not r['passed']]
    if failed:
        error = OracleFailure(f"oracle suites failed: {', '.join(failed)}")
        error.results = results
        raise error
    return results
