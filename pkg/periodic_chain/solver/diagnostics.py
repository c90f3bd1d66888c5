"""
Diagnostics on converged periodic solutions and trajectories.

Period integrals over a converged solution are evaluated from its
harmonics, never by time quadrature.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .chain import hamiltonian_samples
from .exceptions import ConfigurationError, DegenerateProfileError
from .fields import PeriodicSolution
from .spectral import coupling_radius, even_harmonic_residual, solve
from .time_domain import Trajectory, decay_rate, decay_rate_table, drift_matrix
from .writers import dumps

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-300
NOISE_FLOOR = 1e-13


def work_per_period(sol, cfg=None):
    """Period-averaged power of the force, (1/theta) int F(t) p_0(t) dt.

    Evaluated as 2 Re sum_{m >= 1} conj(F_m) i m omega q_0(m).
    """
    cfg = cfg or sol.cfg
    c = sol.field.coefficients
    M = sol.field.M
    F = cfg.forcing.coefficients(M)
    m = np.arange(M + 1)
    return float(2.0 * np.real(np.sum(np.conj(F[1:]) * 1j * m[1:] * cfg.omega * c[1:, cfg.N])))


def boundary_dissipation(sol, cfg=None):
    """(left, right) friction losses per unit time, gamma (1/theta) int p_{+-N}^2 dt."""
    cfg = cfg or sol.cfg
    p = sol.field.derivative().coefficients

    def mean_square(x):
        return float(np.abs(p[0, x]) ** 2 + 2.0 * np.sum(np.abs(p[1:, x]) ** 2))

    return cfg.gamma * mean_square(0), cfg.gamma * mean_square(-1)


def work_scale(sol, cfg=None):
    """Size of the individual terms of the work sum, ||F|| ||p_0||."""
    cfg = cfg or sol.cfg
    M = sol.field.M
    F = cfg.forcing.coefficients(M)
    p0 = sol.field.derivative().coefficients[:, cfg.N]
    return float(np.linalg.norm(F) * np.linalg.norm(p0))


def energy_balance_residual(obj, cfg=None):
    """Residual of the energy identity.

    For a trajectory: max over strobe times of
    |H(t) - H(s) + friction loss - work|. For a periodic solution: the
    one-period balance theta (left + right - W).
    """
    if isinstance(obj, Trajectory):
        return float(np.max(np.abs(obj.energy_residual())))
    if isinstance(obj, PeriodicSolution):
        cfg = cfg or obj.cfg
        left, right = boundary_dissipation(obj, cfg)
        return float(cfg.theta * (left + right - work_per_period(obj, cfg)))
    raise ConfigurationError(f"cannot compute an energy balance for {type(obj).__name__}")


def relative_energy_balance(sol, cfg=None):
    """Balance residual normalized by max(theta W, theta ||F|| ||p_0||).

    The work sum cancels strongly once the response at the ends is small,
    so its attainable accuracy is set by the size of its terms.
    """
    cfg = cfg or sol.cfg
    W = work_per_period(sol, cfg)
    scale = cfg.theta * max(abs(W), work_scale(sol, cfg), 1e-300)
    return abs(energy_balance_residual(sol, cfg)) / scale


def work_decay_scan(cfg, N_list, method='series', **solver_kwargs):
    """W_N for each N in ``N_list`` with all other parameters fixed."""
    rows = []
    for N in N_list:
        sol, _ = solve(cfg.with_changes(N=N), method, **solver_kwargs)
        rows.append({'N': N, 'work': work_per_period(sol)})
        logger.info(f"W_{N} = {rows[-1]['work']:.6e}")
    return rows


def site_profile(sol):
    """Per-site max_t |q_x(t)| and (1/theta) int p_x^2 dt."""
    q, _ = sol.grid_samples
    amplitude = np.max(np.abs(q), axis=0)
    p = sol.field.derivative().coefficients
    kinetic = np.abs(p[0]) ** 2 + 2.0 * np.sum(np.abs(p[1:]) ** 2, axis=0)
    return amplitude, kinetic


def _fit_log(distance, values):
    keep = values > max(UNDERFLOW, NOISE_FLOOR * values.max())
    x, y = distance[keep], np.log(values[keep])
    if x.size < 2 or np.ptp(x) == 0:
        raise DegenerateProfileError("fewer than two distinct sites above the noise floor")
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - fit) ** 2) / ss if ss > 0 else 1.0
    return float(math.exp(intercept)), float(-slope), float(r2)


def decay_fit(sol):
    """Exponential localization fit A exp(-rho |x|) of the site amplitudes.

    Uses the sites 2 <= |x| <= N-2, skipping the forced site and the damped
    ends, and drops sites below the numerical noise floor.

    Returns:
        dict with ``amplitude``, ``rate``, ``r2``, the kinetic-profile rate
        ``kinetic_rate`` (about twice ``rate``) and the per-site profile.

    Raises:
        DegenerateProfileError: The profile underflowed.
    """
    N = sol.field.N
    if N < 8:
        raise ConfigurationError(f"decay fit needs N >= 8, got N={N}")
    amplitude, kinetic = site_profile(sol)
    if np.all(amplitude < UNDERFLOW):
        raise DegenerateProfileError("site amplitudes are all below the underflow guard")
    x = np.arange(-N, N + 1)
    window = (np.abs(x) >= 2) & (np.abs(x) <= N - 2)
    A, rho, r2 = _fit_log(np.abs(x[window]).astype(float), amplitude[window])
    _, kinetic_rate, _ = _fit_log(np.abs(x[window]).astype(float), kinetic[window])
    logger.info(f"Decay fit: rho={rho:.6g}, A={A:.3e}, R^2={r2:.6f}")
    return {
        'amplitude': A,
        'rate': rho,
        'r2': r2,
        'kinetic_rate': kinetic_rate,
        'profile': amplitude.tolist(),
    }


def mean_energy(sol, cfg=None):
    """(1/theta) int H dt from the collocation samples."""
    cfg = cfg or sol.cfg
    q, p = sol.grid_samples
    return float(np.mean(hamiltonian_samples(q, p, cfg)))


def uniformity_scan(cfg, N_list, method='series', **solver_kwargs):
    """Period-mean energy and solution norm per N.

    Returns:
        dict with ``rows`` and ``saturated``: whether the largest mean energy
        is within 5% of the value at the largest N.
    """
    rows = []
    for N in N_list:
        sol, _ = solve(cfg.with_changes(N=N), method, **solver_kwargs)
        rows.append({'N': N, 'mean_energy': mean_energy(sol), 'norm': sol.norm()})
    peak = max(r['mean_energy'] for r in rows)
    last = rows[-1]['mean_energy']
    return {'rows': rows, 'saturated': bool(peak <= 1.05 * last)}


@dataclass
class DiagnosticsReport:
    """Everything ``diagnose`` computes for one configuration."""

    work: float
    dissipation_left: float
    dissipation_right: float
    energy_balance_residual: float
    relative_energy_balance: float
    even_harmonic_residual: float
    radius: dict
    decay_rate: Optional[float] = None
    decay: Optional[dict] = None
    per_N: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return dumps(self.to_dict())

    def to_text(self):
        """Aligned two-column rendering for terminals."""
        rows = [
            ('work W_N', self.work),
            ('dissipation left', self.dissipation_left),
            ('dissipation right', self.dissipation_right),
            ('energy balance residual', self.energy_balance_residual),
            ('relative energy balance', self.relative_energy_balance),
            ('even harmonic residual', self.even_harmonic_residual),
            ('delta*', self.radius['delta']),
            ('delta* (odd)', self.radius['delta_odd']),
            ('nu0', self.radius['nu0']),
            ('nu0 (odd)', self.radius['nu0_odd']),
        ]
        if self.decay_rate is not None:
            rows.append(('decay rate lambda_N', self.decay_rate))
        if self.decay is not None:
            rows.append(('localization rate rho', self.decay['rate']))
            rows.append(('localization amplitude A', self.decay['amplitude']))
            rows.append(('localization R^2', self.decay['r2']))
        width = max(len(name) for name, _ in rows)
        lines = [f"{name.ljust(width)}  {value:.10g}" for name, value in rows]
        for row in self.per_N:
            lines.append('  '.join(f"{k}={v:.10g}" if isinstance(v, float) else f"{k}={v}"
                                   for k, v in row.items()))
        return '\n'.join(lines)


def build_report(sol, cfg=None, N_list=None, method='series', **solver_kwargs):
    """Assemble a :class:`DiagnosticsReport` for a converged solution."""
    cfg = cfg or sol.cfg
    left, right = boundary_dissipation(sol, cfg)
    decay = None
    if cfg.N >= 8:
        try:
            decay = decay_fit(sol)
        except DegenerateProfileError as e:
            logger.warning(f"Skipping decay fit: {e}")
    rate = decay_rate(drift_matrix(cfg)) if cfg.gamma > 0 else None
    per_N = []
    if N_list:
        works = {r['N']: r['work'] for r in work_decay_scan(cfg, N_list, method, **solver_kwargs)}
        energies = {r['N']: r for r in uniformity_scan(cfg, N_list, method, **solver_kwargs)['rows']}
        per_N = [{'N': N, 'work': works[N], 'mean_energy': energies[N]['mean_energy'],
                  'norm': energies[N]['norm']} for N in N_list]
    return DiagnosticsReport(
        work=work_per_period(sol, cfg),
        dissipation_left=left,
        dissipation_right=right,
        energy_balance_residual=energy_balance_residual(sol, cfg),
        relative_energy_balance=relative_energy_balance(sol, cfg),
        even_harmonic_residual=even_harmonic_residual(sol),
        radius=coupling_radius(cfg).to_dict(),
        decay_rate=rate,
        decay=decay,
        per_N=per_N,
    )


def decay_rate_bound_shape(cfg, N_list):
    """Compare lambda_N against the c / N^3 lower-bound shape.

    Returns:
        dict with the per-N ``rows`` and ``c_fit``, the largest c with
        lambda_N >= c / N^3 on the scanned sizes.
    """
    rows = decay_rate_table(cfg, N_list)
    c_fit = min(r['scaled'] for r in rows)
    logger.info(f"lambda_N N^3 >= {c_fit:.6g} over N in {list(N_list)}")
    return {'rows': rows, 'c_fit': c_fit}
