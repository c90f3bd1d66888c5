"""
Run pipelines behind the command-line subcommands.

Every ``run_*`` function returns a status dict and never raises: solver
errors become ``{'status': 'error', 'error': ..., 'exit_code': ...}``.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import writers
from .chain import ChainState
from .diagnostics import (
    boundary_dissipation,
    build_report,
    energy_balance_residual,
    work_per_period,
)
from .exceptions import ChainError, ConfigurationError, ConvergenceError
from .fields import PeriodicSolution
from .greens import build_kernel_set
from .runspec import parse_mapping
from .selftest import run_all
from .spectral import coupling_radius, initial_truncation, series_solve, fixed_point_solve
from .time_domain import (
    distinct_orbits,
    double_well_seed,
    integrate,
    newton_periodic,
    stroboscopic_distance,
    strobe_decay_rate,
)

logger = logging.getLogger(__name__)


def _error(e, what):
    if isinstance(e, ChainError):
        logger.error(f"{what} failed: {e}")
        return {'status': 'error', 'error': str(e), 'exit_code': e.exit_code}
    logger.error(f"Unexpected error in {what}: {e}", exc_info=True)
    return {'status': 'error', 'error': str(e), 'exit_code': 1}


def run_gap(spec):
    """Resonance gaps and convergence radii of the configured chain."""
    try:
        radius = coupling_radius(spec.cfg)
        logger.info(f"✓ delta*={radius.delta:.6g}, nu0={radius.nu0:.6g}")
        return {'status': 'success', 'exit_code': 0, 'radius': radius.to_dict()}
    except Exception as e:
        return _error(e, 'gap')


def _solve_one(spec, method):
    kwargs = spec.solver_kwargs()
    if method == 'series':
        kwargs.pop('max_iterations')
        return series_solve(spec.cfg, **kwargs)
    kwargs.pop('max_order')
    return fixed_point_solve(spec.cfg, **kwargs)


def _methods(spec):
    return ('series', 'fixed') if spec.method == 'both' else (spec.method,)


def run_solve(spec, out_dir=None):
    """Solve for the periodic state and write harmonics CSV plus a JSON report.

    With method ``both`` the fixed-point solution goes to
    ``solution-fixed.csv`` and the report carries the distance between the
    two solutions.
    """
    out_dir = Path(out_dir or spec.output_dir)
    try:
        logger.info(f"Solving config {spec.cfg.config_hash()[:12]} with method '{spec.method}'")
        solutions, reports = {}, {}
        for method in _methods(spec):
            sol, report = _solve_one(spec, method)
            logger.info(f"{method}: {report.iterations} steps, {report.wall_time:.3f}s")
            solutions[method], reports[method] = sol, report.to_dict()
        primary = solutions[_methods(spec)[0]]
        writers.write_harmonics(out_dir / 'solution.csv', primary.field)
        result = {
            'config': spec.describe(),
            'radius': coupling_radius(spec.cfg).to_dict(),
            'reports': reports,
            'norm': primary.norm(),
        }
        if len(solutions) == 2:
            fixed = solutions['fixed']
            writers.write_harmonics(out_dir / 'solution-fixed.csv', fixed.field)
            M = max(primary.field.M, fixed.field.M)
            result['agreement'] = (primary.field.resized(M) - fixed.field.resized(M)).norm()
            logger.info(f"Series vs fixed-point distance {result['agreement']:.3e}")
        writers.write_json(out_dir / 'report.json', result)
        logger.info(f"✓ Solution written to {out_dir}")
        return {'status': 'success', 'exit_code': 0, 'out_dir': str(out_dir),
                'norm': result['norm'], 'solution': primary}
    except Exception as e:
        return _error(e, 'solve')


def _initial_state(spec, sol, rng):
    cfg, s = spec.cfg, spec.integrator.start_time
    if spec.initial == 'rest':
        return ChainState.at_rest(cfg, s)
    if spec.initial == 'periodic':
        return sol.state_at(s)
    if spec.initial == 'double_well':
        seed = double_well_seed(cfg)
        return ChainState(seed.q, seed.p, s)
    q = spec.amplitude * rng.standard_normal(cfg.size)
    p = spec.amplitude * rng.standard_normal(cfg.size)
    return ChainState(q, p, s)


def _load_or_solve(spec, solution_path):
    if solution_path:
        field_ = writers.read_harmonics(solution_path, spec.cfg.omega)
        if field_.N != spec.cfg.N:
            raise ConfigurationError(
                f"solution file has N={field_.N} but the config has N={spec.cfg.N}"
            )
        logger.info(f"Loaded solution from {solution_path} (M={field_.M})")
        return PeriodicSolution(field_, spec.cfg, 'loaded')
    method = 'fixed' if spec.method == 'fixed' else 'series'
    sol, _ = _solve_one(spec, method)
    return sol


def run_integrate(spec, solution_path=None, out_dir=None):
    """Integrate from the configured initial state and track the strobe distance
    to the periodic solution.

    Writes ``trajectory.csv``, ``strobe.csv``, ``dense.csv`` when a dense
    stride is set, and ``integrate.json``. With ``newton_seeds`` > 0, Newton
    on the period map is also run from that many random seeds.
    """
    out_dir = Path(out_dir or spec.output_dir)
    try:
        rng = np.random.default_rng(spec.seed)
        sol = _load_or_solve(spec, solution_path)
        initial = _initial_state(spec, sol, rng)
        traj = integrate(spec.cfg, initial, spec.integrator)
        distances = stroboscopic_distance(traj, sol)
        writers.write_trajectory(out_dir / 'trajectory.csv', traj)
        writers.write_strobe_distances(out_dir / 'strobe.csv', traj.strobe_times, distances)
        if spec.integrator.dense_stride:
            writers.write_dense(out_dir / 'dense.csv', traj)
        result = {
            'config': spec.describe(),
            'initial': spec.initial,
            'periods': traj.periods,
            'final_distance': float(distances[-1]),
            'energy_balance_residual': energy_balance_residual(traj),
        }
        try:
            result['strobe_decay_rate'] = strobe_decay_rate(distances, spec.cfg.theta)
        except ConvergenceError as e:
            logger.debug(f"No strobe decay rate: {e}")
        if spec.newton_seeds:
            result['newton'] = _newton_orbits(spec, sol, rng)
        writers.write_json(out_dir / 'integrate.json', result)
        logger.info(f"✓ Final strobe distance {result['final_distance']:.3e}")
        return {'status': 'success', 'exit_code': 0, 'out_dir': str(out_dir),
                'final_distance': result['final_distance']}
    except Exception as e:
        return _error(e, 'integrate')


def _newton_orbits(spec, sol, rng):
    ref = sol.initial_state()
    states = []
    for i in range(spec.newton_seeds):
        q = ref.q + spec.amplitude * rng.standard_normal(ref.q.size)
        p = ref.p + spec.amplitude * rng.standard_normal(ref.p.size)
        try:
            states.append(newton_periodic(spec.cfg, ChainState(q, p, 0.0), icfg=spec.integrator))
        except ChainError as e:
            logger.warning(f"Newton seed {i} failed: {e}")
    groups = distinct_orbits(states, atol=1e-6)
    distance = [float(np.linalg.norm(g[0].as_vector() - ref.as_vector())) for g in groups]
    return {'converged': len(states), 'orbits': len(groups), 'distance_to_solution': distance}


def run_diagnose(spec, out_dir=None):
    """Solve, then write ``diagnostics.json`` and ``diagnostics.txt``."""
    out_dir = Path(out_dir or spec.output_dir)
    try:
        method = 'fixed' if spec.method == 'fixed' else 'series'
        sol, report = _solve_one(spec, method)
        kwargs = spec.solver_kwargs()
        kwargs.pop('M')
        kwargs.pop('grid_size')
        kwargs.pop('max_iterations' if method == 'series' else 'max_order')
        diagnostics = build_report(sol, spec.cfg, spec.scan_N, method, **kwargs)
        writers.write_json(out_dir / 'diagnostics.json', {
            'config': spec.describe(),
            'convergence': report.to_dict(),
            'diagnostics': diagnostics.to_dict(),
        })
        text = diagnostics.to_text()
        (out_dir / 'diagnostics.txt').write_text(text + '\n', encoding='utf-8')
        logger.info(f"✓ Diagnostics written to {out_dir}")
        return {'status': 'success', 'exit_code': 0, 'out_dir': str(out_dir), 'text': text}
    except Exception as e:
        return _error(e, 'diagnose')


def run_greens_dump(spec, out_dir=None):
    """Write the dissipative kernel tables H_m(x, y) for m = 0..M to ``kernels.csv``."""
    out_dir = Path(out_dir or spec.output_dir)
    try:
        M = spec.M or initial_truncation(spec.cfg)
        kernels = build_kernel_set(spec.cfg, M, spec.greens)
        path = writers.write_kernels(out_dir / 'kernels.csv', kernels)
        logger.info(f"✓ Dumped {M + 1} kernel tables")
        return {'status': 'success', 'exit_code': 0, 'path': str(path)}
    except Exception as e:
        return _error(e, 'greens-dump')


def _sweep_point(index, parameters, data, out_dir):
    """One sweep grid point; runs in a worker process."""
    point_dir = Path(out_dir) / f"point-{index:04d}"
    started = time.perf_counter()
    try:
        spec = parse_mapping(data)
    except Exception as e:
        outcome = _error(e, f'sweep point {index}')
    else:
        outcome = run_solve(spec, point_dir)
    summary = {'index': index, 'parameters': parameters, 'status': outcome['status'],
               'exit_code': outcome['exit_code'], 'dir': point_dir.name}
    if outcome['status'] == 'success':
        sol = outcome['solution']
        left, right = boundary_dissipation(sol)
        summary.update(norm=outcome['norm'], work=work_per_period(sol),
                       dissipation=left + right)
    else:
        summary['error'] = outcome['error']
    logger.info(f"Sweep point {index} done in {time.perf_counter() - started:.2f}s")
    return summary


def run_sweep(spec, workers=1, out_dir=None):
    """Solve every point of the declared parameter grid.

    Points are dispatched in grid order and their results collected by
    index, so the files written do not depend on ``workers``.
    """
    out_dir = Path(out_dir or spec.output_dir)
    try:
        points = spec.sweep_points()
        logger.info(f"Sweeping {len(points)} points with {workers} worker(s)")
        args = [(i, params, data, str(out_dir)) for i, (params, data) in enumerate(points)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                summaries = list(pool.map(_sweep_point, *zip(*args)))
        else:
            summaries = [_sweep_point(*a) for a in args]
        summaries.sort(key=lambda s: s['index'])
        writers.write_json(out_dir / 'sweep.json', {'parameters': spec.sweep, 'points': summaries})
        failed = [s for s in summaries if s['status'] != 'success']
        exit_code = max((s['exit_code'] for s in failed), default=0)
        if failed:
            logger.warning(f"{len(failed)} of {len(summaries)} sweep points failed")
        else:
            logger.info(f"✓ Sweep finished: {len(summaries)} points")
        result = {'status': 'success' if not failed else 'error', 'exit_code': exit_code,
                  'points': len(summaries), 'failed': len(failed), 'out_dir': str(out_dir)}
        if failed:
            result['error'] = f"{len(failed)} of {len(summaries)} sweep points failed"
        return result
    except Exception as e:
        return _error(e, 'sweep')


def run_selftest(seed=None):
    """Embedded oracle suites; exit code 5 when any oracle fails."""
    try:
        results = run_all(seed)
        return {'status': 'success', 'exit_code': 0, 'results': results}
    except Exception as e:
        outcome = _error(e, 'selftest')
        outcome['results'] = getattr(e, 'results', [])
        return outcome
