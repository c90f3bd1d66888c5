"""
Run specification: a parsed TOML configuration with every default filled in.

Example::

    [chain]
    N = 8
    omega0 = 1.0
    gamma = 0.5
    nu = 0.2
    omega = 3.0            # or: theta = 2.0943951023931953

    [potential.V]
    kind = "sin2n"
    a = 1.0
    n = 1

    [forcing]
    modes = [[1, 0.25, 0.0]]   # (m, Re F_m, Im F_m), m >= 1

    [solver]
    method = "series"          # series | fixed | both
    tol = 1e-12

    [sweep]
    parameters = { "chain.nu" = [0.1, 0.2], "chain.gamma" = [0.3, 0.5] }
"""

import copy
import itertools
import logging
import math
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .. import settings
from .chain import ChainConfig, ForcingSpectrum
from .exceptions import ConfigurationError
from .potentials import from_spec
from .time_domain import IntegratorConfig

logger = logging.getLogger(__name__)

METHODS = ('series', 'fixed', 'both')
INITIAL_KINDS = ('rest', 'periodic', 'double_well', 'random')

ALLOWED = {
    'chain': {'N', 'omega0', 'gamma', 'nu', 'theta', 'omega'},
    'potential': {'V', 'U'},
    'forcing': {'modes'},
    'solver': {'method', 'tol', 'M', 'T', 'max_order', 'max_iterations', 'seed', 'greens',
               'scan_N'},
    'integrator': {'steps_per_period', 'periods', 'start_time', 'dense_stride', 'initial',
                   'amplitude', 'newton_seeds'},
    'output': {'dir'},
    'sweep': {'parameters'},
}


@dataclass
class RunSpec:
    """Everything a run needs; ``source`` is the validated raw mapping it came from."""

    cfg: ChainConfig
    method: str = 'series'
    tol: float = settings.SOLVER_TOL
    M: Optional[int] = None
    T: int = 0
    max_order: int = settings.MAX_ORDER
    max_iterations: int = settings.MAX_ITERATIONS
    seed: int = settings.SELFTEST_SEED
    greens: str = settings.GREENS_METHOD
    scan_N: list = field(default_factory=list)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    initial: str = 'rest'
    amplitude: float = 0.1
    newton_seeds: int = 0
    output_dir: Path = field(default_factory=lambda: Path(settings.OUTPUT_DIR))
    sweep: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)

    def solver_kwargs(self):
        return {'tol': self.tol, 'M': self.M, 'grid_size': self.T,
                'max_order': self.max_order, 'max_iterations': self.max_iterations}

    def describe(self):
        return {
            'chain': self.cfg.describe(),
            'method': self.method,
            'tol': self.tol,
            'M': self.M,
            'T': self.T,
            'max_order': self.max_order,
            'max_iterations': self.max_iterations,
            'seed': self.seed,
            'greens': self.greens,
        }

    def sweep_points(self):
        """Raw mappings for each point of the sweep grid, in declaration order."""
        if not self.sweep:
            raise ConfigurationError("no [sweep] parameters declared")
        keys = list(self.sweep)
        points = []
        for values in itertools.product(*(self.sweep[k] for k in keys)):
            data = copy.deepcopy(self.source)
            data.pop('sweep', None)
            for key, value in zip(keys, values):
                _set_dotted(data, key, value)
            points.append((dict(zip(keys, values)), data))
        return points


def _location(error):
    match = re.search(r'line (\d+), column (\d+)', str(error))
    return f"line {match.group(1)}, column {match.group(2)}" if match else "unknown position"


def _set_dotted(data, key, value):
    parts = key.split('.')
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def _check_keys(section, data, allowed):
    if not isinstance(data, dict):
        raise ConfigurationError(f"[{section}] must be a table")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigurationError(f"[{section}] unknown key(s): {', '.join(unknown)}")


def _number(section, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{section}.{key} must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigurationError(f"{section}.{key} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def _parse_chain(data):
    _check_keys('chain', data, ALLOWED['chain'])
    for key in ('N', 'omega0', 'gamma'):
        if key not in data:
            raise ConfigurationError(f"chain.{key} is required")
    if ('theta' in data) == ('omega' in data):
        raise ConfigurationError("chain: give exactly one of theta or omega")
    if 'omega' in data:
        omega = _number('chain', 'omega', data['omega'])
        if omega <= 0:
            raise ConfigurationError(f"chain.omega must be positive, got {omega}")
        theta = 2.0 * math.pi / omega
    else:
        theta = _number('chain', 'theta', data['theta'])
        if theta <= 0:
            raise ConfigurationError(f"chain.theta must be positive, got {theta}")
    return {
        'N': _number('chain', 'N', data['N'], int),
        'omega0': _number('chain', 'omega0', data['omega0']),
        'gamma': _number('chain', 'gamma', data['gamma']),
        'nu': _number('chain', 'nu', data.get('nu', 0.0)),
        'theta': theta,
    }


def _parse_forcing(data):
    _check_keys('forcing', data, ALLOWED['forcing'])
    modes = []
    for i, entry in enumerate(data.get('modes', [])):
        if not isinstance(entry, list) or len(entry) != 3:
            raise ConfigurationError(f"forcing.modes[{i}] must be [m, re, im], got {entry!r}")
        m = _number('forcing', f'modes[{i}].m', entry[0], int)
        re_ = _number('forcing', f'modes[{i}].re', entry[1])
        im_ = _number('forcing', f'modes[{i}].im', entry[2])
        modes.append((m, complex(re_, im_)))
    return ForcingSpectrum(tuple(modes))


def parse_mapping(data):
    """Validate an already-decoded configuration mapping into a :class:`RunSpec`.

    Raises:
        ConfigurationError: Unknown keys or invalid values; the message
            names the offending field.
    """
    _check_keys('config', data, set(ALLOWED))
    if 'chain' not in data:
        raise ConfigurationError("[chain] section is required")
    chain = _parse_chain(data['chain'])
    potential = data.get('potential', {})
    _check_keys('potential', potential, ALLOWED['potential'])
    cfg = ChainConfig(
        V=from_spec(potential.get('V', {'kind': 'zero'})),
        U=from_spec(potential.get('U', {'kind': 'zero'})),
        forcing=_parse_forcing(data.get('forcing', {})),
        **chain,
    )

    solver = data.get('solver', {})
    _check_keys('solver', solver, ALLOWED['solver'])
    method = solver.get('method', 'series')
    if method not in METHODS:
        raise ConfigurationError(f"solver.method must be one of {', '.join(METHODS)}, got {method!r}")
    greens = solver.get('greens', settings.GREENS_METHOD)
    if greens not in ('auto', 'images', 'eigen', 'dense'):
        raise ConfigurationError(f"solver.greens must be auto|images|eigen|dense, got {greens!r}")
    tol = _number('solver', 'tol', solver.get('tol', settings.SOLVER_TOL))
    if tol <= 0:
        raise ConfigurationError(f"solver.tol must be positive, got {tol}")
    M = solver.get('M')
    if M is not None:
        M = _number('solver', 'M', M, int)
        if M < max(cfg.forcing.max_mode, 1):
            raise ConfigurationError(f"solver.M={M} is below the highest forcing mode")
    scan_N = solver.get('scan_N', [])
    if not isinstance(scan_N, list):
        raise ConfigurationError("solver.scan_N must be a list of integers")

    integ = data.get('integrator', {})
    _check_keys('integrator', integ, ALLOWED['integrator'])
    icfg = IntegratorConfig(
        steps_per_period=_number('integrator', 'steps_per_period',
                                 integ.get('steps_per_period', settings.STEPS_PER_PERIOD), int),
        periods=_number('integrator', 'periods', integ.get('periods', settings.INTEGRATION_PERIODS), int),
        start_time=_number('integrator', 'start_time', integ.get('start_time', 0.0)),
        dense_stride=_number('integrator', 'dense_stride', integ.get('dense_stride', 0), int),
    )
    initial = integ.get('initial', 'rest')
    if initial not in INITIAL_KINDS:
        raise ConfigurationError(f"integrator.initial must be one of {', '.join(INITIAL_KINDS)}")

    output = data.get('output', {})
    _check_keys('output', output, ALLOWED['output'])

    sweep = data.get('sweep', {})
    _check_keys('sweep', sweep, ALLOWED['sweep'])
    parameters = sweep.get('parameters', {})
    for key, values in parameters.items():
        section = key.split('.')[0]
        if section not in ('chain', 'potential', 'solver', 'integrator', 'forcing'):
            raise ConfigurationError(f"sweep parameter {key!r} does not name a scalar field")
        if not isinstance(values, list) or not values:
            raise ConfigurationError(f"sweep parameter {key!r} needs a non-empty list of values")

    return RunSpec(
        cfg=cfg,
        method=method,
        tol=tol,
        M=M,
        T=_number('solver', 'T', solver.get('T', 0), int),
        max_order=_number('solver', 'max_order', solver.get('max_order', settings.MAX_ORDER), int),
        max_iterations=_number('solver', 'max_iterations',
                               solver.get('max_iterations', settings.MAX_ITERATIONS), int),
        seed=_number('solver', 'seed', solver.get('seed', settings.SELFTEST_SEED), int),
        greens=greens,
        scan_N=[_number('solver', 'scan_N', n, int) for n in scan_N],
        integrator=icfg,
        initial=initial,
        amplitude=_number('integrator', 'amplitude', integ.get('amplitude', 0.1)),
        newton_seeds=_number('integrator', 'newton_seeds', integ.get('newton_seeds', 0), int),
        output_dir=Path(output.get('dir', settings.OUTPUT_DIR)),
        sweep=dict(parameters),
        source=copy.deepcopy(data),
    )


def decode(text):
    """TOML text to a plain mapping; syntax errors report line and column."""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"config parse error at {_location(e)}: {e}") from e


def parse_config(text):
    """Parse TOML text into a validated :class:`RunSpec`.

    Raises:
        ConfigurationError: TOML syntax error (with line and column) or a
            semantic error naming the field.
    """
    spec = parse_mapping(decode(text))
    logger.debug(f"Parsed run spec for config {spec.cfg.config_hash()[:12]}")
    return spec


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding='utf-8'))
