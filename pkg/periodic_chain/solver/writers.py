"""
CSV and JSON emission for solver products.

Arrays go to CSV, scalars and reports to JSON. Floats in CSV are written
with 17 significant digits; JSON uses the shortest repr that round-trips,
with keys sorted, so identical runs produce identical bytes.
"""

import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .exceptions import ConfigurationError
from .fields import HarmonicField

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '.17g'


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FORMAT)
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, complex):
        return [_jsonable(value.real), _jsonable(value.imag)]
    return value


def dumps(data):
    """Canonical JSON text: sorted keys, non-finite floats as strings, trailing newline."""
    return json.dumps(_jsonable(data), sort_keys=True, indent=2, allow_nan=False) + '\n'


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path


def write_rows(path, header, rows):
    """Write an iterable of row tuples under ``header``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    logger.info(f"Wrote {path}")
    return path


def write_harmonics(path, field_):
    """Harmonics CSV with columns site, m, re, im for m = 0..M."""
    c = field_.coefficients
    N = field_.N

    def rows():
        for x in range(-N, N + 1):
            for m in range(field_.M + 1):
                value = c[m, x + N]
                yield x, m, float(value.real), float(value.imag)

    return write_rows(path, ('site', 'm', 're', 'im'), rows())


def read_harmonics(path, omega):
    """Load a harmonics CSV written by :func:`write_harmonics`.

    Raises:
        ConfigurationError: Missing file, bad header, or missing entries.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"solution file not found: {path}")
    with path.open(newline='', encoding='utf-8') as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ['site', 'm', 're', 'im']:
            raise ConfigurationError(f"{path}: expected header site,m,re,im, got {header}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            try:
                entries.append((int(row[0]), int(row[1]), complex(float(row[2]), float(row[3]))))
            except (ValueError, IndexError) as e:
                raise ConfigurationError(f"{path}:{lineno}: malformed row {row}") from e
    if not entries:
        raise ConfigurationError(f"{path}: no harmonics")
    N = max(abs(x) for x, _, _ in entries)
    M = max(m for _, m, _ in entries)
    c = np.zeros((M + 1, 2 * N + 1), dtype=complex)
    filled = np.zeros(c.shape, dtype=bool)
    for x, m, value in entries:
        c[m, x + N] = value
        filled[m, x + N] = True
    if not filled.all():
        raise ConfigurationError(f"{path}: incomplete harmonic table for N={N}, M={M}")
    return HarmonicField(c, omega)


def write_trajectory(path, traj):
    """Strobe samples: one row per (k, site) with t, q, p."""
    N = (traj.q.shape[1] - 1) // 2

    def rows():
        for k, t in enumerate(traj.strobe_times):
            for x in range(-N, N + 1):
                yield k, float(t), x, float(traj.q[k, x + N]), float(traj.p[k, x + N])

    return write_rows(path, ('k', 't', 'site', 'q', 'p'), rows())


def write_dense(path, traj):
    N = (traj.dense_q.shape[1] - 1) // 2

    def rows():
        for j, t in enumerate(traj.dense_times):
            for x in range(-N, N + 1):
                yield float(t), x, float(traj.dense_q[j, x + N]), float(traj.dense_p[j, x + N])

    return write_rows(path, ('t', 'site', 'q', 'p'), rows())


def write_strobe_distances(path, times, distances):
    rows = ((k, float(t), float(d)) for k, (t, d) in enumerate(zip(times, distances)))
    return write_rows(path, ('k', 't', 'distance'), rows)


def write_kernels(path, kernels):
    """Kernel table dump: columns m, x, y, re, im."""
    def rows():
        for m, x, y, value in kernels.iter_rows():
            yield m, x, y, float(value.real), float(value.imag)

    return write_rows(path, ('m', 'x', 'y', 're', 'im'), rows())
