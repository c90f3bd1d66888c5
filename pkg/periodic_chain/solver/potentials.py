"""
Scalar potentials for the pinning (V) and interaction (U) terms.

A potential is carried as its first and second derivative together with a
certified bound on sup|V''|. The solvers only ever need V' and V''; the value
itself is used by the Hamiltonian and is either closed form or obtained by
adaptive quadrature of V' from 0, so that V(0) = 0 for every potential.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Potential:
    """A potential given by its derivatives and a bound on the second one.

    Attributes:
        name: Catalogue name, ``custom`` for user callables.
        first_derivative: Vectorized callable q -> V'(q).
        second_derivative: Vectorized callable q -> V''(q).
        second_derivative_bound: sup |V''|, ``math.inf`` when unbounded.
        is_even: True when V(-q) = V(q).
        params: Catalogue parameters, used for hashing and serialization.
    """

    name: str
    first_derivative: Callable
    second_derivative: Callable
    second_derivative_bound: float
    is_even: bool = False
    params: tuple = ()
    closed_value: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.second_derivative_bound >= 0.0:
            raise ConfigurationError(
                f"potential {self.name}: second derivative bound must be nonnegative"
            )

    @property
    def is_bounded(self):
        return math.isfinite(self.second_derivative_bound)

    def value(self, q):
        """Evaluate V(q), normalized so that V(0) = 0."""
        if self.closed_value is not None:
            return self.closed_value(q)
        return _quad_value(self.first_derivative, q)

    def describe(self):
        """Plain-data description used in reports and config hashes."""
        return {'kind': self.name, **dict(self.params)}


def _quad_value(first_derivative, q):
    q = np.asarray(q, dtype=float)
    flat = [quad(lambda s: float(first_derivative(s)), 0.0, float(x), epsabs=1e-13, epsrel=1e-12)[0]
            for x in q.ravel()]
    return np.array(flat, dtype=float).reshape(q.shape)


def zero():
    """The vanishing potential."""
    return Potential(
        name='zero',
        first_derivative=lambda q: np.zeros_like(np.asarray(q, dtype=float)),
        second_derivative=lambda q: np.zeros_like(np.asarray(q, dtype=float)),
        second_derivative_bound=0.0,
        is_even=True,
        closed_value=lambda q: np.zeros_like(np.asarray(q, dtype=float)),
    )


def quadratic(a=1.0):
    """V(q) = a q^2 / 2. Linear force, used by tests of the collocation path."""
    return Potential(
        name='quadratic',
        first_derivative=lambda q: a * np.asarray(q, dtype=float),
        second_derivative=lambda q: np.full_like(np.asarray(q, dtype=float), a),
        second_derivative_bound=abs(a),
        is_even=True,
        params=(('a', a),),
        closed_value=lambda q: 0.5 * a * np.asarray(q, dtype=float) ** 2,
    )


def sin2n(a=1.0, n=1):
    """V(q) = a sin^{2n}(q).

    With w = sin^2 q the second derivative is a 2n w^{n-1} ((2n-1) - 2n w),
    so the bound is the largest modulus of that polynomial on [0, 1], taken
    at the endpoints and at w = (n-1)(2n-1) / (2n^2).
    """
    n = int(n)
    if n < 1:
        raise ConfigurationError(f"sin2n: n must be a positive integer, got {n}")

    def h(w):
        return 2 * n * w ** (n - 1) * ((2 * n - 1) - 2 * n * w)

    candidates = [0.0, 1.0, (n - 1) * (2 * n - 1) / (2.0 * n * n)]
    bound = abs(a) * max(abs(h(w)) for w in candidates)

    def first(q):
        s, c = np.sin(q), np.cos(q)
        return a * 2 * n * s ** (2 * n - 1) * c

    def second(q):
        w = np.sin(q) ** 2
        return a * h(w)

    return Potential(
        name='sin2n',
        first_derivative=first,
        second_derivative=second,
        second_derivative_bound=bound,
        is_even=True,
        params=(('a', a), ('n', n)),
        closed_value=lambda q: a * np.sin(q) ** (2 * n),
    )


def rational(a=1.0, alpha=1.0, n=1):
    """V(q) = a q^{2n} / (1 + alpha q^{2n}), a saturating well.

    Writing u = alpha q^{2n}, V'' is proportional to
    k(u) = u^b ((2n-1) - (2n+1) u) / (1 + u)^3 with b = (n-1)/n, whose
    interior extrema are the nonnegative roots of a quadratic in u.
    """
    n = int(n)
    if n < 1 or alpha <= 0:
        raise ConfigurationError("rational: need n >= 1 and alpha > 0")
    A, B = 2 * n - 1, 2 * n + 1
    b = (n - 1) / n

    def k(u):
        return u ** b * (A - B * u) / (1.0 + u) ** 3

    roots = np.roots([B * (2 - b), b * (A - B) - B - 3 * A, b * A])
    candidates = [0.0] + [float(r.real) for r in roots if abs(r.imag) < 1e-14 and r.real >= 0]
    bound = abs(a) * 2 * n * alpha ** (-b) * max(abs(k(u)) for u in candidates)

    def first(q):
        q = np.asarray(q, dtype=float)
        s = q ** (2 * n)
        return a * 2 * n * q ** (2 * n - 1) / (1.0 + alpha * s) ** 2

    def second(q):
        q = np.asarray(q, dtype=float)
        s = q ** (2 * n)
        return a * 2 * n * q ** (2 * n - 2) * (A - B * alpha * s) / (1.0 + alpha * s) ** 3

    def value(q):
        s = np.asarray(q, dtype=float) ** (2 * n)
        return a * s / (1.0 + alpha * s)

    return Potential(
        name='rational',
        first_derivative=first,
        second_derivative=second,
        second_derivative_bound=bound,
        is_even=True,
        params=(('a', a), ('alpha', alpha), ('n', n)),
        closed_value=value,
    )


def soft_power(a=1.0, alpha=1.0, delta=1.0):
    """V(q) = a ((1 + alpha q^2)^{delta/2} - 1) for 0 < delta < 2."""
    if not (0.0 < delta < 2.0) or alpha <= 0:
        raise ConfigurationError("soft_power: need 0 < delta < 2 and alpha > 0")

    def g(u):
        return (1.0 + u) ** (delta / 2 - 2) * (1.0 + (delta - 1) * u)

    peak = 1.0
    if delta < 1.0:
        peak = max(peak, abs(g(3.0 / (1.0 - delta))))
    bound = abs(a) * delta * alpha * peak

    def first(q):
        q = np.asarray(q, dtype=float)
        return a * delta * alpha * q * (1.0 + alpha * q * q) ** (delta / 2 - 1)

    def second(q):
        q = np.asarray(q, dtype=float)
        return a * delta * alpha * g(alpha * q * q)

    return Potential(
        name='soft_power',
        first_derivative=first,
        second_derivative=second,
        second_derivative_bound=bound,
        is_even=True,
        params=(('a', a), ('alpha', alpha), ('delta', delta)),
        closed_value=lambda q: a * ((1.0 + alpha * np.asarray(q, dtype=float) ** 2) ** (delta / 2) - 1.0),
    )


def cosine(a=1.0):
    """V(r) = a (1 - cos r); serves as pinning or as interaction."""
    return Potential(
        name='cosine',
        first_derivative=lambda q: a * np.sin(q),
        second_derivative=lambda q: a * np.cos(q),
        second_derivative_bound=abs(a),
        is_even=True,
        params=(('a', a),),
        closed_value=lambda q: a * (1.0 - np.cos(q)),
    )


def cubic(a=1.0):
    """V(q) = a q^3 / 3. Unbounded V'', no convergence guarantee."""
    return Potential(
        name='cubic',
        first_derivative=lambda q: a * np.asarray(q, dtype=float) ** 2,
        second_derivative=lambda q: 2 * a * np.asarray(q, dtype=float),
        second_derivative_bound=math.inf if a else 0.0,
        is_even=False,
        params=(('a', a),),
        closed_value=lambda q: a * np.asarray(q, dtype=float) ** 3 / 3.0,
    )


def quartic(a=1.0):
    """V(q) = a q^4 / 4, the FPUT-type term. Unbounded V''."""
    return Potential(
        name='quartic',
        first_derivative=lambda q: a * np.asarray(q, dtype=float) ** 3,
        second_derivative=lambda q: 3 * a * np.asarray(q, dtype=float) ** 2,
        second_derivative_bound=math.inf if a else 0.0,
        is_even=True,
        params=(('a', a),),
        closed_value=lambda q: a * np.asarray(q, dtype=float) ** 4 / 4.0,
    )


def custom(first_derivative, second_derivative, bound, is_even=False, value=None, label='custom'):
    """Wrap user callables. The caller certifies ``bound``."""
    logger.debug(f"Registering custom potential '{label}' with bound {bound}")
    return Potential(
        name='custom',
        first_derivative=first_derivative,
        second_derivative=second_derivative,
        second_derivative_bound=float(bound),
        is_even=is_even,
        params=(('label', label), ('bound', float(bound))),
        closed_value=value,
    )


CATALOGUE = {
    'zero': zero,
    'quadratic': quadratic,
    'sin2n': sin2n,
    'rational': rational,
    'soft_power': soft_power,
    'cosine': cosine,
    'cubic': cubic,
    'quartic': quartic,
}


def from_spec(spec):
    """Build a catalogue potential from a mapping such as ``{'kind': 'sin2n', 'a': 1.0}``.

    Raises:
        ConfigurationError: Unknown kind or parameters.
    """
    spec = dict(spec or {'kind': 'zero'})
    kind = spec.pop('kind', 'zero')
    factory = CATALOGUE.get(kind)
    if factory is None:
        raise ConfigurationError(
            f"unknown potential kind '{kind}'; expected one of {sorted(CATALOGUE)}"
        )
    try:
        return factory(**spec)
    except TypeError as e:
        raise ConfigurationError(f"potential '{kind}': {e}") from e
