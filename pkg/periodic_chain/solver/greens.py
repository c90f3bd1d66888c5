"""
Lattice Green's functions.

Builds the resolvent of the pinned lattice Laplacian on Z, on the interval
{-N..N} with reflecting ends, and on the interval with friction at both
ends, together with the per-harmonic kernel tables used by the spectral
solvers. Square roots of complex products are never taken directly: every
kernel goes through the exterior inverse of the Joukowski map.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .chain import laplacian_matrix
from .exceptions import (
    BranchCutError,
    DegenerateBoundaryError,
    ResonanceError,
    SingularError,
    SpectralError,
)

logger = logging.getLogger(__name__)

CUT_TOLERANCE = 1e-14
IMAGES_RELATIVE_CUTOFF = 1e-16
IMAGES_MAX_SHELLS = 10000
DEGENERATE_TOLERANCE = 1e-13


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter lambda with boundary friction sigma on {-N..N}."""

    lam: complex
    sigma: float
    N: int
    omega0: float

    @property
    def omega_upper(self):
        return math.sqrt(self.omega0 ** 2 + 4.0)

    @property
    def band_distance(self):
        """Distance from -lambda to the closed band [omega0^2, omega0^2 + 4]."""
        z = -complex(self.lam)
        lo, hi = self.omega0 ** 2, self.omega0 ** 2 + 4.0
        nearest = min(max(z.real, lo), hi)
        return abs(complex(nearest, 0.0) - z)

    def is_valid(self, delta):
        return self.band_distance >= delta


def chi(lam, omega0):
    """zeta = (2 + omega0^2 + lambda) / 2."""
    return (2.0 + omega0 ** 2 + lam) / 2.0


def joukowski_inverse(zeta):
    """Exterior inverse of J(z) = (z + 1/z)/2: the root z of J(z) = zeta with |z| > 1.

    Both candidates zeta +- sqrt(zeta^2 - 1) are formed and the one of
    larger modulus is kept, which is continuous off the cut [-1, 1].

    Raises:
        BranchCutError: zeta lies on the cut.
    """
    zeta = np.asarray(zeta, dtype=complex)
    on_cut = (np.abs(zeta.imag) <= CUT_TOLERANCE) & (np.abs(zeta.real) <= 1.0 + CUT_TOLERANCE)
    if np.any(on_cut):
        raise BranchCutError(f"zeta={zeta[on_cut].ravel()[0]!r} lies on the cut [-1, 1]")
    root = np.sqrt(zeta * zeta - 1.0)
    plus, minus = zeta + root, zeta - root
    out = np.where(np.abs(plus) >= np.abs(minus), plus, minus)
    return out[()] if out.ndim == 0 else out


def infinite_greens(lam, x, omega0):
    """G_lambda(x) on Z, the x-th Fourier coefficient of 1/(lambda + 4 sin^2(pi u) + omega0^2).

    Raises:
        SpectralError: -lambda lies in the phonon band.
    """
    zeta = chi(complex(lam), omega0)
    try:
        phi = joukowski_inverse(zeta)
    except BranchCutError as e:
        raise SpectralError(f"-lambda={-lam!r} lies in the band [omega0^2, omega0^2+4]") from e
    return np.exp(-np.abs(np.asarray(x)) * np.log(phi)) / (2.0 * (phi - zeta))


def real_frequency_kernel(Omega, x, omega0):
    """Infinite-lattice kernel at lambda = -Omega^2 for real Omega off the band.

    Below the band the kernel is positive and decays like xi_+^{-|x|}; above
    the band it alternates in sign with base xi_- < -1.
    """
    Omega = abs(float(Omega))
    omega_upper = math.sqrt(omega0 ** 2 + 4.0)
    if omega0 <= Omega <= omega_upper:
        raise SpectralError(f"Omega={Omega!r} lies in the band [{omega0!r}, {omega_upper!r}]")
    w = Omega * Omega
    D = math.sqrt((omega0 ** 2 - w) * (omega_upper ** 2 - w))
    x = np.abs(np.asarray(x, dtype=float))
    if Omega < omega0:
        xi = 1.0 + (omega0 ** 2 - w + D) / 2.0
        return xi ** (-x) / D
    xi = 1.0 + (omega0 ** 2 - w - D) / 2.0
    return -(xi ** (-x)) / D


def _images_table(lam, N, omega0):
    zeta = chi(complex(lam), omega0)
    phi = joukowski_inverse(zeta)
    if abs(phi) - 1.0 < 1e-8:
        return None
    L = 2 * N + 1
    shells = 16.0 * math.log(10.0) / (2.0 * L * math.log(abs(phi)))
    if shells > IMAGES_MAX_SHELLS:
        return None

    sites = np.arange(-N, N + 1)
    diff = sites[:, None] - sites[None, :]
    summ = sites[:, None] + sites[None, :]
    scale = 1.0 / (2.0 * (phi - zeta))

    log_phi = np.log(phi)

    def kernel(k):
        return np.exp(-np.abs(k) * log_phi) * scale

    total = kernel(diff) + kernel(summ + L)
    for shell in range(1, IMAGES_MAX_SHELLS + 1):
        term = (kernel(diff + 2 * shell * L) + kernel(diff - 2 * shell * L)
                + kernel(summ + (2 * shell + 1) * L) + kernel(summ + (1 - 2 * shell) * L))
        total = total + term
        if np.all(np.abs(term) <= IMAGES_RELATIVE_CUTOFF * np.abs(total)):
            logger.debug(f"Image sum for N={N} converged after {shell} shells")
            return total
    return None


def neumann_eigenpairs(N, omega0):
    """Eigenvalues and orthonormal eigenvectors (as columns) of omega0^2 - Delta."""
    L = 2 * N + 1
    j = np.arange(L)
    x = np.arange(-N, N + 1)
    mu = omega0 ** 2 + 4.0 * np.sin(np.pi * j / (2.0 * L)) ** 2
    psi = np.cos(np.pi * np.outer(2 * (x + N) + 1, j) / (2.0 * L))
    psi *= np.sqrt(np.where(j == 0, 1.0, 2.0) / L)
    return mu, psi


def _eigen_table(lam, N, omega0):
    mu, psi = neumann_eigenpairs(N, omega0)
    denom = lam + mu
    if np.any(np.abs(denom) < 1e-14 * max(1.0, abs(lam))):
        j = int(np.argmin(np.abs(denom)))
        raise SingularError(f"lambda={lam!r} is a pole of the Neumann resolvent (mode j={j})")
    return (psi / denom) @ psi.T


def dense_resolvent(lam, sigma, N, omega0):
    """Dense inverse of (lambda + omega0^2 - Delta + i sigma (delta_{-N} + delta_N))."""
    L = 2 * N + 1
    K = (complex(lam) + omega0 ** 2) * np.eye(L, dtype=complex) - laplacian_matrix(N)
    K[0, 0] += 1j * sigma
    K[-1, -1] += 1j * sigma
    try:
        return linalg.solve(K, np.eye(L, dtype=complex))
    except linalg.LinAlgError as e:
        raise SingularError(f"resolvent singular at lambda={lam!r}, sigma={sigma!r}") from e


def neumann_greens_table(lam, N, omega0, method='auto'):
    """Full (2N+1)^2 table of the reflecting-interval Green's function.

    Args:
        lam: Spectral parameter.
        N: Half width.
        omega0: Pinning frequency.
        method: ``images``, ``eigen``, ``dense`` or ``auto`` (images with a
            dense fallback when the image sum converges too slowly).
    """
    if method == 'eigen':
        return _eigen_table(lam, N, omega0)
    if method == 'dense':
        return dense_resolvent(lam, 0.0, N, omega0)
    if method not in ('images', 'auto'):
        raise ValueError(f"unknown Green's function method: {method}")
    try:
        table = _images_table(lam, N, omega0)
    except BranchCutError as e:
        raise SpectralError(f"-lambda={-lam!r} lies in the band, image sum undefined") from e
    if table is None:
        logger.debug(f"Image sum too slow at lambda={lam!r}, N={N}; using dense solve")
        table = dense_resolvent(lam, 0.0, N, omega0)
    return table


def neumann_greens(lam, N, x, y, omega0, method='images'):
    """Single entry G^{(N)}_lambda(x, y)."""
    return neumann_greens_table(lam, N, omega0, method)[x + N, y + N]


def dissipative_greens(lam, sigma, N, omega0, method='auto', G=None):
    """Green's function of the interval with friction i sigma at both ends.

    The friction is a rank-two (rank-one at N = 0) update of the reflecting
    kernel, resolved through a 2x2 boundary system.

    Raises:
        DegenerateBoundaryError: The boundary system is singular.
    """
    if G is None:
        G = neumann_greens_table(lam, N, omega0, method)
    if sigma == 0:
        return G
    a = 1.0 + 1j * sigma * G[-1, -1]
    g_edge = G[0, -1]
    Q = a * a + sigma * sigma * g_edge * g_edge
    scale = max(1.0, abs(a) ** 2, (sigma * abs(g_edge)) ** 2)
    if abs(Q) < DEGENERATE_TOLERANCE * scale:
        raise DegenerateBoundaryError(
            f"boundary system degenerate at lambda={lam!r}, sigma={sigma!r} (|Q|={abs(Q):.3e})"
        )
    row_left = a * G[0, :] - 1j * sigma * g_edge * G[-1, :]
    row_right = a * G[-1, :] - 1j * sigma * g_edge * G[0, :]
    return (G
            - 1j * sigma * np.outer(G[:, 0], row_left) / Q
            - 1j * sigma * np.outer(G[:, -1], row_right) / Q)


def harmonic_band_distance(m, cfg):
    """Distance of (m omega)^2 to [omega0^2, omega_u^2], zero inside."""
    w = (m * cfg.omega) ** 2
    lo, hi = cfg.omega0 ** 2, cfg.omega_upper ** 2
    return max(lo - w, w - hi, 0.0)


class GreensKernelSet:
    """Read-only per-harmonic dissipative kernels H_m for m = 0..M.

    Negative harmonics are served by conjugation.
    """

    def __init__(self, tables, M, N, omega, config_hash):
        tables = np.ascontiguousarray(tables)
        tables.setflags(write=False)
        self.tables = tables
        self.M = M
        self.N = N
        self.omega = omega
        self.config_hash = config_hash

    def kernel(self, m):
        if abs(m) > self.M:
            raise IndexError(f"harmonic {m} outside kernel set (M={self.M})")
        return self.tables[m] if m >= 0 else np.conj(self.tables[-m])

    def column(self, y):
        """H_m(x, y) for all m, x at a fixed source site y."""
        return self.tables[:, :, y + self.N]

    def apply(self, coefficients):
        """(H v)_x(m) = sum_y H_m(x, y) v_y(m) for coefficients shaped ``(M+1, 2N+1)``."""
        return np.einsum('mxy,my->mx', self.tables, coefficients)

    def iter_rows(self):
        """Yield (m, x, y, value) in ascending m, x, y order."""
        size = 2 * self.N + 1
        for m in range(self.M + 1):
            for i in range(size):
                for j in range(size):
                    yield m, i - self.N, j - self.N, self.tables[m, i, j]


def build_kernel_set(cfg, M, method='auto'):
    """Kernels H_m = dissipative_greens(-(m omega)^2, gamma m omega, N) for m = 0..M.

    Raises:
        ResonanceError: Some (m omega)^2 lies in the band.
    """
    for m in range(M + 1):
        if harmonic_band_distance(m, cfg) <= 0.0:
            raise ResonanceError(
                m, f"harmonic m={m} (m*omega={m * cfg.omega:.6g}) lies in the band "
                   f"[{cfg.omega0:.6g}, {cfg.omega_upper:.6g}]"
            )
    logger.info(f"Building kernel set: N={cfg.N}, M={M}, method={method}")
    size = cfg.size
    tables = np.empty((M + 1, size, size), dtype=complex)
    for m in range(M + 1):
        w = m * cfg.omega
        tables[m] = dissipative_greens(-w * w, cfg.gamma * w, cfg.N, cfg.omega0, method)
    logger.info(f"✓ Kernel set ready ({M + 1} harmonics)")
    return GreensKernelSet(tables, M, cfg.N, cfg.omega, cfg.config_hash())
