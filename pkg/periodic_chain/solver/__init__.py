# Chain model, kernels, solvers and diagnostics
from .chain import ChainConfig, ChainState, ForcingSpectrum
from .exceptions import ChainError
from .spectral import coupling_radius, solve

__all__ = ('ChainConfig', 'ChainState', 'ChainError', 'ForcingSpectrum', 'coupling_radius', 'solve')
