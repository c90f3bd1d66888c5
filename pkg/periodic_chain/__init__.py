# Periodic steady states of a forced anharmonic chain
from .solver import ChainConfig, ForcingSpectrum, solve

__all__ = ('ChainConfig', 'ForcingSpectrum', 'solve')
