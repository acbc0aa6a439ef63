"""
Utility modules for the bipolar Euler-Poisson spectral lab
"""

__all__ = [
    'errors',
    'spectral_core',
    'state_model',
    'hodge',
    'propagators',
    'decay_lab',
    'nonlinear_solver',
    'oracle',
    'export',
]
