"""
Exception hierarchy shared by the spectral lab modules
"""

from typing import Optional


class SpectralLabError(Exception):
    """Base class for numerical and contract failures"""


class GridMismatch(SpectralLabError, ValueError):
    """Two fields (or a field and an array) live on different grids"""


class NonZeroMean(SpectralLabError):
    """Poisson problem on the torus needs a zero-mean right-hand side"""

    def __init__(self, mean: complex, tol: float):
        self.mean = mean
        self.tol = tol
        super().__init__(f"zero mode {abs(mean):.3e} exceeds mean tolerance {tol:.1e}")


class NonPositiveDensity(SpectralLabError):
    """A reconstructed density is not strictly positive"""


class InadmissibleState(SpectralLabError):
    """Densities left the admissible box"""


class CFLViolation(SpectralLabError):
    """Time step too large for the current velocity field"""


class QuadratureError(SpectralLabError):
    """Adaptive quadrature did not reach the requested tolerance"""

    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message} (achieved relative error {achieved:.3e})")


class MissingNormError(SpectralLabError, KeyError):
    """A trajectory lacks a norm column needed by a diagnostic"""


class ResourceGuardExceeded(SpectralLabError):
    """A reference computation would exceed its configured budget"""


class SimulationError(SpectralLabError):
    """A step failed; carries the simulation time of the failure"""

    def __init__(self, t: float, cause: Optional[Exception] = None):
        self.t = t
        self.cause = cause
        super().__init__(f"simulation failed at t={t:.6g}: {cause}")
