"""
Fourier-space Hodge decomposition
Splits a velocity field into the compressible amplitude v = Lambda^-1 div w
and the solenoidal projection d, with the spatial mean kept aside.

Per frequency (k_hat = k/|k|):
    v_hat = i k_hat . w_hat
    d_hat = w_hat - k_hat (k_hat . w_hat)
    w_hat = -i k_hat v_hat + d_hat            (k != 0)

k drops its components on Nyquist planes, as odd spectral derivatives do, so
real fields split into real parts. Modes whose reduced k vanishes (every
component 0 or Nyquist) carry no direction and go entirely into d.

The matrix-valued incompressible part Lambda^-1 curl w carries the same L2
information as d: its norm is sqrt(2) * ||d|| away from those corner modes.
"""

from dataclasses import dataclass

import numpy as np

from utils.errors import GridMismatch
from utils.spectral_core import GridSpec, SpectralField


def reduced_wavevectors(grid: GridSpec) -> np.ndarray:
    """Wavevectors with the Nyquist component of each axis set to zero."""
    k = grid.wavevectors()
    return np.stack([np.where(grid.nyquist_mask(ax), 0.0, k[ax]) for ax in range(grid.dim)])


def reduced_kmag(grid: GridSpec) -> np.ndarray:
    return np.sqrt(np.sum(reduced_wavevectors(grid) ** 2, axis=0))


def _unit_wavevectors(grid: GridSpec) -> np.ndarray:
    k = reduced_wavevectors(grid)
    kmag = np.sqrt(np.sum(k ** 2, axis=0))
    safe = np.where(kmag > 0, kmag, 1.0)
    return k / safe


def _zero_index(grid: GridSpec):
    return (0,) * grid.dim


def compressible_amplitude(w_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    """v_hat = i k_hat . w_hat, zero at k = 0."""
    return 1j * np.sum(_unit_wavevectors(grid) * w_hat, axis=0)


def solenoidal_part(w_hat: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(I - k k^T/|k|^2) w_hat with the zero mode removed."""
    khat = _unit_wavevectors(grid)
    d = w_hat - khat * np.sum(khat * w_hat, axis=0)
    d[(slice(None),) + _zero_index(grid)] = 0.0
    return d


def assemble_velocity(v_hat: np.ndarray, d_hat: np.ndarray, mean: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Inverse of the split: -i k_hat v_hat + d_hat, plus the stored zero mode."""
    w = -1j * _unit_wavevectors(grid) * v_hat + d_hat
    w[(slice(None),) + _zero_index(grid)] = mean
    return w


@dataclass(frozen=True)
class ZeroModePolicy:
    """Spatial mean of w, one complex entry per component."""

    mean: np.ndarray

    @classmethod
    def capture(cls, w: SpectralField) -> "ZeroModePolicy":
        if w.rank != "vector":
            raise ValueError("zero mode capture expects a vector field")
        return cls(np.array(w.coeffs[(slice(None),) + _zero_index(w.grid)]))


@dataclass(frozen=True)
class HodgeParts:
    v: SpectralField
    d: SpectralField

    def __post_init__(self):
        if self.v.grid != self.d.grid:
            raise GridMismatch("compressible and solenoidal parts live on different grids")
        if self.v.rank != "scalar" or self.d.rank != "vector":
            raise ValueError("HodgeParts expects scalar v and vector d")


def decompose(w: SpectralField) -> HodgeParts:
    """
    Split a velocity field into compressible amplitude and solenoidal part

    Args:
        w: Vector spectral field

    Returns:
        HodgeParts(v, d); the mean of w is not contained in either part
    """
    if w.rank != "vector":
        raise ValueError("decompose expects a vector field")
    grid = w.grid
    return HodgeParts(
        v=SpectralField(grid, compressible_amplitude(w.coeffs, grid), "scalar"),
        d=SpectralField(grid, solenoidal_part(w.coeffs, grid), "vector"),
    )


def reconstruct(parts: HodgeParts, zero_mode: ZeroModePolicy) -> SpectralField:
    """
    Rebuild w from its Hodge parts and stored mean

    Args:
        parts: Compressible amplitude and solenoidal part
        zero_mode: Mean captured before the split

    Returns:
        Vector spectral field
    """
    grid = parts.v.grid
    if zero_mode.mean.shape != (grid.dim,):
        raise GridMismatch(f"zero mode of shape {zero_mode.mean.shape} does not fit dimension {grid.dim}")
    coeffs = assemble_velocity(parts.v.coeffs, parts.d.coeffs, zero_mode.mean, grid)
    return SpectralField(grid, coeffs, "vector")


def curl_tensor(w: SpectralField) -> np.ndarray:
    """
    Antisymmetric field Lambda^-1 curl w in Fourier form

    Returns:
        Coefficients of shape (dim, dim, n, ..., n) with entries i (k_hat_i w_j - k_hat_j w_i)
    """
    if w.rank != "vector":
        raise ValueError("curl_tensor expects a vector field")
    khat = _unit_wavevectors(w.grid)
    outer = khat[:, None] * w.coeffs[None, :]
    return 1j * (outer - np.swapaxes(outer, 0, 1))
