"""
Spectral core utilities
Periodic-box grids, Fourier transforms, spectral derivatives, Poisson solves and norms

Normalization: the forward transform carries the factor 1/n^dim, so the zero
mode of a field equals its spatial mean and a constant c transforms to a
single coefficient c.  Parseval then reads

    sum |f(x_j)|^2 dx^dim = V * sum |c_k|^2,        V = L^dim.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config.settings import FFT_WORKERS, MAX_DERIVATIVE_ORDER, POISSON_MEAN_TOL
from utils.errors import GridMismatch, NonZeroMean

logger = logging.getLogger(__name__)

Rank = Literal["scalar", "vector"]


class GridSpec(BaseModel):
    """
    Immutable periodic box [0, L)^dim sampled with n points per axis.

    Wavevectors are 2*pi/L times integer vectors with entries in [-n/2, n/2),
    in the standard FFT ordering.

    Example:
        >>> grid = GridSpec(n=32, L=2 * np.pi, dim=3)
        >>> grid.shape
        (32, 32, 32)
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(description="Points per axis")
    L: float = Field(default=2.0 * np.pi, gt=0.0, description="Box side length")
    dim: Literal[1, 3] = Field(default=3, description="Spatial dimension")

    @field_validator("n")
    @classmethod
    def validate_points(cls, v: int) -> int:
        """Grid size must be even and at least 4."""
        if v < 4:
            raise ValueError(f"Grid size must be at least 4, got {v}")
        if v % 2 != 0:
            raise ValueError(f"Grid size must be even, got {v}")
        return v

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def volume(self) -> float:
        return self.L ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    def coordinates(self) -> np.ndarray:
        """Physical sample points, shape (dim, n, ..., n)."""
        return _coordinates(self.n, self.L, self.dim)

    def integer_modes(self) -> np.ndarray:
        """Integer wavevector components m_j, shape (dim, n, ..., n)."""
        return _integer_modes(self.n, self.dim)

    def wavevectors(self) -> np.ndarray:
        """Wavevectors 2*pi*m/L, shape (dim, n, ..., n)."""
        return _wavevectors(self.n, self.L, self.dim)

    @property
    def k2(self) -> np.ndarray:
        return _k2(self.n, self.L, self.dim)

    @property
    def kmag(self) -> np.ndarray:
        return _kmag(self.n, self.L, self.dim)

    def dealias_mask(self) -> np.ndarray:
        """Boolean 2/3-rule mask: keeps modes with |m_j| < n/3 on every axis."""
        return _dealias_mask(self.n, self.dim)

    def nyquist_mask(self, axis: int) -> np.ndarray:
        """Boolean mask of the Nyquist plane m_axis = -n/2."""
        return self.integer_modes()[axis] == -(self.n // 2)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=32)
def _coordinates(n: int, L: float, dim: int) -> np.ndarray:
    x = np.arange(n) * (L / n)
    return _readonly(np.stack(np.meshgrid(*([x] * dim), indexing="ij")))


@lru_cache(maxsize=32)
def _integer_modes(n: int, dim: int) -> np.ndarray:
    m = np.fft.fftfreq(n, d=1.0 / n).round().astype(int)
    return _readonly(np.stack(np.meshgrid(*([m] * dim), indexing="ij")))


@lru_cache(maxsize=32)
def _wavevectors(n: int, L: float, dim: int) -> np.ndarray:
    return _readonly(_integer_modes(n, dim) * (2.0 * np.pi / L))


@lru_cache(maxsize=32)
def _k2(n: int, L: float, dim: int) -> np.ndarray:
    return _readonly(np.sum(_wavevectors(n, L, dim) ** 2, axis=0))


@lru_cache(maxsize=32)
def _kmag(n: int, L: float, dim: int) -> np.ndarray:
    return _readonly(np.sqrt(_k2(n, L, dim)))


@lru_cache(maxsize=32)
def _dealias_mask(n: int, dim: int) -> np.ndarray:
    m = _integer_modes(n, dim)
    return _readonly(np.all(3 * np.abs(m) < n, axis=0))


@dataclass(frozen=True)
class SpectralField:
    """
    Fourier coefficients of a scalar or vector field on a GridSpec.

    Vector fields carry one leading component axis of length grid.dim.
    """

    grid: GridSpec
    coeffs: np.ndarray
    rank: Rank = "scalar"

    def __post_init__(self):
        expected = self.grid.shape if self.rank == "scalar" else (self.grid.dim,) + self.grid.shape
        if self.coeffs.shape != expected:
            raise GridMismatch(
                f"{self.rank} coefficients of shape {self.coeffs.shape} do not fit grid {expected}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("Spectral field has non-finite coefficients")

    def hermitian_defect(self) -> float:
        """Max |c(-m mod n) - conj(c(m))| over every mode, Nyquist planes included."""
        flipped = self.coeffs
        for ax in self.grid.axes:
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        return float(np.max(np.abs(flipped - np.conj(self.coeffs))))


def infer_rank(arr: np.ndarray, grid: GridSpec) -> Rank:
    if arr.shape == grid.shape:
        return "scalar"
    if arr.shape == (grid.dim,) + grid.shape:
        return "vector"
    raise GridMismatch(f"array of shape {arr.shape} does not fit grid {grid.shape}")


def forward_coeffs(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array-level forward transform over the trailing spatial axes."""
    return sfft.fftn(arr, axes=grid.axes, norm="forward", workers=FFT_WORKERS)


def inverse_coeffs(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Array-level inverse transform returning the real part."""
    return sfft.ifftn(coeffs, axes=grid.axes, norm="forward", workers=FFT_WORKERS).real


def transform_forward(field: np.ndarray, grid: GridSpec) -> SpectralField:
    """
    Transform a physical field to Fourier coefficients

    Args:
        field: Real array of shape grid.shape (scalar) or (dim,) + grid.shape (vector)
        grid: Grid the samples live on

    Returns:
        SpectralField with coefficients normalized by 1/n^dim
    """
    rank = infer_rank(np.asarray(field), grid)
    return SpectralField(grid, forward_coeffs(np.asarray(field, dtype=float), grid), rank)


def transform_inverse(field: SpectralField) -> np.ndarray:
    """
    Transform Fourier coefficients back to physical samples

    Args:
        field: Spectral field (Hermitian coefficients for a real result)

    Returns:
        Real array of physical samples
    """
    return inverse_coeffs(field.coeffs, field.grid)


def derivative_multiplier(grid: GridSpec, multi_index: Sequence[int]) -> np.ndarray:
    """(i k)^alpha with the Nyquist plane zeroed on axes differentiated an odd number of times."""
    alpha = tuple(int(a) for a in multi_index)
    if len(alpha) != grid.dim:
        raise ValueError(f"multi-index {alpha} has length {len(alpha)}, grid dimension is {grid.dim}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index {alpha} has negative entries")
    if sum(alpha) > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order {sum(alpha)} exceeds {MAX_DERIVATIVE_ORDER}")

    k = grid.wavevectors()
    mult = np.ones(grid.shape, dtype=complex)
    for axis, a in enumerate(alpha):
        if a == 0:
            continue
        mult = mult * (1j * k[axis]) ** a
        if a % 2 == 1:
            mult = np.where(grid.nyquist_mask(axis), 0.0, mult)
    return mult


def derive(field: SpectralField, multi_index: Sequence[int]) -> SpectralField:
    """
    Spectral derivative D^alpha

    Args:
        field: Scalar or vector spectral field (vector fields are differentiated componentwise)
        multi_index: Derivative counts per axis, total order at most 3

    Returns:
        SpectralField of the same rank
    """
    mult = derivative_multiplier(field.grid, multi_index)
    return SpectralField(field.grid, field.coeffs * mult, field.rank)


def _unit_index(dim: int, axis: int) -> Tuple[int, ...]:
    return tuple(1 if j == axis else 0 for j in range(dim))


def gradient(field: SpectralField) -> SpectralField:
    if field.rank != "scalar":
        raise ValueError("gradient expects a scalar field")
    dim = field.grid.dim
    parts = [derive(field, _unit_index(dim, j)).coeffs for j in range(dim)]
    return SpectralField(field.grid, np.stack(parts), "vector")


def divergence(field: SpectralField) -> SpectralField:
    if field.rank != "vector":
        raise ValueError("divergence expects a vector field")
    dim = field.grid.dim
    total = sum(
        field.coeffs[j] * derivative_multiplier(field.grid, _unit_index(dim, j)) for j in range(dim)
    )
    return SpectralField(field.grid, total, "scalar")


def poisson_coeffs(rhs_hat: np.ndarray, grid: GridSpec, tol: float = POISSON_MEAN_TOL) -> np.ndarray:
    """Array-level solve of Laplacian(phi) = rhs with phi having zero mean."""
    zero_mode = rhs_hat[(0,) * grid.dim]
    if abs(zero_mode) > tol:
        raise NonZeroMean(zero_mode, tol)
    k2 = grid.k2
    safe = np.where(k2 > 0, k2, 1.0)
    return np.where(k2 > 0, -rhs_hat / safe, 0.0)


def solve_poisson(n2: SpectralField, tol: float = POISSON_MEAN_TOL) -> SpectralField:
    """
    Solve the periodic Poisson problem Laplacian(phi) = n2

    Args:
        n2: Scalar right-hand side with (numerically) zero mean
        tol: Allowed magnitude of the zero mode

    Returns:
        phi with phi_hat(k) = -n2_hat(k)/|k|^2 and zero mean

    Raises:
        NonZeroMean: if |mean(n2)| > tol
    """
    if n2.rank != "scalar":
        raise ValueError("solve_poisson expects a scalar field")
    return SpectralField(n2.grid, poisson_coeffs(n2.coeffs, n2.grid, tol), "scalar")


class Norms(NamedTuple):
    l1: float
    l2: float
    linf: float


def _pointwise_magnitude(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    if infer_rank(arr, grid) == "vector":
        return np.sqrt(np.sum(np.abs(arr) ** 2, axis=0))
    return np.abs(arr)


def norms(field: Union[np.ndarray, SpectralField], grid: Optional[GridSpec] = None) -> Norms:
    """
    Riemann-sum L1, L2 and max norms over the box

    Args:
        field: Physical array (needs `grid`) or SpectralField
        grid: Grid for physical arrays

    Returns:
        Norms(l1, l2, linf); vector fields use the pointwise Euclidean magnitude
    """
    if isinstance(field, SpectralField):
        grid = field.grid
        arr = transform_inverse(field)
    else:
        if grid is None:
            raise ValueError("norms of a physical array need its grid")
        arr = np.asarray(field)
    mag = _pointwise_magnitude(arr, grid)
    return Norms(
        l1=float(np.sum(mag) * grid.cell_volume),
        l2=float(np.sqrt(np.sum(mag ** 2) * grid.cell_volume)),
        linf=float(np.max(mag)),
    )


def spectral_l2(field: SpectralField) -> float:
    """L2 norm from coefficients via Parseval."""
    return float(np.sqrt(field.grid.volume * np.sum(np.abs(field.coeffs) ** 2)))


def sobolev_seminorm(coeffs: np.ndarray, grid: GridSpec, k: int) -> float:
    """Homogeneous norm ||Lambda^k f||_2 = ||(|xi|^k) f_hat||_2 of a scalar or vector field."""
    weight = grid.kmag ** k if k > 0 else 1.0
    return float(np.sqrt(grid.volume * np.sum(np.abs(coeffs * weight) ** 2)))


def band_limited_random(
    grid: GridSpec,
    rng: np.random.Generator,
    kmax: int,
    rank: Rank = "scalar",
) -> np.ndarray:
    """
    Real random field supported on integer modes |m_j| <= kmax, zero mean, max |f| = 1

    Args:
        grid: Target grid
        rng: Seeded generator
        kmax: Largest integer wavenumber per axis
        rank: "scalar" or "vector"

    Returns:
        Physical array
    """
    if kmax < 1 or 2 * kmax >= grid.n:
        raise ValueError(f"kmax={kmax} must lie in [1, n/2) for n={grid.n}")
    lead = () if rank == "scalar" else (grid.dim,)
    support = np.all(np.abs(grid.integer_modes()) <= kmax, axis=0)
    coeffs = (rng.standard_normal(lead + grid.shape) + 1j * rng.standard_normal(lead + grid.shape)) * support
    coeffs[(...,) + (0,) * grid.dim] = 0.0
    field = inverse_coeffs(coeffs, grid)
    peak = np.max(np.abs(field))
    return field / peak if peak > 0 else field
