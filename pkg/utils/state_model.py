"""
State model
Primitive and sum/difference unknowns of the bipolar system, the exact change
of variables between them, and the gamma-law pressure nonlinearity h

States store Fourier coefficients (normalization of utils.spectral_core).
Adding a constant to a field only touches its zero mode.
"""

import logging
from dataclasses import dataclass, fields, replace
from typing import Dict, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import DEFAULT_GAMMA, DENSITY_BOX
from utils.errors import GridMismatch, InadmissibleState, NonPositiveDensity
from utils.spectral_core import (
    GridSpec,
    SpectralField,
    forward_coeffs,
    inverse_coeffs,
    solve_poisson,
    spectral_l2,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class PressureLaw(BaseModel):
    """
    Gamma law P(rho) = rho^gamma / gamma, normalized so that P'(1) = 1.

    Example:
        >>> law = PressureLaw(gamma=3.0)
        >>> round(law.h(1.1), 12)
        0.1
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(default=DEFAULT_GAMMA, gt=1.0, description="Adiabatic exponent")

    def pressure(self, rho: ArrayLike) -> ArrayLike:
        return np.power(rho, self.gamma) / self.gamma

    def sound_speed_sq(self, rho: ArrayLike) -> ArrayLike:
        """P'(rho) = rho^(gamma - 1)."""
        return np.power(rho, self.gamma - 1.0)

    def h(self, rho: ArrayLike) -> ArrayLike:
        """h(rho) = P'(rho)/rho - 1 = rho^(gamma - 2) - 1."""
        return np.power(rho, self.gamma - 2.0) - 1.0

    def h_lipschitz_bound(self, lo: float = DENSITY_BOX[0], hi: float = DENSITY_BOX[1]) -> float:
        """Max |h'(rho)| over [lo, hi]; gives |h(rho)| <= C |rho - 1| on the box."""
        if not 0.0 < lo <= 1.0 <= hi:
            raise ValueError(f"box [{lo}, {hi}] must be positive and contain 1")
        slope = abs(self.gamma - 2.0)
        return float(slope * max(lo ** (self.gamma - 3.0), hi ** (self.gamma - 3.0)))


def h_value(rho: ArrayLike, law: PressureLaw) -> ArrayLike:
    """
    Evaluate the pressure nonlinearity h at positive densities

    Args:
        rho: Density (scalar or array), strictly positive
        law: Pressure law

    Returns:
        rho^(gamma - 2) - 1, same shape as rho
    """
    arr = np.asarray(rho, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("h is only defined for positive densities")
    value = law.h(arr)
    return float(value) if np.ndim(value) == 0 else value


def _check_coeffs(grid: GridSpec, name: str, coeffs: np.ndarray, vector: bool):
    expected = (grid.dim,) + grid.shape if vector else grid.shape
    if coeffs.shape != expected:
        raise GridMismatch(f"{name} has shape {coeffs.shape}, expected {expected}")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError(f"{name} has non-finite coefficients")


def _shift_mean(coeffs: np.ndarray, grid: GridSpec, value: float) -> np.ndarray:
    out = np.array(coeffs, dtype=complex)
    out[(0,) * grid.dim] += value
    return out


class _StateArrays:
    """Shared plumbing: field order, linear combinations, physical views."""

    VECTOR_FIELDS: Tuple[str, ...] = ()

    def field_names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(self) if f.name != "grid")

    def arrays(self) -> Tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in self.field_names())

    def with_arrays(self, arrays) -> "_StateArrays":
        return replace(self, **dict(zip(self.field_names(), arrays)))

    def add_scaled(self, increments, scale: float) -> "_StateArrays":
        """self + scale * increments, with increments ordered like arrays()."""
        return self.with_arrays(a + scale * b for a, b in zip(self.arrays(), increments))

    def masked(self, mask: np.ndarray) -> "_StateArrays":
        return self.with_arrays(a * mask for a in self.arrays())

    def field(self, name: str) -> SpectralField:
        rank = "vector" if name in self.VECTOR_FIELDS else "scalar"
        return SpectralField(self.grid, getattr(self, name), rank)

    def physical(self) -> Dict[str, np.ndarray]:
        return {name: inverse_coeffs(getattr(self, name), self.grid) for name in self.field_names()}

    def _validate(self):
        for name in self.field_names():
            _check_coeffs(self.grid, name, getattr(self, name), name in self.VECTOR_FIELDS)


@dataclass(frozen=True)
class PrimitiveState(_StateArrays):
    """Densities rho1, rho2 (background 1) and velocities u1, u2 in Fourier form."""

    grid: GridSpec
    rho1: np.ndarray
    u1: np.ndarray
    rho2: np.ndarray
    u2: np.ndarray

    VECTOR_FIELDS = ("u1", "u2")

    def __post_init__(self):
        self._validate()

    @classmethod
    def from_physical(cls, grid: GridSpec, rho1, u1, rho2, u2) -> "PrimitiveState":
        return cls(
            grid,
            forward_coeffs(np.asarray(rho1, dtype=float), grid),
            forward_coeffs(np.asarray(u1, dtype=float), grid),
            forward_coeffs(np.asarray(rho2, dtype=float), grid),
            forward_coeffs(np.asarray(u2, dtype=float), grid),
        )

    @classmethod
    def background(cls, grid: GridSpec) -> "PrimitiveState":
        zero_s = np.zeros(grid.shape, dtype=complex)
        zero_v = np.zeros((grid.dim,) + grid.shape, dtype=complex)
        one = _shift_mean(zero_s, grid, 1.0)
        return cls(grid, one, zero_v, one.copy(), zero_v.copy())

    @property
    def phi(self) -> SpectralField:
        """Potential with Laplacian(phi) = rho1 - rho2, derived on demand."""
        return solve_poisson(SpectralField(self.grid, self.rho1 - self.rho2, "scalar"))

    def densities(self) -> Tuple[np.ndarray, np.ndarray]:
        return inverse_coeffs(self.rho1, self.grid), inverse_coeffs(self.rho2, self.grid)


@dataclass(frozen=True)
class SumDiffState(_StateArrays):
    """
    Sum/difference unknowns:
        n1 = rho1 + rho2 - 2,  n2 = rho1 - rho2,  w1 = u1 + u2,  w2 = u1 - u2
    """

    grid: GridSpec
    n1: np.ndarray
    w1: np.ndarray
    n2: np.ndarray
    w2: np.ndarray

    VECTOR_FIELDS = ("w1", "w2")

    def __post_init__(self):
        self._validate()

    @classmethod
    def from_physical(cls, grid: GridSpec, n1, w1, n2, w2) -> "SumDiffState":
        return cls(
            grid,
            forward_coeffs(np.asarray(n1, dtype=float), grid),
            forward_coeffs(np.asarray(w1, dtype=float), grid),
            forward_coeffs(np.asarray(n2, dtype=float), grid),
            forward_coeffs(np.asarray(w2, dtype=float), grid),
        )

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SumDiffState":
        zero_s = np.zeros(grid.shape, dtype=complex)
        zero_v = np.zeros((grid.dim,) + grid.shape, dtype=complex)
        return cls(grid, zero_s, zero_v, zero_s.copy(), zero_v.copy())

    @property
    def phi(self) -> SpectralField:
        """Potential with Laplacian(phi) = n2, derived on demand."""
        return solve_poisson(SpectralField(self.grid, self.n2, "scalar"))

    def densities(self) -> Tuple[np.ndarray, np.ndarray]:
        n1 = inverse_coeffs(self.n1, self.grid)
        n2 = inverse_coeffs(self.n2, self.grid)
        return 0.5 * (n1 + n2) + 1.0, 0.5 * (n1 - n2) + 1.0


State = Union[PrimitiveState, SumDiffState]


def to_sumdiff(state: PrimitiveState) -> SumDiffState:
    """
    Change to sum/difference variables

    Args:
        state: Primitive state

    Returns:
        SumDiffState with n1 = rho1 + rho2 - 2, n2 = rho1 - rho2, w1 = u1 + u2, w2 = u1 - u2
    """
    grid = state.grid
    return SumDiffState(
        grid,
        n1=_shift_mean(state.rho1 + state.rho2, grid, -2.0),
        w1=state.u1 + state.u2,
        n2=state.rho1 - state.rho2,
        w2=state.u1 - state.u2,
    )


def from_sumdiff(state: SumDiffState) -> PrimitiveState:
    """
    Recover primitive variables

    Args:
        state: Sum/difference state

    Returns:
        PrimitiveState with rho1 = (n1 + n2)/2 + 1, rho2 = (n1 - n2)/2 + 1, u1 = (w1 + w2)/2, u2 = (w1 - w2)/2

    Raises:
        NonPositiveDensity: if a reconstructed density is <= 0 somewhere
    """
    grid = state.grid
    rho1, rho2 = state.densities()
    for label, rho in (("rho1", rho1), ("rho2", rho2)):
        if np.min(rho) <= 0.0:
            raise NonPositiveDensity(f"{label} reaches {np.min(rho):.6g}")
    return PrimitiveState(
        grid,
        rho1=_shift_mean(0.5 * (state.n1 + state.n2), grid, 1.0),
        u1=0.5 * (state.w1 + state.w2),
        rho2=_shift_mean(0.5 * (state.n1 - state.n2), grid, 1.0),
        u2=0.5 * (state.w1 - state.w2),
    )


def check_admissible(state: State, box: Tuple[float, float] = DENSITY_BOX) -> None:
    """Raise InadmissibleState unless both densities lie in box pointwise."""
    lo, hi = box
    for label, rho in zip(("rho1", "rho2"), state.densities()):
        rmin, rmax = float(np.min(rho)), float(np.max(rho))
        if rmin < lo or rmax > hi:
            raise InadmissibleState(f"{label} in [{rmin:.6g}, {rmax:.6g}] leaves [{lo}, {hi}]")


def species_norms(state: PrimitiveState) -> Dict[str, float]:
    """L2 norms of rho_i - 1 and u_i per species."""
    grid = state.grid
    return {
        "rho1": spectral_l2(SpectralField(grid, _shift_mean(state.rho1, grid, -1.0))),
        "u1": spectral_l2(state.field("u1")),
        "rho2": spectral_l2(SpectralField(grid, _shift_mean(state.rho2, grid, -1.0))),
        "u2": spectral_l2(state.field("u2")),
    }
