"""
Brute-force references for tests and verification runs
Fixed-step RK4 integration of the per-frequency linear systems, finite
difference evaluation of the source terms, spectral prolongation and
restriction between grids, and a refined reference simulation.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import (
    ORACLE_DT,
    REFERENCE_DT_FACTOR,
    REFERENCE_GRID_FACTOR,
    REFERENCE_MAX_POINTS,
    REFERENCE_MAX_STEPS,
)
from utils.errors import GridMismatch, ResourceGuardExceeded
from utils.nonlinear_solver import (
    SimConfig,
    SourceTerms,
    Trajectory,
    build_trajectory,
    initial_state,
    simulate,
)
from utils.propagators import SymbolKind, symbol
from utils.spectral_core import GridSpec, inverse_coeffs
from utils.state_model import PressureLaw, PrimitiveState, SumDiffState

logger = logging.getLogger(__name__)


class OdeOracleConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(default=ORACLE_DT, gt=0.0, description="RK4 step")


def ode_propagator(
    kind: SymbolKind,
    r,
    t: float,
    config: Optional[OdeOracleConfig] = None,
    poisson_sign: float = 1.0,
) -> np.ndarray:
    """
    Integrate dX/dt = M(r) X from the identity with classical RK4

    Args:
        kind: Symbol kind
        r: Frequency magnitude, or 1-D array of magnitudes
        t: Final time, t >= 0
        config: Step size (default dt = 1e-4)

    Returns:
        2x2 matrix, or an array of shape (len(r), 2, 2) for array input
    """
    config = config or OdeOracleConfig()
    if t < 0.0:
        raise ValueError(f"time must be non-negative, got {t}")
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    M = np.stack([symbol(kind, ri, poisson_sign) for ri in radii])
    X = np.broadcast_to(np.eye(2), M.shape).copy()

    n_steps = int(round(t / config.dt))
    if n_steps > 0:
        h = t / n_steps
        for _ in range(n_steps):
            k1 = M @ X
            k2 = M @ (X + 0.5 * h * k1)
            k3 = M @ (X + 0.5 * h * k2)
            k4 = M @ (X + h * k3)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return X if np.ndim(r) else X[0]


def _mode_index(n: int, target: int) -> np.ndarray:
    m = np.fft.fftfreq(n, d=1.0 / n).round().astype(int)
    return m % target


def _spatial_index(grid: GridSpec, target: int):
    idx = _mode_index(grid.n, target)
    return (Ellipsis,) + np.ix_(*([idx] * grid.dim))


def _drop_nyquist(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    out = np.array(coeffs)
    for axis in range(grid.dim):
        out[..., grid.nyquist_mask(axis)] = 0.0
    return out


def prolong(coeffs: np.ndarray, coarse: GridSpec, fine: GridSpec) -> np.ndarray:
    """
    Zero-pad coefficients onto a finer grid of the same box

    Exact spectral interpolation for fields without Nyquist content (the
    coarse Nyquist plane is dropped).
    """
    if coarse.L != fine.L or coarse.dim != fine.dim or fine.n < coarse.n:
        raise GridMismatch("prolongation needs the same box and a finer grid")
    lead = coeffs.shape[: coeffs.ndim - coarse.dim]
    out = np.zeros(lead + fine.shape, dtype=complex)
    out[_spatial_index(coarse, fine.n)] = _drop_nyquist(coeffs, coarse)
    return out


def restrict(coeffs: np.ndarray, fine: GridSpec, coarse: GridSpec) -> np.ndarray:
    """Keep the coarse-grid modes of fine-grid coefficients (coarse Nyquist plane zeroed)."""
    if coarse.L != fine.L or coarse.dim != fine.dim or fine.n < coarse.n:
        raise GridMismatch("restriction needs the same box and a coarser grid")
    return _drop_nyquist(coeffs[_spatial_index(coarse, fine.n)], coarse)


def _prolong_state(state, fine: GridSpec):
    return type(state)(fine, *(prolong(a, state.grid, fine) for a in state.arrays()))


def _restrict_state(state, coarse: GridSpec):
    return type(state)(coarse, *(restrict(a, state.grid, coarse) for a in state.arrays()))


def _fd_grad(f: np.ndarray, h: float, dim: int) -> np.ndarray:
    """Centered differences along each spatial axis, shape (dim, ...)."""
    axes = range(f.ndim - dim, f.ndim)
    return np.stack([(np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * h) for ax in axes])


def _fd_div(w: np.ndarray, h: float, dim: int) -> np.ndarray:
    return sum(_fd_grad(w[j], h, dim)[j] for j in range(dim))


def _fd_advect(a: np.ndarray, b: np.ndarray, h: float, dim: int) -> np.ndarray:
    return np.stack([np.sum(a * _fd_grad(b[j], h, dim), axis=0) for j in range(dim)])


def fd_check_rhs(state: SumDiffState, h: float, law: Optional[PressureLaw] = None) -> SourceTerms:
    """
    Source terms by centered finite differences of pointwise products

    The state is interpolated spectrally onto a grid of spacing h (L/h must be a
    multiple of the state's n), every product is formed pointwise and every
    derivative by centered differences; the result is sampled back on the
    state's grid and returned as physical arrays in SourceTerms order.
    """
    law = law or PressureLaw()
    grid = state.grid
    n_fine = int(round(grid.L / h))
    if n_fine % grid.n != 0 or abs(n_fine * h - grid.L) > 1e-9 * grid.L:
        raise ValueError(f"spacing h={h} must divide the box into a multiple of {grid.n} cells")
    fine = GridSpec(n=n_fine, L=grid.L, dim=grid.dim)
    dim, step = grid.dim, n_fine // grid.n

    up = _prolong_state(state, fine)
    n1, n2 = inverse_coeffs(up.n1, fine), inverse_coeffs(up.n2, fine)
    w1, w2 = inverse_coeffs(up.w1, fine), inverse_coeffs(up.w2, fine)
    h1 = law.h(0.5 * (n1 + n2) + 1.0)
    h2 = law.h(0.5 * (n1 - n2) + 1.0)
    grad_n1, grad_n2 = _fd_grad(n1, h, dim), _fd_grad(n2, h, dim)

    f1 = -0.5 * _fd_div(n1 * w1 + n2 * w2, h, dim)
    f3 = -0.5 * _fd_div(n1 * w2 + n2 * w1, h, dim)
    f2 = -0.5 * (_fd_advect(w1, w1, h, dim) + _fd_advect(w2, w2, h, dim) + (h1 + h2) * grad_n1 + (h1 - h2) * grad_n2)
    f4 = -0.5 * (_fd_advect(w1, w2, h, dim) + _fd_advect(w2, w1, h, dim) + (h1 - h2) * grad_n1 + (h1 + h2) * grad_n2)

    sample = (Ellipsis,) + (slice(None, None, step),) * dim
    return SourceTerms(f1[sample], f2[sample], f3[sample], f4[sample])


def reference_config(config: SimConfig) -> SimConfig:
    """Config with dt / 10 on a grid twice as fine, checked against the resource guard."""
    fine = GridSpec(n=config.grid.n * REFERENCE_GRID_FACTOR, L=config.grid.L, dim=config.grid.dim)
    ref = config.model_copy(update={"grid": fine, "dt": config.dt / REFERENCE_DT_FACTOR})
    points = fine.n ** fine.dim
    if points > REFERENCE_MAX_POINTS:
        raise ResourceGuardExceeded(f"reference grid has {points} points, limit {REFERENCE_MAX_POINTS}")
    if ref.n_steps > REFERENCE_MAX_STEPS:
        raise ResourceGuardExceeded(f"reference run needs {ref.n_steps} steps, limit {REFERENCE_MAX_STEPS}")
    return ref


def reference_simulate(config: SimConfig) -> Trajectory:
    """
    Refined run of the same initial data, restricted back to the configured grid

    Args:
        config: Main-run configuration

    Returns:
        Trajectory on config.grid at the main run's snapshot times

    Raises:
        ResourceGuardExceeded: if the refined run is too large
    """
    ref = reference_config(config)
    start = initial_state(config)
    fine_start: PrimitiveState = _prolong_state(start, ref.grid)
    logger.info(f"Reference run: n={ref.grid.n}, {ref.n_steps} steps")
    fine_run = simulate(ref, initial=fine_start)

    coarse_states = [_restrict_state(s, config.grid) for s in fine_run.states]
    return build_trajectory(
        list(fine_run.times), coarse_states, config.law, config.dealias, config.form, fine_run.wall_time
    )
