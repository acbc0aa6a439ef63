"""
Nonlinear pseudospectral solver
Source terms of the bipolar system in primitive and sum/difference form,
Strang-split exponential stepping (exact linear half steps around an explicit
midpoint source step), simulation driver, and trajectory diagnostics.

Sum/difference form, with h1 = h((n1 + n2)/2 + 1), h2 = h((n1 - n2)/2 + 1):

    f1 = -1/2 div(n1 w1 + n2 w2)
    f2 = -1/2 [w1.grad w1 + w2.grad w2 + (h1 + h2) grad n1 + (h1 - h2) grad n2]
    f3 = -1/2 div(n1 w2 + n2 w1)
    f4 = -1/2 [w1.grad w2 + w2.grad w1 + (h1 - h2) grad n1 + (h1 + h2) grad n2]

Primitive form, species i with charge sign s1 = +1, s2 = -1:

    d/dt rho_i + div u_i            = -div((rho_i - 1) u_i)
    d/dt u_i + u_i + grad rho_i     = -u_i.grad u_i - h(rho_i) grad rho_i + s_i grad phi
    Laplacian(phi)                  = rho1 - rho2

The linear stage of the primitive form is the damped Euler block per species;
the potential coupling is part of the source stage.
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Literal, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import (
    CFL_FACTOR,
    DEFAULT_KMAX,
    MAX_DERIVATIVE_ORDER,
    SNAPSHOT_EVERY,
)
from utils.decay_lab import ExponentFit, fit_exponent
from utils.errors import CFLViolation, InadmissibleState, MissingNormError, SimulationError, SpectralLabError
from utils.propagators import SymbolKind, apply_linear_semigroup, propagate_pair
from utils.spectral_core import (
    GridSpec,
    SpectralField,
    band_limited_random,
    forward_coeffs,
    inverse_coeffs,
    poisson_coeffs,
    sobolev_seminorm,
    transform_inverse,
)
from utils.state_model import (
    PressureLaw,
    PrimitiveState,
    State,
    SumDiffState,
    check_admissible,
    to_sumdiff,
)

logger = logging.getLogger(__name__)

Form = Literal["primitive", "sumdiff"]
FIELDS = ("n1", "w1", "n2", "w2")
NORM_COLUMNS = tuple(f"{name}_D{k}" for name in FIELDS for k in range(MAX_DERIVATIVE_ORDER + 1))
SOURCE_COLUMNS = ("f12_L1", "f12_L2", "f34_L1", "f34_L2")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ModeSpec(BaseModel):
    """One explicit Fourier mode: amplitude * cos(2 pi m.x / L + phase) added to a field."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    field: Literal["rho1", "rho2", "u1", "u2"]
    component: int = Field(default=0, ge=0)
    wavevector: Tuple[int, ...]
    amplitude: float
    phase: float = 0.0

    @model_validator(mode="after")
    def check_density_mean(self) -> "ModeSpec":
        if self.field.startswith("rho") and not any(self.wavevector):
            raise ValueError("density modes need a nonzero wavevector (perturbations have zero mean)")
        return self


class InitialData(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["band_limited", "modes"] = "band_limited"
    seed: int = 0
    kmax: int = Field(default=DEFAULT_KMAX, ge=1)
    modes: List[ModeSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_modes(self) -> "InitialData":
        if self.kind == "modes" and not self.modes:
            raise ValueError("initial data of kind 'modes' needs at least one mode")
        return self


class SimConfig(BaseModel):
    """
    Validated simulation configuration (JSON schema version 1).

    Example:
        >>> cfg = SimConfig(grid=GridSpec(n=16, dim=1), amplitude=1e-3, dt=0.01, t_end=1.0)
        >>> cfg.n_steps
        100
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: Literal[1] = 1
    grid: GridSpec
    law: PressureLaw = Field(default_factory=PressureLaw)
    amplitude: float = Field(ge=0.0, description="Perturbation size epsilon")
    initial: InitialData = Field(default_factory=InitialData)
    dt: float = Field(gt=0.0)
    t_end: float = Field(gt=0.0)
    dealias: bool = True
    form: Form = "sumdiff"
    snapshot_every: float = Field(default=SNAPSHOT_EVERY, gt=0.0)

    @field_validator("dt")
    @classmethod
    def finite_dt(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("dt must be finite")
        return v

    @model_validator(mode="after")
    def check_consistency(self) -> "SimConfig":
        if self.dt > self.t_end:
            raise ValueError("dt exceeds t_end")
        if self.initial.kind == "band_limited" and 2 * self.initial.kmax >= self.grid.n:
            raise ValueError(f"kmax={self.initial.kmax} too large for n={self.grid.n}")
        for mode in self.initial.modes:
            if len(mode.wavevector) != self.grid.dim:
                raise ValueError(f"wavevector {mode.wavevector} does not match dimension {self.grid.dim}")
            if mode.component >= self.grid.dim:
                raise ValueError(f"component {mode.component} out of range for dimension {self.grid.dim}")
        try:
            check_admissible(_perturbed_state(self))
        except InadmissibleState as exc:
            raise ValueError(f"amplitude {self.amplitude:g} gives an inadmissible initial state: {exc}") from exc
        return self

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))

    @property
    def snapshot_stride(self) -> int:
        return max(1, int(round(self.snapshot_every / self.dt)))


def _perturbed_state(config: "SimConfig") -> PrimitiveState:
    grid, eps = config.grid, config.amplitude
    recipe = config.initial
    rho1 = np.ones(grid.shape)
    rho2 = np.ones(grid.shape)
    u1 = np.zeros((grid.dim,) + grid.shape)
    u2 = np.zeros((grid.dim,) + grid.shape)

    if recipe.kind == "band_limited":
        rng = np.random.default_rng(recipe.seed)
        rho1 += eps * band_limited_random(grid, rng, recipe.kmax)
        rho2 += eps * band_limited_random(grid, rng, recipe.kmax)
        u1 += eps * band_limited_random(grid, rng, recipe.kmax, rank="vector")
        u2 += eps * band_limited_random(grid, rng, recipe.kmax, rank="vector")
    else:
        x = grid.coordinates()
        target = {"rho1": rho1, "rho2": rho2, "u1": u1, "u2": u2}
        for mode in recipe.modes:
            m = np.asarray(mode.wavevector, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
            wave = eps * mode.amplitude * np.cos(2.0 * np.pi / grid.L * np.sum(m * x, axis=0) + mode.phase)
            if mode.field.startswith("rho"):
                target[mode.field] += wave
            else:
                target[mode.field][mode.component] += wave

    state = PrimitiveState.from_physical(grid, rho1, u1, rho2, u2)
    if config.dealias:
        state = state.masked(grid.dealias_mask())
    # density means exactly 1: round-off here would break Poisson solvability
    zero = (0,) * grid.dim
    rho1_hat, rho2_hat = state.rho1.copy(), state.rho2.copy()
    rho1_hat[zero] = rho2_hat[zero] = 1.0
    return PrimitiveState(grid, rho1_hat, state.u1, rho2_hat, state.u2)


def initial_state(config: SimConfig) -> PrimitiveState:
    """
    Build the initial primitive state: background plus amplitude-scaled perturbation

    Density perturbations have zero mean, so rho1 - rho2 is Poisson-solvable.
    """
    state = _perturbed_state(config)
    check_admissible(state)
    return state


# ---------------------------------------------------------------------------
# Source terms
# ---------------------------------------------------------------------------

class SourceTerms(NamedTuple):
    """Fourier coefficients of (f1, f2, f3, f4)."""

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray


class PrimitiveSource(NamedTuple):
    """Fourier coefficients of the primitive-form source stage, ordered like PrimitiveState."""

    rho1: np.ndarray
    u1: np.ndarray
    rho2: np.ndarray
    u2: np.ndarray


class _Spectral:
    """Derivative and product helpers bound to one grid."""

    def __init__(self, grid: GridSpec, dealias: bool):
        self.grid = grid
        k = grid.wavevectors()
        nyquist = np.stack([grid.nyquist_mask(j) for j in range(grid.dim)])
        self.ik = np.where(nyquist, 0.0, 1j * k)
        self.mask = grid.dealias_mask() if dealias else np.ones(grid.shape, dtype=bool)

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return inverse_coeffs(coeffs, self.grid)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Physical values -> masked coefficients."""
        return forward_coeffs(values, self.grid) * self.mask

    def grad(self, coeffs: np.ndarray) -> np.ndarray:
        """Physical gradient of a scalar, shape (dim, ...)."""
        return self.to_physical(self.ik * coeffs)

    def jacobian(self, coeffs: np.ndarray) -> np.ndarray:
        """Physical J[i, j] = d_i w_j of a vector field."""
        return self.to_physical(self.ik[:, None] * coeffs[None, :])

    def div(self, coeffs: np.ndarray) -> np.ndarray:
        return np.sum(self.ik * coeffs, axis=0)


def _advect(a: np.ndarray, jac_b: np.ndarray) -> np.ndarray:
    """(a . grad) b with jac_b[i, j] = d_i b_j."""
    return np.einsum("i...,ij...->j...", a, jac_b)


def nonlinear_rhs(state: SumDiffState, law: PressureLaw, dealias: bool = True) -> SourceTerms:
    """
    Source terms of the sum/difference system

    Args:
        state: Admissible spectral state
        law: Pressure law supplying h
        dealias: Apply the 2/3-rule mask to every product

    Returns:
        SourceTerms with zero density-equation means

    Raises:
        InadmissibleState: if a density leaves the admissible box
    """
    check_admissible(state)
    sp = _Spectral(state.grid, dealias)
    n1, n2 = sp.to_physical(state.n1), sp.to_physical(state.n2)
    w1, w2 = sp.to_physical(state.w1), sp.to_physical(state.w2)
    grad_n1, grad_n2 = sp.grad(state.n1), sp.grad(state.n2)
    jac_w1, jac_w2 = sp.jacobian(state.w1), sp.jacobian(state.w2)
    h1 = law.h(0.5 * (n1 + n2) + 1.0)
    h2 = law.h(0.5 * (n1 - n2) + 1.0)

    f1 = -0.5 * sp.div(sp.project(n1 * w1 + n2 * w2))
    f3 = -0.5 * sp.div(sp.project(n1 * w2 + n2 * w1))
    f2 = -0.5 * sp.project(
        _advect(w1, jac_w1) + _advect(w2, jac_w2) + (h1 + h2) * grad_n1 + (h1 - h2) * grad_n2
    )
    f4 = -0.5 * sp.project(
        _advect(w1, jac_w2) + _advect(w2, jac_w1) + (h1 - h2) * grad_n1 + (h1 + h2) * grad_n2
    )
    zero = (0,) * state.grid.dim
    f1[zero] = 0.0
    f3[zero] = 0.0
    return SourceTerms(f1, f2, f3, f4)


def primitive_rhs(state: PrimitiveState, law: PressureLaw, dealias: bool = True) -> PrimitiveSource:
    """
    Source stage of the primitive form, including the potential coupling +-grad phi

    Args:
        state: Admissible primitive state
        law: Pressure law supplying h
        dealias: Apply the 2/3-rule mask to every product

    Returns:
        PrimitiveSource with zero density-equation means
    """
    check_admissible(state)
    grid = state.grid
    sp = _Spectral(grid, dealias)
    grad_phi = sp.grad(poisson_coeffs(state.rho1 - state.rho2, grid))
    zero = (0,) * grid.dim

    parts = []
    for rho_hat, u_hat, charge in ((state.rho1, state.u1, 1.0), (state.rho2, state.u2, -1.0)):
        rho, u = sp.to_physical(rho_hat), sp.to_physical(u_hat)
        grad_rho = sp.grad(rho_hat)
        g_rho = -sp.div(sp.project((rho - 1.0) * u))
        g_rho[zero] = 0.0
        g_u = sp.project(-_advect(u, sp.jacobian(u_hat)) - law.h(rho) * grad_rho + charge * grad_phi)
        parts.extend([g_rho, g_u])
    return PrimitiveSource(*parts)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

def linear_stage(state: State, t: float) -> State:
    """Exact linear evolution of either form."""
    if isinstance(state, SumDiffState):
        return apply_linear_semigroup(state, t)
    grid = state.grid
    rho1, u1 = propagate_pair(SymbolKind.EULER_DAMPED, grid, state.rho1, state.u1, t)
    rho2, u2 = propagate_pair(SymbolKind.EULER_DAMPED, grid, state.rho2, state.u2, t)
    return PrimitiveState(grid, rho1, u1, rho2, u2)


def source_terms(state: State, law: PressureLaw, dealias: bool = True) -> Tuple[np.ndarray, ...]:
    if isinstance(state, SumDiffState):
        return tuple(nonlinear_rhs(state, law, dealias))
    return tuple(primitive_rhs(state, law, dealias))


def max_speed(state: State) -> float:
    grid = state.grid
    if isinstance(state, SumDiffState):
        w1, w2 = inverse_coeffs(state.w1, grid), inverse_coeffs(state.w2, grid)
        speeds = [0.5 * (w1 + w2), 0.5 * (w1 - w2)]
    else:
        speeds = [inverse_coeffs(state.u1, grid), inverse_coeffs(state.u2, grid)]
    return float(max(np.max(np.sqrt(np.sum(u ** 2, axis=0))) for u in speeds))


def check_cfl(state: State, dt: float) -> None:
    limit = CFL_FACTOR * state.grid.dx / (1.0 + max_speed(state))
    if dt > limit:
        raise CFLViolation(f"dt={dt:.3g} exceeds CFL limit {limit:.3g}")


def step(
    state: State,
    dt: float,
    law: Optional[PressureLaw] = None,
    dealias: bool = True,
    linear_only: bool = False,
) -> State:
    """
    One Strang step: half linear step, explicit midpoint source step, half linear step

    Args:
        state: SumDiffState or PrimitiveState in Fourier form
        dt: Time step
        law: Pressure law (default gamma law)
        dealias: Keep the state on the 2/3-rule modes
        linear_only: Drop the source stage

    Returns:
        State of the same form after time dt

    Raises:
        CFLViolation, InadmissibleState
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    law = law or PressureLaw()
    check_cfl(state, dt)

    half = linear_stage(state, 0.5 * dt)
    if not linear_only:
        k1 = source_terms(half, law, dealias)
        mid = half.add_scaled(k1, 0.5 * dt)
        k2 = source_terms(mid, law, dealias)
        half = half.add_scaled(k2, dt)
        if dealias:
            half = half.masked(state.grid.dealias_mask())
    return linear_stage(half, 0.5 * dt)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def _source_norms(state: SumDiffState, law: PressureLaw, dealias: bool) -> dict:
    grid = state.grid
    f = nonlinear_rhs(state, law, dealias)
    out = {}
    for label, (scalar, vector) in (("f12", (f.f1, f.f2)), ("f34", (f.f3, f.f4))):
        mag = np.sqrt(inverse_coeffs(scalar, grid) ** 2 + np.sum(inverse_coeffs(vector, grid) ** 2, axis=0))
        out[f"{label}_L1"] = float(np.sum(mag) * grid.cell_volume)
        out[f"{label}_L2"] = float(np.sqrt(np.sum(mag ** 2) * grid.cell_volume))
    return out


def snapshot_norms(state: SumDiffState, law: Optional[PressureLaw] = None, dealias: bool = True) -> dict:
    """||Lambda^k field||_2 for every field and k <= 3, plus source-term norms."""
    row = {
        f"{name}_D{k}": sobolev_seminorm(getattr(state, name), state.grid, k)
        for name in FIELDS
        for k in range(MAX_DERIVATIVE_ORDER + 1)
    }
    row.update(_source_norms(state, law or PressureLaw(), dealias))
    return row


@dataclass(frozen=True)
class Trajectory:
    """Snapshots in sum/difference form with their norm table (one row per snapshot)."""

    times: np.ndarray
    states: Tuple[SumDiffState, ...]
    norms: pd.DataFrame
    form: Form = "sumdiff"
    wall_time: float = 0.0

    def __post_init__(self):
        if len(self.times) != len(self.states) or len(self.times) != len(self.norms):
            raise ValueError("times, states and norm rows must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.norms.to_numpy(dtype=float))):
            raise ValueError("trajectory norm table has non-finite entries")

    @property
    def grid(self) -> GridSpec:
        return self.states[0].grid

    def frame(self) -> pd.DataFrame:
        return pd.concat([pd.DataFrame({"t": self.times}), self.norms.reset_index(drop=True)], axis=1)


def build_trajectory(
    times: List[float],
    states: List[SumDiffState],
    law: PressureLaw,
    dealias: bool,
    form: Form = "sumdiff",
    wall_time: float = 0.0,
) -> Trajectory:
    rows = [snapshot_norms(s, law, dealias) for s in states]
    return Trajectory(np.asarray(times, dtype=float), tuple(states), pd.DataFrame(rows), form, wall_time)


def simulate(config: SimConfig, initial: Optional[PrimitiveState] = None) -> Trajectory:
    """
    Advance the configured system to t_end, recording snapshots

    Args:
        config: Simulation configuration
        initial: Optional initial primitive state (defaults to initial_state(config))

    Returns:
        Trajectory with snapshots converted to sum/difference form

    Raises:
        SimulationError: wraps any step failure with the failing time
    """
    started = time.perf_counter()
    law, dealias = config.law, config.dealias
    state: State = initial if initial is not None else initial_state(config)
    if config.form == "sumdiff":
        state = to_sumdiff(state)

    n_steps, stride = config.n_steps, config.snapshot_stride
    dt = config.t_end / n_steps
    logger.info(
        f"Simulating {config.form} form on n={config.grid.n} dim={config.grid.dim}: "
        f"{n_steps} steps of dt={dt:.3g}, amplitude={config.amplitude:g}"
    )

    def as_sumdiff(s: State) -> SumDiffState:
        return s if isinstance(s, SumDiffState) else to_sumdiff(s)

    times, snapshots = [0.0], [as_sumdiff(state)]
    for i in range(1, n_steps + 1):
        t = i * dt
        try:
            state = step(state, dt, law, dealias)
        except SpectralLabError as e:
            logger.error(f"Step {i} failed at t={t:.6g}: {e}")
            raise SimulationError(t, e) from e
        if i % stride == 0 or i == n_steps:
            times.append(t)
            snapshots.append(as_sumdiff(state))
            logger.debug(f"Snapshot t={t:.4g}")

    wall = time.perf_counter() - started
    logger.info(f"Simulation finished: {len(snapshots)} snapshots in {wall:.2f}s")
    return build_trajectory(times, snapshots, law, dealias, config.form, wall)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

# column -> (weight exponent, norm columns joined in l2)
ENERGY_TERMS = {
    "n1_D0": (0.75, ("n1_D0",)),
    "n1_D1": (1.25, ("n1_D1",)),
    "w1_D0": (1.25, ("w1_D0",)),
    "w1_D1": (1.75, ("w1_D1",)),
    "diff_D0": (2.0, ("n2_D0", "w2_D0")),
    "diff_D1": (1.875, ("n2_D1", "w2_D1")),
    "all_D2": (1.25, tuple(f"{name}_D2" for name in FIELDS)),
    "all_D3": (0.0, tuple(f"{name}_D3" for name in FIELDS)),
}


@dataclass(frozen=True)
class EnergyFunctional:
    """Weighted terms per snapshot, their sum, and the running maximum M."""

    history: pd.DataFrame

    @property
    def values(self) -> np.ndarray:
        return self.history["M"].to_numpy()

    def at(self, t: float) -> float:
        """M at the last snapshot with time <= t."""
        rows = self.history[self.history["t"] <= t + 1e-12]
        if rows.empty:
            raise ValueError(f"no snapshot at or before t={t}")
        return float(rows["M"].iloc[-1])


def energy_M(trajectory: Trajectory) -> EnergyFunctional:
    """
    Running supremum of the weighted derivative norms

    Args:
        trajectory: Trajectory whose norm table has n1/w1/n2/w2 columns for k <= 3

    Returns:
        EnergyFunctional with per-term columns, weighted sum and M

    Raises:
        MissingNormError: if a required norm column is absent
    """
    table = trajectory.norms
    needed = {col for _, cols in ENERGY_TERMS.values() for col in cols}
    missing = sorted(needed - set(table.columns))
    if missing:
        raise MissingNormError(f"trajectory lacks norm columns {missing}")

    s = pd.Series(trajectory.times, index=table.index)
    history = pd.DataFrame({"t": trajectory.times}, index=table.index)
    for term, (power, cols) in ENERGY_TERMS.items():
        joint = np.sqrt((table[list(cols)] ** 2).sum(axis=1))
        history[term] = (1.0 + s) ** power * joint
    history["weighted"] = history[list(ENERGY_TERMS)].sum(axis=1)
    history["M"] = history["weighted"].cummax()
    return EnergyFunctional(history.reset_index(drop=True))


def nirenberg_ratio(field: SpectralField) -> float:
    """
    ||u||_inf / (||Du||_2^{1/2} ||D^2 u||_2^{1/2})

    Args:
        field: Scalar or vector spectral field

    Returns:
        The ratio (invariant under positive scaling)
    """
    grid = field.grid
    first = sobolev_seminorm(field.coeffs, grid, 1)
    second = sobolev_seminorm(field.coeffs, grid, 2)
    if first == 0.0 or second == 0.0:
        raise ValueError("Nirenberg ratio is undefined for a constant field")
    values = transform_inverse(field)
    if field.rank == "vector":
        values = np.sqrt(np.sum(values ** 2, axis=0))
    return float(np.max(np.abs(values)) / np.sqrt(first * second))


def difference_block_norm(trajectory: Trajectory) -> np.ndarray:
    return np.sqrt(trajectory.norms["n2_D0"] ** 2 + trajectory.norms["w2_D0"] ** 2).to_numpy()


def difference_block_rate(trajectory: Trajectory) -> ExponentFit:
    """Exponential fit of ||(n2, w2)||_2 over the recorded snapshots."""
    return fit_exponent(trajectory.times, difference_block_norm(trajectory), "exponential")


def state_distance(a: SumDiffState, b: SumDiffState) -> Tuple[float, float]:
    """(||a - b||, ||b||) jointly over all fields."""
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    diff = sum(np.sum(np.abs(x - y) ** 2) for x, y in zip(a.arrays(), b.arrays()))
    ref = sum(np.sum(np.abs(y) ** 2) for y in b.arrays())
    volume = a.grid.volume
    return float(np.sqrt(volume * diff)), float(np.sqrt(volume * ref))


def snapshot_deviations(a: Trajectory, b: Trajectory) -> np.ndarray:
    """
    Relative deviation of each snapshot of a from the matching snapshot of b

    Both trajectories must share snapshot times; snapshots where b vanishes
    contribute the absolute deviation.
    """
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0.0, atol=1e-9):
        raise ValueError("trajectories have different snapshot times")
    out = []
    for sa, sb in zip(a.states, b.states):
        dev, ref = state_distance(sa, sb)
        out.append(dev / ref if ref > 0.0 else dev)
    return np.asarray(out)


def compare_trajectories(a: Trajectory, b: Trajectory) -> float:
    """Max relative snapshot deviation of a from b."""
    return float(np.max(snapshot_deviations(a, b)))
