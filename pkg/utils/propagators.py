"""
Closed-form linear propagators
Eigenvalues and 2x2 Green matrices of the damped Euler and damped
Euler-Poisson blocks, their application to spectral states, and the
high-frequency spectral gap.

In the variables (n_hat, v_hat) with r = |k| both blocks read d/dt X = M X with

    damped Euler:          M = [[0, -r], [r,       -1]]
    damped Euler-Poisson:  M = [[0, -r], [r + 2/r, -1]]

Both have trace -1, so with mu = -1/2 and delta^2 = 1/4 - det M,

    exp(tM) = C(t) I + S(t) (M - mu I),
    C = e^{-t/2} cosh(delta t),   S = e^{-t/2} sinh(delta t) / delta,

which turns into cos/sin when delta is imaginary and into a Taylor series
near the double root.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Tuple, Union

import numpy as np

from config.settings import DOUBLE_ROOT_SWITCH, POISSON_MEAN_TOL
from utils.errors import NonZeroMean
from utils.hodge import assemble_velocity, compressible_amplitude, reduced_kmag, solenoidal_part
from utils.spectral_core import GridSpec
from utils.state_model import SumDiffState

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class SymbolKind(str, Enum):
    EULER_DAMPED = "euler"
    EULER_POISSON_DAMPED = "euler-poisson"


class EigenPair(NamedTuple):
    plus: complex
    minus: complex


@dataclass(frozen=True)
class PropagatorSample:
    kind: SymbolKind
    r: float
    t: float
    matrix: np.ndarray


def _coupling(kind: SymbolKind, r: np.ndarray, poisson_sign: float) -> Tuple[np.ndarray, np.ndarray]:
    """(det M, lower-left entry q) of the symbol."""
    if SymbolKind(kind) is SymbolKind.EULER_DAMPED:
        return r ** 2, r
    return r ** 2 + 2.0 * poisson_sign, r + 2.0 * poisson_sign / r


def _check_radius(r: float) -> float:
    r = float(r)
    if not np.isfinite(r) or r <= 0.0:
        raise ValueError(f"frequency magnitude must be positive, got {r}")
    return r


def symbol(kind: SymbolKind, r: float, poisson_sign: float = 1.0) -> np.ndarray:
    """Exact 2x2 symbol at |k| = r."""
    r = _check_radius(r)
    _, q = _coupling(kind, np.float64(r), poisson_sign)
    return np.array([[0.0, -r], [float(q), -1.0]])


def eigenvalues(kind: SymbolKind, r: float, poisson_sign: float = 1.0) -> EigenPair:
    """
    Roots of lambda^2 + lambda + det M = 0

    Args:
        kind: Symbol kind
        r: Frequency magnitude, r > 0
        poisson_sign: Sign of the Poisson coupling (+1 physical)

    Returns:
        EigenPair ordered so that Re plus >= Re minus, ties broken by Im plus >= 0
    """
    r = _check_radius(r)
    c, _ = _coupling(kind, np.float64(r), poisson_sign)
    disc = 1.0 - 4.0 * float(c)
    delta = np.sqrt(complex(disc)) / 2.0
    minus = -0.5 - delta
    # c / minus avoids cancellation in -1/2 + delta for small r
    plus = c / minus if disc >= 0.0 else -0.5 + delta
    return EigenPair(complex(plus), complex(minus))


def green_entries(
    kind: SymbolKind,
    r: ArrayLike,
    t: ArrayLike,
    poisson_sign: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Entries (G11, G12, G21, G22) of exp(t M(r)), vectorized over broadcast r and t

    The Taylor branch is taken when |delta * t| < DOUBLE_ROOT_SWITCH (1e-3), i.e.
    |lambda_+ - lambda_-| * t < 2e-3. The switch scales with t because cosh(delta t)
    and sinh(delta t) / delta depend on delta only through delta * t; the
    series kept through (delta t)^4 then has relative error below (delta t)^6 / 720.

    Args:
        kind: Symbol kind
        r: Positive frequency magnitudes
        t: Non-negative times

    Returns:
        Four real arrays of the broadcast shape
    """
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    shape = r.shape
    r, t = np.atleast_1d(r).ravel(), np.atleast_1d(t).ravel()
    c, q = _coupling(kind, r, poisson_sign)
    disc = 1.0 - 4.0 * c
    z2 = disc * t ** 2 / 4.0
    damp = np.exp(-0.5 * t)

    near = np.abs(z2) < DOUBLE_ROOT_SWITCH ** 2
    real = ~near & (disc > 0.0)
    osc = ~near & ~real

    C = np.empty(r.shape)
    S = np.empty(r.shape)

    C[near] = damp[near] * (1.0 + z2[near] / 2.0 + z2[near] ** 2 / 24.0)
    S[near] = damp[near] * t[near] * (1.0 + z2[near] / 6.0 + z2[near] ** 2 / 120.0)

    delta = np.sqrt(disc[real]) / 2.0
    lam_minus = -0.5 - delta
    lam_plus = c[real] / lam_minus
    e_plus = np.exp(lam_plus * t[real])
    e_minus = np.exp(lam_minus * t[real])
    C[real] = 0.5 * (e_plus + e_minus)
    S[real] = (e_plus - e_minus) / (2.0 * delta)

    omega = np.sqrt(-disc[osc]) / 2.0
    C[osc] = damp[osc] * np.cos(omega * t[osc])
    S[osc] = damp[osc] * np.sin(omega * t[osc]) / omega

    entries = (C + 0.5 * S, -r * S, q * S, C - 0.5 * S)
    return tuple(e.reshape(shape) for e in entries)


def propagator(kind: SymbolKind, r: float, t: float, poisson_sign: float = 1.0) -> PropagatorSample:
    """
    Green matrix exp(t M(r)) of one block

    Args:
        kind: Symbol kind
        r: Frequency magnitude, r > 0
        t: Time, t >= 0

    Returns:
        PropagatorSample with the 2x2 matrix
    """
    r = _check_radius(r)
    if not np.isfinite(t) or t < 0.0:
        raise ValueError(f"time must be non-negative, got {t}")
    g11, g12, g21, g22 = green_entries(kind, r, t, poisson_sign)
    matrix = np.array([[g11, g12], [g21, g22]], dtype=float)
    return PropagatorSample(SymbolKind(kind), r, float(t), matrix)


def propagator_matrices(kind: SymbolKind, r: np.ndarray, t: float, poisson_sign: float = 1.0) -> np.ndarray:
    """Stack of Green matrices, shape (len(r), 2, 2)."""
    g11, g12, g21, g22 = green_entries(kind, r, t, poisson_sign)
    return np.stack([np.stack([g11, g12], axis=-1), np.stack([g21, g22], axis=-1)], axis=-2)


def low_frequency_asymptotics(r: ArrayLike, t: ArrayLike) -> np.ndarray:
    """
    Leading low-frequency form of the damped Euler Green matrix

    Returns:
        Array of shape (2, 2, ...) with entries
        e^{-r^2 t} - r^2 e^{-t},  -r (e^{-r^2 t} - e^{-t}),
        r (e^{-r^2 t} - e^{-t}),  (1 - r^2) e^{-t}
    """
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    slow = np.exp(-r ** 2 * t)
    fast = np.exp(-t)
    mixed = r * (slow - fast)
    return np.array([[slow - r ** 2 * fast, -mixed], [mixed, (1.0 - r ** 2) * fast]])


def propagate_pair(
    kind: SymbolKind,
    grid: GridSpec,
    n_hat: np.ndarray,
    w_hat: np.ndarray,
    t: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply one linear block to a density/velocity pair in Fourier form

    The compressible amplitude and density evolve by the Green matrix, the
    solenoidal part and the velocity mean by e^{-t}; the density mean is kept.
    Frequencies use the Nyquist-reduced |k| of the Hodge split, so modes with
    no remaining direction behave like the mean.
    """
    kmag = reduced_kmag(grid)
    nonzero = kmag > 0
    r = np.where(nonzero, kmag, 1.0)
    g11, g12, g21, g22 = green_entries(kind, r, t)

    v_hat = compressible_amplitude(w_hat, grid)
    d_hat = solenoidal_part(w_hat, grid)
    mean = w_hat[(slice(None),) + (0,) * grid.dim]

    n_new = np.where(nonzero, g11 * n_hat + g12 * v_hat, n_hat)
    v_new = np.where(nonzero, g21 * n_hat + g22 * v_hat, 0.0)
    decay = np.exp(-t)
    return n_new, assemble_velocity(v_new, decay * d_hat, decay * mean, grid)


def apply_linear_semigroup(state: SumDiffState, t: float) -> SumDiffState:
    """
    Exact linear evolution of a sum/difference state over time t

    Args:
        state: Spectral state with zero-mean n2
        t: Time, t >= 0

    Returns:
        New SumDiffState: damped Euler block on (n1, w1), damped Euler-Poisson block on (n2, w2)

    Raises:
        NonZeroMean: if the mean of n2 exceeds the Poisson tolerance
    """
    if t < 0.0:
        raise ValueError(f"time must be non-negative, got {t}")
    grid = state.grid
    zero_mode = state.n2[(0,) * grid.dim]
    if abs(zero_mode) > POISSON_MEAN_TOL:
        raise NonZeroMean(zero_mode, POISSON_MEAN_TOL)
    n1, w1 = propagate_pair(SymbolKind.EULER_DAMPED, grid, state.n1, state.w1, t)
    n2, w2 = propagate_pair(SymbolKind.EULER_POISSON_DAMPED, grid, state.n2, state.w2, t)
    return SumDiffState(grid, n1, w1, n2, w2)


def spectral_gap(kind: SymbolKind, eta: float) -> float:
    """
    Infimum over r >= eta of -Re lambda_plus(r)

    Args:
        kind: Symbol kind
        eta: Split radius, eta > 0

    Returns:
        (1 - sqrt(1 - 4 eta^2))/2 below eta = 1/2 and 1/2 above for damped Euler;
        1/2 for every eta in the Poisson-coupled block
    """
    if not np.isfinite(eta) or eta <= 0.0:
        raise ValueError(f"split radius must be positive, got {eta}")
    if SymbolKind(kind) is SymbolKind.EULER_POISSON_DAMPED or eta >= 0.5:
        return 0.5
    return float((1.0 - np.sqrt(1.0 - 4.0 * eta ** 2)) / 2.0)
