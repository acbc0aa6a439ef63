"""
Linear decay laboratory
Whole-space L2 norms of linearly propagated radial data by adaptive radial
quadrature, exponent fits, and predicted-vs-fitted decay reports.

Fourier transforms here are unitary, f_hat(xi) = (2 pi)^{-3/2} int f e^{-i x.xi} dx,
so for radial data

    ||D^k f||^2 = 4 pi int_0^inf r^{2k+2} |f_hat(r)|^2 dr.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, special

from config.settings import (
    ALGEBRAIC_FIT_TOL,
    ALGEBRAIC_SAMPLES,
    ALGEBRAIC_WINDOW,
    DEFAULT_SPLIT_RADIUS,
    EXPONENTIAL_FIT_TOL,
    EXPONENTIAL_SAMPLES,
    EXPONENTIAL_WINDOW,
    GAUSSIAN_AMPLITUDE,
    GAUSSIAN_SIGMA,
    PROFILE_TAIL_TOL,
    QUADRATURE_LIMIT,
    QUADRATURE_TOL,
)
from utils.errors import QuadratureError
from utils.propagators import SymbolKind, green_entries, spectral_gap

logger = logging.getLogger(__name__)

Component = Literal["n", "v", "w", "block"]
FitMode = Literal["algebraic", "exponential"]

# Panel breakpoints, in units of the diffusive scale 1/sqrt(1 + t)
_PANEL_SCALES = (0.5, 1.0, 2.0, 4.0, 8.0)
# Bound on |G row . (a, b)|^2 / (|a|^2 + |b|^2) beyond the profile cut-off
_TAIL_ENTRY_BOUND = 4.0


@dataclass(frozen=True)
class RadialProfile:
    """
    Unitary Fourier transform of a radially symmetric datum, as a function of r = |xi|

    Attributes:
        evaluator: r -> amplitude
        mass: Integral of the physical datum
        decay_bound: r0 beyond which |evaluator| < PROFILE_TAIL_TOL
        sq_norm: ||datum||_2^2 when known in closed form
        tail: (R, p) -> int_R^inf r^p |evaluator(r)|^2 dr, or None
    """

    evaluator: Callable[[float], complex]
    mass: float
    decay_bound: float
    sq_norm: Optional[float] = None
    tail: Optional[Callable[[float, float], float]] = None

    def __post_init__(self):
        if not self.decay_bound > 0.0:
            raise ValueError("decay_bound must be positive")

    def __call__(self, r: float) -> complex:
        return self.evaluator(r)

    @classmethod
    def gaussian(cls, amplitude: float = GAUSSIAN_AMPLITUDE, sigma: float = GAUSSIAN_SIGMA) -> "RadialProfile":
        """Transform of a * exp(-|x|^2 / (2 sigma^2)), namely a sigma^3 exp(-sigma^2 r^2 / 2)."""
        if sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        peak = amplitude * sigma ** 3

        def evaluator(r: float) -> float:
            return peak * np.exp(-0.5 * (sigma * r) ** 2)

        def tail(R: float, p: float) -> float:
            s = 0.5 * (p + 1.0)
            return float(0.5 * peak ** 2 * sigma ** (-(p + 1.0)) * special.gamma(s) * special.gammaincc(s, (sigma * R) ** 2))

        ratio = abs(peak) / PROFILE_TAIL_TOL
        r0 = np.sqrt(2.0 * np.log(ratio)) / sigma if ratio > 1.0 else 1.0
        return cls(
            evaluator=evaluator,
            mass=float(amplitude * (2.0 * np.pi * sigma ** 2) ** 1.5),
            decay_bound=float(r0),
            sq_norm=float(amplitude ** 2 * np.pi ** 1.5 * sigma ** 3),
            tail=tail,
        )

    @classmethod
    def zero(cls) -> "RadialProfile":
        return cls(evaluator=lambda r: 0.0, mass=0.0, decay_bound=1.0, sq_norm=0.0, tail=lambda R, p: 0.0)


def algebraic_times(window: Tuple[float, float] = ALGEBRAIC_WINDOW, samples: int = ALGEBRAIC_SAMPLES) -> Tuple[float, ...]:
    return tuple(float(t) for t in np.geomspace(window[0], window[1], samples))


def exponential_times(window: Tuple[float, float] = EXPONENTIAL_WINDOW, samples: int = EXPONENTIAL_SAMPLES) -> Tuple[float, ...]:
    return tuple(float(t) for t in np.linspace(window[0], window[1], samples))


@dataclass(frozen=True)
class DecayExperiment:
    kind: SymbolKind
    n0: RadialProfile
    v0: RadialProfile
    k: int = 0
    times: Tuple[float, ...] = field(default_factory=algebraic_times)
    tol: float = QUADRATURE_TOL

    def __post_init__(self):
        object.__setattr__(self, "kind", SymbolKind(self.kind))
        if self.k not in (0, 1, 2, 3):
            raise ValueError(f"derivative order must be 0..3, got {self.k}")
        times = np.asarray(self.times, dtype=float)
        if times.size == 0 or np.any(times <= 0.0) or np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be positive and strictly increasing")
        if not 0.0 < self.tol <= 1e-4:
            raise ValueError(f"quadrature tolerance must lie in (0, 1e-4], got {self.tol}")

    @classmethod
    def gaussian(
        cls,
        kind: SymbolKind,
        k: int = 0,
        amplitude: float = GAUSSIAN_AMPLITUDE,
        sigma: float = GAUSSIAN_SIGMA,
        times: Optional[Sequence[float]] = None,
        tol: float = QUADRATURE_TOL,
    ) -> "DecayExperiment":
        """Gaussian density datum, zero velocity; default times follow the fit mode of the block."""
        kind = SymbolKind(kind)
        if times is None:
            times = algebraic_times() if kind is SymbolKind.EULER_DAMPED else exponential_times()
        return cls(kind, RadialProfile.gaussian(amplitude, sigma), RadialProfile.zero(), k, tuple(times), tol)

    @property
    def cutoff(self) -> float:
        return max(self.n0.decay_bound, self.v0.decay_bound)


@dataclass(frozen=True)
class ExponentFit:
    mode: FitMode
    slope: float
    intercept: float
    residual: float
    window: Tuple[float, float]

    @property
    def rate(self) -> float:
        return -self.slope


def _integrand(experiment: DecayExperiment, component: Component, t: float) -> Callable[[float], float]:
    power = 2 * experiment.k + 2
    kind = experiment.kind

    def integrand(r: float) -> float:
        if r == 0.0:
            return 0.0
        g11, g12, g21, g22 = green_entries(kind, r, t)
        a, b = experiment.n0(r), experiment.v0(r)
        n_part = abs(g11 * a + g12 * b) ** 2
        v_part = abs(g21 * a + g22 * b) ** 2
        value = {"n": n_part, "v": v_part, "block": n_part + v_part}[component]
        return float(r ** power * value)

    return integrand


def _panels(experiment: DecayExperiment, t: float) -> List[float]:
    r0 = experiment.cutoff
    scale = 1.0 / np.sqrt(1.0 + t)
    points = {0.0, 0.5, r0}
    points.update(s * scale for s in _PANEL_SCALES)
    return sorted(p for p in points if p <= r0)


def _tail_bound(experiment: DecayExperiment, component: Component) -> float:
    r0, p = experiment.cutoff, 2 * experiment.k + 2
    tails = [prof.tail(r0, p) if prof.tail is not None else 0.0 for prof in (experiment.n0, experiment.v0)]
    factor = 2.0 if component == "block" else 1.0
    return 4.0 * np.pi * _TAIL_ENTRY_BOUND * factor * sum(tails)


def l2_norm_at(experiment: DecayExperiment, component: Component, t: float) -> float:
    """
    L2 norm of one component of the linearly propagated solution at time t

    Args:
        experiment: Decay experiment (block kind, radial data, derivative order k)
        component: "n", "v" ("w" is accepted as an alias: the datum has no solenoidal
                   part, so ||w|| = ||v||) or "block" for ||(n, v)|| jointly
        t: Time, t >= 0

    Returns:
        ||D^k component(t)||_2 computed by panelled adaptive quadrature

    Raises:
        QuadratureError: if the estimated error exceeds tol * value
    """
    if component == "w":
        component = "v"
    if component not in ("n", "v", "block"):
        raise ValueError(f"unknown component {component!r}")
    if t < 0.0:
        raise ValueError(f"time must be non-negative, got {t}")

    integrand = _integrand(experiment, component, t)
    edges = _panels(experiment, t)
    panels = list(zip(edges[:-1], edges[1:]))

    # coarse pass fixes the absolute scale so negligible panels do not stall
    scale = sum(
        integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-4, limit=50, full_output=1)[0] for a, b in panels
    )
    epsabs = experiment.tol * abs(scale) / (4.0 * len(panels))

    value, error = 0.0, 0.0
    for a, b in panels:
        result = integrate.quad(
            integrand, a, b,
            epsabs=epsabs, epsrel=experiment.tol / 4.0,
            limit=QUADRATURE_LIMIT, full_output=1,
        )
        value += result[0]
        error += result[1]
    error += _tail_bound(experiment, component)
    value *= 4.0 * np.pi
    error *= 4.0 * np.pi

    if value <= 0.0:
        logger.debug(f"Norm of {component} at t={t:g} vanished (error bound {error:.2e})")
        return 0.0
    achieved = error / value
    if achieved > experiment.tol:
        raise QuadratureError(f"quadrature for {component} at t={t:g} did not converge", achieved)
    if achieved > 0.5 * experiment.tol:
        logger.warning(f"Quadrature for {component} at t={t:g} close to tolerance: {achieved:.2e}")
    return float(np.sqrt(value))


def norm_series(experiment: DecayExperiment, component: Component) -> pd.DataFrame:
    """Norms over experiment.times as a frame with columns t, norm, component, k."""
    norms = [l2_norm_at(experiment, component, t) for t in experiment.times]
    return pd.DataFrame({
        "t": list(experiment.times),
        "norm": norms,
        "component": component,
        "k": experiment.k,
    })


def fit_exponent(times: Sequence[float], norms: Sequence[float], mode: FitMode) -> ExponentFit:
    """
    Least-squares decay exponent

    Args:
        times: Sample times
        norms: Positive norm values
        mode: "algebraic" fits log norm against log(1 + t); "exponential" against t

    Returns:
        ExponentFit with slope, intercept and RMS residual in log space
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape or t.size < 5:
        raise ValueError("fit needs at least 5 (t, norm) pairs")
    if np.any(~np.isfinite(y)) or np.any(y <= 0.0):
        raise ValueError("fit needs strictly positive norm values")
    if mode == "algebraic":
        x = np.log1p(t)
    elif mode == "exponential":
        x = t
    else:
        raise ValueError(f"unknown fit mode {mode!r}")

    log_y = np.log(y)
    slope, intercept = np.polyfit(x, log_y, 1)
    residual = np.sqrt(np.mean((log_y - (slope * x + intercept)) ** 2))
    return ExponentFit(mode, float(slope), float(intercept), float(residual), (float(t.min()), float(t.max())))


@dataclass(frozen=True)
class LemmaReport:
    """Fitted vs predicted exponents plus the norm series behind them."""

    kind: SymbolKind
    k: int
    fits: pd.DataFrame
    series: pd.DataFrame
    eta: float
    gap: float

    @property
    def passed(self) -> bool:
        return bool(self.fits["passed"].all())

    def summary(self) -> Dict:
        return {
            "kind": self.kind.value,
            "k": self.k,
            "eta": self.eta,
            "spectral_gap": self.gap,
            "passed": self.passed,
            "fits": self.fits.to_dict(orient="records"),
        }


def predicted_exponents(kind: SymbolKind, k: int) -> Dict[str, Tuple[FitMode, float]]:
    """component -> (fit mode, predicted slope)."""
    if SymbolKind(kind) is SymbolKind.EULER_DAMPED:
        return {
            "n": ("algebraic", -(0.75 + 0.5 * k)),
            "w": ("algebraic", -(1.25 + 0.5 * k)),
        }
    return {"block": ("exponential", -0.5)}


def lemma_report(
    kind: SymbolKind,
    k: int,
    amplitude: float = GAUSSIAN_AMPLITUDE,
    sigma: float = GAUSSIAN_SIGMA,
    tol: float = QUADRATURE_TOL,
    eta: float = DEFAULT_SPLIT_RADIUS,
) -> LemmaReport:
    """
    Fit decay exponents of Gaussian data and compare with the predicted rates

    Args:
        kind: Symbol kind
        k: Derivative order, 0 or 1
        amplitude, sigma: Gaussian datum parameters
        tol: Quadrature tolerance
        eta: Split radius for the reported spectral gap

    Returns:
        LemmaReport; damped Euler predicts -(3/4 + k/2) for n and -(5/4 + k/2) for w,
        the Poisson-coupled block an exponential rate 1/2
    """
    if k not in (0, 1):
        raise ValueError(f"reports cover k in {{0, 1}}, got {k}")
    kind = SymbolKind(kind)
    experiment = DecayExperiment.gaussian(kind, k, amplitude, sigma, tol=tol)

    rows, frames = [], []
    for component, (mode, predicted) in predicted_exponents(kind, k).items():
        series = norm_series(experiment, component)
        frames.append(series)
        fit = fit_exponent(series["t"], series["norm"], mode)
        tolerance = ALGEBRAIC_FIT_TOL if mode == "algebraic" else EXPONENTIAL_FIT_TOL
        passed = abs(fit.slope - predicted) <= tolerance
        if not passed:
            logger.warning(
                f"{kind.value} k={k} {component}: fitted slope {fit.slope:.4f} misses {predicted:.4f} by more than {tolerance}"
            )
        rows.append({
            "kind": kind.value,
            "component": component,
            "k": k,
            "mode": mode,
            "predicted": predicted,
            "fitted": fit.slope,
            "residual": fit.residual,
            "t_lo": fit.window[0],
            "t_hi": fit.window[1],
            "tolerance": tolerance,
            "passed": bool(passed),
        })

    fits = pd.DataFrame(rows)
    logger.info(f"Decay report {kind.value} k={k}: {int(fits['passed'].sum())}/{len(fits)} fits within tolerance")
    return LemmaReport(kind, k, fits, pd.concat(frames, ignore_index=True), eta, spectral_gap(kind, eta))
