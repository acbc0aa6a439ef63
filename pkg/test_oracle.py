"""
Tests for the brute-force references: RK4 propagators, finite-difference sources,
grid transfer and the refined reference run.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from utils.errors import GridMismatch, ResourceGuardExceeded
from utils.nonlinear_solver import SimConfig, nonlinear_rhs, simulate, snapshot_deviations
from utils.oracle import (
    OdeOracleConfig,
    fd_check_rhs,
    ode_propagator,
    prolong,
    reference_config,
    reference_simulate,
    restrict,
)
from utils.propagators import SymbolKind, propagator
from utils.spectral_core import GridSpec, band_limited_random, forward_coeffs, inverse_coeffs
from utils.state_model import PressureLaw, SumDiffState

EULER = SymbolKind.EULER_DAMPED
EP = SymbolKind.EULER_POISSON_DAMPED


class TestOdePropagator:
    @pytest.mark.parametrize("kind", [EULER, EP])
    def test_identity_at_time_zero(self, kind):
        assert_allclose(ode_propagator(kind, 0.8, 0.0), np.eye(2), atol=0.0)

    def test_poisson_block_determinant(self):
        """RK4 keeps det = e^{-t} to 1e-12."""
        assert np.linalg.det(ode_propagator(EP, 1.0, 1.0)) == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_halving_the_step(self):
        coarse = ode_propagator(EULER, 0.7, 3.0, OdeOracleConfig(dt=2e-3))
        fine = ode_propagator(EULER, 0.7, 3.0, OdeOracleConfig(dt=1e-3))
        assert np.max(np.abs(coarse - fine)) <= 1e-10

    def test_array_input(self):
        radii = np.array([0.1, 1.0, 10.0])
        stack = ode_propagator(EP, radii, 0.5)
        assert stack.shape == (3, 2, 2)
        for r, matrix in zip(radii, stack):
            assert_allclose(matrix, propagator(EP, r, 0.5).matrix, atol=1e-10)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError, match="non-negative"):
            ode_propagator(EULER, 1.0, -1.0)


class TestGridTransfer:
    def test_prolong_then_restrict(self):
        """Zero padding followed by truncation is the identity."""
        coarse = GridSpec(n=16, dim=3)
        fine = GridSpec(n=32, dim=3)
        f = band_limited_random(coarse, np.random.default_rng(8), 3)
        coeffs = forward_coeffs(f, coarse)
        assert_allclose(restrict(prolong(coeffs, coarse, fine), fine, coarse), coeffs, atol=1e-15)

    def test_prolongation_interpolates(self):
        coarse = GridSpec(n=16, dim=1)
        fine = GridSpec(n=64, dim=1)
        f = np.sin(3 * coarse.coordinates()[0])
        up = inverse_coeffs(prolong(forward_coeffs(f, coarse), coarse, fine), fine)
        assert_allclose(up, np.sin(3 * fine.coordinates()[0]), atol=1e-14)

    def test_rejects_mismatched_boxes(self):
        with pytest.raises(GridMismatch, match="prolongation"):
            prolong(np.zeros(16, dtype=complex), GridSpec(n=16, dim=1), GridSpec(n=32, L=1.0, dim=1))
        with pytest.raises(GridMismatch, match="restriction"):
            restrict(np.zeros(16, dtype=complex), GridSpec(n=16, dim=1), GridSpec(n=32, dim=1))


class TestFiniteDifferenceRhs:
    @pytest.fixture
    def grid(self):
        return GridSpec(n=16, dim=1)

    def single_mode(self, grid, eps=0.05):
        x = grid.coordinates()[0]
        n2 = eps * np.cos(x)
        w2 = eps * np.sin(x)[None]
        return SumDiffState.from_physical(grid, np.zeros(grid.shape), np.zeros((1,) + grid.shape), n2, w2)

    def error(self, state, h):
        law = PressureLaw()
        spectral = nonlinear_rhs(state, law, dealias=False)
        fd = fd_check_rhs(state, h, law)
        worst, scale = 0.0, 0.0
        for coeffs, values in zip(spectral, fd):
            exact = inverse_coeffs(coeffs, state.grid)
            worst = max(worst, np.max(np.abs(values - exact)))
            scale = max(scale, np.max(np.abs(exact)))
        return worst / scale

    def test_zero_state(self, grid):
        for values in fd_check_rhs(SumDiffState.zeros(grid), grid.L / 64):
            assert np.all(values == 0.0)

    def test_single_mode(self, grid):
        assert self.error(self.single_mode(grid), grid.L / 1024) <= 1e-4

    def test_second_order(self, grid):
        """Halving the spacing cuts the central-difference error by 4."""
        state = self.single_mode(grid)
        ratio = self.error(state, grid.L / 256) / self.error(state, grid.L / 512)
        assert ratio == pytest.approx(4.0, abs=0.3)

    def test_rejects_incompatible_spacing(self, grid):
        with pytest.raises(ValueError, match="spacing"):
            fd_check_rhs(SumDiffState.zeros(grid), grid.L / 100)


class TestReferenceRun:
    def config(self, amplitude=1e-3, **extra):
        return SimConfig(grid=GridSpec(n=16, dim=1), amplitude=amplitude, dt=0.01, t_end=0.5, snapshot_every=0.1, **extra)

    def test_zero_amplitude(self):
        ref = reference_simulate(self.config(amplitude=0.0))
        assert np.max(ref.norms.to_numpy()) < 1e-13

    def test_refined_config(self):
        """Twice the points, a tenth of the step, snapshots at the same times."""
        ref = reference_config(self.config())
        assert ref.grid.n == 32
        assert ref.dt == pytest.approx(1e-3)
        assert ref.snapshot_stride == 100

    def test_main_run_matches_reference(self):
        config = self.config()
        ref = reference_simulate(config)
        main = simulate(config)
        assert ref.grid == config.grid
        assert np.max(snapshot_deviations(main, ref)) <= 1e-5

    def test_resource_guard(self):
        big = SimConfig(grid=GridSpec(n=64, dim=3), amplitude=1e-3, dt=0.01, t_end=0.1)
        with pytest.raises(ResourceGuardExceeded, match="points"):
            reference_config(big)
        long = SimConfig(grid=GridSpec(n=16, dim=1), amplitude=1e-3, dt=1e-3, t_end=50.0)
        with pytest.raises(ResourceGuardExceeded, match="steps"):
            reference_config(long)

    def test_error_against_reference_is_second_order(self):
        """Deviation from the refined run scales like dt^2."""
        base = SimConfig(
            grid=GridSpec(n=32, dim=1), amplitude=0.05, dt=0.04, t_end=1.0, snapshot_every=1.0,
            initial={"kind": "band_limited", "seed": 5, "kmax": 1},
        )
        steps = np.array([0.04, 0.02, 0.01])
        errors = []
        for dt in steps:
            config = base.model_copy(update={"dt": float(dt)})
            errors.append(np.max(snapshot_deviations(simulate(config), reference_simulate(config))))
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.3)
