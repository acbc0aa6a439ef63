"""
Tests for eigenvalues, closed-form Green matrices, the linear semigroup and spectral gaps.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from utils.errors import NonZeroMean
from utils.oracle import ode_propagator
from utils.propagators import (
    SymbolKind,
    apply_linear_semigroup,
    eigenvalues,
    green_entries,
    low_frequency_asymptotics,
    propagator,
    propagator_matrices,
    spectral_gap,
    symbol,
)
from utils.spectral_core import GridSpec, band_limited_random, spectral_l2
from utils.state_model import SumDiffState

EULER = SymbolKind.EULER_DAMPED
EP = SymbolKind.EULER_POISSON_DAMPED
KINDS = [EULER, EP]


def random_state(grid, seed, eps=0.1):
    rng = np.random.default_rng(seed)
    return SumDiffState.from_physical(
        grid,
        eps * band_limited_random(grid, rng, 3),
        eps * band_limited_random(grid, rng, 3, rank="vector") + 0.05,
        eps * band_limited_random(grid, rng, 3),
        eps * band_limited_random(grid, rng, 3, rank="vector"),
    )


class TestEigenvalues:
    @pytest.mark.parametrize("kind", KINDS)
    @pytest.mark.parametrize("r", [1e-3, 0.1, 0.4999, 0.5, 0.7, 1.0, 10.0, 100.0])
    def test_trace_and_determinant(self, kind, r):
        """lambda_+ + lambda_- = -1 and lambda_+ lambda_- = det of the symbol."""
        pair = eigenvalues(kind, r)
        det = r ** 2 if kind is EULER else r ** 2 + 2.0
        assert abs(pair.plus + pair.minus + 1.0) <= 1e-14 * max(1.0, abs(pair.plus))
        assert abs(pair.plus * pair.minus - det) <= 1e-14 * max(1.0, det)
        assert pair.plus.real <= 0.0 and pair.minus.real <= pair.plus.real

    def test_small_r_limit(self):
        """lambda_+ ~ -r^2 as r -> 0."""
        pair = eigenvalues(EULER, 1e-8)
        assert pair.plus == pytest.approx(-1e-16, rel=1e-6)
        assert pair.minus == pytest.approx(-1.0)

    def test_double_root(self):
        pair = eigenvalues(EULER, 0.5)
        assert pair.plus == pytest.approx(-0.5)
        assert pair.minus == pytest.approx(-0.5)

    def test_poisson_block_at_unit_frequency(self):
        pair = eigenvalues(EP, 1.0)
        assert pair.plus == pytest.approx((-1 + 1j * np.sqrt(11)) / 2, abs=1e-14)
        assert pair.minus == pytest.approx((-1 - 1j * np.sqrt(11)) / 2, abs=1e-14)

    def test_poisson_block_real_part_is_minus_half(self):
        for r in np.geomspace(1e-3, 1e2, 20):
            pair = eigenvalues(EP, r)
            assert pair.plus.real == pytest.approx(-0.5, abs=1e-15)
            assert pair.plus.imag >= 0.0

    @pytest.mark.parametrize("r", [0.0, -1.0, np.nan])
    def test_rejects_nonpositive_r(self, r):
        with pytest.raises(ValueError, match="must be positive"):
            eigenvalues(EULER, r)

    def test_symbol_eigenvalues_match(self):
        for kind in KINDS:
            for r in (0.2, 0.9, 3.0):
                computed = sorted(np.linalg.eigvals(symbol(kind, r)), key=lambda z: (round(z.imag, 8), z.real))
                pair = eigenvalues(kind, r)
                expected = sorted([pair.plus, pair.minus], key=lambda z: (round(z.imag, 8), z.real))
                assert_allclose(computed, expected, atol=1e-12)


class TestPropagator:
    @pytest.mark.parametrize("kind", KINDS)
    def test_identity_at_time_zero(self, kind):
        assert_allclose(propagator(kind, 0.7, 0.0).matrix, np.eye(2), atol=0.0)

    def test_low_frequency_limit(self):
        """G tends to diag(1, e^{-t}) as r -> 0."""
        t = 1.3
        assert_allclose(propagator(EULER, 1e-9, t).matrix, np.diag([1.0, np.exp(-t)]), atol=1e-8)

    def test_matches_ode_oracle(self):
        closed = propagator(EULER, 0.3, 2.0).matrix
        reference = ode_propagator(EULER, 0.3, 2.0)
        assert np.max(np.abs(closed - reference)) / np.max(np.abs(reference)) <= 1e-8

    @pytest.mark.parametrize("kind", KINDS)
    def test_determinant(self, kind):
        """det G(t) = e^{-t} across radii and times."""
        r = np.geomspace(1e-3, 1e2, 60)
        for t in (0.0, 0.1, 1.0, 3.0, 10.0):
            det = np.linalg.det(propagator_matrices(kind, r, t))
            assert np.max(np.abs(det - np.exp(-t))) <= 1e-10

    @pytest.mark.parametrize("kind", KINDS)
    def test_semigroup(self, kind):
        """G(s + t) = G(s) G(t) at random radii."""
        rng = np.random.default_rng(3)
        for _ in range(40):
            r = np.exp(rng.uniform(np.log(1e-3), np.log(1e2)))
            t, s = rng.uniform(0, 5, 2)
            joint = propagator(kind, r, t + s).matrix
            split = propagator(kind, r, t).matrix @ propagator(kind, r, s).matrix
            assert np.max(np.abs(joint - split)) <= 1e-10 * max(1.0, np.max(np.abs(joint)))

    def test_continuity_across_double_root_switch(self):
        """Taylor branch and exponential branch agree on both sides of the switch."""
        t = 2.0
        for r in (0.5 - 1e-7, 0.5 - 1e-5, 0.5, 0.5 + 1e-5, 0.5 + 1e-7):
            closed = np.array(green_entries(EULER, r, t))
            reference = ode_propagator(EULER, r, t).ravel()
            assert_allclose(closed, reference, atol=1e-10)

    @pytest.mark.parametrize("delta_t", [0.9e-3, 1.1e-3])
    @pytest.mark.parametrize("branch", [1.0, -1.0])
    def test_switch_is_on_delta_times_t(self, delta_t, branch):
        """Near |delta t| = 1e-3 both branches match the matrix exponential of the symbol."""
        t = 2.0
        delta = delta_t / t
        r = np.sqrt(0.25 - branch * delta ** 2)
        expected = expm(t * symbol(EULER, r))
        assert_allclose(propagator(EULER, r, t).matrix, expected, rtol=0.0, atol=1e-12)

    def test_vectorized_matches_scalar(self):
        r = np.array([0.01, 0.3, 0.5, 2.0])
        stack = propagator_matrices(EP, r, 1.5)
        for i, ri in enumerate(r):
            assert_allclose(stack[i], propagator(EP, ri, 1.5).matrix, rtol=1e-14, atol=1e-16)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError, match="non-negative"):
            propagator(EULER, 1.0, -0.1)


class TestAsymptotics:
    def test_eigenvalue_expansion(self):
        """lambda_+ = -r^2 + O(r^4)."""
        for r in np.geomspace(1e-4, 1e-2, 10):
            plus = eigenvalues(EULER, r).plus.real
            assert abs(plus + r ** 2) <= 2 * r ** 4

    def test_leading_entry(self):
        """|G11 - e^{-r^2 t}| <= 4 (r^4 t + r^2) e^{-r^2 t / 2} for r <= 1e-2."""
        for r in np.geomspace(1e-4, 1e-2, 8):
            for t in (0.5, 1.0, 10.0, 100.0, 1e3, 1e4):
                g11 = propagator(EULER, r, t).matrix[0, 0]
                bound = 4.0 * (r ** 4 * t + r ** 2) * np.exp(-0.5 * r ** 2 * t)
                assert abs(g11 - np.exp(-r ** 2 * t)) <= bound

    def test_asymptotic_form_close_to_exact(self):
        r, t = 1e-3, 50.0
        exact = propagator(EULER, r, t).matrix
        approx = low_frequency_asymptotics(r, t)
        assert_allclose(exact, approx, atol=5e-6)

    def test_poisson_block_uniform_decay(self):
        """Entries stay under a multiple of e^{-t/2}, with an extra 1/r on the lower-left one."""
        for r in np.geomspace(1e-3, 1e2, 30):
            for t in (0.5, 2.0, 10.0, 40.0):
                m = np.abs(propagator(EP, r, t).matrix)
                envelope = np.exp(-0.5 * t)
                assert m[0, 0] <= 4 * (1 + r) * envelope
                assert m[0, 1] <= 4 * (1 + r) * envelope
                assert m[1, 1] <= 4 * (1 + r) * envelope
                assert m[1, 0] <= 4 * (1 + r + 1 / r) * envelope


class TestLinearSemigroup:
    @pytest.fixture
    def grid(self):
        return GridSpec(n=16, L=2 * np.pi, dim=3)

    def test_time_zero_is_identity(self, grid):
        state = random_state(grid, 1)
        out = apply_linear_semigroup(state, 0.0)
        for a, b in zip(out.arrays(), state.arrays()):
            assert_allclose(a, b, atol=1e-15)

    def test_pure_solenoidal_decay(self, grid):
        """A curl-only velocity with no density just decays like e^{-t}."""
        x = grid.coordinates()
        w = np.zeros((3,) + grid.shape)
        w[0] = np.sin(x[1]) + 0.5 * np.cos(2 * x[2])
        zero = np.zeros(grid.shape)
        state = SumDiffState.from_physical(grid, zero, w, zero, np.zeros_like(w))
        t = 0.8
        out = apply_linear_semigroup(state, t)
        assert spectral_l2(out.field("w1")) == pytest.approx(np.exp(-t) * spectral_l2(state.field("w1")), rel=1e-12)

    def test_semigroup_on_states(self, grid):
        state = random_state(grid, 2)
        joint = apply_linear_semigroup(state, 1.1)
        split = apply_linear_semigroup(apply_linear_semigroup(state, 0.4), 0.7)
        for a, b in zip(split.arrays(), joint.arrays()):
            assert np.max(np.abs(a - b)) <= 1e-10 * max(1e-300, np.max(np.abs(b))) + 1e-16

    def test_means(self, grid):
        """The n1 mean is kept and the mean velocities decay like e^{-t}."""
        state = random_state(grid, 4)
        out = apply_linear_semigroup(state, 2.0)
        zero = (0, 0, 0)
        assert out.n1[zero] == state.n1[zero]
        assert_allclose(out.w1[:, 0, 0, 0], np.exp(-2.0) * state.w1[:, 0, 0, 0], atol=1e-16)
        assert abs(out.n2[zero]) < 1e-15

    def test_matches_per_mode_propagator(self, grid):
        x = grid.coordinates()
        n2 = 0.1 * np.cos(x[0])
        zero = np.zeros(grid.shape)
        zero_v = np.zeros((3,) + grid.shape)
        state = SumDiffState.from_physical(grid, zero, zero_v, n2, zero_v)
        t = 1.25
        out = apply_linear_semigroup(state, t)
        g = propagator(EP, 1.0, t).matrix
        assert out.n2[1, 0, 0] == pytest.approx(g[0, 0] * state.n2[1, 0, 0], abs=1e-15)

    def test_nonzero_mean_of_n2(self, grid):
        zero = np.zeros(grid.shape)
        zero_v = np.zeros((3,) + grid.shape)
        state = SumDiffState.from_physical(grid, zero, zero_v, np.full(grid.shape, 0.01), zero_v)
        with pytest.raises(NonZeroMean, match="zero mode"):
            apply_linear_semigroup(state, 1.0)


class TestSpectralGap:
    def test_poisson_block(self):
        for eta in (0.01, 0.25, 0.5, 3.0):
            assert spectral_gap(EP, eta) == 0.5

    def test_euler_block(self):
        assert spectral_gap(EULER, 0.5) == 0.5
        assert spectral_gap(EULER, 2.0) == 0.5
        assert spectral_gap(EULER, 0.25) == pytest.approx((1 - np.sqrt(0.75)) / 2)
        assert spectral_gap(EULER, 0.25) == pytest.approx(0.066987, abs=1e-6)

    def test_gap_is_infimum_of_decay_rate(self):
        """The sampled minimum of -Re lambda_+ on r >= eta matches the gap."""
        eta = 0.3
        r = np.linspace(eta, 5.0, 500)
        rates = [-eigenvalues(EULER, ri).plus.real for ri in r]
        assert min(rates) == pytest.approx(spectral_gap(EULER, eta), rel=1e-12)

    @pytest.mark.parametrize("eta", [0.0, -0.1])
    def test_rejects_nonpositive_eta(self, eta):
        with pytest.raises(ValueError, match="split radius"):
            spectral_gap(EULER, eta)
