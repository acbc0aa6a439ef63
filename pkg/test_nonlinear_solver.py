"""
Tests for the nonlinear pseudospectral solver and its trajectory diagnostics.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from utils.errors import CFLViolation, MissingNormError, SimulationError
from utils.nonlinear_solver import (
    ENERGY_TERMS,
    NORM_COLUMNS,
    SimConfig,
    Trajectory,
    compare_trajectories,
    difference_block_rate,
    energy_M,
    initial_state,
    nirenberg_ratio,
    nonlinear_rhs,
    primitive_rhs,
    simulate,
    state_distance,
    step,
)
from utils.propagators import apply_linear_semigroup
from utils.spectral_core import GridSpec, transform_forward
from utils.state_model import PressureLaw, PrimitiveState, SumDiffState, to_sumdiff

LAW = PressureLaw()


def make_config(n=16, dim=1, amplitude=1e-2, dt=0.01, t_end=0.5, **extra):
    return SimConfig(grid=GridSpec(n=n, dim=dim), amplitude=amplitude, dt=dt, t_end=t_end, **extra)


def final_state(config):
    return simulate(config).states[-1]


@pytest.fixture(scope="module")
def long_run():
    return simulate(make_config(n=16, amplitude=1e-3, dt=0.05, t_end=20.0, snapshot_every=0.5))


@pytest.fixture(scope="module")
def torus_run():
    return simulate(make_config(n=16, dim=3, amplitude=1e-3, dt=0.05, t_end=10.0, snapshot_every=0.1))


class TestSimConfig:
    def test_parses_json_payload(self):
        payload = {
            "schema_version": 1,
            "grid": {"n": 16, "L": 6.283185307179586, "dim": 3},
            "amplitude": 0.001,
            "dt": 0.05,
            "t_end": 5.0,
        }
        config = SimConfig.model_validate(payload)
        assert config.n_steps == 100
        assert config.snapshot_stride == 2
        assert config.form == "sumdiff"

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValidationError, match="Extra inputs"):
            SimConfig.model_validate({"grid": {"n": 16}, "amplitude": 0.1, "dt": 0.1, "t_end": 1.0, "extra": 1})

    def test_rejects_other_schema_versions(self):
        with pytest.raises(ValidationError, match="schema_version"):
            SimConfig.model_validate({"schema_version": 2, "grid": {"n": 16}, "amplitude": 0.1, "dt": 0.1, "t_end": 1.0})

    @pytest.mark.parametrize("changes, message", [
        ({"dt": 2.0}, "dt exceeds t_end"),
        ({"dt": -0.1}, "greater than"),
        ({"amplitude": -1.0}, "greater than or equal"),
        ({"amplitude": 1.5}, "inadmissible initial state"),
        ({"initial": {"kind": "band_limited", "kmax": 8}}, "kmax=8"),
        ({"initial": {"kind": "modes", "modes": []}}, "at least one mode"),
        ({"initial": {"kind": "modes", "modes": [{"field": "rho1", "wavevector": [0], "amplitude": 1.0}]}},
         "nonzero wavevector"),
        ({"initial": {"kind": "modes", "modes": [{"field": "u1", "wavevector": [1, 0], "amplitude": 1.0}]}},
         "does not match dimension"),
    ])
    def test_rejects_inconsistent_settings(self, changes, message):
        payload = {"grid": {"n": 16, "dim": 1}, "amplitude": 0.1, "dt": 0.1, "t_end": 1.0}
        payload.update(changes)
        with pytest.raises(ValidationError, match=message):
            SimConfig.model_validate(payload)

    def test_inadmissible_mode_amplitude(self):
        """A density mode that pushes rho below 1/2 is rejected before any state is built."""
        with pytest.raises(ValidationError, match="rho1"):
            make_config(amplitude=0.6, initial={"kind": "modes", "modes": [
                {"field": "rho1", "wavevector": [1], "amplitude": 1.0},
            ]})

    def test_initial_state_means(self):
        state = initial_state(make_config(dim=3, amplitude=0.1))
        assert state.rho1[0, 0, 0] == 1.0
        assert state.rho2[0, 0, 0] == 1.0
        kept = state.grid.dealias_mask()
        assert np.all(state.u1[:, ~kept] == 0.0)

    def test_mode_initial_data(self):
        """A cosine of amplitude a lands as a/2 on each of its two conjugate modes."""
        config = make_config(
            n=32, amplitude=0.1,
            initial={"kind": "modes", "modes": [{"field": "rho1", "wavevector": [3], "amplitude": 1.0}]},
        )
        state = initial_state(config)
        assert abs(state.rho1[3]) == pytest.approx(0.05)
        assert np.max(np.abs(state.rho2[1:])) < 1e-15


class TestSourceTerms:
    def test_zero_state(self):
        grid = GridSpec(n=16, dim=3)
        for term in nonlinear_rhs(SumDiffState.zeros(grid), LAW):
            assert np.all(term == 0.0)

    def test_constant_state(self):
        """Every source term carries a derivative, so constant states produce none."""
        grid = GridSpec(n=16, dim=3)
        w1 = np.zeros((3,) + grid.shape)
        w1[0] = 0.3
        state = SumDiffState.from_physical(grid, np.full(grid.shape, 0.2), w1, np.zeros(grid.shape), np.zeros_like(w1))
        for term in nonlinear_rhs(state, LAW):
            assert np.max(np.abs(term)) < 1e-14

    def test_density_equations_keep_means(self):
        config = make_config(dim=3, amplitude=0.2)
        primitive = initial_state(config)
        f = nonlinear_rhs(to_sumdiff(primitive), LAW)
        assert f.f1[0, 0, 0] == 0.0 and f.f3[0, 0, 0] == 0.0
        g = primitive_rhs(primitive, LAW)
        assert g.rho1[0, 0, 0] == 0.0 and g.rho2[0, 0, 0] == 0.0

    def test_forms_agree_up_to_potential(self):
        """Sum/difference sources are the primitive ones minus the linear potential coupling."""
        primitive = initial_state(make_config(dim=3, amplitude=0.2))
        sd = to_sumdiff(primitive)
        f = nonlinear_rhs(sd, LAW)
        g = primitive_rhs(primitive, LAW)
        grid = sd.grid
        phi = sd.phi.coeffs
        ik = 1j * grid.wavevectors()
        for axis in range(3):
            ik[axis][grid.nyquist_mask(axis)] = 0.0
        grad_phi = ik * phi * grid.dealias_mask()
        assert_allclose(f.f1, g.rho1 + g.rho2, atol=1e-15)
        assert_allclose(f.f3, g.rho1 - g.rho2, atol=1e-15)
        assert_allclose(f.f2, g.u1 + g.u2, atol=1e-15)
        assert_allclose(f.f4, g.u1 - g.u2 - 2.0 * grad_phi, atol=1e-15)


class TestStep:
    def test_zero_state_stays_zero(self):
        grid = GridSpec(n=16, dim=3)
        state = step(SumDiffState.zeros(grid), 0.01)
        assert all(np.all(a == 0.0) for a in state.arrays())

    def test_linear_only_is_the_semigroup(self):
        """Without sources the two half steps compose to the exact linear flow."""
        state = to_sumdiff(initial_state(make_config(dim=3, amplitude=0.1)))
        a = step(state, 0.05, linear_only=True)
        b = apply_linear_semigroup(state, 0.05)
        for x, y in zip(a.arrays(), b.arrays()):
            assert_allclose(x, y, atol=1e-14)

    def test_cfl_violation(self):
        state = to_sumdiff(initial_state(make_config()))
        with pytest.raises(CFLViolation, match="CFL limit"):
            step(state, 1.0)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError, match="dt must be positive"):
            step(SumDiffState.zeros(GridSpec(n=8, dim=1)), 0.0)

    def test_second_order_in_time(self):
        """Self-convergence ratio 4 under dt halving."""
        base = make_config(n=16, amplitude=0.05, t_end=1.0, snapshot_every=1.0)
        states = [final_state(base.model_copy(update={"dt": dt})) for dt in (0.02, 0.01, 0.005)]
        coarse, _ = state_distance(states[0], states[1])
        fine, _ = state_distance(states[1], states[2])
        assert coarse / fine == pytest.approx(4.0, abs=0.5)


class TestSimulate:
    def test_zero_amplitude_stays_at_background(self):
        run = simulate(make_config(amplitude=0.0, t_end=0.2))
        assert np.max(run.norms[list(NORM_COLUMNS)].to_numpy()) < 1e-14

    def test_snapshots(self):
        run = simulate(make_config(dt=0.01, t_end=0.5, snapshot_every=0.1))
        assert_allclose(run.times, [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], atol=1e-12)
        assert len(run.states) == len(run.norms) == 6
        assert list(run.frame().columns[:2]) == ["t", "n1_D0"]
        assert run.wall_time > 0.0

    def test_mass_and_charge_neutrality(self):
        """Means of n1 and n2 stay at zero through every snapshot."""
        run = simulate(make_config(amplitude=0.1, t_end=1.0))
        for s in run.states:
            assert abs(s.n1[0]) <= 1e-15
            assert abs(s.n2[0]) <= 1e-15

    def test_forms_agree(self):
        config = make_config(n=16, amplitude=0.05, dt=5e-4, t_end=0.1, snapshot_every=0.02)
        sd = simulate(config)
        prim = simulate(config.model_copy(update={"form": "primitive"}))
        assert prim.form == "primitive"
        assert compare_trajectories(prim, sd) <= 1e-6

    @pytest.mark.slow
    def test_forms_agree_on_the_torus(self):
        """Primitive and sum/difference runs at n=32 in 3D, eps=1e-3, up to t=1."""
        config = make_config(n=32, dim=3, amplitude=1e-3, dt=1e-3, t_end=1.0, snapshot_every=0.1)
        sd = simulate(config)
        prim = simulate(config.model_copy(update={"form": "primitive"}))
        assert compare_trajectories(prim, sd) <= 1e-6

    def test_linearization_error_is_quadratic(self):
        """The gap to the linear flow at t=1 drops by 4 each time eps is halved."""
        def gap(eps):
            config = make_config(n=32, amplitude=eps, dt=0.01, t_end=1.0, snapshot_every=1.0)
            linear = apply_linear_semigroup(to_sumdiff(initial_state(config)), config.t_end)
            return state_distance(final_state(config), linear)[0]

        gaps = [gap(eps) for eps in (2e-3, 1e-3, 5e-4)]
        assert gaps[0] / gaps[1] == pytest.approx(4.0, abs=0.5)
        assert gaps[1] / gaps[2] == pytest.approx(4.0, abs=0.5)

    def test_failure_reports_time(self):
        config = make_config(dt=0.5, t_end=1.0)
        with pytest.raises(SimulationError, match="t=0.5") as info:
            simulate(config)
        assert info.value.t == pytest.approx(0.5)
        assert isinstance(info.value.cause, CFLViolation)

    def test_custom_initial_state(self):
        config = make_config(t_end=0.1)
        run = simulate(config, initial=PrimitiveState.background(config.grid))
        assert np.all(run.norms["n1_D0"] == 0.0)


class TestDiagnostics:
    def test_difference_block_decays_exponentially(self, long_run):
        assert difference_block_rate(long_run).rate >= 0.4

    @pytest.mark.slow
    def test_difference_block_rate_on_the_torus(self):
        """3D run with eps=1e-3 up to t=5."""
        run = simulate(make_config(n=16, dim=3, amplitude=1e-3, dt=0.05, t_end=5.0, snapshot_every=0.1))
        assert difference_block_rate(run).rate >= 0.4

    def test_energy_starts_at_plain_sum(self, long_run):
        """Before any running maximum kicks in, M is the plain weighted sum of norms."""
        energy = energy_M(long_run)
        row = long_run.norms.iloc[0]
        expected = sum(np.sqrt(sum(row[c] ** 2 for c in cols)) for _, cols in ENERGY_TERMS.values())
        assert energy.values[0] == pytest.approx(expected, rel=1e-12)

    def test_energy_is_monotone_and_bounded(self, long_run):
        energy = energy_M(long_run)
        assert np.all(np.diff(energy.values) >= 0.0)
        assert energy.at(10.0) <= 10.0 * energy.at(0.0)

    @pytest.mark.slow
    def test_energy_bounded_on_the_torus(self, torus_run):
        """M(10) <= 10 M(0) for the 3D eps=1e-3 run."""
        energy = energy_M(torus_run)
        assert np.all(np.diff(energy.values) >= 0.0)
        assert energy.at(10.0) <= 10.0 * energy.at(0.0)

    def test_energy_of_background(self):
        run = simulate(make_config(amplitude=0.0, t_end=0.2))
        assert np.max(energy_M(run).values) < 1e-13

    def test_energy_needs_norm_columns(self, long_run):
        partial = Trajectory(long_run.times, long_run.states, long_run.norms.drop(columns=["w2_D1"]))
        with pytest.raises(MissingNormError, match="w2_D1"):
            energy_M(partial)

    def test_energy_lookup_before_start(self, long_run):
        with pytest.raises(ValueError, match="no snapshot"):
            energy_M(long_run).at(-1.0)


class TestNirenbergRatio:
    def test_cosine(self):
        """cos(x) on the 2*pi box: ||f||_inf / (||f||_2^(1/4) ||D^2 f||_2^(3/4)) = 1 / (2 pi^(3/2))."""
        grid = GridSpec(n=16, dim=3)
        field = transform_forward(np.cos(grid.coordinates()[0]), grid)
        assert nirenberg_ratio(field) == pytest.approx(1.0 / (2.0 * np.pi ** 1.5), rel=1e-12)

    def test_scale_invariance(self):
        grid = GridSpec(n=16, dim=3)
        x = grid.coordinates()
        values = np.sin(x[0]) * np.cos(2 * x[1]) + 0.3 * np.cos(x[2])
        one = nirenberg_ratio(transform_forward(values, grid))
        assert nirenberg_ratio(transform_forward(3.5 * values, grid)) == pytest.approx(one, rel=1e-12)

    def test_gaussian_stable_under_refinement(self):
        def ratio(n):
            grid = GridSpec(n=n, L=12.0, dim=3)
            x = grid.coordinates() - grid.L / 2
            return nirenberg_ratio(transform_forward(np.exp(-np.sum(x ** 2, axis=0)), grid))

        coarse, fine = ratio(32), ratio(64)
        assert coarse > 0.0
        assert coarse == pytest.approx(fine, rel=0.01)

    def test_constant_field(self):
        grid = GridSpec(n=8, dim=3)
        with pytest.raises(ValueError, match="constant field"):
            nirenberg_ratio(transform_forward(np.ones(grid.shape), grid))
