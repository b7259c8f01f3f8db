"""
Tests for moment-space planning and reachability.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpsteer.core.distribution_catalog import Gaussian
from fpsteer.core.moment_algebra import (
    MomentSequence,
    gaussian_noise_moments,
    moments_of_independent_sum,
    moments_of_scaled,
)
from fpsteer.core.scenario import make_scenario
from fpsteer.core.steering_planner import (
    MomentStateTrajectory,
    assess_step,
    check_plan,
    check_step_reachable,
    feasible_plan,
    inflate_even_moments,
    interpolate_states,
    probe_gain,
    propagate_moments,
    propagate_moments_matrix_form,
    propagation_matrix,
    recover_input_moments,
    repair_plan,
)
from fpsteer.exceptions import DomainError, PlanningError

moment_values = st.lists(
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False), min_size=4, max_size=4
)


def gaussian_moments(mean, variance):
    return Gaussian(mean, variance).closed_form_moments(4)


@pytest.fixture
def step_data():
    """Step 0 of the interpolated first example."""
    return {
        "xk": MomentSequence.of([0.0, 1.0, 0.0, 3.0]),
        "xk1": MomentSequence.of([0.2, 2.75, 3.2, 42.25]),
        "a": 0.5,
        "b": 0.8,
        "noise": gaussian_noise_moments(1.0, 4),
    }


@pytest.fixture
def narrow_target():
    """N(0, 1) -> N(0, 0.5) under unit noise: below the noise floor."""
    return make_scenario(
        Gaussian(0.0, 1.0), Gaussian(0.0, 0.5), 0.5, 0.8, 1.0, horizon=4, name="narrow"
    )


class TestTrajectory:

    def test_interpolation_first_step(self, example1_plan):
        """X(1) = 0.75 X(0) + 0.25 X(K)."""
        expected = MomentSequence.of([0.2, 2.75, 3.2, 42.25])
        assert example1_plan[1].allclose(expected, rtol=1e-12)

    def test_endpoints_exact(self, example1, example1_plan):
        """Endpoints are reproduced bit for bit."""
        assert example1_plan[0] == example1.initial_moments()
        assert example1_plan[4] == example1.target_moments()
        assert example1_plan.horizon == 4
        assert example1_plan.order == 4

    def test_constant_plan(self, standard_normal_moments):
        """Equal endpoints give a constant trajectory."""
        plan = interpolate_states(standard_normal_moments, standard_normal_moments, 3)
        assert all(state == standard_normal_moments for state in plan.states)

    def test_single_step(self, standard_normal_moments):
        """K = 1 keeps just the endpoints."""
        target = MomentSequence.of([1.0, 2.0, 4.0, 10.0])
        plan = interpolate_states(standard_normal_moments, target, 1)
        assert plan.states == (standard_normal_moments, target)

    def test_order_mismatch(self, standard_normal_moments):
        """Endpoints must share their order."""
        with pytest.raises(DomainError):
            interpolate_states(
                standard_normal_moments, MomentSequence.of([0.0, 1.0]), 2
            )

    def test_mixed_orders_rejected(self):
        """States of different orders cannot form a trajectory."""
        with pytest.raises(DomainError):
            MomentStateTrajectory(
                (MomentSequence.of([0.0, 1.0]), MomentSequence.of([0.0, 1.0, 0.0, 3.0]))
            )

    def test_serialization(self, example1_plan):
        """to_dict / from_dict preserve every state."""
        restored = MomentStateTrajectory.from_dict(example1_plan.to_dict())
        assert restored.states == example1_plan.states

    def test_with_state(self, example1_plan, standard_normal_moments):
        """with_state returns a modified copy."""
        changed = example1_plan.with_state(2, standard_normal_moments)
        assert changed[2] == standard_normal_moments
        assert example1_plan[2] != standard_normal_moments


class TestMomentSystem:

    def test_recover_order_two(self):
        """1.25 = 0.25 * 1 + U_2."""
        u = recover_input_moments(
            MomentSequence.of([0.0, 1.0]), MomentSequence.of([0.0, 1.25]), 0.5
        )
        assert u.allclose(MomentSequence.of([0.0, 1.0]))

    def test_recover_without_state_feedback(self, step_data):
        """a~ = 0 returns X(k+1) itself."""
        u = recover_input_moments(step_data["xk"], step_data["xk1"], 0.0)
        assert u == step_data["xk1"]

    def test_stationary_unit_gain(self, standard_normal_moments):
        """X(k) = X(k+1) with a~ = 1 forces a point mass at 0."""
        u = recover_input_moments(standard_normal_moments, standard_normal_moments, 1.0)
        assert u.to_list() == [0.0, 0.0, 0.0, 0.0]

    def test_recover_first_example(self, step_data):
        """Input moments of step 0 at c = 0."""
        u = recover_input_moments(step_data["xk"], step_data["xk1"], 0.5)
        np.testing.assert_allclose(u.values, [0.2, 2.5, 3.05, 38.3125], rtol=1e-12)

    def test_propagate(self):
        """0.25 * 1 + 1 = 1.25."""
        x = propagate_moments(
            MomentSequence.of([0.0, 1.0]), 0.5, MomentSequence.of([0.0, 1.0])
        )
        assert x.allclose(MomentSequence.of([0.0, 1.25]))

    def test_propagate_trivial_cases(self, step_data):
        """a~ = 0 returns U; U = 0 returns the scaled state."""
        u = step_data["xk1"]
        xk = step_data["xk"]
        assert propagate_moments(xk, 0.0, u).allclose(u)
        zero = MomentSequence(np.zeros(4))
        assert propagate_moments(xk, 0.5, zero).allclose(moments_of_scaled(xk, 0.5))

    def test_propagation_matrix_is_lower_triangular(self, step_data):
        """Entry (l, i) vanishes for i > l."""
        matrix = propagation_matrix(0.5, step_data["xk1"])
        assert matrix.shape == (4, 4)
        np.testing.assert_array_equal(np.triu(matrix, k=1), 0.0)
        np.testing.assert_allclose(np.diag(matrix), 0.5 ** np.arange(1, 5))

    @settings(max_examples=300, deadline=None)
    @given(
        xk=moment_values,
        u=moment_values,
        a_tilde=st.floats(min_value=-2.0, max_value=2.0),
    )
    def test_matrix_form_agrees(self, xk, u, a_tilde):
        """Wide-matrix propagation equals the binomial expansion."""
        x = MomentSequence.of(xk)
        inputs = MomentSequence.of(u)
        binomial = propagate_moments(x, a_tilde, inputs)
        matrix = propagate_moments_matrix_form(x, a_tilde, inputs)
        np.testing.assert_allclose(
            matrix.values, binomial.values, rtol=1e-12, atol=1e-11
        )

    @settings(max_examples=300, deadline=None)
    @given(
        xk=moment_values,
        u=moment_values,
        a_tilde=st.floats(min_value=-2.0, max_value=2.0),
    )
    def test_recover_inverts_propagate(self, xk, u, a_tilde):
        """Recovery is the exact inverse of propagation."""
        x = MomentSequence.of(xk)
        inputs = MomentSequence.of(u)
        xk1 = propagate_moments(x, a_tilde, inputs)
        recovered = recover_input_moments(x, xk1, a_tilde)
        np.testing.assert_allclose(
            recovered.values, inputs.values, rtol=1e-9, atol=1e-9
        )


class TestReachability:

    def test_probe_at_zero_gain(self, step_data):
        """Kernel moments of step 0 at c = 0."""
        probe = probe_gain(0.0, **step_data)
        assert probe.a_tilde == 0.5
        np.testing.assert_allclose(
            probe.kernel_moments.values,
            [0.25, 2.34375, 4.78515625, 64.239501953125],
            rtol=1e-12,
        )
        assert probe.control_moments == probe.kernel_moments
        assert probe.feasible

    def test_first_example_step_is_reachable(self, step_data):
        """The first interpolated step admits a gain."""
        report = assess_step(**step_data)
        assert report.feasible
        assert report.witness is not None
        assert report.intervals[0][0] == 0.0

    def test_noise_floor_violation(self):
        """E[u~^2] = 0.5 - a~^2 < 1 cannot absorb unit noise."""
        report = assess_step(
            MomentSequence.of([0.0, 1.0]),
            MomentSequence.of([0.0, 0.5]),
            0.5,
            0.8,
            gaussian_noise_moments(1.0, 2),
        )
        assert not report.feasible
        assert report.intervals == ()
        assert report.witness is None
        assert report.to_dict()["witness"] is None
        assert max(report.kernel_min_eigenvalues) < 0

    def test_tiny_noise_constructed_witness(self, standard_normal_moments):
        """A state propagated from a valid kernel is reachable under tiny noise."""
        noise = gaussian_noise_moments(1e-12, 4)
        u = moments_of_independent_sum(
            moments_of_scaled(standard_normal_moments, 0.8), noise
        )
        xk1 = propagate_moments(standard_normal_moments, 0.5, u)
        report = assess_step(standard_normal_moments, xk1, 0.5, 0.8, noise)
        assert report.feasible

    def test_whole_interval_for_gaussian_shift(self, shift_scenario):
        """Every gain is feasible when all moments stay Gaussian."""
        report = check_step_reachable(
            shift_scenario.initial_moments(),
            shift_scenario.target_moments(),
            shift_scenario,
            0,
        )
        assert report.intervals == ((0.0, 1.0),)

    @settings(max_examples=20, deadline=None)
    @given(
        step=st.integers(min_value=0, max_value=3),
        variance=st.floats(min_value=0.05, max_value=2.0),
        shrink=st.floats(min_value=0.05, max_value=0.95),
    )
    def test_less_noise_never_shrinks_feasible_gains(
        self, example1, example1_plan, step, variance, shrink
    ):
        """Gains reachable under noise variance s stay reachable under any s' < s."""

        def intervals(noise_variance):
            scenario = make_scenario(
                example1.initial,
                example1.target,
                0.5,
                0.8,
                noise_variance,
                horizon=example1.horizon,
            )
            report = check_step_reachable(
                example1_plan[step], example1_plan[step + 1], scenario, step
            )
            return report.intervals

        noisy = intervals(variance)
        quiet = intervals(variance * shrink)
        for lo, hi in noisy:
            assert any(
                a <= lo + 1e-5 and hi <= b + 1e-5 for a, b in quiet
            ), f"{(lo, hi)} not within {quiet}"

    def test_grid_too_small(self, step_data):
        """At least three probes are needed."""
        with pytest.raises(DomainError):
            assess_step(**step_data, grid_points=2)

    def test_report_serialization(self, step_data):
        """to_dict exposes the witness and the best eigenvalues."""
        data = assess_step(**step_data, step=3).to_dict()
        assert data["step"] == 3
        assert data["feasible"] is True
        assert data["witness"]["gain"] == 0.0
        assert data["best_kernel_min_eigenvalue"] >= 0


class TestCheckPlan:

    def test_first_example_feasible(self, example1, example1_plan):
        """Every interpolated step of the first example is reachable."""
        reports = check_plan(example1_plan, example1)
        assert [r.step for r in reports] == [0, 1, 2, 3]
        assert feasible_plan(reports)

    def test_narrow_target_fails_last_step(self, narrow_target):
        """The terminal step sits below the noise floor."""
        plan = interpolate_states(
            narrow_target.initial_moments(),
            narrow_target.target_moments(),
            narrow_target.horizon,
        )
        reports = check_plan(plan, narrow_target)
        assert not reports[-1].feasible
        assert not feasible_plan(reports)

    def test_single_step_plan(self, shift_scenario):
        """K = 1 yields the single-step report."""
        plan = interpolate_states(
            shift_scenario.initial_moments(), shift_scenario.target_moments(), 1
        )
        reports = check_plan(plan, shift_scenario)
        direct = check_step_reachable(plan[0], plan[1], shift_scenario, 0)
        assert len(reports) == 1
        assert reports[0].to_dict() == direct.to_dict()

    def test_horizon_mismatch(self, example1, shift_scenario):
        """Plan and scenario must agree on K."""
        plan = interpolate_states(
            shift_scenario.initial_moments(), shift_scenario.target_moments(), 1
        )
        with pytest.raises(DomainError):
            check_plan(plan, example1)


class TestRepair:

    def test_inflate_even_moments(self):
        """Even moments scale by (1 + delta)^(l/2)."""
        inflated = inflate_even_moments(MomentSequence.of([1.0, 2.0, 3.0, 4.0]), 1.0)
        assert inflated.to_list() == [1.0, 4.0, 3.0, 16.0]

    def test_feasible_plan_unchanged(self, example1, example1_plan):
        """Nothing to repair."""
        repaired = repair_plan(example1_plan, example1)
        assert repaired.states == example1_plan.states

    def test_interior_state_inflated(self):
        """State 1 is widened until its variance clears the noise floor."""
        scenario = make_scenario(
            Gaussian(0.0, 1.0), Gaussian(0.0, 4.0), 0.5, 0.8, 1.0, horizon=2
        )
        plan = MomentStateTrajectory(
            (
                gaussian_moments(0.0, 1.0),
                gaussian_moments(0.0, 1.0),
                gaussian_moments(0.0, 4.0),
            )
        )
        assert not check_step_reachable(plan[0], plan[1], scenario, 0).feasible

        repaired = repair_plan(plan, scenario)
        expected = MomentSequence.of([0.0, 1.016, 0.0, 3.0 * 1.016**2])
        assert repaired[1].allclose(expected, rtol=1e-12)
        assert repaired[0] == plan[0]
        assert repaired[2] == plan[2]
        assert feasible_plan(check_plan(repaired, scenario))

    def test_unreachable_target(self, narrow_target):
        """The terminal step is never inflated."""
        plan = interpolate_states(
            narrow_target.initial_moments(),
            narrow_target.target_moments(),
            narrow_target.horizon,
        )
        with pytest.raises(PlanningError) as excinfo:
            repair_plan(plan, narrow_target)
        assert excinfo.value.step == 3
        assert excinfo.value.exit_code == 3
