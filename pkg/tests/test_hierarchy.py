import numpy as np
import pytest
from hypothesis import given, strategies as st

from cliktune import (
    DimensionMismatch,
    EmptyStack,
    InvalidParameter,
    ManipulatorModel,
    RankDeficient,
    TaskSpec,
    TaskStack,
    assemble_hierarchy,
    clik_velocity,
    planar3_scenario,
    task_error,
    wrap_angle,
)
from conftest import random_planar_state


class TestWrapAngle:
    @given(st.floats(-50.0, 50.0))
    def test_range_is_half_open(self, x):
        w = wrap_angle(x)
        assert -np.pi < w <= np.pi

    @given(st.floats(-6.0, 6.0), st.integers(-3, 3))
    def test_two_pi_periodic(self, x, k):
        assert abs(wrap_angle(x + 2 * np.pi * k) - wrap_angle(x)) < 1e-9

    def test_pi_maps_to_pi(self):
        assert wrap_angle(np.pi) == pytest.approx(np.pi)
        assert wrap_angle(-np.pi) == pytest.approx(np.pi)


class TestTaskError:
    def test_zero_at_goal(self):
        model = ManipulatorModel.planar([0.5, 0.3, 0.2], qd_upper=3.0)
        q = np.array([0.4, -0.8, 0.3])
        from cliktune import task_value
        probe = TaskSpec(kind="planar_ee_position", target=[0.0, 0.0])
        goal = TaskSpec(kind="planar_ee_position",
                        target=task_value(model, probe, q))
        assert np.allclose(task_error(goal, model, q), [0.0, 0.0], atol=1e-15)

    def test_initial_orientation_error_of_builtin(self):
        scenario = planar3_scenario()
        q0 = scenario.resolve_q0()
        err = task_error(scenario.stack.tasks[1], scenario.model, q0)
        assert err[0] == pytest.approx(-0.086, abs=1e-9)

    def test_shortest_path_wrap(self):
        model = ManipulatorModel.planar([1.0], qd_upper=1.0)
        task = TaskSpec(kind="planar_ee_orientation", target=np.pi - 0.1)
        err = task_error(task, model, [-np.pi + 0.1])
        assert err[0] == pytest.approx(-0.2, abs=1e-12)


class TestAssembleHierarchy:
    def test_single_axis_row(self):
        state = assemble_hierarchy([np.array([[1.0, 0.0, 0.0]])], [[0.5]])
        assert np.allclose(state.projectors[1], np.diag([0.0, 1.0, 1.0]),
                           atol=1e-15)
        assert state.blocks[0][0] == pytest.approx(np.array([[-1.0]]))

    def test_empty_stack_rejected(self):
        with pytest.raises(EmptyStack):
            TaskStack(())
        with pytest.raises(DimensionMismatch):
            assemble_hierarchy([], [])

    def test_two_orthogonal_rows(self):
        J1 = np.array([[1.0, 0.0, 0.0]])
        J2 = np.array([[0.0, 1.0, 0.0]])
        state = assemble_hierarchy([J1, J2], [[0.1], [0.2]])
        assert state.blocks[0][0] == pytest.approx(np.array([[-1.0]]))
        assert state.blocks[1][1] == pytest.approx(np.array([[-1.0]]))
        assert state.blocks[0][1] == pytest.approx(np.array([[0.0]]), abs=1e-15)
        assert state.blocks[1][0] == pytest.approx(np.array([[0.0]]), abs=1e-15)
        assert np.allclose(state.coupling, -np.eye(2), atol=1e-15)

    def test_rank_deficient_task_reports_level(self):
        J1 = np.array([[1.0, 0.0, 0.0]])
        J2 = np.array([[0.0, 0.0, 0.0]])
        with pytest.raises(RankDeficient) as exc:
            assemble_hierarchy([J1, J2], [[0.1], [0.2]])
        assert exc.value.level == 2

    def test_dependent_tasks_report_level(self):
        J1 = np.array([[1.0, 0.0, 0.0]])
        J2 = np.array([[2.0, 0.0, 0.0]])  # same row space as J1
        with pytest.raises(RankDeficient) as exc:
            assemble_hierarchy([J1, J2], [[0.1], [0.2]])
        assert exc.value.level == 2

    def test_overconstrained_stack_warns(self):
        model = ManipulatorModel.planar([0.5, 0.5], qd_upper=3.0)
        stack = TaskStack((
            TaskSpec(kind="planar_ee_position", target=[0.3, 0.2]),
            TaskSpec(kind="planar_ee_orientation", target=0.1),
        ))
        from cliktune import build_state
        with pytest.warns(UserWarning, match="cannot be full rank"):
            with pytest.raises(RankDeficient):
                build_state(stack, model, [0.4, -0.8])

    def test_projector_properties_on_random_stacks(self, rng):
        for _ in range(10):
            _, _, _, state = random_planar_state(rng)
            for i in range(1, state.h + 1):
                N = state.projectors[i]
                assert np.abs(N @ N - N).max() < 1e-10
                assert np.abs(N - N.T).max() < 1e-10
                aug = np.vstack(state.jacobians[:i])
                assert np.abs(aug @ N).max() < 1e-10


class TestClikVelocity:
    def test_identity_jacobian(self):
        state = assemble_hierarchy([np.eye(3)], [[1.0, 0.0, -1.0]])
        qd = clik_velocity(state, [2.0, 2.0, 2.0])
        assert np.allclose(qd, [2.0, 0.0, -2.0], atol=1e-14)

    def test_regulation_fixed_point(self, rng):
        model, stack, q, _ = random_planar_state(rng)
        from cliktune import build_state, task_value
        goal_tasks = tuple(
            TaskSpec(kind=t.kind, target=task_value(model, t, q),
                     frame_index=t.frame_index, coordinate=t.coordinate)
            for t in stack.tasks
        )
        state = build_state(TaskStack(goal_tasks), model, q)
        qd = clik_velocity(state, np.full(state.n, 5.0))
        assert np.abs(qd).max() < 1e-12

    def test_matches_term_by_term_oracle(self, rng):
        for _ in range(10):
            _, _, _, state = random_planar_state(rng)
            gains = rng.uniform(0.0, 4.0, state.n)
            qd = clik_velocity(state, gains)
            # independent recomputation: inverse-based pseudo-inverses and
            # explicitly stacked projectors
            expected = np.zeros(state.dof)
            start = 0
            for i, J in enumerate(state.jacobians):
                d = J.shape[0]
                Jp = J.T @ np.linalg.inv(J @ J.T)
                if i == 0:
                    N = np.eye(state.dof)
                else:
                    aug = np.vstack(state.jacobians[:i])
                    augp = aug.T @ np.linalg.inv(aug @ aug.T)
                    N = np.eye(state.dof) - augp @ aug
                lam = np.diag(gains[start:start + d])
                expected += N @ Jp @ lam @ state.errors[i]
                start += d
            assert np.abs(qd - expected).max() < 1e-12

    def test_priority_consistency(self, rng):
        for _ in range(10):
            _, _, _, state = random_planar_state(rng)
            gains = rng.uniform(0.0, 6.0, state.n)
            qd = clik_velocity(state, gains)
            d1 = state.dims[0]
            want = gains[:d1] * state.errors[0]
            assert np.abs(state.jacobians[0] @ qd - want).max() < 1e-10

    def test_linear_in_errors_and_gains(self, rng):
        _, _, _, state = random_planar_state(rng)
        gains = rng.uniform(0.1, 3.0, state.n)
        qd = clik_velocity(state, gains)
        doubled = clik_velocity(state, 2.0 * gains)
        assert np.abs(doubled - 2.0 * qd).max() < 1e-12
        # superposition across per-coordinate gain contributions
        total = np.zeros(state.dof)
        for l in range(state.n):
            only = np.zeros(state.n)
            only[l] = gains[l]
            total += clik_velocity(state, only)
        assert np.abs(total - qd).max() < 1e-12

    def test_negative_gain_rejected(self, rng):
        _, _, _, state = random_planar_state(rng)
        with pytest.raises(InvalidParameter):
            clik_velocity(state, np.full(state.n, -0.1))
