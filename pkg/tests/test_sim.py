import numpy as np
import pytest

import cliktune.sim as sim_mod
from cliktune import (
    GainSolution,
    InvalidParameter,
    ManipulatorModel,
    Scenario,
    SimulationError,
    TaskSpec,
    TaskStack,
    builtin_scenarios,
    fixed_baseline,
    get_builtin,
    planar3_scenario,
    run,
    task_value,
    ur5_scenario,
    with_velocity_limit,
)
from cliktune.sdp import STATUS_NUMERICAL_FAILURE, STATUS_OPTIMAL


def _one_dof_scenario(**overrides):
    model = ManipulatorModel.planar([1.0], qd_upper=50.0)
    stack = TaskStack((TaskSpec(kind="planar_ee_orientation", target=0.5),))
    defaults = dict(name="one_dof", model=model, stack=stack, mode="sdp",
                    beta_tilde=8.0, delta=1e-3, dt=0.01, duration=0.1,
                    q0=[0.0])
    defaults.update(overrides)
    return Scenario(**defaults)


class TestStep:
    def test_zero_error_is_a_fixed_point(self):
        model = ManipulatorModel.planar([0.5, 0.3, 0.2], qd_upper=3.0)
        q = np.array([0.4, -0.9, 0.2])
        pos_probe = TaskSpec(kind="planar_ee_position", target=[0.0, 0.0])
        stack = TaskStack((
            TaskSpec(kind="planar_ee_position",
                     target=task_value(model, pos_probe, q)),
            TaskSpec(kind="planar_ee_orientation", target=float(np.sum(q))),
        ))
        for mode, gains in (("fixed", (1.0, 1.0, 1.0)), ("sdp", None)):
            scenario = Scenario(name="at_goal", model=model, stack=stack,
                                mode=mode, fixed_gains=gains, dt=0.01,
                                duration=0.05, q0=q)
            trace = run(scenario)
            assert np.abs(trace.joint_velocities).max() < 1e-9
            assert np.abs(trace.records[-1].q - q).max() < 1e-9

    def test_one_dof_over_gained_fixed_step_is_unstable(self):
        dt = 0.01
        scenario = _one_dof_scenario(mode="fixed",
                                     fixed_gains=[2.0 / dt + 1.0],
                                     dt=dt, duration=0.0)
        trace = run(scenario)
        assert trace.records[0].margin > 0

    def test_planar3_first_step_margin_and_bounds(self):
        trace = run(planar3_scenario(duration=0.0))
        first = trace.records[0]
        assert first.margin < 0
        assert np.abs(first.qd).max() <= 3.0 * (1 + 1e-6)
        assert first.solver_status == STATUS_OPTIMAL

    def test_rank_deficient_start_aborts_with_step(self):
        model = ManipulatorModel.planar([0.5, 0.5], qd_upper=3.0)
        stack = TaskStack((
            TaskSpec(kind="planar_ee_position", target=[0.2, 0.6]),))
        scenario = Scenario(name="singular", model=model, stack=stack,
                            dt=0.01, duration=1.0, q0=[0.3, 0.0])
        with pytest.raises(SimulationError) as exc:
            run(scenario)
        assert exc.value.step == 0


class TestStepApi:
    def test_manual_stepping_matches_run(self):
        from cliktune import JointState, StepState, step
        scenario = planar3_scenario(duration=0.03)
        trace = run(scenario)
        state = StepState(joint=JointState(q=scenario.resolve_q0(), t=0.0))
        for k in range(3):
            state, record = step(scenario, state)
            assert record.k == k
            assert np.array_equal(record.q, trace.records[k].q)
            assert np.array_equal(record.lam, trace.records[k].lam)
        assert np.array_equal(state.joint.q, trace.records[3].q)


class TestRun:
    def test_zero_duration_yields_single_record(self):
        trace = run(planar3_scenario(duration=0.0))
        assert len(trace) == 1

    def test_record_count_and_time_grid(self):
        scenario = planar3_scenario(duration=0.5)
        trace = run(scenario)
        assert len(trace) == int(np.floor(0.5 / scenario.dt + 1e-9)) + 1
        times = trace.times
        assert np.all(np.diff(times) > 0)
        assert np.allclose(np.diff(times), scenario.dt, atol=1e-12)

    def test_lyapunov_monotone_and_margins_negative(self, planar3_bt8):
        assert np.all(planar3_bt8.margins < 0)
        V = planar3_bt8.lyapunov_values
        assert np.all(np.diff(V) <= 1e-9)

    def test_velocity_bounds_hold_throughout(self, planar3_bt8):
        qd = planar3_bt8.joint_velocities
        assert np.abs(qd).max() <= 3.0 * (1 + 1e-6)

    def test_statuses_all_optimal(self, planar3_bt8):
        assert all(r.solver_status == STATUS_OPTIMAL
                   for r in planar3_bt8.records)
        assert not any(r.fallback for r in planar3_bt8.records)


class TestFallbackPolicy:
    def _failed(self, n):
        return GainSolution(
            lam=np.zeros(n), beta=float("nan"), gamma=float("nan"),
            status=STATUS_NUMERICAL_FAILURE, min_block_eig=float("nan"),
            objective=float("nan"), iterations=0, solve_time=0.0,
            reason="injected failure")

    def test_mid_run_failure_reuses_previous_gains(self, monkeypatch):
        scenario = _one_dof_scenario(duration=0.05)
        real = sim_mod.solve_sdp
        calls = {"k": 0}

        def flaky(problem, opts=None):
            calls["k"] += 1
            if calls["k"] == 3:
                return self._failed(problem.n_gains)
            return real(problem, opts)

        monkeypatch.setattr(sim_mod, "solve_sdp", flaky)
        trace = run(scenario)
        flagged = [r for r in trace.records if r.fallback]
        assert len(flagged) == 1
        k = flagged[0].k
        assert flagged[0].solver_status == STATUS_NUMERICAL_FAILURE
        assert np.array_equal(flagged[0].lam, trace.records[k - 1].lam)

    def test_first_step_failure_aborts(self, monkeypatch):
        scenario = _one_dof_scenario(duration=0.05)
        monkeypatch.setattr(
            sim_mod, "solve_sdp",
            lambda problem, opts=None: self._failed(problem.n_gains))
        with pytest.raises(SimulationError) as exc:
            run(scenario)
        assert exc.value.step == 0

    def test_tuned_velocity_violation_aborts(self, monkeypatch):
        scenario = _one_dof_scenario(duration=0.05)

        def absurd(problem, opts=None):
            return GainSolution(
                lam=np.array([1e6]), beta=1.0, gamma=1.0,
                status=STATUS_OPTIMAL, min_block_eig=0.0, objective=1.0,
                iterations=1, solve_time=0.0)

        monkeypatch.setattr(sim_mod, "solve_sdp", absurd)
        with pytest.raises(SimulationError):
            run(scenario)


class TestBuiltins:
    def test_names_and_dimensions(self):
        scenarios = {s.name: s for s in builtin_scenarios()}
        assert set(scenarios) == {"planar3", "ur5"}
        planar3 = scenarios["planar3"]
        assert planar3.stack.n == 3 and planar3.model.dof == 3
        ur5 = scenarios["ur5"]
        assert ur5.stack.n == 4 and ur5.model.dof == 6

    def test_planar3_parameters(self):
        s = get_builtin("planar3")
        assert np.allclose(s.model.link_lengths, [0.5, 0.3, 0.2])
        assert np.all(s.model.qd_upper == 3.0)
        assert np.allclose(s.stack.tasks[0].target, [0.76, 0.18])
        assert s.stack.tasks[1].target[0] == pytest.approx(-1.22)
        assert s.delta == pytest.approx(2e-5)
        assert s.dt == 0.01 and s.duration == 5.0
        assert np.allclose(fixed_baseline(s).fixed_gains, [1.0, 1.0, 10.0])

    def test_ur5_parameters(self):
        s = get_builtin("ur5")
        assert np.allclose(np.rad2deg(s.q0), [135, 0, -90, 0, 90, 0])
        assert np.allclose(s.stack.tasks[0].target, [-0.5, -0.4, 0.6])
        assert s.stack.tasks[1].target[0] == pytest.approx(-0.3)
        assert s.stack.tasks[1].frame_index == 4
        assert s.stack.tasks[1].coordinate == "y"
        assert s.beta_tilde == 8.0 and s.delta == pytest.approx(5e-5)
        assert np.all(s.model.qd_upper == 6.0)
        assert np.allclose(fixed_baseline(s).fixed_gains, [2.0, 2.0, 2.0, 1.0])

    def test_planar3_initial_configuration_matches_task_values(self):
        s = get_builtin("planar3")
        q0 = s.resolve_q0()
        pos_probe = TaskSpec(kind="planar_ee_position", target=[0.0, 0.0])
        value = task_value(s.model, pos_probe, q0)
        assert np.linalg.norm(value - [0.5, 0.0]) < 1e-6
        assert abs(float(np.sum(q0)) + 1.134) < 1e-6

    def test_unknown_builtin(self):
        with pytest.raises(InvalidParameter):
            get_builtin("nope")


class TestHelpers:
    def test_with_velocity_limit(self):
        s = with_velocity_limit(planar3_scenario(), 2.0)
        assert np.all(s.model.qd_upper == 2.0)
        assert np.all(s.model.qd_lower == -2.0)
        u = with_velocity_limit(ur5_scenario(), 4.0)
        assert np.all(u.model.qd_upper == 4.0)
        assert u.model.dh_rows == ur5_scenario().model.dh_rows

    def test_csv_shape_and_header(self, tmp_path):
        scenario = planar3_scenario(duration=0.05)
        trace = run(scenario)
        path = tmp_path / "trace.csv"
        trace.save_csv(path)
        lines = path.read_text().splitlines()
        nu, h, n = 3, 2, 3
        header = lines[0].split(",")
        assert len(header) == 1 + 2 * nu + h + n + 6
        assert header[0] == "t"
        assert header[-2:] == ["solver_status", "solve_time_s"]
        assert len(lines) - 1 == len(trace)
        for line in lines[1:]:
            assert len(line.split(",")) == len(header)

    def test_record_at(self, planar3_bt8):
        assert planar3_bt8.record_at(1.0).k == 100
        with pytest.raises(InvalidParameter):
            planar3_bt8.record_at(99.0)

    def test_fixed_mode_summary_has_nan_beta_deficit(self):
        trace = run(fixed_baseline(planar3_scenario(duration=0.02)))
        assert np.isnan(trace.mean_beta_deficit())

    def test_scenario_validation(self):
        with pytest.raises(InvalidParameter):
            planar3_scenario(dt=-0.01)
        with pytest.raises(InvalidParameter):
            planar3_scenario(mode="fixed")  # no gains given
        with pytest.raises(InvalidParameter):
            planar3_scenario(beta_tilde=0.0)
        with pytest.raises(InvalidParameter):
            _one_dof_scenario(q0=None)
