import numpy as np
import pytest
from hypothesis import settings

from cliktune import build_state, planar3_scenario, ur5_scenario

settings.register_profile("deterministic", derandomize=True, max_examples=50)
settings.load_profile("deterministic")


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)


def random_planar_state(rng, dof=4, lengths=None):
    """Hierarchy of a random planar arm: EE position plus orientation."""
    from cliktune import ManipulatorModel, TaskSpec, TaskStack

    lengths = lengths if lengths is not None else rng.uniform(0.2, 0.6, dof)
    model = ManipulatorModel.planar(lengths, qd_upper=3.0)
    stack = TaskStack((
        TaskSpec(kind="planar_ee_position", target=rng.uniform(-0.5, 0.5, 2)),
        TaskSpec(kind="planar_ee_orientation", target=rng.uniform(-2, 2)),
    ))
    # bent configurations keep every Jacobian comfortably full rank
    q = rng.uniform(0.3, 1.2, dof) * rng.choice([-1.0, 1.0], dof)
    return model, stack, q, build_state(stack, model, q)


# --- expensive closed-loop runs shared between test modules -----------------

@pytest.fixture(scope="session")
def planar3_bt8():
    from cliktune import run
    return run(planar3_scenario(beta_tilde=8.0))


@pytest.fixture(scope="session")
def planar3_bt2():
    from cliktune import run
    return run(planar3_scenario(beta_tilde=2.0))


@pytest.fixture(scope="session")
def planar3_fixed():
    from cliktune import fixed_baseline, run
    return run(fixed_baseline(planar3_scenario()))


@pytest.fixture(scope="session")
def planar3_bt8_lim2():
    from cliktune import run, with_velocity_limit
    return run(with_velocity_limit(planar3_scenario(beta_tilde=8.0), 2.0))


@pytest.fixture(scope="session")
def ur5_sdp():
    from cliktune import run
    return run(ur5_scenario())


@pytest.fixture(scope="session")
def ur5_fixed():
    from cliktune import fixed_baseline, run
    return run(fixed_baseline(ur5_scenario()))
