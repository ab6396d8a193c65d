import pytest

from aopinn.seir import EpiParams, SeirState, eval_many, sample_observations, seir_rhs, simulate

PARAMS = EpiParams(0.26, 0.2, 0.1)
INIT = SeirState(0.99, 0.0, 0.01, 0.0)


class TrajectoryModel:
    """Stands in for a network whose outputs are the simulated trajectory."""

    epsilon = None

    def __init__(self, traj, params):
        self.traj = traj
        self.params = params

    def predict(self, t):
        x = eval_many(self.traj, t)
        return x, seir_rhs(self.params, x)


@pytest.fixture(scope="session")
def truth():
    return simulate(PARAMS, INIT, 200.0, 0.2)


@pytest.fixture(scope="session")
def obs_train(truth):
    return sample_observations(truth, PARAMS, 50, "train")


@pytest.fixture(scope="session")
def obs_test(truth):
    return sample_observations(truth, PARAMS, 50, "test", seed=11)


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
