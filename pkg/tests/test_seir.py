import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aopinn.errors import DomainError, IntegrationError
from aopinn.seir import (
    EpiParams,
    SeirState,
    analytic_i_derivatives,
    eval_at,
    eval_many,
    sample_observations,
    seir_rhs,
    simulate,
)

from .oracles import rk4_oracle, rk4_oracle_at

PARAMS = EpiParams(0.26, 0.2, 0.1)
INIT = SeirState(0.99, 0.0, 0.01, 0.0)


@pytest.fixture(scope="module")
def traj():
    return simulate(PARAMS, INIT, 200.0, 0.2)


@pytest.fixture(scope="module")
def oracle_end():
    return rk4_oracle(PARAMS, INIT.as_array(), 200.0, 0.01)


def test_initial_state_exact(traj):
    assert traj.state(0) == INIT
    assert len(traj.times) == 1001


def test_conservation_every_step(traj):
    assert np.max(np.abs(traj.states.sum(axis=1) - 1.0)) <= 1e-9


def test_end_state_matches_rk4_oracle(traj, oracle_end):
    np.testing.assert_allclose(traj.states[-1], oracle_end, rtol=0, atol=1e-6)


def test_monotone_s_and_r(traj):
    assert np.all(np.diff(traj.states[:, 0]) <= 0)
    assert np.all(np.diff(traj.states[:, 3]) >= 0)


def test_halving_step_changes_end_state_little(traj):
    fine = simulate(PARAMS, INIT, 200.0, 0.1)
    np.testing.assert_allclose(fine.states[-1], traj.states[-1], rtol=0, atol=1e-8)


def test_embedded_error_is_small(traj):
    assert np.max(np.abs(traj.embedded_error)) < 1e-6


def test_eval_at_grid_points_exact(traj):
    assert eval_at(traj, 0.0) == INIT
    k = 500
    assert traj.times[k] == 100.0
    np.testing.assert_array_equal(eval_at(traj, 100.0).as_array(), traj.states[k])


def test_dense_output_off_grid(traj):
    expected = rk4_oracle_at(PARAMS, INIT.as_array(), 100.1, 0.01)
    np.testing.assert_allclose(eval_at(traj, 100.1).as_array(), expected, atol=1e-5)


def test_eval_outside_domain(traj):
    with pytest.raises(DomainError):
        eval_at(traj, 200.5)
    with pytest.raises(DomainError):
        eval_at(traj, -0.1)


def test_analytic_derivatives_hand_values():
    i_dot, i_ddot = analytic_i_derivatives(PARAMS, INIT)
    assert i_dot == pytest.approx(-0.001, abs=1e-15)
    assert i_ddot == pytest.approx(0.0006148, abs=1e-15)


@given(
    b=st.floats(0.01, 2.0),
    eps=st.floats(0.0, 1.0),
    g=st.floats(0.01, 1.0),
    s=st.floats(0.0, 1.0),
)
def test_disease_free_derivatives_vanish(b, eps, g, s):
    state = SeirState(s, 0.0, 0.0, 1.0 - s)
    assert analytic_i_derivatives(EpiParams(b, eps, g), state) == (0.0, 0.0)


def test_analytic_derivatives_match_finite_differences(traj):
    h = 1e-3
    for t in np.linspace(1.0, 199.0, 25):
        x = eval_at(traj, t)
        i_dot, i_ddot = analytic_i_derivatives(PARAMS, x)
        ip, i0, im = eval_many(traj, [t + h, t, t - h])[:, 2]
        assert abs((ip - im) / (2 * h) - i_dot) <= 1e-5
        assert abs((ip - 2 * i0 + im) / h**2 - i_ddot) <= 1e-3


def test_rhs_conserves_total():
    x = np.array([[0.5, 0.2, 0.2, 0.1], [0.99, 0.0, 0.01, 0.0]])
    np.testing.assert_allclose(seir_rhs(PARAMS, x).sum(axis=-1), 0.0, atol=1e-17)


def test_train_times(traj):
    obs = sample_observations(traj, PARAMS, 50, "train")
    np.testing.assert_allclose(obs.times, np.arange(50) * 200.0 / 49, rtol=1e-15)
    assert obs.times[0] == 0.0 and obs.times[-1] == 200.0
    assert obs.pseudo_s is None and not obs.has_pseudo
    two = sample_observations(traj, PARAMS, 2, "train")
    assert list(two.times) == [0.0, 200.0]


def test_test_sampling_deterministic(traj):
    a = sample_observations(traj, PARAMS, 50, "test", seed=7)
    b = sample_observations(traj, PARAMS, 50, "test", seed=7)
    c = sample_observations(traj, PARAMS, 50, "test", seed=8)
    np.testing.assert_array_equal(a.times, b.times)
    np.testing.assert_array_equal(a.i_ddot, b.i_ddot)
    assert not np.array_equal(a.times, c.times)
    assert np.all(np.diff(a.times) >= 0)
    assert a.times.min() >= 0.0 and a.times.max() <= 200.0


def test_sampled_values_consistent(traj):
    obs = sample_observations(traj, PARAMS, 50, "train")
    np.testing.assert_array_equal(obs.i_obs, eval_many(traj, obs.times)[:, 2])
    assert obs.i_obs[0] == 0.01 and obs.i_dot[0] == pytest.approx(-0.001)


def test_rejects_bad_inputs():
    with pytest.raises(DomainError):
        simulate(PARAMS, INIT, 200.0, 0.0)
    with pytest.raises(DomainError):
        SeirState(0.5, 0.5, 0.5, 0.0)
    with pytest.raises(DomainError):
        EpiParams(0.0, 0.2, 0.1)


def test_non_finite_state_names_step():
    # a huge infection rate makes the explicit scheme blow up
    with pytest.raises(IntegrationError, match="step"):
        simulate(EpiParams(1e6, 0.2, 0.1), SeirState(0.5, 0.0, 0.5, 0.0), 10.0, 0.2)


@settings(max_examples=20, deadline=None)
@given(eps=st.floats(0.05, 0.5), b=st.floats(0.1, 0.5))
def test_conservation_property(eps, b):
    tr = simulate(EpiParams(b, eps, 0.1), INIT, 50.0, 0.2)
    assert np.max(np.abs(tr.states.sum(axis=1) - 1.0)) <= 1e-9
