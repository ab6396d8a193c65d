import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aopinn.errors import DomainError, SingularityError
from aopinn.recon import ReconConfig, reconstruct
from aopinn.seir import ObservationSet, eval_many

T0 = ObservationSet(np.array([0.0]), np.array([0.01]), np.array([-0.001]), np.array([0.0006148]))


def test_hand_point_true_epsilon():
    out = reconstruct(T0, ReconConfig(0.2, 0.26, 0.1))
    assert out.pseudo_s[0] == pytest.approx(0.99, abs=1e-12)
    assert out.pseudo_e[0] == pytest.approx(0.0, abs=1e-15)
    assert out.pseudo_r[0] == pytest.approx(0.0, abs=1e-12)


def test_hand_point_wrong_epsilon():
    out = reconstruct(T0, ReconConfig(0.4, 0.26, 0.1))
    assert out.pseudo_e[0] == pytest.approx(0.0, abs=1e-15)
    assert out.pseudo_s[0] == pytest.approx(0.0005148 / 0.00104, rel=1e-12)
    assert out.pseudo_s[0] == pytest.approx(0.495, rel=1e-12)


def test_round_trip_against_simulator(truth, obs_train):
    out = reconstruct(obs_train, ReconConfig(0.2, 0.26, 0.1))
    x = eval_many(truth, obs_train.times)
    assert np.max(np.abs(out.pseudo_s - x[:, 0])) <= 1e-6
    assert np.max(np.abs(out.pseudo_e - x[:, 1])) <= 1e-6
    assert np.max(np.abs(out.pseudo_r - x[:, 3])) <= 1e-6


def test_complement_is_exact(obs_train):
    out = reconstruct(obs_train, ReconConfig(0.23, 0.26, 0.1))
    total = out.pseudo_s + out.pseudo_e + out.i_obs + out.pseudo_r
    np.testing.assert_allclose(total, 1.0, rtol=0, atol=1e-15)


@given(st.floats(0.01, 0.5), st.floats(1.5, 4.0))
def test_e_scales_inversely_with_epsilon(eps, k):
    obs = ObservationSet(np.array([1.0]), np.array([0.02]), np.array([0.003]), np.array([0.0]))
    a = reconstruct(obs, ReconConfig(eps, 0.26, 0.1))
    b = reconstruct(obs, ReconConfig(eps * k, 0.26, 0.1))
    assert b.pseudo_e[0] == pytest.approx(a.pseudo_e[0] / k, rel=1e-12)


def test_singularity_names_point():
    obs = ObservationSet(np.array([0.0, 5.0]), np.array([0.01, 0.0]), np.zeros(2), np.zeros(2))
    with pytest.raises(SingularityError, match="point 1"):
        reconstruct(obs, ReconConfig(0.2, 0.26, 0.1))


def test_epsilon_domain():
    with pytest.raises(DomainError):
        reconstruct(T0, ReconConfig(0.0, 0.26, 0.1))
    with pytest.raises(DomainError):
        ReconConfig(0.2, 0.26, 0.1, i_floor=0.0)
