import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_pomdp import ACK, FRESH, NACK, RETRANSMIT, ChannelModel, ZeroLikelihoodError, ack_likelihood, belief_update
from aoi_pomdp.channel import Q_GB, T_C1
from aoi_pomdp.model import feasible_actions


def test_equal_loss_is_pure_prediction():
    ch = ChannelModel(T_C1, [0.4, 0.4], 0.5, 3)
    pi = np.array([0.3, 0.7])
    for z in (NACK, ACK):
        np.testing.assert_allclose(belief_update(ch, pi, 2, z, RETRANSMIT), pi @ T_C1, atol=1e-15)


def test_certainty_is_absorbing_under_identity():
    ch = ChannelModel(np.eye(2), Q_GB, 0.5, 3)
    for aoi in range(4):
        for action in feasible_actions(aoi, 3):
            for z in (NACK, ACK):
                np.testing.assert_array_equal(belief_update(ch, [1.0, 0.0], aoi, z, action), [1.0, 0.0])


def test_nack_example(channel):
    out = belief_update(channel, [0.5, 0.5], 0, NACK, FRESH)
    np.testing.assert_allclose(out, [0.27, 0.73], atol=1e-12)


def test_ack_likelihood_examples(channel):
    np.testing.assert_allclose(ack_likelihood(channel, [1.0, 0.0], 0, FRESH), [0.2, 0.8], atol=1e-15)
    np.testing.assert_allclose(ack_likelihood(channel, [0.5, 0.5], 0, FRESH), [0.5, 0.5], atol=1e-15)


def test_impossible_observation():
    ch = ChannelModel(T_C1, [0.0, 1.0], 0.5, 3)
    with pytest.raises(ZeroLikelihoodError):
        belief_update(ch, [1.0, 0.0], 0, NACK, FRESH)
    with pytest.raises(ZeroLikelihoodError):
        belief_update(ch, [0.0, 1.0], 0, ACK, FRESH)


def test_rejects_invalid_prior(channel):
    with pytest.raises(ValueError):
        belief_update(channel, [-0.1, 1.1], 0, ACK, FRESH)
    with pytest.raises(ValueError):
        belief_update(channel, [0.0, 0.0], 0, ACK, FRESH)
    with pytest.raises(ValueError):
        belief_update(channel, [0.2, 0.3, 0.5], 0, ACK, FRESH)


simplex = st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3)


@settings(max_examples=200)
@given(w=simplex, aoi=st.integers(0, 3), retx=st.booleans(), lam=st.floats(0.05, 1.0), seed=st.integers(0, 2**31))
def test_update_properties(w, aoi, retx, lam, seed):
    r = np.random.default_rng(seed)
    T = r.random((3, 3)) + 0.01
    T /= T.sum(axis=1, keepdims=True)
    ch = ChannelModel(T, r.uniform(0.05, 0.95, 3), lam, 3)
    pi = np.array(w) / sum(w)
    action = RETRANSMIT if retx and aoi > 0 else FRESH
    pz = ack_likelihood(ch, pi, aoi, action)
    assert abs(pz.sum() - 1.0) <= 1e-12
    total = np.zeros(3)
    for z in (NACK, ACK):
        post = belief_update(ch, pi, aoi, z, action)
        assert abs(post.sum() - 1.0) <= 1e-12
        assert np.all(post >= 0) and np.all(post <= 1)
        total += pz[z] * post
        # unnormalized prior gives the same posterior
        np.testing.assert_allclose(belief_update(ch, 7.5 * np.array(w), aoi, z, action), post, atol=1e-12)
    np.testing.assert_allclose(total, pi @ T, atol=1e-10)
