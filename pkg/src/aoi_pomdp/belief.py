"""Bayes recursion for the belief over the hidden channel state."""

import numpy as np

from .channel import ChannelModel
from .errors import ZeroLikelihoodError
from .model import observation_vector

SIMPLEX_TOL = 1e-12
MIN_LIKELIHOOD = 1e-300


def as_belief(pi, n_c=None) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    pi = np.asarray(pi, dtype=float).reshape(-1)
    if n_c is not None and pi.shape[0] != n_c:
        raise ValueError(f"belief has {pi.shape[0]} entries, expected {n_c}")
    if np.any(pi < -SIMPLEX_TOL) or abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError(f"belief {pi} is not on the probability simplex")
    return pi


def ack_likelihood(model: ChannelModel, pi, aoi: int, action: int) -> np.ndarray:
    """``[Pr(NACK), Pr(ACK)]`` given belief ``pi``, AoI and action."""
    pi = np.asarray(pi, dtype=float)
    p_nack = float(observation_vector(model, aoi, 0, action) @ pi)
    return np.array([p_nack, 1.0 - p_nack])


def _update_unnormalized(model, weights, aoi, z, action):
    likelihood = observation_vector(model, aoi, z, action)
    joint = likelihood * weights
    evidence = joint.sum()
    if evidence <= MIN_LIKELIHOOD * weights.sum():
        raise ZeroLikelihoodError(f"observation z={z} has zero probability under belief {weights / weights.sum()}")
    return (joint / evidence) @ model.Tc


def belief_update(model: ChannelModel, pi, aoi: int, z: int, action: int) -> np.ndarray:
    """Posterior over next slot's channel state after observing ``z``.

    Conditions on ``z`` with the observation kernel, then predicts one step
    through ``Tc``. Nonnegative weights that do not sum to one are treated as
    an unnormalized prior.

    Raises:
        ZeroLikelihoodError: if ``z`` is impossible under ``pi``.
    """
    weights = np.asarray(pi, dtype=float).reshape(-1)
    if weights.shape[0] != model.n_c or np.any(weights < 0.0) or weights.sum() <= 0.0:
        raise ValueError(f"invalid prior weights {weights}")
    out = _update_unnormalized(model, weights, aoi, z, action)
    out = np.clip(out, 0.0, None)
    return out / out.sum()
