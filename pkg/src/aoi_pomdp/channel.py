"""
Finite-state Markov packet-erasure channel with HARQ error decay.

Channel states are 0-based indices into the rows of ``Tc``; in the two-state
examples index 0 is the good state ``G`` and index 1 the bad state ``B``.
A packet transmitted for the ``r``-th time (``r = 0`` for a fresh packet) in
state ``j`` is lost with probability ``q[j] * lam**r``; ``lam = 1`` is plain
ARQ.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

STOCHASTIC_TOL = 1e-12

# Two-state matrices used throughout the tests and demos (rows/cols: G, B).
T_C1 = np.array([[0.95, 0.05], [0.1, 0.9]])
T_C2 = np.array([[0.5, 0.5], [0.5, 0.5]])
Q_GB = np.array([0.2, 0.8])


def check_stochastic(name, T, tol=STOCHASTIC_TOL):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {T.shape}")
    if np.any(T < 0.0) or np.any(T > 1.0):
        raise ValueError(f"{name} has entries outside [0, 1]")
    bad = np.flatnonzero(np.abs(T.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ValueError(f"{name} row {bad[0]} does not sum to 1")


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Channel transition matrix, fresh-packet error probabilities, HARQ decay and retry cap."""

    Tc: np.ndarray
    q: np.ndarray
    lam: float
    n_r: int

    def __post_init__(self):
        Tc = np.array(self.Tc, dtype=float)
        check_stochastic("Tc", Tc)
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.shape[0] != Tc.shape[0]:
            raise ValueError(f"q has {q.shape[0]} entries, expected {Tc.shape[0]}")
        if np.any(q < 0.0) or np.any(q > 1.0):
            raise ValueError("q entries must lie in [0, 1]")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lambda must lie in (0, 1], got {self.lam}")
        if int(self.n_r) != self.n_r or self.n_r < 1:
            raise ValueError(f"n_r must be a positive integer, got {self.n_r}")
        Tc.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Tc", Tc)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "n_r", int(self.n_r))

    @property
    def n_c(self) -> int:
        return self.Tc.shape[0]

    def with_lambda(self, lam: float) -> "ChannelModel":
        return ChannelModel(self.Tc, self.q, lam, self.n_r)

    def with_matrix(self, Tc) -> "ChannelModel":
        return ChannelModel(Tc, self.q, self.lam, self.n_r)


def _check_state(model: ChannelModel, s: int):
    if not 0 <= s < model.n_c:
        raise ValueError(f"channel state {s} out of range 0..{model.n_c - 1}")


def step_channel(model: ChannelModel, s: int, rng: np.random.Generator) -> int:
    """Draw the next channel state from row ``s`` of ``Tc``.

    Consumes exactly one uniform from ``rng`` (inverse-CDF sampling), so the
    channel path depends only on the generator state.
    """
    _check_state(model, s)
    u = rng.random()
    cdf = np.cumsum(model.Tc[s])
    return int(min(np.searchsorted(cdf, u, side="right"), model.n_c - 1))


def sample_initial(p, rng: np.random.Generator) -> int:
    """Draw a state index from the distribution ``p`` using one uniform."""
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, rng.random(), side="right"), len(cdf) - 1))


def error_prob(model: ChannelModel, r: int, j: int) -> float:
    """Loss probability of a packet on its ``r``-th retransmission in state ``j``."""
    if not 0 <= r <= model.n_r:
        raise ValueError(f"retransmission count {r} out of range 0..{model.n_r}")
    _check_state(model, j)
    return float(min(max(model.q[j] * model.lam**r, 0.0), 1.0))


def nack_prob(model: ChannelModel, s: int, aoi: int, action: int) -> float:
    """Probability of a NACK given the channel state, AoI and action.

    A fresh packet (action 1) has never been sent before; a retransmission
    (action 0) at AoI ``aoi`` is that packet's ``aoi``-th retransmission.
    """
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action}")
    if not 0 <= aoi <= model.n_r:
        raise ValueError(f"aoi {aoi} out of range 0..{model.n_r}")
    if action == 0 and aoi == 0:
        raise ValueError("retransmission requested with no pending packet (aoi = 0)")
    return error_prob(model, 0 if action == 1 else aoi, s)


def sample_ack(model: ChannelModel, s: int, aoi: int, action: int, rng: np.random.Generator) -> int:
    """Return 1 (ACK) or 0 (NACK). Consumes exactly one uniform."""
    p = nack_prob(model, s, aoi, action)
    return 0 if rng.random() < p else 1


def stationary_distribution(Tc, tol: float = 1e-12, max_iter: int = 1_000_000):
    """Invariant distribution of an irreducible aperiodic chain by power iteration.

    Iterates from every vertex of the simplex at once (the rows of ``Tc^k``);
    the chain has a unique limit only if all rows agree.

    Raises:
        ConvergenceError: if the rows do not agree within ``max_iter`` steps or
            stop moving while still disagreeing (reducible chain).
    """
    Tc = np.asarray(Tc, dtype=float)
    check_stochastic("Tc", Tc)
    M = np.eye(Tc.shape[0])
    spread = np.inf
    for it in range(1, max_iter + 1):
        M_next = M @ Tc
        moved = np.max(np.abs(M_next - M))
        M = M_next
        spread = np.max(M.max(axis=0) - M.min(axis=0))
        if spread <= tol and moved <= tol:
            break
        if moved == 0.0 and spread > tol:
            raise ConvergenceError("chain is not irreducible: power iteration stalled", last=M, residual=spread, iterations=it)
    else:
        raise ConvergenceError("power iteration did not converge", last=M, residual=spread, iterations=max_iter)
    p = M.mean(axis=0)
    p = p / p.sum()
    # one more application removes the averaging error for near-converged rows
    p = p @ Tc
    return p / p.sum()
