"""
Augmented-state POMDP: (channel state, AoI) dynamics, kernels and costs.

Actions: ``FRESH = 1`` sends the current sensor estimate, ``RETRANSMIT = 0``
resends the pending packet. Observations: ``ACK = 1``, ``NACK = 0``.

The AoI update is deterministic given (ACK, action), so the joint
AoI/observation kernel reduces to the observation probability times an
indicator on :func:`aoi_next`.
"""

from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel, nack_prob
from .lti import LtiModel, aoi_cov_table, steady_state_covariance

RETRANSMIT = 0
FRESH = 1
NACK = 0
ACK = 1

DEFAULT_ENERGY_FRESH = 1.0
DEFAULT_ENERGY_RETRANSMIT = 1.5


def feasible_actions(aoi: int, n_r: int) -> tuple:
    """Actions allowed at ``aoi``; fresh is listed first."""
    if not 0 <= aoi <= n_r:
        raise ValueError(f"aoi {aoi} out of range 0..{n_r}")
    return (FRESH,) if aoi == 0 else (FRESH, RETRANSMIT)


def _check_feasible(aoi, action, n_r):
    if action not in feasible_actions(aoi, n_r):
        raise ValueError(f"action {action} is infeasible at aoi {aoi}")


def aoi_next(aoi: int, z: int, action: int, n_r: int) -> int:
    """AoI after one slot.

    0 after an ACK; 1 after a lost fresh packet; ``aoi + 1`` after a lost
    retransmission, except at the retry cap where the packet is dropped and
    the AoI resets to 0 so the next slot sends a fresh packet.
    """
    _check_feasible(aoi, action, n_r)
    if z == ACK:
        return 0
    if action == FRESH:
        return 1
    return aoi + 1 if aoi < n_r else 0


def observation_prob(model: ChannelModel, i: int, aoi: int, z: int, action: int) -> float:
    """Pr(z | channel state i, AoI, action)."""
    _check_feasible(aoi, action, model.n_r)
    p_nack = nack_prob(model, i, aoi, action)
    return p_nack if z == NACK else 1.0 - p_nack


def observation_vector(model: ChannelModel, aoi: int, z: int, action: int) -> np.ndarray:
    """Pr(z | i, aoi, action) for every channel state i."""
    return np.array([observation_prob(model, i, aoi, z, action) for i in range(model.n_c)])


def transition_prob(model: ChannelModel, src: tuple, action: int, dst: tuple) -> float:
    """Pr((channel', aoi') | (channel, aoi), action) for augmented states given as pairs."""
    (i, aoi), (j, aoi_to) = src, dst
    _check_feasible(aoi, action, model.n_r)
    total = 0.0
    for z in (NACK, ACK):
        if aoi_next(aoi, z, action, model.n_r) == aoi_to:
            total += observation_prob(model, i, aoi, z, action)
    return total * model.Tc[i, j]


def transition_matrix(model: ChannelModel, action: int) -> np.ndarray:
    """Dense kernel over augmented states, indexed ``[(i, l), (j, q)]``.

    Rows for states where ``action`` is infeasible are left at zero.
    """
    n_c, n_s = model.n_c, model.n_r + 1
    T = np.zeros((n_c, n_s, n_c, n_s))
    for i in range(n_c):
        for aoi in range(n_s):
            if action not in feasible_actions(aoi, model.n_r):
                continue
            for z in (NACK, ACK):
                q = aoi_next(aoi, z, action, model.n_r)
                T[i, aoi, :, q] += observation_prob(model, i, aoi, z, action) * model.Tc[i]
    return T


@dataclass(frozen=True, eq=False)
class CostModel:
    """Stage and terminal cost tables.

    Args:
        trace_table: Tr(P) of the remote covariance for each AoI 0..n_r.
        energy: array ``[j, action]`` of transmission energy in channel state j.
        terminal_trace_table: terminal cost per AoI; defaults to ``trace_table``.
    """

    trace_table: np.ndarray
    energy: np.ndarray
    terminal_trace_table: np.ndarray = None

    def __post_init__(self):
        trace = np.array(self.trace_table, dtype=float).reshape(-1)
        energy = np.array(self.energy, dtype=float)
        terminal = trace.copy() if self.terminal_trace_table is None else np.array(self.terminal_trace_table, dtype=float).reshape(-1)
        if energy.ndim != 2 or energy.shape[1] != 2:
            raise ValueError(f"energy must have shape (n_c, 2), got {energy.shape}")
        if terminal.shape != trace.shape:
            raise ValueError("terminal_trace_table must match trace_table in length")
        for name, arr in (("trace_table", trace), ("energy", energy), ("terminal_trace_table", terminal)):
            if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} entries must be finite and nonnegative")
        if np.any(energy[:, RETRANSMIT] < energy[:, FRESH]):
            raise ValueError("retransmission energy must be at least the fresh-transmission energy")
        for arr in (trace, energy, terminal):
            arr.setflags(write=False)
        object.__setattr__(self, "trace_table", trace)
        object.__setattr__(self, "energy", energy)
        object.__setattr__(self, "terminal_trace_table", terminal)

    @property
    def n_r(self) -> int:
        return self.trace_table.shape[0] - 1

    @property
    def n_c(self) -> int:
        return self.energy.shape[0]

    @classmethod
    def from_lti(cls, lti: LtiModel, n_c: int, n_r: int, energy=None, terminal_trace_table=None, P_bar=None):
        """Cost tables from the steady-state remote covariances of ``lti``.

        ``energy`` defaults to 1.0 for a fresh packet and 1.5 for a
        retransmission in every channel state.
        """
        if P_bar is None:
            P_bar = steady_state_covariance(lti)
        table = aoi_cov_table(lti, P_bar, n_r)
        if energy is None:
            energy = np.tile([DEFAULT_ENERGY_RETRANSMIT, DEFAULT_ENERGY_FRESH], (n_c, 1))
        return cls(table.traces, energy, terminal_trace_table)


def stage_cost(cost: CostModel, j: int, aoi: int, action: int) -> float:
    _check_feasible(aoi, action, cost.n_r)
    return float(cost.trace_table[aoi] + cost.energy[j, action])


def terminal_cost(cost: CostModel, j: int, aoi: int) -> float:
    """Terminal cost; ``j`` is accepted for symmetry with :func:`stage_cost` and ignored."""
    if not 0 <= aoi <= cost.n_r:
        raise ValueError(f"aoi {aoi} out of range 0..{cost.n_r}")
    return float(cost.terminal_trace_table[aoi])
