"""
Finite-horizon dynamic programming over (belief, AoI).

The value function is stored on a regular lattice of the belief simplex and
evaluated off-lattice by barycentric interpolation on the Freudenthal
triangulation of that lattice (plain linear interpolation for two channel
states). Successor beliefs of every lattice point do not depend on the time
step, so their interpolation stencils are computed once per solve and each
backward step is a gather plus a weighted sum.

:func:`exact_enumerate` expands the full action/observation tree with exact
beliefs and serves as an independent check of the grid solver.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .belief import ack_likelihood, as_belief, belief_update
from .channel import ChannelModel
from .model import (
    ACK,
    FRESH,
    NACK,
    RETRANSMIT,
    CostModel,
    aoi_next,
    feasible_actions,
    observation_vector,
    stage_cost,
    terminal_cost,
)

log = logging.getLogger(__name__)

MAX_GRID_POINTS = 5_000_000
MAX_ORACLE_HORIZON = 12
# Retransmission wins only if cheaper by more than this relative margin.
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class BeliefGrid:
    """Regular lattice on the probability simplex.

    ``counts[i]`` are the integer lattice coordinates of ``points[i]``
    (``points = counts / resolution``), listed in lexicographic order.
    """

    points: np.ndarray
    counts: np.ndarray
    resolution: int

    @property
    def n_c(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def _codes(self, counts):
        base = self.resolution + 1
        code = np.zeros(counts.shape[:-1], dtype=np.int64)
        for i in range(self.n_c - 1):
            code = code * base + counts[..., i]
        return code

    def index_of(self, counts) -> np.ndarray:
        """Grid indices of lattice coordinates (last axis = channel states)."""
        codes = self._codes(np.asarray(counts, dtype=np.int64))
        return np.searchsorted(self._codes(self.counts), codes)


def build_belief_grid(n_c: int, resolution: int) -> BeliefGrid:
    """All simplex points whose coordinates are multiples of ``1/resolution``."""
    if n_c < 2:
        raise ValueError("need at least two channel states")
    if resolution < 1:
        raise ValueError("resolution must be at least 1")
    size = math.comb(resolution + n_c - 1, n_c - 1)
    if size > MAX_GRID_POINTS:
        raise ValueError(f"grid would have {size} points (limit {MAX_GRID_POINTS})")
    rows = [
        head + (resolution - sum(head),)
        for head in itertools.product(range(resolution + 1), repeat=n_c - 1)
        if sum(head) <= resolution
    ]
    counts = np.array(rows, dtype=np.int64)
    points = counts / resolution
    counts.setflags(write=False)
    points.setflags(write=False)
    return BeliefGrid(points, counts, resolution)


def interpolation_stencil(grid: BeliefGrid, beliefs):
    """Vertex indices and barycentric weights for each belief.

    Returns ``(idx, w)``, both of shape ``(K, n_c)``; ``values[idx] @ w``
    row-wise interpolates a function sampled on the grid.
    """
    b = np.atleast_2d(np.asarray(beliefs, dtype=float))
    K, n = b.shape
    res = grid.resolution
    # cumulative coordinates from the right: x_0 = res >= x_1 >= ... >= x_{n-1} >= 0
    x = res * np.cumsum(b[:, ::-1], axis=1)[:, ::-1]
    x[:, 0] = res
    x = np.clip(x, 0.0, res)
    x = np.minimum.accumulate(x, axis=1)
    v = np.floor(x)
    d = x - v
    order = np.argsort(-d[:, 1:], axis=1, kind="stable") + 1
    d_sorted = np.take_along_axis(d, order, axis=1)

    verts = np.empty((K, n, n))
    verts[:, 0, :] = v
    rows = np.arange(K)
    for step in range(1, n):
        verts[:, step, :] = verts[:, step - 1, :]
        verts[rows, step, order[:, step - 1]] += 1.0
    w = np.empty((K, n))
    w[:, 0] = 1.0 - d_sorted[:, 0]
    w[:, 1:-1] = d_sorted[:, :-1] - d_sorted[:, 1:]
    w[:, -1] = d_sorted[:, -1]

    counts = np.rint(verts - np.concatenate([verts[:, :, 1:], np.zeros((K, n, 1))], axis=2)).astype(np.int64)
    valid = np.all((counts >= 0) & (counts <= res), axis=2)
    # invalid vertices only arise with (numerically) zero weight
    counts = np.where(valid[:, :, None], counts, counts[:, :1, :])
    w = np.where(valid, np.clip(w, 0.0, None), 0.0)
    w = w / w.sum(axis=1, keepdims=True)
    idx = grid.index_of(counts)
    return idx, w


def interpolate(grid: BeliefGrid, values, beliefs) -> np.ndarray:
    """Interpolate ``values`` (one per grid point) at each belief."""
    idx, w = interpolation_stencil(grid, beliefs)
    return np.sum(np.asarray(values)[idx] * w, axis=1)


@dataclass(frozen=True, eq=False)
class ValueTable:
    """``values[k, i, aoi]`` for k = 0..N, grid point i."""

    values: np.ndarray
    grid: BeliefGrid

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


@dataclass(frozen=True, eq=False)
class Policy:
    """``actions[k, i, aoi]`` for k = 0..N-1, grid point i."""

    actions: np.ndarray
    grid: BeliefGrid

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]

    @property
    def n_r(self) -> int:
        return self.actions.shape[2] - 1

    def action(self, k: int, pi, aoi: int) -> int:
        return policy_action(self, k, pi, aoi)


def value_at(table: ValueTable, k: int, pi, aoi: int) -> float:
    return float(interpolate(table.grid, table.values[k, :, aoi], pi)[0])


@dataclass(frozen=True, eq=False)
class _Branch:
    """Precomputed outcome of taking ``action`` at ``aoi`` and observing ``z``, for every grid point."""

    action: int
    z: int
    next_aoi: int
    prob: np.ndarray
    idx: np.ndarray
    w: np.ndarray


def _plan(model: ChannelModel, grid: BeliefGrid):
    """Successor-belief stencils, keyed by (aoi, action)."""
    P = grid.points
    plan = {}
    for aoi in range(model.n_r + 1):
        for action in feasible_actions(aoi, model.n_r):
            branches = []
            for z in (NACK, ACK):
                joint = P * observation_vector(model, aoi, z, action)
                prob = joint.sum(axis=1)
                live = prob > 0.0
                post = np.tile(P[:1], (len(P), 1))
                post[live] = (joint[live] / prob[live, None]) @ model.Tc
                idx, w = interpolation_stencil(grid, post)
                w = np.where(live[:, None], w, 0.0)
                branches.append(_Branch(action, z, aoi_next(aoi, z, action, model.n_r), prob, idx, w))
            plan[aoi, action] = branches
    return plan


def _check_dims(model: ChannelModel, cost: CostModel, grid: BeliefGrid):
    if cost.n_r != model.n_r:
        raise ValueError(f"cost table covers n_r={cost.n_r}, channel has n_r={model.n_r}")
    if cost.n_c != model.n_c or grid.n_c != model.n_c:
        raise ValueError("channel, cost and grid disagree on the number of channel states")


def _q_values(plan, cost: CostModel, grid: BeliefGrid, V_next, rows):
    """Q-values ``[rows, aoi, action]``; infeasible actions are +inf."""
    P = grid.points[rows]
    n_s = cost.n_r + 1
    Q = np.full((len(P), n_s, 2), np.inf)
    for (aoi, action), branches in plan.items():
        q = cost.trace_table[aoi] + P @ cost.energy[:, action]
        for br in branches:
            cont = np.sum(V_next[br.idx[rows], br.next_aoi] * br.w[rows], axis=1)
            q = q + br.prob[rows] * cont
        Q[:, aoi, action] = q
    return Q


def _greedy(Q):
    q_fresh, q_retx = Q[..., FRESH], Q[..., RETRANSMIT]
    retx = q_retx < q_fresh - TIE_RTOL * np.maximum(1.0, np.abs(q_fresh))
    actions = np.where(retx, RETRANSMIT, FRESH).astype(np.int8)
    return np.where(retx, q_retx, q_fresh), actions


def terminal_values(cost: CostModel, grid: BeliefGrid) -> np.ndarray:
    """Terminal layer ``[grid point, aoi]``; the terminal cost does not depend on the channel."""
    return np.tile(cost.terminal_trace_table, (len(grid), 1))


def dp_backup(model: ChannelModel, cost: CostModel, grid: BeliefGrid, V_next, k: int = 0, plan=None, return_q=False):
    """One backward step of the dynamic program on the grid.

    Args:
        V_next: values ``[grid point, aoi]`` of step ``k + 1``.
        k: time index (the model is time-invariant; kept for logging).
        plan: cached successor stencils from a previous call (internal).
        return_q: also return the Q-value array ``[grid point, aoi, action]``.

    Returns:
        ``(V, actions)`` with ``V[i, aoi]`` the minimal expected cost-to-go and
        ``actions[i, aoi]`` the minimizing action (fresh on ties).
    """
    _check_dims(model, cost, grid)
    V_next = np.asarray(V_next, dtype=float)
    if V_next.shape != (len(grid), model.n_r + 1):
        raise ValueError(f"V_next has shape {V_next.shape}, expected {(len(grid), model.n_r + 1)}")
    if plan is None:
        plan = _plan(model, grid)
    Q = _q_values(plan, cost, grid, V_next, slice(None))
    V, actions = _greedy(Q)
    log.debug("backup k=%d: V range [%.4f, %.4f]", k, V.min(), V.max())
    return (V, actions, Q) if return_q else (V, actions)


def solve_finite_horizon(model: ChannelModel, cost: CostModel, grid: BeliefGrid, N: int, workers: int = 1):
    """Backward induction over ``N`` stages.

    With ``workers > 1`` each stage is split into blocks of grid points
    evaluated on a thread pool; blocks only read the previous stage, so the
    result does not depend on ``workers``.

    Returns:
        (ValueTable, Policy)
    """
    if N < 1:
        raise ValueError("horizon N must be at least 1")
    _check_dims(model, cost, grid)
    plan = _plan(model, grid)
    M, n_s = len(grid), model.n_r + 1
    values = np.empty((N + 1, M, n_s))
    actions = np.empty((N, M, n_s), dtype=np.int8)
    values[N] = terminal_values(cost, grid)

    blocks = np.array_split(np.arange(M), workers)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k in range(N - 1, -1, -1):
            V_next = values[k + 1]
            if pool is None:
                Q = _q_values(plan, cost, grid, V_next, slice(None))
            else:
                Q = np.concatenate(list(pool.map(lambda rows: _q_values(plan, cost, grid, V_next, rows), blocks)))
            values[k], actions[k] = _greedy(Q)
    finally:
        if pool is not None:
            pool.shutdown()
    values.setflags(write=False)
    actions.setflags(write=False)
    return ValueTable(values, grid), Policy(actions, grid)


def exact_enumerate(model: ChannelModel, cost: CostModel, pi0, aoi0: int, N: int) -> float:
    """Optimal N-stage cost from ``(pi0, aoi0)`` by full tree expansion.

    Carries exact beliefs through every action/observation branch; no grid.
    Cost grows like ``4**N``.

    Raises:
        ValueError: for ``N > 12``.
    """
    if N > MAX_ORACLE_HORIZON:
        raise ValueError(f"horizon {N} too large for exhaustive enumeration (limit {MAX_ORACLE_HORIZON})")
    if N < 0:
        raise ValueError("horizon must be nonnegative")
    _check_dims(model, cost, build_belief_grid(model.n_c, 1))
    pi0 = as_belief(pi0, model.n_c)

    def expected_cost(steps_left, pi, aoi):
        if steps_left == 0:
            return sum(pi[j] * terminal_cost(cost, j, aoi) for j in range(model.n_c))
        best = np.inf
        for action in feasible_actions(aoi, model.n_r):
            total = sum(pi[j] * stage_cost(cost, j, aoi, action) for j in range(model.n_c))
            pz = ack_likelihood(model, pi, aoi, action)
            for z in (NACK, ACK):
                if pz[z] <= 0.0:
                    continue
                nxt = belief_update(model, pi, aoi, z, action)
                total += pz[z] * expected_cost(steps_left - 1, nxt, aoi_next(aoi, z, action, model.n_r))
            best = min(best, total)
        return best

    return float(expected_cost(N, pi0, aoi0))


def policy_action(policy: Policy, k: int, pi, aoi: int) -> int:
    """Action stored at the grid point nearest to ``pi`` (fresh on distance ties)."""
    if aoi == 0:
        return FRESH
    if not 0 <= k < policy.horizon:
        raise ValueError(f"time step {k} outside policy horizon {policy.horizon}")
    pi = np.asarray(pi, dtype=float)
    dist = np.sum((policy.grid.points - pi) ** 2, axis=1)
    nearest = dist <= dist.min() + 1e-12
    candidates = policy.actions[k, nearest, aoi]
    return FRESH if np.any(candidates == FRESH) else RETRANSMIT
