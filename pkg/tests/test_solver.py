import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_pomdp import (
    FRESH,
    RETRANSMIT,
    ChannelModel,
    CostModel,
    Policy,
    ValueTable,
    ack_likelihood,
    aoi_next,
    build_belief_grid,
    dp_backup,
    exact_enumerate,
    feasible_actions,
    policy_action,
    solve_finite_horizon,
    value_at,
)
from aoi_pomdp.channel import Q_GB, T_C1
from aoi_pomdp.solver import MAX_ORACLE_HORIZON, interpolate, terminal_values


# --- grid -------------------------------------------------------------------


def test_two_state_grid():
    g = build_belief_grid(2, 4)
    expected = {(0.0, 1.0), (0.25, 0.75), (0.5, 0.5), (0.75, 0.25), (1.0, 0.0)}
    assert {tuple(p) for p in g.points} == expected
    assert len(g) == 5


def test_three_state_grid():
    g = build_belief_grid(3, 2)
    assert len(g) == 6
    assert len({tuple(p) for p in g.points}) == 6
    np.testing.assert_allclose(g.points.sum(axis=1), 1.0)


def test_vertices_only():
    g = build_belief_grid(3, 1)
    assert {tuple(p) for p in g.points} == {tuple(v) for v in np.eye(3)}


def test_grid_limits():
    with pytest.raises(ValueError, match="points"):
        build_belief_grid(12, 500)
    with pytest.raises(ValueError):
        build_belief_grid(2, 0)


@pytest.mark.parametrize("n_c, res", [(2, 7), (3, 5), (4, 3)])
def test_grid_contains_vertices_and_indexes(n_c, res):
    g = build_belief_grid(n_c, res)
    for v in np.eye(n_c):
        assert np.any(np.all(g.points == v, axis=1))
    np.testing.assert_array_equal(g.index_of(g.counts), np.arange(len(g)))


# --- interpolation ----------------------------------------------------------


def table_from(values, grid):
    return ValueTable(np.asarray(values)[None, :, None], grid)


def test_value_at_grid_point():
    g = build_belief_grid(2, 10)
    vals = np.random.default_rng(1).random(len(g))
    t = table_from(vals, g)
    for i, p in enumerate(g.points):
        assert value_at(t, 0, p, 0) == pytest.approx(vals[i], abs=1e-14)


def test_midpoint_is_mean():
    g = build_belief_grid(2, 10)
    vals = np.random.default_rng(2).random(len(g))
    mid = 0.5 * (g.points[3] + g.points[4])
    assert value_at(table_from(vals, g), 0, mid, 0) == pytest.approx(0.5 * (vals[3] + vals[4]), abs=1e-14)


@pytest.mark.parametrize("n_c, res", [(2, 6), (3, 4), (4, 3)])
def test_linear_functions_reproduced(n_c, res):
    r = np.random.default_rng(n_c)
    g = build_belief_grid(n_c, res)
    c = r.normal(size=n_c)
    beliefs = r.dirichlet(np.ones(n_c), size=200)
    np.testing.assert_allclose(interpolate(g, g.points @ c, beliefs), beliefs @ c, atol=1e-12)


# --- backups ----------------------------------------------------------------


def zero_energy(channel, cost):
    return CostModel(cost.trace_table, np.zeros((channel.n_c, 2)))


def test_zero_continuation_gives_trace(channel, cost):
    c0 = zero_energy(channel, cost)
    g = build_belief_grid(2, 8)
    V, actions = dp_backup(channel, c0, g, np.zeros((len(g), 4)))
    np.testing.assert_allclose(V, np.tile(c0.trace_table, (len(g), 1)), atol=1e-15)
    assert np.all(actions == FRESH)


def test_aoi_zero_only_fresh(channel, cost):
    g = build_belief_grid(2, 8)
    V, actions, Q = dp_backup(channel, cost, g, terminal_values(cost, g), return_q=True)
    assert np.all(np.isinf(Q[:, 0, RETRANSMIT]))
    assert np.all(actions[:, 0] == FRESH)


def test_shape_checks(channel, cost):
    g = build_belief_grid(2, 4)
    with pytest.raises(ValueError):
        dp_backup(channel, cost, g, np.zeros((len(g), 3)))
    with pytest.raises(ValueError):
        dp_backup(channel, CostModel([0.1, 0.2], np.zeros((2, 2))), g, np.zeros((len(g), 4)))


def test_one_step_matches_oracle(channel, cost):
    g = build_belief_grid(2, 20)
    V, _ = dp_backup(channel, cost, g, terminal_values(cost, g))
    for i in range(0, len(g), 3):
        for aoi in range(4):
            assert V[i, aoi] == pytest.approx(exact_enumerate(channel, cost, g.points[i], aoi, 1), abs=1e-10)


def hand_one_step(channel, cost, pi, aoi):
    best = np.inf
    for action in feasible_actions(aoi, channel.n_r):
        pz = ack_likelihood(channel, pi, aoi, action)
        total = cost.trace_table[aoi] + pi @ cost.energy[:, action]
        total += sum(pz[z] * cost.terminal_trace_table[aoi_next(aoi, z, action, channel.n_r)] for z in (0, 1))
        best = min(best, total)
    return best


def test_single_stage_solve(channel, cost):
    c0 = zero_energy(channel, cost)
    g = build_belief_grid(2, 10)
    table, policy = solve_finite_horizon(channel, c0, g, 1)
    for i, p in enumerate(g.points):
        for aoi in range(4):
            assert table.values[0, i, aoi] == pytest.approx(hand_one_step(channel, c0, p, aoi), abs=1e-12)
            assert exact_enumerate(channel, c0, p, aoi, 1) == pytest.approx(hand_one_step(channel, c0, p, aoi), abs=1e-12)


def test_zero_likelihood_branches_are_skipped(cost):
    ch = ChannelModel(T_C1, [0.0, 1.0], 0.5, 3)
    g = build_belief_grid(2, 10)
    table, _ = solve_finite_horizon(ch, cost, g, 5)
    assert np.all(np.isfinite(table.values))


def test_solution_invariants(channel, cost):
    g = build_belief_grid(2, 50)
    table, policy = solve_finite_horizon(channel, cost, g, 30)
    assert np.all(np.isfinite(table.values)) and np.all(table.values >= 0)
    assert np.all(policy.actions[:, :, 0] == FRESH)
    np.testing.assert_array_equal(table.values[30], terminal_values(cost, g))
    assert policy.horizon == 30 and policy.n_r == 3


def test_workers_do_not_change_result(channel, cost):
    g = build_belief_grid(2, 64)
    t1, p1 = solve_finite_horizon(channel, cost, g, 15)
    t4, p4 = solve_finite_horizon(channel, cost, g, 15, workers=4)
    np.testing.assert_array_equal(t1.values, t4.values)
    np.testing.assert_array_equal(p1.actions, p4.actions)


def test_three_state_channel_solves():
    T = np.array([[0.8, 0.15, 0.05], [0.1, 0.8, 0.1], [0.05, 0.15, 0.8]])
    ch = ChannelModel(T, [0.1, 0.5, 0.9], 0.4, 2)
    cost = CostModel([0.3, 0.6, 0.9], np.tile([0.4, 0.3], (3, 1)))
    g = build_belief_grid(3, 30)
    table, _ = solve_finite_horizon(ch, cost, g, 3)
    for pi in ([1, 0, 0], [0.2, 0.3, 0.5], [0.6, 0.1, 0.3]):
        for aoi in range(3):
            assert value_at(table, 0, pi, aoi) == pytest.approx(exact_enumerate(ch, cost, pi, aoi, 3), rel=5e-3)


def test_refinement_shrinks_gap(channel, cost):
    fine = build_belief_grid(2, 400)
    ref, _ = solve_finite_horizon(channel, cost, fine, 8)
    shared = np.linspace(0, 1, 5)
    gaps = []
    for res in (8, 16, 32, 64, 128):
        table, _ = solve_finite_horizon(channel, cost, build_belief_grid(2, res), 8)
        gaps.append(max(abs(value_at(table, 0, [p, 1 - p], a) - value_at(ref, 0, [p, 1 - p], a)) for p in shared for a in range(4)))
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))


# --- oracle -----------------------------------------------------------------


def test_oracle_guard(channel, cost):
    with pytest.raises(ValueError, match=str(MAX_ORACLE_HORIZON)):
        exact_enumerate(channel, cost, [0.5, 0.5], 0, MAX_ORACLE_HORIZON + 1)


def test_oracle_zero_horizon_is_terminal(channel, cost):
    assert exact_enumerate(channel, cost, [0.3, 0.7], 2, 0) == pytest.approx(cost.terminal_trace_table[2], abs=1e-15)


def test_oracle_permutation_symmetry(channel, cost):
    perm = [1, 0]
    swapped = ChannelModel(channel.Tc[np.ix_(perm, perm)], channel.q[perm], channel.lam, channel.n_r)
    energy = np.array([[1.5, 1.0], [2.5, 1.2]])
    c = CostModel(cost.trace_table, energy)
    cs = CostModel(cost.trace_table, energy[perm])
    for pi in ([0.3, 0.7], [0.9, 0.1]):
        for aoi in (0, 2):
            a = exact_enumerate(channel, c, pi, aoi, 4)
            b = exact_enumerate(swapped, cs, np.array(pi)[perm], aoi, 4)
            assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(p1=st.floats(0, 1), p2=st.floats(0, 1), t=st.floats(0, 1), aoi=st.integers(0, 3))
def test_oracle_value_is_concave(p1, p2, t, aoi):
    ch = ChannelModel(T_C1, Q_GB, 0.5, 3)
    cost = CostModel([0.29971218, 0.55021609, 0.8021603, 1.05081073], np.tile([1.5, 1.0], (2, 1)))
    v = lambda p: exact_enumerate(ch, cost, [p, 1 - p], aoi, 3)
    pm = t * p1 + (1 - t) * p2
    assert v(pm) >= t * v(p1) + (1 - t) * v(p2) - 1e-9


# --- equal-loss ARQ structure -------------------------------------------------
# With lambda = 1 and q_G = q_B both actions see the same ACK probability, but a
# failed retransmission at the cap discards the packet (AoI 0) while a failed
# fresh send restarts at AoI 1, so equivalence needs a flat trace table.


def test_actions_equivalent_for_flat_costs():
    ch = ChannelModel(T_C1, [0.4, 0.4], 1.0, 1)
    cost = CostModel([0.7, 0.7], np.zeros((2, 2)))
    g = build_belief_grid(2, 20)
    _, _, Q = dp_backup(ch, cost, g, terminal_values(cost, g), return_q=True)
    np.testing.assert_allclose(Q[:, 1, RETRANSMIT], Q[:, 1, FRESH], atol=1e-10)
    table, _ = solve_finite_horizon(ch, cost, g, 6)
    V_next = table.values[1]
    _, _, Q = dp_backup(ch, cost, g, V_next, return_q=True)
    np.testing.assert_allclose(Q[:, 1, RETRANSMIT], Q[:, 1, FRESH], atol=1e-10)


def test_fresh_no_worse_below_cap_for_equal_loss(channel, cost):
    ch = ChannelModel(T_C1, [0.4, 0.4], 1.0, 3)
    c = CostModel(cost.trace_table, np.ones((2, 2)))
    g = build_belief_grid(2, 20)
    table, _ = solve_finite_horizon(ch, c, g, 6)
    for k in range(6):
        _, _, Q = dp_backup(ch, c, g, table.values[k + 1], return_q=True)
        for aoi in (1, 2):
            assert np.all(Q[:, aoi, FRESH] <= Q[:, aoi, RETRANSMIT] + 1e-12)


# --- policy lookup ------------------------------------------------------------


def test_policy_action_lookup():
    g = build_belief_grid(2, 2)
    actions = np.zeros((1, 3, 3), dtype=np.int8)
    actions[0, :, 0] = FRESH
    actions[0, 0, 1] = FRESH  # grid point (0, 1)
    policy = Policy(actions, g)
    assert policy_action(policy, 0, [0.5, 0.5], 0) == FRESH
    assert policy_action(policy, 0, [0.5, 0.5], 1) == RETRANSMIT
    assert policy_action(policy, 0, [0.0, 1.0], 1) == FRESH
    # (0.25, 0.75) is equidistant from (0, 1) and (0.5, 0.5)
    assert policy_action(policy, 0, [0.25, 0.75], 1) == FRESH
    assert policy_action(policy, 0, [0.3, 0.7], 1) == RETRANSMIT
    with pytest.raises(ValueError):
        policy_action(policy, 1, [0.5, 0.5], 1)


def test_policy_action_on_grid_points(channel, cost):
    c = CostModel(cost.trace_table, np.zeros((2, 2)))
    g = build_belief_grid(2, 20)
    _, policy = solve_finite_horizon(channel.with_lambda(0.1), c, g, 10)
    for k in (0, 5, 9):
        for i, p in enumerate(g.points):
            for aoi in range(4):
                assert policy_action(policy, k, p, aoi) == policy.actions[k, i, aoi]
