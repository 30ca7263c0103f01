"""Solve the scheduling problem on a belief grid and look at the policy."""

import numpy as np

from aoi_pomdp import CostModel, build_belief_grid, exact_enumerate, solve_finite_horizon, value_at
from aoi_pomdp.config import load_config
from aoi_pomdp.model import FRESH

exp = load_config("paper-section-5")
grid = build_belief_grid(2, 100)

# With the default energies (retransmitting costs 1.5 vs 1.0 for a fresh
# packet) the solver never retransmits: the extra energy is not worth it.
table, policy = solve_finite_horizon(exp.channel, exp.cost, grid, 50)
print("retransmissions in default policy:", int(np.sum(policy.actions == 0)))

# Make the premium small and the trade-off appears. In the bad state a fresh
# packet is lost 80% of the time while a combined retransmission does much
# better, so the sensor retransmits when it believes the channel is bad and
# starts over with fresh data when it believes the channel is good.
cost = CostModel(exp.cost.trace_table, np.tile([0.05, 0.0], (2, 1)))
table, policy = solve_finite_horizon(exp.channel, cost, grid, 50)
for aoi in (1, 2, 3):
    fresh_at = grid.points[policy.actions[0, :, aoi] == FRESH, 0]
    if 0 < len(fresh_at) < len(grid):
        print(f"aoi={aoi}: fresh when P(good) >= {fresh_at.min():.2f}, otherwise retransmit")
    else:
        print(f"aoi={aoi}: always {'fresh' if len(fresh_at) else 'retransmit'}")

# The grid value agrees with brute-force enumeration of the decision tree.
for p_good in (0.1, 0.5, 0.9):
    pi = [p_good, 1 - p_good]
    short, _ = solve_finite_horizon(exp.channel, cost, grid, 6)
    print(f"P(good)={p_good}: grid {value_at(short, 0, pi, 3):.6f}  exact {exact_enumerate(exp.channel, cost, pi, 3, 6):.6f}")
