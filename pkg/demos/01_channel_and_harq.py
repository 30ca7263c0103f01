"""Two-state Markov channel with HARQ: how loss probability decays with retries."""

import numpy as np

from aoi_pomdp import ChannelModel, error_prob, sample_ack, stationary_distribution, step_channel
from aoi_pomdp.channel import Q_GB, T_C1, T_C2
from aoi_pomdp.model import FRESH, RETRANSMIT

# Two channels that spend the same long-run fraction of time... almost.
# T1 is "sticky" (long good and bad bursts), T2 forgets its state every slot.
for name, T in (("T1", T_C1), ("T2", T_C2)):
    print(name, "stationary distribution:", stationary_distribution(T))

# Loss probability of the r-th retransmission is q_j * lambda^r.
ch = ChannelModel(T_C1, Q_GB, 0.5, 3)
for lam in (0.25, 0.5, 1.0):
    c = ch.with_lambda(lam)
    table = [[error_prob(c, r, j) for r in range(4)] for j in range(2)]
    print(f"lambda={lam}: good {np.round(table[0], 4)}  bad {np.round(table[1], 4)}")
# lambda = 1 is plain ARQ: every attempt fails with the same probability

# Empirical check: a bad-state fresh packet is lost 80% of the time,
# a third retransmission in the good state only 2.5% of the time.
rng = np.random.default_rng(0)
n = 50_000
print("fresh, bad state  NACK rate:", 1 - np.mean([sample_ack(ch, 1, 0, FRESH, rng) for _ in range(n)]))
print("retx 3, good state NACK rate:", 1 - np.mean([sample_ack(ch, 0, 3, RETRANSMIT, rng) for _ in range(n)]))

# Burst lengths: the sticky channel stays bad for ~10 slots on average.
s, runs, length = 0, [], 0
for _ in range(200_000):
    s_next = step_channel(ch, s, rng)
    if s == 1:
        length += 1
        if s_next == 0:
            runs.append(length)
            length = 0
    s = s_next
print("mean bad-burst length under T1:", np.mean(runs))
