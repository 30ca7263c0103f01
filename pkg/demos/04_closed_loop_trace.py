"""One closed-loop episode: belief, age, actions and estimation error over time."""

from pathlib import Path

import numpy as np

from aoi_pomdp import CostModel, SimConfig, run_episode
from aoi_pomdp.config import load_config
from aoi_pomdp.plot import line_chart_svg

exp = load_config("paper-section-5")
cost = CostModel(exp.cost.trace_table, np.zeros((2, 2)))
cfg = SimConfig(exp.lti, exp.channel, cost, horizon=120, seed=3, resolution=100, burn_in=10)
recs = run_episode(cfg, 3)

print(" k  ch  P(G)  aoi act ack   sq_err")
for r in recs[:30]:
    act = "F" if r.action == 1 else "R"
    print(f"{r.k:2d}  {'GB'[r.channel_true]}  {r.belief[0]:.2f}   {r.aoi}   {act}   {r.ack}   {r.sq_err:.3f}")

ks = [r.k for r in recs]
series = [
    ("P(good)", ks, [r.belief[0] for r in recs], None),
    ("true state is good", ks, [1.0 - r.channel_true for r in recs], None),
    ("AoI / 3", ks, [r.aoi / 3 for r in recs], None),
    ("AoI covariance trace", ks, [r.aoi_mse for r in recs], None),
]
out = Path("demo_out")
out.mkdir(exist_ok=True)
(out / "closed_loop.svg").write_text(line_chart_svg(series, "slot", "value", "closed-loop episode"))
print("wrote", out / "closed_loop.svg")
