"""Sensor Kalman filter and the remote error covariance as a function of packet age."""

import numpy as np

from aoi_pomdp import KalmanState, LtiModel, aoi_cov_table, kf_step, simulate_step, steady_state_covariance
from aoi_pomdp.lti import PlantState

A = np.array([[0.9974, 0.0539], [-0.1078, 0.1591]])
lti = LtiModel(A, [[1.0, 0.0]], 0.25 * np.eye(2), [[0.05]], np.eye(2))

# The covariance recursion does not look at the data, so it has a fixed point.
P_bar = steady_state_covariance(lti)
print("steady-state sensor covariance:\n", P_bar)
print("trace:", np.trace(P_bar))

# Run the filter on a simulated trajectory and watch it settle.
rng = np.random.default_rng(1)
plant, kf = PlantState(np.zeros(2)), KalmanState(np.zeros(2), np.eye(2))
for k in range(8):
    plant, y = simulate_step(lti, plant, rng)
    kf = kf_step(lti, kf, y)
    print(f"k={k}  tr(P)={np.trace(kf.P):.6f}  error={np.linalg.norm(plant.x - kf.x_hat):.3f}")

# If the remote side last heard from the sensor q slots ago, its error
# covariance is the sensor's, pushed open-loop through q steps of the plant.
table = aoi_cov_table(lti, P_bar, 6)
for q, tr in enumerate(table.traces):
    print(f"age {q}: tr(P) = {tr:.4f}")
# Each slot of silence costs roughly another tr(R_w) = 0.5 ... minus what the
# stable dynamics forget; this is the price the scheduler trades against energy.
