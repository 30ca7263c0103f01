"""Transmission scheduling for remote state estimation over a hidden Markov channel with HARQ."""

__version__ = "0.1.0"

from .belief import ack_likelihood, belief_update
from .channel import ChannelModel, error_prob, sample_ack, stationary_distribution, step_channel
from .errors import ConvergenceError, NumericalError, ZeroLikelihoodError
from .lti import (
    AoiCovTable,
    KalmanState,
    LtiModel,
    PlantState,
    aoi_cov_table,
    kf_step,
    remote_cov_recursion,
    simulate_step,
    steady_state_covariance,
)
from .model import (
    ACK,
    FRESH,
    NACK,
    RETRANSMIT,
    CostModel,
    aoi_next,
    feasible_actions,
    observation_prob,
    stage_cost,
    terminal_cost,
    transition_prob,
)
from .sim import Metrics, SimConfig, TraceRecord, baseline_policy, monte_carlo, run_episode, sweep_lambda
from .solver import (
    BeliefGrid,
    Policy,
    ValueTable,
    build_belief_grid,
    dp_backup,
    exact_enumerate,
    policy_action,
    solve_finite_horizon,
    value_at,
)
