"""
Closed-loop Monte Carlo harness.

Per slot ``k`` the harness

1. advances the plant and runs the sensor's Kalman filter,
2. picks an action from the belief and AoI held at the start of the slot,
3. moves the channel to its state for slot ``k``,
4. draws ACK/NACK,
5. updates the remote estimate and covariance,
6. updates AoI and belief for slot ``k + 1``.

Randomness comes from three independent PCG64 streams (plant noise, channel
path, ACK draws) seeded from the episode seed with SplitMix64, so two runs
with the same seed see the same channel realization whatever the policy.
Run ``r`` of a Monte Carlo batch uses episode seed ``splitmix64(seed + r)``.
"""

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import __version__
from .belief import belief_update
from .channel import ChannelModel, sample_ack, sample_initial, stationary_distribution, step_channel
from .lti import (
    KalmanState,
    LtiModel,
    _riccati,
    initial_filter,
    initial_state,
    propagated_covariance,
    remote_cov_recursion,
    simulate_step,
)
from .model import FRESH, RETRANSMIT, CostModel, aoi_next, stage_cost
from .solver import Policy, build_belief_grid, solve_finite_horizon

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
BASELINES = ("always-fresh", "retransmit-to-cap")
STREAM_PLANT, STREAM_CHANNEL, STREAM_ACK = 1, 2, 3


def splitmix64(x: int) -> int:
    """SplitMix64 output function applied to ``x`` (64-bit wraparound)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def run_seed(master_seed: int, run: int) -> int:
    return splitmix64((master_seed + run) & MASK64)


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(splitmix64((seed & MASK64) ^ tag)))


@dataclass(frozen=True)
class Baseline:
    """Fixed decision rule used for comparison with the optimized policy."""

    name: str

    def action(self, k, pi, aoi) -> int:
        if aoi == 0 or self.name == "always-fresh":
            return FRESH
        return RETRANSMIT


def baseline_policy(name: str) -> Baseline:
    if name not in BASELINES:
        raise ValueError(f"unknown baseline {name!r}; expected one of {', '.join(BASELINES)}")
    return Baseline(name)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Experiment configuration.

    ``policy`` is a solved :class:`Policy`, a baseline name, or ``"optimal"``
    to solve on a grid of ``resolution`` before simulating.
    ``initial_belief`` defaults to the stationary distribution of the channel
    and is also the distribution of the initial channel state.
    """

    lti: LtiModel
    channel: ChannelModel
    cost: CostModel
    horizon: int
    runs: int = 1
    seed: int = 0
    policy: object = "optimal"
    resolution: int = 100
    burn_in: int = 50
    initial_belief: np.ndarray = None
    x_hat0: np.ndarray = None
    P0: np.ndarray = None
    workers: int = 1

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError(f"burn_in must lie in [0, horizon), got {self.burn_in}")
        if isinstance(self.policy, str) and self.policy != "optimal" and self.policy not in BASELINES:
            raise ValueError(f"unknown policy {self.policy!r}")

    def belief0(self) -> np.ndarray:
        if self.initial_belief is None:
            return stationary_distribution(self.channel.Tc)
        return np.asarray(self.initial_belief, dtype=float)


@dataclass
class TraceRecord:
    """One slot of a closed-loop episode.

    ``aoi`` and ``belief`` are the values the action was chosen from;
    ``remote_cov_trace`` and ``age`` (slots since the last ACK) describe the
    remote estimator after this slot's update. ``aoi_mse`` is the trace of
    the AoI-indexed remote covariance ``A^a P_s[k-a] A^aᵀ + Σ_{j<a} A^j R_w A^jᵀ``
    at ``a = aoi`` with the sensor's actual covariance history, i.e. the
    expected squared error the cost model assigns to this slot.
    """

    k: int
    x: np.ndarray
    x_hat_sensor: np.ndarray
    x_hat_remote: np.ndarray
    action: int
    ack: int
    aoi: int
    belief: np.ndarray
    channel_true: int
    sq_err: float
    stage_cost_incurred: float
    remote_cov_trace: float = 0.0
    age: int = 0
    aoi_mse: float = 0.0


@dataclass
class Metrics:
    """Monte Carlo aggregates over post-burn-in slots.

    ``mse_*`` use the realized squared error ``|x - x_hat_remote|^2``;
    ``aoi_mse_*`` use the AoI-indexed covariance trace of each slot, which
    depends on the run only through its channel/ACK realization.
    """

    mse_mean: float
    mse_std: float
    mean_cost: float
    ack_rate: float
    aoi_mse_mean: float = 0.0
    aoi_mse_std: float = 0.0
    per_run_mse: list = field(default_factory=list)
    per_run_aoi_mse: list = field(default_factory=list)
    per_run_cost: list = field(default_factory=list)
    per_run_ack_rate: list = field(default_factory=list)
    fresh_count: int = 0


def resolve_policy(config: SimConfig):
    """Turn ``config.policy`` into an object with ``action(k, pi, aoi)``."""
    policy = config.policy
    if isinstance(policy, str):
        if policy in BASELINES:
            return baseline_policy(policy)
        grid = build_belief_grid(config.channel.n_c, config.resolution)
        _, policy = solve_finite_horizon(config.channel, config.cost, grid, config.horizon)
        return policy
    if isinstance(policy, Policy) and policy.horizon < config.horizon:
        raise ValueError(f"policy horizon {policy.horizon} shorter than simulation horizon {config.horizon}")
    return policy


@dataclass(frozen=True, eq=False)
class FilterSchedule:
    """Data-independent part of the sensor filter over one episode.

    ``gains[k]`` and ``covs[k]`` are the Kalman gain and posterior covariance
    of slot ``k``; ``aoi_mse[k, a]`` is the trace of ``covs[k - a]``
    propagated open-loop over ``a`` slots (NaN where ``a > k``).
    """

    gains: np.ndarray
    covs: np.ndarray
    aoi_mse: np.ndarray


def filter_schedule(config: SimConfig) -> FilterSchedule:
    lti, n_r = config.lti, config.channel.n_r
    P = initial_filter(lti, config.x_hat0, config.P0).P
    gains, covs = [], []
    for _ in range(config.horizon):
        _, K, P = _riccati(lti, P)
        gains.append(K)
        covs.append(P)
    table = np.full((config.horizon, n_r + 1), np.nan)
    for k in range(config.horizon):
        for a in range(min(k, n_r) + 1):
            table[k, a] = np.trace(propagated_covariance(lti, covs[k - a], a))
    return FilterSchedule(np.array(gains), np.array(covs), table)


def run_episode(config: SimConfig, seed: int, rule=None, schedule: FilterSchedule = None) -> list:
    """Simulate one episode of ``config.horizon`` slots.

    ``rule`` is the resolved decision rule and ``schedule`` the precomputed
    filter gains; both are derived from the config when omitted.
    """
    rule = resolve_policy(config) if rule is None else rule
    schedule = filter_schedule(config) if schedule is None else schedule
    lti, channel, n_r = config.lti, config.channel, config.channel.n_r
    A, C = lti.A, lti.C
    plant_rng = stream(seed, STREAM_PLANT)
    channel_rng = stream(seed, STREAM_CHANNEL)
    ack_rng = stream(seed, STREAM_ACK)

    plant = initial_state(lti, plant_rng)
    sensor = initial_filter(lti, config.x_hat0, config.P0)
    x_hat = sensor.x_hat
    x_remote, P_remote = sensor.x_hat.copy(), sensor.P.copy()
    pending = None
    pi = config.belief0()
    aoi, age, s = 0, 0, None

    records = []
    for k in range(config.horizon):
        plant, y = simulate_step(lti, plant, plant_rng)
        x_prior = A @ x_hat
        x_hat = x_prior + schedule.gains[k] @ (y - C @ x_prior)
        sensor = KalmanState(x_hat, schedule.covs[k])

        action = rule.action(k, pi, aoi)
        if action == FRESH:
            pending = sensor.x_hat.copy()

        s = sample_initial(pi, channel_rng) if k == 0 else step_channel(channel, s, channel_rng)
        z = sample_ack(channel, s, aoi, action, ack_rng)

        if z:
            x_remote = pending.copy()
            age = 0
        else:
            x_remote = lti.A @ x_remote
            age += 1
        P_remote = remote_cov_recursion(lti, P_remote, z, sensor.P)
        err = plant.x - x_remote

        records.append(
            TraceRecord(
                k=k,
                x=plant.x.copy(),
                x_hat_sensor=sensor.x_hat.copy(),
                x_hat_remote=x_remote.copy(),
                action=int(action),
                ack=int(z),
                aoi=aoi,
                belief=np.array(pi),
                channel_true=s,
                sq_err=float(err @ err),
                stage_cost_incurred=stage_cost(config.cost, s, aoi, action),
                remote_cov_trace=float(np.trace(P_remote)),
                age=age,
                aoi_mse=float(schedule.aoi_mse[k, aoi]),
            )
        )
        pi = belief_update(channel, pi, aoi, z, action)
        aoi = aoi_next(aoi, z, action, n_r)
    return records


def _episode_summary(config: SimConfig, rule, run: int, schedule=None):
    recs = run_episode(config, run_seed(config.seed, run), rule, schedule)
    post = recs[config.burn_in:]
    return (
        float(np.mean([r.sq_err for r in post])),
        float(np.mean([r.aoi_mse for r in post])),
        float(np.mean([r.stage_cost_incurred for r in post])),
        float(np.mean([r.ack for r in recs])),
        sum(r.action == FRESH for r in recs),
    )


def _workers(config: SimConfig) -> int:
    cap = os.environ.get("AOI_POMDP_THREADS")
    workers = config.workers
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, min(workers, config.runs))


def _std(values):
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def monte_carlo(config: SimConfig, rule=None) -> Metrics:
    """Run ``config.runs`` independent episodes and aggregate post-burn-in metrics.

    Per-run MSE is the time average of the squared remote estimation error
    after ``burn_in`` slots; ``mse_std`` is the sample standard deviation
    across runs (0 for a single run). Results are ordered by run index
    regardless of ``workers``.
    """
    rule = resolve_policy(config) if rule is None else rule
    schedule = filter_schedule(config)
    workers = _workers(config)
    runs = range(config.runs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            n = config.runs
            out = list(pool.map(_episode_summary, [config] * n, [rule] * n, runs, [schedule] * n))
    else:
        out = [_episode_summary(config, rule, r, schedule) for r in runs]
    mse, aoi_mse, cost, ack, fresh = (list(col) for col in zip(*out))
    return Metrics(
        mse_mean=float(np.mean(mse)),
        mse_std=_std(mse),
        mean_cost=float(np.mean(cost)),
        ack_rate=float(np.mean(ack)),
        aoi_mse_mean=float(np.mean(aoi_mse)),
        aoi_mse_std=_std(aoi_mse),
        per_run_mse=mse,
        per_run_aoi_mse=aoi_mse,
        per_run_cost=cost,
        per_run_ack_rate=ack,
        fresh_count=int(sum(fresh)),
    )


def sweep_lambda(config: SimConfig, lambdas) -> list:
    """Re-solve and simulate for each HARQ decay value; rows in input order.

    Baseline policies are kept as they are; any other policy is re-solved
    for each ``lambda`` because the observation model depends on it.
    """
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("need at least one lambda value")
    policy = config.policy if isinstance(config.policy, str) and config.policy in BASELINES else "optimal"
    rows = []
    for lam in lambdas:
        cfg = replace(config, channel=config.channel.with_lambda(lam), policy=policy)
        log.info("sweep: lambda=%g", lam)
        rows.append((float(lam), monte_carlo(cfg)))
    return rows


# --- replay helpers -------------------------------------------------------


def sensor_covariances(lti: LtiModel, P0, n: int) -> np.ndarray:
    """Posterior sensor covariances for slots 0..n-1 starting from ``P0``."""
    out = np.empty((n, lti.n, lti.n))
    P = np.asarray(P0, dtype=float)
    for k in range(n):
        _, _, P = _riccati(lti, P)
        out[k] = P
    return out


def replay_remote_covariance(lti: LtiModel, acks, P_sensor, P_start):
    """Remote covariance per slot by the one-step recursion.

    ``P_sensor`` is either one matrix (steady-state substitution) or one per slot.
    """
    P_sensor = np.asarray(P_sensor, dtype=float)
    per_slot = P_sensor.ndim == 3
    P = np.asarray(P_start, dtype=float)
    out = []
    for k, z in enumerate(acks):
        P = remote_cov_recursion(lti, P, z, P_sensor[k] if per_slot else P_sensor)
        out.append(P)
    return np.array(out)


def closed_form_remote_covariance(lti: LtiModel, acks, P_sensor, P_start):
    """Remote covariance per slot from the time since the last ACK.

    Each slot's covariance is the covariance delivered at the last ACK,
    propagated open-loop over the slots since; before the first ACK the
    starting covariance ``P_start`` is treated as delivered at slot -1.
    """
    P_sensor = np.asarray(P_sensor, dtype=float)
    per_slot = P_sensor.ndim == 3
    out = []
    last_k, delivered = -1, np.asarray(P_start, dtype=float)
    for k, z in enumerate(acks):
        if z:
            last_k, delivered = k, (P_sensor[k] if per_slot else P_sensor)
        out.append(propagated_covariance(lti, delivered, k - last_k))
    return np.array(out)


def replay_beliefs(channel: ChannelModel, pi0, records) -> np.ndarray:
    """Recompute the belief sequence from actions and ACKs alone."""
    pi = np.asarray(pi0, dtype=float)
    out, aoi = [], 0
    for r in records:
        out.append(pi)
        pi = belief_update(channel, pi, aoi, r.ack, r.action)
        aoi = aoi_next(aoi, r.ack, r.action, channel.n_r)
    return np.array(out)


# --- CSV export -----------------------------------------------------------


def trace_columns(n: int, n_c: int) -> list:
    cols = []
    for f in fields(TraceRecord):
        if f.name in ("x", "x_hat_sensor", "x_hat_remote"):
            cols += [f"{f.name}[{i}]" for i in range(n)]
        elif f.name == "belief":
            cols += [f"belief[{i}]" for i in range(n_c)]
        else:
            cols.append(f.name)
    return cols


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def write_trace_csv(path, records, meta: dict):
    """Write one row per record, preceded by ``#``-prefixed metadata lines."""
    n = records[0].x.shape[0]
    n_c = records[0].belief.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# tool_version = {__version__}\n")
        for key, value in meta.items():
            fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_columns(n, n_c))
        for r in records:
            row = []
            for f in fields(TraceRecord):
                value = getattr(r, f.name)
                if isinstance(value, np.ndarray):
                    row += [_fmt(v) for v in value]
                else:
                    row.append(_fmt(value))
            writer.writerow(row)
