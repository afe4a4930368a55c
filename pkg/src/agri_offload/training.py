"""Offline training: episode loop, dynamic risk weight, learning curves.

Training replays a pool of arrival traces round-robin.  Each ABS agent only
ever sees (and learns from) the tasks its own ABS received; the agents are
fully independent apart from sharing the world state.  Every ``update_every``
episodes the current traces are replayed greedily (no exploration) and the
realized violation count steers the risk weight.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    Observation,
    QLearningAgent,
    RiskAgent,
    battery_reward_level,
    hysteresis_units,
    make_agents,
    observe,
    q_reward,
    rs_reward,
    rs_risk_cost,
    violation_severity,
)
from .errors import InvalidParams, IoFailure
from .scenario import EpisodeTrace, Scenario, TaskRecord
from .simenv import SimEnv


@dataclass
class TrainParams:
    """Hyperparameters; defaults follow the reference parameter table."""

    alpha: float = 0.05            # learning rate
    gamma: float = 0.85            # discount
    episodes: int = 100_000
    update_every: int = 1_000      # risk-weight update frequency (episodes)
    zeta_init: float = 0.0
    zeta_step: float = 0.02
    v_max: int = 3                 # allowed deadline violations per episode
    gap: int = 2                   # safety margin added to the violation count
    w: float = 0.5                 # energy-consumption weight
    theta_m: float = 1.0           # mean-delay scaler
    theta_d: float = 1.0           # violation scaler
    eps_start: float = 0.1         # epsilon-greedy schedule (linear decay)
    eps_end: float = 0.01
    severity_levels: tuple = (-4.0, -3.0, -2.0, -1.0)
    hysteresis_fraction: float = 0.02   # battery-level hysteresis, fraction of capacity
    energy_gap_threshold: float = 0.05  # energy-centric risk trigger, fraction of capacity
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidParams("alpha must be in (0, 1]")
        if not (0.0 <= self.gamma < 1.0):
            raise InvalidParams("gamma must be in [0, 1)")
        if self.episodes < 0:
            raise InvalidParams("episodes must be non-negative")
        if self.update_every < 1:
            raise InvalidParams("update_every must be at least 1")
        if not (0.0 <= self.zeta_init <= 1.0):
            raise InvalidParams("zeta_init must be in [0, 1]")
        if self.zeta_step < 0.0:
            raise InvalidParams("zeta_step must be non-negative")
        if self.v_max < 0 or self.gap < 0:
            raise InvalidParams("v_max and gap must be non-negative")
        if not (0.0 <= self.w <= 1.0):
            raise InvalidParams("w must be in [0, 1]")
        if self.theta_m <= 0.0 or self.theta_d <= 0.0:
            raise InvalidParams("theta scalers must be positive")
        if not (0.0 <= self.eps_end <= self.eps_start <= 1.0):
            raise InvalidParams("need 0 <= eps_end <= eps_start <= 1")
        if len(self.severity_levels) != 4:
            raise InvalidParams("severity_levels must hold four values")
        if self.hysteresis_fraction <= 0.0:
            raise InvalidParams("hysteresis_fraction must be positive")


@dataclass
class CurvePoint:
    episode: int
    agent: int
    cum_reward: float
    cum_risk: float | None   # None for the plain Q-learner
    zeta: float | None


@dataclass
class TrainResult:
    kind: str
    scenario: Scenario
    params: TrainParams
    agents: list
    curves: list[CurvePoint] = field(default_factory=list)
    zeta_history: list[tuple[int, float]] = field(default_factory=list)

    def policy(self) -> "TrainedPolicy":
        return TrainedPolicy(self.scenario, self.kind, self.agents, self.params)


class _DecisionContext:
    """Per-task quantities shared by action selection and reward computation."""

    __slots__ = ("obs", "state_index")

    def __init__(self, obs: Observation, state_index: int):
        self.obs = obs
        self.state_index = state_index


def _reward_and_cost(kind: str, scenario: Scenario, env: SimEnv, task: TaskRecord,
                     obs: Observation, action: int, params: TrainParams,
                     eps_units: float, cap_ref: float) -> tuple[float, float]:
    """Immediate reward (and risk cost for risk kinds) of one decision."""
    if scenario.is_abs(action):
        expected = list(obs.energies)
        expected[action] -= env.ledgers[action].drain_for(
            env.proc_iv[task.type_id][action])
        level = battery_reward_level(expected, action, eps_units)
    else:
        level = 2  # mains-powered: choosing a MEC never hurts battery fairness
    delay = obs.delays[action]
    expected_violation = obs.violation_flags[action]

    if kind == "qlearning":
        severity = 0.0
        if expected_violation:
            severity = violation_severity(obs.violation_flags, task.origin, action,
                                          scenario.abs_count, params.severity_levels)
        return q_reward(level, delay, expected_violation, severity,
                        params.w, params.theta_m, params.theta_d), 0.0

    reward = rs_reward(level, delay, params.w, params.theta_m)
    if kind == "risk":
        if expected_violation:
            severity = violation_severity(obs.violation_flags, task.origin, action,
                                          scenario.abs_count, params.severity_levels)
            cost = rs_risk_cost(True, severity)
        else:
            cost = rs_risk_cost(False)
    else:  # energy-centric: risk is battery imbalance, graded by the action's standing
        gap = (max(obs.energies) - min(obs.energies)) / cap_ref
        if gap > params.energy_gap_threshold:
            severity = {0: -4.0, 1: -2.0}.get(level, -1.0)
            cost = rs_risk_cost(True, severity)
        else:
            cost = rs_risk_cost(False)
    return reward, cost


def _run_episode(kind, scenario, trace, agents, params, eps_units, cap_ref,
                 epsilon, rngs, learn=True):
    """One pass over a trace.

    With learn=True the agents do delayed one-step updates (each transition
    closes when its ABS receives the next task; the last one is terminal).
    Returns (env, per-agent cumulative reward, per-agent cumulative cost).
    """
    env = SimEnv(scenario, trace)
    n_abs = scenario.abs_count
    pending: list[tuple | None] = [None] * n_abs
    prev_action = list(range(n_abs))  # first decision of an episode: "stayed local"
    cum_reward = [0.0] * n_abs
    cum_cost = [0.0] * n_abs
    for task in trace.tasks:
        j = task.origin
        agent = agents[j]
        obs = observe(env, task, eps_units)
        if agent.include_prev_action:
            s = agent.encoder.index_of(task.type_id, obs.delay_buckets,
                                       obs.battery_levels, prev_action[j])
        else:
            s = agent.encoder.index_of(task.type_id, obs.delay_buckets,
                                       obs.battery_levels)
        if learn and pending[j] is not None:
            ps, pa, pr, pc = pending[j]
            agent.update(ps, pa, pr, pc, s)
        action = agent.select(s, epsilon if learn else 0.0, rngs[j] if learn else None)
        if learn:
            reward, cost = _reward_and_cost(kind, scenario, env, task, obs, action,
                                            params, eps_units, cap_ref)
            pending[j] = (s, action, reward, cost)
            cum_reward[j] += reward
            cum_cost[j] += cost
        env.commit_decision(task, action)
        prev_action[j] = action
    if learn:
        for j, item in enumerate(pending):
            if item is not None:
                ps, pa, pr, pc = item
                agents[j].update(ps, pa, pr, pc, None)
    return env, cum_reward, cum_cost


def _greedy_probe(kind, scenario, trace, agents, params, eps_units, cap_ref):
    """Exploration-free replay; returns (realized violations, energy gap fraction)."""
    env, _, _ = _run_episode(kind, scenario, trace, agents, params, eps_units,
                             cap_ref, epsilon=0.0, rngs=None, learn=False)
    violations = sum(1 for rec in env.records.values() if rec.violated)
    energies = env.remaining_energies(scenario.horizon)
    gap_fraction = (max(energies) - min(energies)) / cap_ref
    return violations, gap_fraction


def train(kind: str, scenario: Scenario, traces: list[EpisodeTrace],
          params: TrainParams) -> TrainResult:
    """Run the offline training protocol; deterministic in (traces, params)."""
    params.validate()
    if not traces:
        raise InvalidParams("training needs at least one trace")
    agents = make_agents(kind, scenario, params)
    eps_units = hysteresis_units(scenario, params.hysteresis_fraction)
    cap_ref = max(scenario.energy_of(j).capacity for j in scenario.abs_ids)
    rngs = [np.random.default_rng((params.seed, 101, j)) for j in scenario.abs_ids]
    result = TrainResult(kind=kind, scenario=scenario, params=params, agents=agents)

    for episode in range(params.episodes):
        trace = traces[episode % len(traces)]
        if params.episodes > 1:
            frac = episode / (params.episodes - 1)
            epsilon = params.eps_start + (params.eps_end - params.eps_start) * frac
        else:
            epsilon = params.eps_start
        _, cum_reward, cum_cost = _run_episode(
            kind, scenario, trace, agents, params, eps_units, cap_ref,
            epsilon, rngs, learn=True)
        for agent in agents:
            agent.end_episode()
        zeta = agents[0].zeta if kind != "qlearning" else None
        for j in range(scenario.abs_count):
            result.curves.append(CurvePoint(
                episode=episode, agent=j, cum_reward=cum_reward[j],
                cum_risk=cum_cost[j] if kind != "qlearning" else None,
                zeta=zeta))
        if kind != "qlearning" and (episode + 1) % params.update_every == 0:
            violations, gap_fraction = _greedy_probe(
                kind, scenario, trace, agents, params, eps_units, cap_ref)
            for agent in agents:
                if kind == "risk":
                    agent.zeta_update(violations)
                else:
                    agent.apply_zeta_rule(gap_fraction <= params.energy_gap_threshold)
            result.zeta_history.append((episode + 1, agents[0].zeta))
    return result


class TrainedPolicy:
    """Frozen greedy policy over trained tables; usable wherever baselines are."""

    def __init__(self, scenario: Scenario, kind: str, agents: list, params: TrainParams):
        self.scenario = scenario
        self.kind = kind
        self.agents = agents
        self.params = params
        self.eps_units = hysteresis_units(scenario, params.hysteresis_fraction)
        self.prev_action = list(range(scenario.abs_count))

    def reset(self, env: SimEnv) -> None:
        self.prev_action = list(range(self.scenario.abs_count))

    def decide(self, env: SimEnv, task: TaskRecord) -> int:
        j = task.origin
        agent = self.agents[j]
        obs = observe(env, task, self.eps_units)
        if agent.include_prev_action:
            s = agent.encoder.index_of(task.type_id, obs.delay_buckets,
                                       obs.battery_levels, self.prev_action[j])
        else:
            s = agent.encoder.index_of(task.type_id, obs.delay_buckets,
                                       obs.battery_levels)
        action = agent.select(s, 0.0, None)
        self.prev_action[j] = action
        return action


def write_curves(curves: list[CurvePoint], path) -> None:
    """Learning-curve CSV: episode,agent,cum_reward,cum_risk,zeta."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "agent", "cum_reward", "cum_risk", "zeta"])
            for point in curves:
                writer.writerow([
                    point.episode, point.agent, f"{point.cum_reward:.9f}",
                    "" if point.cum_risk is None else f"{point.cum_risk:.9f}",
                    "" if point.zeta is None else f"{point.zeta:.6f}",
                ])
    except OSError as exc:
        raise IoFailure(f"cannot write curves {path}: {exc}") from exc
