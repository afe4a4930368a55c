"""Tabular learners: one independent agent per ABS.

Two agent families share the same observation machinery:

* the plain Q-learner maximizes a single blended reward (battery standing,
  expected delay, expected-violation penalty with graded severity);
* the risk-sensitive learner keeps two minimized tables, one for a pure risk
  cost and one for the remaining KPIs, and selects actions from their
  ``zeta``-weighted blend.  ``zeta`` moves dynamically against the episode
  violation budget, so the deadline constraint is regulated rather than
  folded into a single scalar reward.

The energy-centric variant reuses the risk machinery but defines risk as the
battery imbalance between the strongest and weakest ABS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import CalledOnSafeAction, InvalidParams, IoFailure, VersionMismatch
from .scenario import Scenario, TaskRecord
from .simenv import SimEnv

TABLE_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# state encoding


@dataclass(frozen=True)
class EncodedState:
    type_id: int
    delay_buckets: tuple[int, ...]   # one trit per resource
    battery_levels: tuple[int, ...]  # one trit per ABS
    prev_action: int | None = None   # risk-sensitive agents only


class StateEncoder:
    """Bijection between EncodedState and a dense table index."""

    def __init__(self, n_types: int, n_resources: int, n_abs: int,
                 include_prev_action: bool):
        self.n_types = n_types
        self.n_resources = n_resources
        self.n_abs = n_abs
        self.include_prev_action = include_prev_action
        self.n_states = n_types * 3 ** (n_resources + n_abs) * (
            n_resources if include_prev_action else 1)

    @classmethod
    def for_scenario(cls, scenario: Scenario, include_prev_action: bool) -> "StateEncoder":
        return cls(len(scenario.task_types), scenario.n_resources,
                   scenario.abs_count, include_prev_action)

    def index_of(self, type_id, delay_buckets, battery_levels, prev_action=None) -> int:
        idx = type_id
        for b in delay_buckets:
            idx = idx * 3 + b
        for b in battery_levels:
            idx = idx * 3 + b
        if self.include_prev_action:
            idx = idx * self.n_resources + prev_action
        return idx

    def index(self, state: EncodedState) -> int:
        return self.index_of(state.type_id, state.delay_buckets,
                             state.battery_levels, state.prev_action)

    def decode(self, idx: int) -> EncodedState:
        prev = None
        if self.include_prev_action:
            idx, prev = divmod(idx, self.n_resources)
        levels = []
        for _ in range(self.n_abs):
            idx, trit = divmod(idx, 3)
            levels.append(trit)
        buckets = []
        for _ in range(self.n_resources):
            idx, trit = divmod(idx, 3)
            buckets.append(trit)
        return EncodedState(type_id=idx,
                            delay_buckets=tuple(reversed(buckets)),
                            battery_levels=tuple(reversed(levels)),
                            prev_action=prev)


def delay_bucket(delay: float, deadline: float) -> int:
    """Deadline-relative delay trit: comfortable / tight / expected miss."""
    if delay <= 0.5 * deadline:
        return 0
    if delay <= deadline:
        return 1
    return 2


def battery_reward_level(expected_energies, chosen_abs: int, eps_units: float) -> int:
    """Three-level standing of an ABS against the best battery (with hysteresis)."""
    diff = expected_energies[chosen_abs] - max(expected_energies)
    if diff >= -eps_units:
        return 2
    if diff <= -2.0 * eps_units:
        return 0
    return 1


def hysteresis_units(scenario: Scenario, fraction: float) -> float:
    return fraction * max(scenario.energy_of(j).capacity for j in scenario.abs_ids)


@dataclass
class Observation:
    """Everything an agent sees before deciding on one task."""

    delays: list[float]            # expected end-to-end delay per resource
    energies: list[float]          # current remaining energy per ABS
    delay_buckets: list[int]
    battery_levels: list[int]      # per-ABS standing trit
    violation_flags: list[bool]    # expected deadline miss per resource


def observe(env: SimEnv, task: TaskRecord, eps_units: float) -> Observation:
    sc = env.scenario
    deadline = sc.task_type(task.type_id).deadline
    delays = env.expected_delays(task)
    energies = env.remaining_energies()
    max_e = max(energies)
    levels = []
    for e in energies:
        diff = e - max_e
        if diff >= -eps_units:
            levels.append(2)
        elif diff <= -2.0 * eps_units:
            levels.append(0)
        else:
            levels.append(1)
    return Observation(
        delays=delays,
        energies=energies,
        delay_buckets=[delay_bucket(d, deadline) for d in delays],
        battery_levels=levels,
        violation_flags=[d >= deadline for d in delays],
    )


def encode_state(env: SimEnv, task: TaskRecord, prev_action: int | None = None,
                 eps_units: float | None = None) -> EncodedState:
    """Convenience wrapper producing the symbolic state for one pending task."""
    if eps_units is None:
        eps_units = hysteresis_units(env.scenario, 0.02)
    obs = observe(env, task, eps_units)
    return EncodedState(type_id=task.type_id,
                        delay_buckets=tuple(obs.delay_buckets),
                        battery_levels=tuple(obs.battery_levels),
                        prev_action=prev_action)


# ---------------------------------------------------------------------------
# reward / cost formulas


def violation_severity(violation_flags, origin: int, chosen: int, n_abs: int,
                       levels=(-4.0, -3.0, -2.0, -1.0)) -> float:
    """Graded penalty for an expected miss, ranked by who could have avoided it.

    Worst when a MEC was safe, then the origin ABS, then any other ABS;
    mildest when every resource was expected to miss anyway.
    """
    if not violation_flags[chosen]:
        raise CalledOnSafeAction(f"action {chosen} is not expected to violate")
    p4, p3, p2, p1 = levels
    if any(not violation_flags[m] for m in range(n_abs, len(violation_flags))):
        return p4
    if not violation_flags[origin]:
        return p3
    if any(not violation_flags[j] for j in range(n_abs) if j not in (origin, chosen)):
        return p2
    return p1


def q_reward(level: int, delay: float, expected_violation: bool, severity: float,
             w: float, theta_m: float, theta_d: float) -> float:
    """Single blended reward of the plain Q-learner."""
    ev = 1.0 if expected_violation else 0.0
    return (w * (level - 1)
            - (1.0 - w) / (2.0 * theta_m) * delay
            + (1.0 - w) / (2.0 * theta_d) * ((1.0 - ev) + severity * ev))


def rs_reward(level: int, delay: float, w: float, theta_m: float) -> float:
    """Battery/delay part under the minimizing convention (sign reversed)."""
    return -(w * (level - 1) - (1.0 - w) / theta_m * delay)


def rs_risk_cost(in_risk_state: bool, severity: float | None = None) -> float:
    """Risk cost: positive magnitude of the severity in risk states, -1 otherwise."""
    if in_risk_state:
        if severity is None:
            raise CalledOnSafeAction("risk state requires a severity level")
        return -severity
    return -1.0


def energy_centric_risk(env: SimEnv, gap_threshold: float) -> bool:
    """Battery-imbalance risk flag: spread between best and worst ABS too wide."""
    energies = env.remaining_energies()
    cap_ref = max(env.scenario.energy_of(j).capacity for j in env.scenario.abs_ids)
    return (max(energies) - min(energies)) / cap_ref > gap_threshold


# ---------------------------------------------------------------------------
# table updates


def q_update(table: np.ndarray, s: int, a: int, reward: float,
             s_next: int | None, alpha: float, gamma: float) -> np.ndarray:
    """Max-bootstrap value iteration step; s_next=None means terminal."""
    bootstrap = 0.0 if s_next is None else gamma * float(table[s_next].max())
    table[s, a] = (1.0 - alpha) * table[s, a] + alpha * (reward + bootstrap)
    return table


def q_update_min(table: np.ndarray, s: int, a: int, cost: float,
                 s_next: int | None, alpha: float, gamma: float) -> np.ndarray:
    """Min-bootstrap mirror used by the minimizing tables."""
    bootstrap = 0.0 if s_next is None else gamma * float(table[s_next].min())
    table[s, a] = (1.0 - alpha) * table[s, a] + alpha * (cost + bootstrap)
    return table


# ---------------------------------------------------------------------------
# agents


class QLearningAgent:
    """Maximizing single-table learner for one ABS."""

    kind = "qlearning"
    include_prev_action = False

    def __init__(self, encoder: StateEncoder, n_actions: int, alpha: float, gamma: float):
        self.encoder = encoder
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.q = np.zeros((encoder.n_states, n_actions))
        self.visits = np.zeros((encoder.n_states, n_actions), dtype=np.uint32)

    def select(self, s: int, epsilon: float, rng=None) -> int:
        if epsilon > 0.0 and rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        return int(np.argmax(self.q[s]))

    def update(self, s: int, a: int, reward: float, cost: float, s_next: int | None) -> None:
        q_update(self.q, s, a, reward, s_next, self.alpha, self.gamma)
        self.visits[s, a] += 1

    def end_episode(self) -> None:
        pass


class RiskAgent:
    """Dual-table minimizing learner with a dynamic risk weight.

    ``q_risk`` accumulates the risk cost, ``q_reward`` the remaining KPIs;
    actions come from their zeta blend.  The combined table is recomposed
    lazily: ``q_combined`` always reflects the current tables and zeta, so the
    blend identity holds after every episode by construction.
    """

    include_prev_action = True

    def __init__(self, encoder: StateEncoder, n_actions: int, alpha: float, gamma: float,
                 zeta_init: float, zeta_step: float, v_max: int, gap: int,
                 kind: str = "risk"):
        self.encoder = encoder
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.zeta = float(zeta_init)
        self.zeta_step = zeta_step
        self.v_max = v_max
        self.gap = gap
        self.kind = kind
        shape = (encoder.n_states, n_actions)
        self.q_risk = np.zeros(shape)
        self.q_reward = np.zeros(shape)
        self.visits = np.zeros(shape, dtype=np.uint32)

    @property
    def q_combined(self) -> np.ndarray:
        return self.zeta * self.q_risk + (1.0 - self.zeta) * self.q_reward

    def action_values(self, s: int) -> np.ndarray:
        return self.zeta * self.q_risk[s] + (1.0 - self.zeta) * self.q_reward[s]

    def select(self, s: int, epsilon: float, rng=None) -> int:
        if epsilon > 0.0 and rng.random() < epsilon:
            return int(rng.integers(self.n_actions))
        return int(np.argmin(self.action_values(s)))

    def update(self, s: int, a: int, reward: float, cost: float, s_next: int | None) -> None:
        q_update_min(self.q_reward, s, a, reward, s_next, self.alpha, self.gamma)
        q_update_min(self.q_risk, s, a, cost, s_next, self.alpha, self.gamma)
        self.visits[s, a] += 1

    def rs_step(self, s: int, a: int, reward: float, cost: float, s_next: int | None) -> None:
        self.update(s, a, reward, cost, s_next)

    def end_episode(self) -> None:
        pass

    def apply_zeta_rule(self, satisfied: bool) -> float:
        if satisfied:
            self.zeta = max(self.zeta - self.zeta_step, 0.0)
        else:
            self.zeta = min(self.zeta + self.zeta_step, 1.0)
        return self.zeta

    def zeta_update(self, episode_violations: int) -> float:
        """Algorithm step: relax the risk weight while the budget holds, else tighten."""
        return self.apply_zeta_rule(episode_violations + self.gap <= self.v_max)


def make_agents(kind: str, scenario: Scenario, params) -> list:
    """One fresh agent per ABS."""
    n_actions = scenario.n_resources
    if kind == "qlearning":
        encoder = StateEncoder.for_scenario(scenario, include_prev_action=False)
        return [QLearningAgent(encoder, n_actions, params.alpha, params.gamma)
                for _ in scenario.abs_ids]
    if kind in ("risk", "energy"):
        encoder = StateEncoder.for_scenario(scenario, include_prev_action=True)
        return [RiskAgent(encoder, n_actions, params.alpha, params.gamma,
                          params.zeta_init, params.zeta_step, params.v_max,
                          params.gap, kind=kind)
                for _ in scenario.abs_ids]
    raise InvalidParams(f"unknown agent kind '{kind}'")


# ---------------------------------------------------------------------------
# table persistence (.npz: json 'meta' header + dense per-agent arrays)


def save_tables(agents: list, params, path) -> None:
    if not agents:
        raise IoFailure("nothing to save: empty agent list")
    first = agents[0]
    from dataclasses import asdict

    meta = {
        "format_version": TABLE_FORMAT_VERSION,
        "kind": first.kind,
        "n_types": first.encoder.n_types,
        "n_resources": first.encoder.n_resources,
        "n_abs": first.encoder.n_abs,
        "n_states": first.encoder.n_states,
        "n_actions": first.n_actions,
        "include_prev_action": first.encoder.include_prev_action,
        "zeta": [getattr(a, "zeta", 0.0) for a in agents],
        "params": asdict(params),
    }
    arrays = {}
    for j, agent in enumerate(agents):
        if isinstance(agent, RiskAgent):
            arrays[f"agent{j}_q_risk"] = agent.q_risk
            arrays[f"agent{j}_q_reward"] = agent.q_reward
            arrays[f"agent{j}_q_combined"] = agent.q_combined
        else:
            arrays[f"agent{j}_q"] = agent.q
        arrays[f"agent{j}_visits"] = agent.visits
    try:
        np.savez_compressed(path, meta=json.dumps(meta), **arrays)
    except OSError as exc:
        raise IoFailure(f"cannot write tables {path}: {exc}") from exc


def load_tables(path, scenario: Scenario):
    """Load a table file back into agents; returns (kind, agents, params).

    Raises VersionMismatch when the file format or the state-space dimensions
    do not match the given scenario.
    """
    from .training import TrainParams

    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            arrays = {k: data[k] for k in data.files if k != "meta"}
    except OSError as exc:
        raise IoFailure(f"cannot read tables {path}: {exc}") from exc
    if meta.get("format_version") != TABLE_FORMAT_VERSION:
        raise VersionMismatch(
            f"table file format {meta.get('format_version')} != {TABLE_FORMAT_VERSION}")
    kind = meta["kind"]
    raw_params = dict(meta["params"])
    raw_params["severity_levels"] = tuple(raw_params.get("severity_levels", (-4, -3, -2, -1)))
    params = TrainParams(**raw_params)
    agents = make_agents(kind, scenario, params)
    first = agents[0]
    for key, expect in (("n_types", first.encoder.n_types),
                        ("n_resources", first.encoder.n_resources),
                        ("n_abs", first.encoder.n_abs),
                        ("n_states", first.encoder.n_states),
                        ("n_actions", first.n_actions)):
        if meta[key] != expect:
            raise VersionMismatch(
                f"table file {key}={meta[key]} does not match scenario ({expect})")
    for j, agent in enumerate(agents):
        try:
            if isinstance(agent, RiskAgent):
                agent.q_risk = arrays[f"agent{j}_q_risk"]
                agent.q_reward = arrays[f"agent{j}_q_reward"]
                agent.zeta = float(meta["zeta"][j])
                # the stored combined table is derived; recomputed on access
            else:
                agent.q = arrays[f"agent{j}_q"]
            agent.visits = arrays[f"agent{j}_visits"]
        except KeyError as exc:
            raise VersionMismatch(f"table file is missing array {exc}") from exc
    return kind, agents, params
