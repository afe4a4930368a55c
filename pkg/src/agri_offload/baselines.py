"""Non-learning decision policies used as comparison points.

Policy objects expose ``reset(env)`` and ``decide(env, task) -> resource id``.
"""

from __future__ import annotations

import numpy as np

from .scenario import TaskRecord
from .simenv import SimEnv

# minimum queue-time advantage before a neighbour's queue counts as "lowest"
LQHE_QUEUE_ADVANTAGE = 0.5   # seconds
# minimum remaining-energy-fraction advantage before offloading
LQHE_ENERGY_ADVANTAGE = 0.01


class RoundRobinPolicy:
    """Cycle through all computational resources with a single global cursor."""

    def __init__(self):
        self.last = -1

    def reset(self, env: SimEnv) -> None:
        self.last = -1

    def decide(self, env: SimEnv, task: TaskRecord) -> int:
        self.last = (self.last + 1) % env.scenario.n_resources
        return self.last


class LowestQueueHighestEnergyPolicy:
    """Offload to a not-busier neighbour only when it is clearly better.

    Queue time is the busy backlog in seconds at the decision instant,
    excluding the new task.  The lowest-queue scan adopts a neighbour's value
    only when it undercuts the origin's by at least 0.5 s; among candidates at
    or below that cutoff the highest-remaining-energy ABS wins if it leads the
    origin by at least one energy point (1% of capacity).  The MEC has no
    battery: it takes the task when it holds the adopted lowest queue time and
    no ABS neighbour passes the energy test.
    """

    def reset(self, env: SimEnv) -> None:
        pass

    def decide(self, env: SimEnv, task: TaskRecord) -> int:
        sc = env.scenario
        origin = task.origin
        now = task.arrival
        queue = [env.queue_backlog_seconds(r, now) for r in range(sc.n_resources)]
        neighbours = [r for r in range(sc.n_resources) if r != origin]
        lowest_neighbour = min(queue[r] for r in neighbours)
        undercut = lowest_neighbour <= queue[origin] - LQHE_QUEUE_ADVANTAGE
        lowest = lowest_neighbour if undercut else queue[origin]

        origin_frac = env.remaining_fraction(origin)
        best_abs = None
        best_frac = -1.0
        for r in neighbours:
            if sc.is_abs(r) and queue[r] <= lowest:
                frac = env.remaining_fraction(r)
                if frac > best_frac:
                    best_abs, best_frac = r, frac
        if best_abs is not None and best_frac >= origin_frac + LQHE_ENERGY_ADVANTAGE:
            return best_abs

        if undercut:
            for r in sc.mec_ids:
                if queue[r] <= lowest:
                    return r
        return origin


class AlwaysLocalPolicy:
    """Diagnostic policy: every task is computed at its origin ABS."""

    def reset(self, env: SimEnv) -> None:
        pass

    def decide(self, env: SimEnv, task: TaskRecord) -> int:
        return task.origin


class AlwaysMecPolicy:
    """Diagnostic policy: every task goes to the first MEC."""

    def reset(self, env: SimEnv) -> None:
        pass

    def decide(self, env: SimEnv, task: TaskRecord) -> int:
        return env.scenario.abs_count


class RandomPolicy:
    """Uniform random resource choice; seeded, used by the feasibility suite."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def reset(self, env: SimEnv) -> None:
        self.rng = np.random.default_rng(self.seed)

    def decide(self, env: SimEnv, task: TaskRecord) -> int:
        return int(self.rng.integers(env.scenario.n_resources))


POLICIES = {
    "rr": RoundRobinPolicy,
    "lqhe": LowestQueueHighestEnergyPolicy,
    "local": AlwaysLocalPolicy,
    "mec": AlwaysMecPolicy,
}


def make_policy(name: str):
    if name not in POLICIES:
        raise KeyError(f"unknown policy '{name}' (choose from {sorted(POLICIES)})")
    return POLICIES[name]()
