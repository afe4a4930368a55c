"""Discrete-time world state: per-resource timelines, energy ledgers, KPIs.

A :class:`SimEnv` replays one :class:`~agri_offload.scenario.EpisodeTrace`
decision by decision.  Each resource owns a serial timeline (one task per
interval), each ABS an energy ledger charged per elapsed interval plus a
compute surcharge per busy interval.  :meth:`SimEnv.finalize` condenses the
run into the three headline KPIs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DoubleCommit, IncompleteRun, NotAnAbs, UnknownResource
from .scenario import EpisodeTrace, Scenario, TaskRecord


@dataclass
class CompletionRecord:
    """Outcome of one committed task."""

    key: tuple[int, int]      # (origin ABS, arrival interval)
    resource: int
    start: int                # first busy interval at the resource
    end: int                  # last busy interval at the resource
    delay: float              # end-to-end delay, seconds
    violated: bool


@dataclass
class ResourceState:
    """Serial FIFO timeline of one computational resource."""

    busy_until: int = 0       # first interval at which the resource is free
    queue: list[tuple[int, int]] = field(default_factory=list)
    task_count: int = 0
    violation_count: int = 0

    def backlog_intervals(self, now: int) -> int:
        return max(0, self.busy_until - now)


class EnergyLedger:
    """Remaining-battery bookkeeping for one ABS.

    remaining = capacity - (hover + transmit + idle) * elapsed
                          - (compute - idle) * busy_intervals
    with all rates pre-multiplied by the scenario's energy_time_scale.
    """

    def __init__(self, params, scale: float):
        self.capacity = params.capacity
        self.base_rate = (params.hover + params.transmit + params.idle) * scale
        self.compute_surcharge = (params.compute - params.idle) * scale
        self.busy_intervals = 0

    def remaining(self, elapsed_intervals: int) -> float:
        return (self.capacity
                - self.base_rate * elapsed_intervals
                - self.compute_surcharge * self.busy_intervals)

    def drain_for(self, intervals: int) -> float:
        return self.compute_surcharge * intervals


@dataclass
class KpiReport:
    """Three-KPI evaluation of a completed run plus per-resource breakdown."""

    min_remaining_fraction: float
    min_remaining_energy: float
    mean_delay: float          # seconds
    violation_count: int
    task_count: int
    per_resource_tasks: list[int]
    per_resource_violations: list[int]
    per_abs_remaining_energy: list[float]
    per_abs_remaining_fraction: list[float]
    empty: bool = False        # true when the trace carried no tasks

    def csv_header(self) -> list[str]:
        cols = ["policy", "seed", "min_remaining_fraction", "mean_delay_s", "violations"]
        n = len(self.per_resource_tasks)
        cols += [f"tasks_r{r}" for r in range(n)]
        cols += [f"violations_r{r}" for r in range(n)]
        cols += [f"remaining_frac_abs{j}" for j in range(len(self.per_abs_remaining_fraction))]
        return cols

    def csv_row(self, policy: str, seed) -> list[str]:
        row = [policy, str(seed),
               f"{self.min_remaining_fraction:.9f}",
               f"{self.mean_delay:.9f}",
               str(self.violation_count)]
        row += [str(x) for x in self.per_resource_tasks]
        row += [str(x) for x in self.per_resource_violations]
        row += [f"{x:.9f}" for x in self.per_abs_remaining_fraction]
        return row

    def to_json(self, **extra) -> str:
        doc = {
            "min_remaining_fraction": self.min_remaining_fraction,
            "min_remaining_energy": self.min_remaining_energy,
            "mean_delay_s": self.mean_delay,
            "violations": self.violation_count,
            "tasks": self.task_count,
            "per_resource_tasks": self.per_resource_tasks,
            "per_resource_violations": self.per_resource_violations,
            "per_abs_remaining_energy": self.per_abs_remaining_energy,
            "per_abs_remaining_fraction": self.per_abs_remaining_fraction,
            "empty": self.empty,
        }
        doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=True)


class SimEnv:
    """Live simulation state for one episode; single-threaded by design."""

    def __init__(self, scenario: Scenario, trace: EpisodeTrace):
        self.scenario = scenario
        self.trace = trace
        self.resources = [ResourceState() for _ in range(scenario.n_resources)]
        self.ledgers = [EnergyLedger(scenario.energy_of(j), scenario.energy_time_scale)
                        for j in scenario.abs_ids]
        self.records: dict[tuple[int, int], CompletionRecord] = {}
        self.now = 0  # arrival interval of the most recent commit
        # hot-path lookup tables
        n_res = scenario.n_resources
        self.hop_sec = [[scenario.hop_seconds(j, r) for r in range(n_res)]
                        for j in scenario.abs_ids]
        self.hop_iv = [[scenario.hop_intervals(j, r) for r in range(n_res)]
                       for j in scenario.abs_ids]
        self.proc_sec = [[scenario.proc_seconds(k, r) for r in range(n_res)]
                         for k in range(len(scenario.task_types))]
        self.proc_iv = [[scenario.proc_intervals(k, r) for r in range(n_res)]
                        for k in range(len(scenario.task_types))]

    # -- queries ------------------------------------------------------------

    def _check_resource(self, resource: int) -> None:
        if not (0 <= resource < self.scenario.n_resources):
            raise UnknownResource(f"resource {resource} outside 0..{self.scenario.n_resources - 1}")

    def ready_interval(self, task: TaskRecord, resource: int) -> int:
        return task.arrival + self.hop_iv[task.origin][resource]

    def queue_backlog_seconds(self, resource: int, now: int | None = None) -> float:
        """Busy backlog of a resource in seconds, excluding any new task."""
        self._check_resource(resource)
        at = self.now if now is None else now
        return self.resources[resource].backlog_intervals(at) * self.scenario.interval_len

    def expected_delay(self, task: TaskRecord, resource: int) -> float:
        """End-to-end delay the task would see on `resource`, given current queues."""
        self._check_resource(resource)
        sc = self.scenario
        ready = task.arrival + self.hop_iv[task.origin][resource]
        wait = max(0, self.resources[resource].busy_until - ready) * sc.interval_len
        return (task.iot_delay
                + self.hop_sec[task.origin][resource]
                + wait
                + self.proc_sec[task.type_id][resource])

    def expected_delays(self, task: TaskRecord) -> list[float]:
        il = self.scenario.interval_len
        arrival = task.arrival
        iot = task.iot_delay
        hop_sec = self.hop_sec[task.origin]
        hop_iv = self.hop_iv[task.origin]
        proc = self.proc_sec[task.type_id]
        out = []
        for r, state in enumerate(self.resources):
            wait = state.busy_until - arrival - hop_iv[r]
            d = iot + hop_sec[r] + proc[r]
            if wait > 0:
                d += wait * il
            out.append(d)
        return out

    def remaining_energy(self, abs_id: int, elapsed: int | None = None) -> float:
        if not self.scenario.is_abs(abs_id):
            raise NotAnAbs(f"resource {abs_id} is not an ABS")
        return self.ledgers[abs_id].remaining(self.now if elapsed is None else elapsed)

    def remaining_fraction(self, abs_id: int, elapsed: int | None = None) -> float:
        return self.remaining_energy(abs_id, elapsed) / self.ledgers[abs_id].capacity

    def remaining_energies(self, elapsed: int | None = None) -> list[float]:
        at = self.now if elapsed is None else elapsed
        return [led.remaining(at) for led in self.ledgers]

    def expected_remaining_energy_after(self, abs_id: int, task: TaskRecord) -> float:
        """Ledger value minus the task's compute drain if it were assigned there."""
        if not self.scenario.is_abs(abs_id):
            raise NotAnAbs(f"resource {abs_id} is not an ABS")
        drain = self.ledgers[abs_id].drain_for(
            self.scenario.proc_intervals(task.type_id, abs_id))
        return self.ledgers[abs_id].remaining(self.now) - drain

    # -- transitions ----------------------------------------------------------

    def commit_decision(self, task: TaskRecord, resource: int) -> CompletionRecord:
        """Queue the task at `resource`, charge energy and record the outcome."""
        self._check_resource(resource)
        if task.key in self.records:
            raise DoubleCommit(f"task {task.key} already committed")
        sc = self.scenario
        state = self.resources[resource]
        ready = task.arrival + self.hop_iv[task.origin][resource]
        start = max(state.busy_until, ready)
        duration = self.proc_iv[task.type_id][resource]
        end = start + duration - 1
        state.busy_until = start + duration
        state.queue.append(task.key)
        state.task_count += 1
        if sc.is_abs(resource):
            self.ledgers[resource].busy_intervals += duration
        delay = ((start - task.arrival) * sc.interval_len
                 + task.iot_delay
                 + self.proc_sec[task.type_id][resource])
        violated = delay > sc.task_type(task.type_id).deadline
        if violated:
            state.violation_count += 1
        record = CompletionRecord(key=task.key, resource=resource, start=start,
                                  end=end, delay=delay, violated=violated)
        self.records[task.key] = record
        self.now = max(self.now, task.arrival)
        return record

    def finalize(self) -> KpiReport:
        """KPIs over the whole horizon; requires every trace task committed."""
        missing = len(self.trace.tasks) - len(self.records)
        if missing > 0:
            raise IncompleteRun(f"{missing} task(s) of the trace are not committed")
        horizon = self.scenario.horizon
        energies = [led.remaining(horizon) for led in self.ledgers]
        fractions = [e / led.capacity for e, led in zip(energies, self.ledgers)]
        records = [self.records[t.key] for t in self.trace.tasks]
        n = len(records)
        mean_delay = sum(r.delay for r in records) / n if n else 0.0
        return KpiReport(
            min_remaining_fraction=min(fractions),
            min_remaining_energy=min(energies),
            mean_delay=mean_delay,
            violation_count=sum(1 for r in records if r.violated),
            task_count=n,
            per_resource_tasks=[s.task_count for s in self.resources],
            per_resource_violations=[s.violation_count for s in self.resources],
            per_abs_remaining_energy=energies,
            per_abs_remaining_fraction=fractions,
            empty=(n == 0),
        )

    def to_schedule(self):
        """Export committed decisions as an oracle-grade Schedule."""
        from .oracle import Schedule, ScheduleEntry

        return Schedule(entries={
            key: ScheduleEntry(resource=rec.resource, start=rec.start, end=rec.end)
            for key, rec in self.records.items()
        })


def run_policy(scenario: Scenario, trace: EpisodeTrace, policy) -> tuple[KpiReport, SimEnv]:
    """Replay a trace under a decision policy and return the KPIs and the env."""
    env = SimEnv(scenario, trace)
    if hasattr(policy, "reset"):
        policy.reset(env)
    for task in trace.tasks:
        env.commit_decision(task, policy.decide(env, task))
    return env.finalize(), env
