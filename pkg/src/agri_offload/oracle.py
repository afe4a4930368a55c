"""Ground truth for small instances: schedule validation, objective
evaluation and exhaustive optimization.

A :class:`Schedule` pins every task to one resource and one contiguous
processing window.  :func:`validate` checks the feasibility constraint
families (capacity, contiguity, duration, causality, single assignment) and
returns findings naming the violated constraint; :func:`evaluate` recomputes
the three KPI terms and the scalar objective for either problem variant;
:func:`brute_force` enumerates every assignment and every per-resource service
order with earliest-feasible packing, which is optimal per order because the
objective terms are monotone in start times.

The exact bound follows the source optimization model: processing may begin
at the task's arrival interval (transfer hops are not modelled here, so the
bound dominates the simulator, which delays offloaded starts by the hop).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import BudgetExceeded, InfeasibleSchedule
from .scenario import EpisodeTrace, Scenario
from .simenv import EnergyLedger


@dataclass(frozen=True)
class ScheduleEntry:
    resource: int
    start: int   # first processing interval
    end: int     # last processing interval (inclusive)


@dataclass
class Schedule:
    """Assignment plus timing for every task, keyed by (origin, arrival)."""

    entries: dict[tuple[int, int], ScheduleEntry] = field(default_factory=dict)

    def encoding(self) -> tuple:
        """Canonical tuple used for deterministic tie-breaking."""
        return tuple(sorted((key, e.resource, e.start)
                            for key, e in self.entries.items()))


@dataclass(frozen=True)
class Finding:
    equation: str                 # constraint family, e.g. "capacity"
    task: tuple[int, int] | None
    resource: int | None
    interval: int | None
    message: str


@dataclass(frozen=True)
class ObjectiveWeights:
    w: float = 0.5        # energy weight
    theta_m: float = 1.0  # mean-delay scaler
    theta_d: float = 1.0  # violation scaler
    v_max: int = 3        # violation budget (feasibility of the second problem)


@dataclass
class ObjectiveBreakdown:
    problem: str                 # "p1" or "p2"
    min_remaining_energy: float
    mean_delay: float
    violation_count: int
    value: float
    feasible: bool
    weights: ObjectiveWeights


def _delay_of(scenario: Scenario, task, entry: ScheduleEntry) -> float:
    return ((entry.start - task.arrival) * scenario.interval_len
            + task.iot_delay
            + scenario.proc_seconds(task.type_id, entry.resource))


def validate(scenario: Scenario, trace: EpisodeTrace, schedule: Schedule) -> list[Finding]:
    """Check every feasibility constraint; an empty list means feasible.

    The schedule representation already enforces one resource and one
    contiguous window per task, so the single-assignment and association
    constraints can only fail structurally (missing task, bad window).
    The time axis is open-ended: windows may extend beyond the horizon
    (unbounded FIFO queues), capacity is checked wherever they lie.
    """
    findings: list[Finding] = []
    trace_keys = {t.key: t for t in trace.tasks}
    for key in schedule.entries:
        if key not in trace_keys:
            findings.append(Finding("scope", key, None, None,
                                    f"schedule entry for unknown task {key}"))
    for task in trace.tasks:
        entry = schedule.entries.get(task.key)
        if entry is None:
            findings.append(Finding("assignment", task.key, None, None,
                                    f"task {task.key} is not processed by any resource"))
            continue
        if not (0 <= entry.resource < scenario.n_resources):
            findings.append(Finding("scope", task.key, entry.resource, None,
                                    f"task {task.key} assigned to unknown resource"))
            continue
        if entry.start > entry.end:
            findings.append(Finding("contiguity", task.key, entry.resource, entry.start,
                                    f"task {task.key} has an empty processing window"))
        duration = entry.end - entry.start + 1
        expected = scenario.proc_intervals(task.type_id, entry.resource)
        if duration != expected:
            findings.append(Finding("duration", task.key, entry.resource, entry.start,
                                    f"task {task.key} occupies {duration} intervals, "
                                    f"needs {expected}"))
        if entry.start < task.arrival:
            findings.append(Finding("causality", task.key, entry.resource, entry.start,
                                    f"task {task.key} starts before its arrival "
                                    f"interval {task.arrival}"))
    by_resource: dict[int, list] = {}
    for key, entry in schedule.entries.items():
        if key in trace_keys and 0 <= entry.resource < scenario.n_resources:
            by_resource.setdefault(entry.resource, []).append((entry.start, entry.end, key))
    for resource, windows in by_resource.items():
        windows.sort()
        for (s1, e1, k1), (s2, e2, k2) in zip(windows, windows[1:]):
            if e1 >= s2:
                findings.append(Finding("capacity", k2, resource, s2,
                                        f"tasks {k1} and {k2} overlap on resource "
                                        f"{resource} at interval {s2}"))
    return findings


def evaluate(scenario: Scenario, trace: EpisodeTrace, schedule: Schedule,
             problem: str, weights: ObjectiveWeights) -> ObjectiveBreakdown:
    """Recompute energies, delays and violations from a feasible schedule."""
    findings = validate(scenario, trace, schedule)
    if findings:
        raise InfeasibleSchedule(findings[0].message)
    if problem not in ("p1", "p2"):
        raise ValueError(f"problem must be 'p1' or 'p2', got {problem!r}")

    busy = [0] * scenario.abs_count
    for entry in schedule.entries.values():
        if scenario.is_abs(entry.resource):
            busy[entry.resource] += entry.end - entry.start + 1
    energies = []
    for j in scenario.abs_ids:
        ledger = EnergyLedger(scenario.energy_of(j), scenario.energy_time_scale)
        ledger.busy_intervals = busy[j]
        energies.append(ledger.remaining(scenario.horizon))
    min_energy = min(energies)

    delays = [_delay_of(scenario, task, schedule.entries[task.key])
              for task in trace.tasks]
    n = len(delays)
    mean_delay = sum(delays) / n if n else 0.0
    violations = sum(
        1 for task, d in zip(trace.tasks, delays)
        if d > scenario.task_type(task.type_id).deadline)

    w = weights.w
    if problem == "p1":
        value = (w * min_energy
                 - (1.0 - w) / (2.0 * weights.theta_m) * mean_delay
                 - (1.0 - w) / (2.0 * weights.theta_d) * violations)
        feasible = True
    else:
        value = w * min_energy - (1.0 - w) / weights.theta_m * mean_delay
        feasible = violations <= weights.v_max
    return ObjectiveBreakdown(problem=problem, min_remaining_energy=min_energy,
                              mean_delay=mean_delay, violation_count=violations,
                              value=value, feasible=feasible, weights=weights)


# ---------------------------------------------------------------------------
# exhaustive optimum


@dataclass(frozen=True)
class BruteForceLimits:
    max_tasks: int = 6
    max_resources: int = 3
    max_intervals: int = 64


@dataclass
class BruteForceResult:
    schedule: Schedule | None
    objective: ObjectiveBreakdown | None
    feasible: bool
    assignments_explored: int = 0


def _pack(scenario: Scenario, order, resource: int):
    """Earliest-feasible packing of tasks on one resource, in the given order.

    Returns (rows, delay_sum, violation_count, start_signature) where rows are
    (task_key, start, end, violated) and the signature lists starts in task-key
    order for lexicographic tie-breaking.
    """
    busy_until = 0
    rows = []
    delay_sum = 0.0
    violations = 0
    for task in order:
        duration = scenario.proc_intervals(task.type_id, resource)
        start = max(busy_until, task.arrival)
        end = start + duration - 1
        busy_until = start + duration
        delay = ((start - task.arrival) * scenario.interval_len
                 + task.iot_delay
                 + scenario.proc_seconds(task.type_id, resource))
        violated = delay > scenario.task_type(task.type_id).deadline
        rows.append((task.key, start, end))
        delay_sum += delay
        violations += int(violated)
    signature = tuple(start for _, start, _ in sorted(rows))
    return rows, delay_sum, violations, signature


def _resource_orderings(scenario: Scenario, tasks, resource: int):
    """All distinct packings of a task set on one resource."""
    for order in itertools.permutations(tasks):
        yield _pack(scenario, order, resource)


def brute_force(scenario: Scenario, trace: EpisodeTrace, problem: str,
                weights: ObjectiveWeights,
                limits: BruteForceLimits = BruteForceLimits()) -> BruteForceResult:
    """Exact optimum over assignments x service orders on a tiny instance.

    For a fixed assignment the per-ABS busy counts (hence energies) are
    already determined, and both delay and violation terms decompose by
    resource, so each resource's order is optimized independently.  For the
    budget-constrained problem a small DP over violation counts combines the
    per-resource Pareto frontiers.  Ties are broken by the lexicographically
    smallest schedule encoding.
    """
    if problem not in ("p1", "p2"):
        raise ValueError(f"problem must be 'p1' or 'p2', got {problem!r}")
    tasks = list(trace.tasks)
    n = len(tasks)
    n_res = scenario.n_resources
    if n > limits.max_tasks:
        raise BudgetExceeded(f"{n} tasks exceed the enumeration budget "
                             f"({limits.max_tasks})")
    if n_res > limits.max_resources:
        raise BudgetExceeded(f"{n_res} resources exceed the enumeration budget "
                             f"({limits.max_resources})")
    if scenario.horizon > limits.max_intervals:
        raise BudgetExceeded(f"horizon {scenario.horizon} exceeds the enumeration "
                             f"budget ({limits.max_intervals})")

    if n == 0:
        empty = Schedule()
        return BruteForceResult(schedule=empty,
                                objective=evaluate(scenario, trace, empty, problem, weights),
                                feasible=True, assignments_explored=1)

    w = weights.w
    delay_coef = (1.0 - w) / (2.0 * weights.theta_m) / n if problem == "p1" \
        else (1.0 - w) / weights.theta_m / n
    violation_coef = (1.0 - w) / (2.0 * weights.theta_d) if problem == "p1" else 0.0

    best_value = None
    best_schedule = None
    best_encoding = None
    explored = 0

    for assignment in itertools.product(range(n_res), repeat=n):
        explored += 1
        busy = [0] * scenario.abs_count
        for task, r in zip(tasks, assignment):
            if scenario.is_abs(r):
                busy[r] += scenario.proc_intervals(task.type_id, r)
        min_energy = None
        for j in scenario.abs_ids:
            ledger = EnergyLedger(scenario.energy_of(j), scenario.energy_time_scale)
            ledger.busy_intervals = busy[j]
            e = ledger.remaining(scenario.horizon)
            min_energy = e if min_energy is None else min(min_energy, e)

        groups: dict[int, list] = {}
        for task, r in zip(tasks, assignment):
            groups.setdefault(r, []).append(task)

        if problem == "p1":
            # independent per-resource minimization of the blended cost
            total_cost = 0.0
            chosen_rows = []
            for r, group in sorted(groups.items()):
                best_cost = None
                best_sig = None
                best_rows = None
                for rows, dsum, viol, sig in _resource_orderings(scenario, group, r):
                    cost = delay_coef * dsum + violation_coef * viol
                    if best_cost is None or cost < best_cost or \
                            (cost == best_cost and sig < best_sig):
                        best_cost, best_sig, best_rows = cost, sig, rows
                total_cost += best_cost
                chosen_rows.extend(best_rows)
            value = w * min_energy - total_cost
            candidates = [(value, chosen_rows)]
        else:
            # Pareto frontier per resource: violation count -> min delay sum
            frontiers = []
            for r, group in sorted(groups.items()):
                frontier: dict[int, tuple[float, tuple, list]] = {}
                for rows, dsum, viol, sig in _resource_orderings(scenario, group, r):
                    cur = frontier.get(viol)
                    if cur is None or dsum < cur[0] or (dsum == cur[0] and sig < cur[1]):
                        frontier[viol] = (dsum, sig, rows)
                frontiers.append(frontier)
            combos: dict[int, tuple[float, list]] = {0: (0.0, [])}
            for frontier in frontiers:
                nxt: dict[int, tuple[float, list]] = {}
                for vtot, (dtot, rows_acc) in combos.items():
                    for viol, (dsum, _, rows) in frontier.items():
                        key = vtot + viol
                        if key > weights.v_max:
                            continue
                        cand = (dtot + dsum, rows_acc + rows)
                        cur = nxt.get(key)
                        if cur is None or cand[0] < cur[0]:
                            nxt[key] = cand
                combos = nxt
                if not combos:
                    break
            if not combos:
                continue  # this assignment cannot meet the violation budget
            candidates = [(w * min_energy - delay_coef * dtot, rows)
                          for dtot, rows in combos.values()]

        for value, rows in candidates:
            if best_value is None or value > best_value:
                best_value = value
                best_schedule = rows_to_schedule(rows, tasks, assignment)
                best_encoding = best_schedule.encoding()
            elif value == best_value:
                candidate = rows_to_schedule(rows, tasks, assignment)
                enc = candidate.encoding()
                if enc < best_encoding:
                    best_schedule = candidate
                    best_encoding = enc

    if best_schedule is None:
        return BruteForceResult(schedule=None, objective=None, feasible=False,
                                assignments_explored=explored)
    objective = evaluate(scenario, trace, best_schedule, problem, weights)
    return BruteForceResult(schedule=best_schedule, objective=objective,
                            feasible=objective.feasible, assignments_explored=explored)


def rows_to_schedule(rows, tasks, assignment) -> Schedule:
    by_key = {task.key: r for task, r in zip(tasks, assignment)}
    return Schedule(entries={
        key: ScheduleEntry(resource=by_key[key], start=start, end=end)
        for key, start, end in rows
    })
