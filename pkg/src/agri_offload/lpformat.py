"""Full mixed-integer model of the offloading problem in CPLEX-LP text format.

Variable naming (stable, documented):

* ``x_j{j}_t{t}_r{r}``           assignment of task (j,t) to resource r
* ``pA_j{j}_t{t}_r{r}_s{t'}``    task active on r during interval t'
* ``pS_...`` / ``pE_...``        start / end indicator at interval t'
* ``v_j{j}_t{t}``                deadline-violation flag
* ``e_min``                      linearized min over per-ABS remaining energies
* ``mean_delay``                 mean end-to-end delay (seconds)

Processing indicators exist only for ``t' >= arrival`` (causality is
structural) and the duration coupling is emitted per candidate resource
(``sum_t' pA = duration_r * x_r``), which linearizes the activity/assignment
product of the source formulation.  The violation flags follow the big-M
pair: infeasible slack forces ``v = 1``, a small epsilon forces ``v = 0`` when
the deadline holds (delay equal to the deadline counts as met).

The module also ships a reader for the emitted subset of the LP grammar plus
a bridge to ``scipy.optimize.milp``, so exported models can be solved and
re-imported without an external solver binary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import IoFailure
from .oracle import ObjectiveWeights, Schedule, ScheduleEntry
from .scenario import EpisodeTrace, Scenario

STRICT_EPS = 1e-6  # slack standing in for the strict big-M inequality

_WRAP = 8  # terms per line in emitted expressions


def _fmt(value: float) -> str:
    # plain decimal notation only: exponents would read as subtraction
    text = f"{value:.12f}".rstrip("0").rstrip(".")
    return text if text else "0"


def _xname(key, r) -> str:
    return f"x_j{key[0]}_t{key[1]}_r{r}"


def _pname(kind, key, r, s) -> str:
    return f"p{kind}_j{key[0]}_t{key[1]}_r{r}_s{s}"


def _vname(key) -> str:
    return f"v_j{key[0]}_t{key[1]}"


def big_m(scenario: Scenario) -> float:
    """Tightest safe constant for the violation rows: horizon + max deadline + 1."""
    return (scenario.horizon * scenario.interval_len
            + max(tt.deadline for tt in scenario.task_types) + 1.0)


def _expr(terms: list[tuple[float, str]]) -> str:
    parts = []
    for i, (coef, name) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        chunk = f"{sign} {_fmt(mag)} {name}"
        if i == 0 and sign == "+":
            chunk = f"{_fmt(mag)} {name}"
        parts.append(chunk)
    lines = []
    for i in range(0, len(parts), _WRAP):
        lines.append(" ".join(parts[i:i + _WRAP]))
    return "\n   ".join(lines)


def export_lp(scenario: Scenario, trace: EpisodeTrace, problem: str,
              weights: ObjectiveWeights, path) -> None:
    """Write the full model for a (small) trace to an LP file."""
    if problem not in ("p1", "p2"):
        raise ValueError(f"problem must be 'p1' or 'p2', got {problem!r}")
    if not trace.tasks:
        raise ValueError("export_lp needs a non-empty trace")
    sc = scenario
    il = sc.interval_len
    horizon = sc.horizon
    resources = range(sc.n_resources)
    tasks = list(trace.tasks)
    n = len(tasks)
    m_const = big_m(sc)
    w = weights.w

    rows: list[str] = []          # constraint lines
    binaries: list[str] = []

    def intervals_of(task):
        return range(task.arrival, horizon)

    for task in tasks:
        key = task.key
        binaries.append(_vname(key))
        for r in resources:
            binaries.append(_xname(key, r))
            for s in intervals_of(task):
                for kind in ("A", "S", "E"):
                    binaries.append(_pname(kind, key, r, s))

    # capacity: each resource serves at most one task per interval
    for kind in ("A", "S", "E"):
        for r in resources:
            for s in range(horizon):
                terms = [(1.0, _pname(kind, task.key, r, s))
                         for task in tasks if s >= task.arrival]
                if terms:
                    rows.append(f" cap{kind}_r{r}_s{s}: {_expr(terms)} <= 1")

    # a task occupies at most one resource per interval
    for kind in ("A", "S", "E"):
        for task in tasks:
            for s in intervals_of(task):
                terms = [(1.0, _pname(kind, task.key, r, s)) for r in resources]
                rows.append(
                    f" one{kind}_j{task.key[0]}_t{task.key[1]}_s{s}: {_expr(terms)} <= 1")

    # window association: activity chains, boundary, no start+end in one interval,
    # at most one start and one end
    for task in tasks:
        key = task.key
        for r in resources:
            first = task.arrival
            rows.append(f" bound_j{key[0]}_t{key[1]}_r{r}: "
                        f"{_expr([(1.0, _pname('A', key, r, first)), (-1.0, _pname('S', key, r, first))])} = 0")
            for s in range(first, horizon - 1):
                terms = [(1.0, _pname("A", key, r, s + 1)),
                         (-1.0, _pname("A", key, r, s)),
                         (-1.0, _pname("S", key, r, s + 1)),
                         (1.0, _pname("E", key, r, s + 1))]
                rows.append(f" chain_j{key[0]}_t{key[1]}_r{r}_s{s + 1}: {_expr(terms)} = 0")
            for s in intervals_of(task):
                terms = [(1.0, _pname("S", key, r, s)), (1.0, _pname("E", key, r, s))]
                rows.append(f" startend_j{key[0]}_t{key[1]}_r{r}_s{s}: {_expr(terms)} <= 1")
            for kind in ("S", "E"):
                terms = [(1.0, _pname(kind, key, r, s)) for s in intervals_of(task)]
                rows.append(f" once{kind}_j{key[0]}_t{key[1]}_r{r}: {_expr(terms)} <= 1")

    # duration coupling (linearized activity/assignment product)
    for task in tasks:
        key = task.key
        for r in resources:
            duration = sc.proc_intervals(task.type_id, r)
            terms = [(1.0, _pname("A", key, r, s)) for s in intervals_of(task)]
            terms.append((-float(duration), _xname(key, r)))
            rows.append(f" dur_j{key[0]}_t{key[1]}_r{r}: {_expr(terms)} = 0")

    # every received task is processed by exactly one resource
    for task in tasks:
        key = task.key
        terms = [(1.0, _xname(key, r)) for r in resources]
        rows.append(f" assign_j{key[0]}_t{key[1]}: {_expr(terms)} = 1")

    # delay expression pieces:  delay = il*sum(t'*pS) + sum(procs_r*x_r) + (iot - il*t)
    def delay_terms(task):
        terms = []
        for r in resources:
            for s in intervals_of(task):
                if s:
                    terms.append((il * s, _pname("S", task.key, r, s)))
            terms.append((sc.proc_seconds(task.type_id, r), _xname(task.key, r)))
        const = task.iot_delay - il * task.arrival
        return terms, const

    # violation big-M pair per task
    for task in tasks:
        key = task.key
        deadline = sc.task_type(task.type_id).deadline
        terms, const = delay_terms(task)
        neg = [(-c, name) for c, name in terms]
        rows.append(f" viol1_j{key[0]}_t{key[1]}: "
                    f"{_expr(neg + [(m_const, _vname(key))])} >= {_fmt(const - deadline)}")
        rows.append(f" viol2_j{key[0]}_t{key[1]}: "
                    f"{_expr(neg + [(m_const, _vname(key))])} <= "
                    f"{_fmt(m_const - STRICT_EPS - deadline + const)}")

    # mean-delay definition
    terms = [(1.0, "mean_delay")]
    const_sum = 0.0
    for task in tasks:
        t_terms, const = delay_terms(task)
        terms.extend((-c / n, name) for c, name in t_terms)
        const_sum += const
    rows.append(f" delta_def: {_expr(terms)} = {_fmt(const_sum / n)}")

    # min-energy linearization: one lower-bounding row per ABS
    for j in sc.abs_ids:
        params = sc.energy_of(j)
        scale = sc.energy_time_scale
        base = (params.hover + params.transmit + params.idle) * scale
        surcharge = (params.compute - params.idle) * scale
        terms = [(1.0, "e_min")]
        for task in tasks:
            for s in intervals_of(task):
                terms.append((surcharge, _pname("A", task.key, j, s)))
        rows.append(f" emin_abs{j}: {_expr(terms)} <= "
                    f"{_fmt(params.capacity - base * horizon)}")

    if problem == "p2":
        terms = [(1.0, _vname(task.key)) for task in tasks]
        rows.append(f" viol_budget: {_expr(terms)} <= {weights.v_max}")

    # objective
    obj_terms = [(w, "e_min")]
    if problem == "p1":
        obj_terms.append((-(1.0 - w) / (2.0 * weights.theta_m), "mean_delay"))
        viol_coef = (1.0 - w) / (2.0 * weights.theta_d)
        obj_terms.extend((-viol_coef, _vname(task.key)) for task in tasks)
    else:
        obj_terms.append((-(1.0 - w) / weights.theta_m, "mean_delay"))

    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"\\ offloading model problem={problem} tasks={n} "
                     f"resources={sc.n_resources} horizon={horizon}\n")
            fh.write(f"\\ scenario fingerprint {scenario.fingerprint()}\n")
            fh.write("Maximize\n")
            fh.write(f" obj: {_expr(obj_terms)}\n")
            fh.write("Subject To\n")
            for row in rows:
                fh.write(row + "\n")
            fh.write("Bounds\n")
            fh.write(" e_min free\n")
            fh.write("Binaries\n")
            for i in range(0, len(binaries), _WRAP):
                fh.write(" " + " ".join(binaries[i:i + _WRAP]) + "\n")
            fh.write("End\n")
    except OSError as exc:
        raise IoFailure(f"cannot write LP file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# reading the emitted LP subset back (round-trip checks, in-process solving)


@dataclass
class LpConstraint:
    name: str
    coefs: dict[str, float]
    sense: str   # "<=", ">=", "="
    rhs: float


@dataclass
class LpModel:
    maximize: bool
    objective: dict[str, float]
    constraints: list[LpConstraint] = field(default_factory=list)
    binaries: set[str] = field(default_factory=set)
    free: set[str] = field(default_factory=set)

    def variables(self) -> list[str]:
        names = set(self.objective)
        for con in self.constraints:
            names.update(con.coefs)
        return sorted(names)


def _tokenize_expression(text: str) -> dict[str, float]:
    tokens = text.replace("+", " + ").replace("-", " - ").split()
    coefs: dict[str, float] = {}
    sign = 1.0
    pending: float | None = None
    for tok in tokens:
        if tok == "+":
            sign, pending = 1.0, None
        elif tok == "-":
            sign, pending = -1.0, None
        else:
            try:
                value = float(tok)
            except ValueError:
                coef = sign * (1.0 if pending is None else pending)
                coefs[tok] = coefs.get(tok, 0.0) + coef
                sign, pending = 1.0, None
            else:
                pending = value
    return coefs


def parse_lp(path) -> LpModel:
    """Read back the LP subset this module emits."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = [line.rstrip("\n") for line in fh]
    except OSError as exc:
        raise IoFailure(f"cannot read LP file {path}: {exc}") from exc

    lines = [ln for ln in raw if ln.strip() and not ln.lstrip().startswith("\\")]
    section = None
    maximize = True
    objective: dict[str, float] = {}
    constraints: list[LpConstraint] = []
    binaries: set[str] = set()
    free: set[str] = set()
    buffer = ""

    def flush(buf: str) -> None:
        if not buf.strip():
            return
        name, body = buf.split(":", 1)
        for sense in ("<=", ">=", "="):
            if sense in body:
                lhs, rhs = body.split(sense, 1)
                constraints.append(LpConstraint(
                    name=name.strip(), coefs=_tokenize_expression(lhs),
                    sense=sense, rhs=float(rhs)))
                return
        raise ValueError(f"constraint without sense: {buf!r}")

    for line in lines:
        stripped = line.strip()
        lowered = stripped.lower()
        if lowered in ("maximize", "minimize", "subject to", "bounds", "binaries",
                       "binary", "end", "general", "st"):
            if section == "subject to":
                flush(buffer)
                buffer = ""
            if lowered in ("maximize", "minimize"):
                maximize = lowered == "maximize"
                section = "objective"
            elif lowered in ("subject to", "st"):
                section = "subject to"
            elif lowered == "end":
                section = None
            else:
                section = lowered
            continue
        if section == "objective":
            body = stripped.split(":", 1)[1] if ":" in stripped else stripped
            for name, coef in _tokenize_expression(body).items():
                objective[name] = objective.get(name, 0.0) + coef
        elif section == "subject to":
            starts_new = ":" in stripped and not any(
                op in stripped.split(":", 1)[0] for op in ("<=", ">=", "="))
            if starts_new and buffer:
                flush(buffer)
                buffer = stripped
            else:
                buffer += " " + stripped
        elif section == "bounds":
            if stripped.lower().endswith(" free"):
                free.add(stripped.split()[0])
        elif section in ("binaries", "binary"):
            binaries.update(stripped.split())
    if buffer:
        flush(buffer)
    return LpModel(maximize=maximize, objective=objective,
                   constraints=constraints, binaries=binaries, free=free)


def solve_with_scipy(model: LpModel) -> tuple[float, dict[str, float]]:
    """Solve a parsed model with scipy's MILP interface (HiGHS backend)."""
    import numpy as np
    from scipy.optimize import LinearConstraint, Bounds, milp

    names = model.variables()
    index = {name: i for i, name in enumerate(names)}
    c = np.zeros(len(names))
    for name, coef in model.objective.items():
        c[index[name]] = -coef if model.maximize else coef

    a = np.zeros((len(model.constraints), len(names)))
    lb = np.full(len(model.constraints), -np.inf)
    ub = np.full(len(model.constraints), np.inf)
    for i, con in enumerate(model.constraints):
        for name, coef in con.coefs.items():
            a[i, index[name]] = coef
        if con.sense == "<=":
            ub[i] = con.rhs
        elif con.sense == ">=":
            lb[i] = con.rhs
        else:
            lb[i] = ub[i] = con.rhs

    var_lb = np.zeros(len(names))
    var_ub = np.full(len(names), np.inf)
    integrality = np.zeros(len(names))
    for name in model.binaries:
        i = index[name]
        integrality[i] = 1
        var_ub[i] = 1.0
    for name in model.free:
        i = index[name]
        var_lb[i] = -np.inf

    result = milp(c=c, constraints=LinearConstraint(a, lb, ub),
                  integrality=integrality, bounds=Bounds(var_lb, var_ub))
    if not result.success:
        raise RuntimeError(f"MILP solve failed: {result.message}")
    objective = -result.fun if model.maximize else result.fun
    return objective, {name: float(result.x[index[name]]) for name in names}


def read_solution(path) -> dict[str, float]:
    """Read plain 'name value' solution lines."""
    values: dict[str, float] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                name, value = line.split()
                values[name] = float(value)
    except OSError as exc:
        raise IoFailure(f"cannot read solution {path}: {exc}") from exc
    return values


def schedule_from_solution(values: dict[str, float], scenario: Scenario,
                           trace: EpisodeTrace) -> Schedule:
    """Rebuild a Schedule from solver variable values (x and pS indicators)."""
    entries = {}
    for task in trace.tasks:
        key = task.key
        resource = None
        for r in range(scenario.n_resources):
            if values.get(_xname(key, r), 0.0) > 0.5:
                resource = r
                break
        if resource is None:
            continue
        start = None
        for s in range(task.arrival, scenario.horizon):
            if values.get(_pname("S", key, resource, s), 0.0) > 0.5:
                start = s
                break
        if start is None:
            continue
        duration = scenario.proc_intervals(task.type_id, resource)
        entries[key] = ScheduleEntry(resource=resource, start=start,
                                     end=start + duration - 1)
    return Schedule(entries=entries)
