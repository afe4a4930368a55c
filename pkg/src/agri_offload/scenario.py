"""Static world model: resources, task types, arrival traces and their persistence.

A :class:`Scenario` describes the farm (interval grid, aerial base stations,
edge servers, task mix, energy budget, link-delay model).  A seeded
:func:`generate_trace` turns it into an :class:`EpisodeTrace`, the reproducible
arrival log every simulation, training episode and exact-oracle run consumes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import FingerprintMismatch, InvariantViolation, IoFailure, MalformedConfig

ABS = "abs"
MEC = "mec"

# proc_time / interval_len must be integral up to this relative slack
_DIV_TOL = 1e-9


@dataclass(frozen=True)
class TaskType:
    """One class of image-processing task (arrival rate, deadline, service times)."""

    id: int
    mean_interarrival: float  # seconds, per ABS and per type
    deadline: float           # seconds
    proc_time_abs: float      # seconds of service on an ABS
    proc_time_mec: float      # seconds of service on a MEC server
    name: str = ""


@dataclass(frozen=True)
class EnergyParams:
    """Per-ABS battery capacity and raw per-interval consumption rates.

    The raw rates are multiplied by the scenario's ``energy_time_scale``
    before they are charged, so the table values can be kept recognizable.
    """

    capacity: float
    hover: float
    transmit: float
    idle: float
    compute: float


@dataclass(frozen=True)
class ResourceSpec:
    id: int
    kind: str                       # ABS or MEC
    energy: EnergyParams | None = None  # present iff kind == ABS


@dataclass(frozen=True)
class DelayModel:
    """Link-delay model: IoT uplink draw plus fixed inter-node hop delays.

    The IoT->ABS delay of a task is ``iot_to_abs_base + U(0, iot_to_abs_jitter)``,
    rounded to 6 decimals so values survive the trace-file round trip.
    """

    iot_to_abs_base: float
    iot_to_abs_jitter: float
    abs_to_abs: float
    abs_to_mec: float

    def sample_iot_delay(self, rng: np.random.Generator) -> float:
        return round(self.iot_to_abs_base + self.iot_to_abs_jitter * rng.random(), 6)


@dataclass(frozen=True)
class Scenario:
    interval_len: float            # seconds per interval
    horizon: int                   # number of intervals
    abs_count: int
    mec_count: int
    task_types: tuple[TaskType, ...]
    resources: tuple[ResourceSpec, ...]
    delay_model: DelayModel
    energy_time_scale: float
    seed: int = 0

    # -- structure helpers -------------------------------------------------

    @property
    def n_resources(self) -> int:
        return self.abs_count + self.mec_count

    @property
    def abs_ids(self) -> range:
        return range(self.abs_count)

    @property
    def mec_ids(self) -> range:
        return range(self.abs_count, self.abs_count + self.mec_count)

    def is_abs(self, resource: int) -> bool:
        return 0 <= resource < self.abs_count

    def task_type(self, type_id: int) -> TaskType:
        return self.task_types[type_id]

    def proc_seconds(self, type_id: int, resource: int) -> float:
        tt = self.task_types[type_id]
        return tt.proc_time_abs if self.is_abs(resource) else tt.proc_time_mec

    def proc_intervals(self, type_id: int, resource: int) -> int:
        return int(round(self.proc_seconds(type_id, resource) / self.interval_len))

    def hop_seconds(self, origin: int, target: int) -> float:
        if target == origin:
            return 0.0
        return self.delay_model.abs_to_abs if self.is_abs(target) else self.delay_model.abs_to_mec

    def hop_intervals(self, origin: int, target: int) -> int:
        hop = self.hop_seconds(origin, target)
        if hop <= 0.0:
            return 0
        return int(math.ceil(round(hop / self.interval_len, 9)))

    def energy_of(self, abs_id: int) -> EnergyParams:
        spec = self.resources[abs_id]
        if spec.kind != ABS or spec.energy is None:
            raise InvariantViolation(f"resource {abs_id} carries no battery")
        return spec.energy

    # -- identity ----------------------------------------------------------

    def fingerprint(self) -> str:
        """Stable 16-hex-digit digest of every scenario field."""
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self) -> None:
        """Raise InvariantViolation naming the first broken invariant."""
        if self.interval_len <= 0:
            raise InvariantViolation("interval_len must be positive")
        if self.horizon < 1:
            raise InvariantViolation("horizon must be at least one interval")
        if self.abs_count < 1 or self.mec_count < 1:
            raise InvariantViolation("need at least one ABS and one MEC")
        if not self.task_types:
            raise InvariantViolation("at least one task type is required")
        seen_ids = set()
        for tt in self.task_types:
            if tt.id in seen_ids:
                raise InvariantViolation(f"duplicate task type id {tt.id}")
            seen_ids.add(tt.id)
            for label, dur in (("mean_interarrival", tt.mean_interarrival),
                               ("deadline", tt.deadline),
                               ("proc_time_abs", tt.proc_time_abs),
                               ("proc_time_mec", tt.proc_time_mec)):
                if dur <= 0:
                    raise InvariantViolation(f"task type {tt.id}: {label} must be positive")
            if tt.proc_time_mec > tt.proc_time_abs:
                raise InvariantViolation(
                    f"task type {tt.id}: proc_time_mec must not exceed proc_time_abs")
            if tt.deadline <= tt.proc_time_abs:
                raise InvariantViolation(
                    f"task type {tt.id}: deadline must exceed proc_time_abs")
            for dur in (tt.proc_time_abs, tt.proc_time_mec):
                ratio = dur / self.interval_len
                if abs(ratio - round(ratio)) > _DIV_TOL * max(1.0, ratio):
                    raise InvariantViolation(
                        f"interval_len {self.interval_len} does not divide "
                        f"processing time {dur} of task type {tt.id}")
        if set(self.task_types[i].id for i in range(len(self.task_types))) != set(range(len(self.task_types))):
            raise InvariantViolation("task type ids must be 0..K-1")
        if len(self.resources) != self.n_resources:
            raise InvariantViolation("resource list size must equal abs_count + mec_count")
        for idx, spec in enumerate(self.resources):
            if spec.id != idx:
                raise InvariantViolation("resource ids must be contiguous from 0")
            expect_kind = ABS if idx < self.abs_count else MEC
            if spec.kind != expect_kind:
                raise InvariantViolation(
                    f"resource {idx} must be kind '{expect_kind}' (ABSs first, then MECs)")
            if spec.kind == ABS:
                if spec.energy is None:
                    raise InvariantViolation(f"ABS {idx} is missing energy parameters")
                en = spec.energy
                if en.capacity <= 0:
                    raise InvariantViolation(f"ABS {idx}: battery capacity must be positive")
                if min(en.hover, en.transmit, en.idle, en.compute) < 0:
                    raise InvariantViolation(f"ABS {idx}: energy rates must be non-negative")
                if en.compute <= en.idle:
                    raise InvariantViolation(f"ABS {idx}: compute rate must exceed idle rate")
            elif spec.energy is not None:
                raise InvariantViolation(f"MEC {idx} must not carry energy parameters")
        dm = self.delay_model
        if min(dm.iot_to_abs_base, dm.iot_to_abs_jitter, dm.abs_to_abs, dm.abs_to_mec) < 0:
            raise InvariantViolation("delay model values must be non-negative")
        if self.energy_time_scale <= 0:
            raise InvariantViolation("energy_time_scale must be positive")


@dataclass(frozen=True, order=True)
class TaskRecord:
    """One arrived task, keyed by (origin ABS, arrival interval)."""

    arrival: int          # interval index, 0 <= arrival < horizon
    origin: int           # receiving ABS id
    type_id: int
    iot_delay: float      # pre-sampled IoT->ABS delay, seconds

    @property
    def key(self) -> tuple[int, int]:
        return (self.origin, self.arrival)


@dataclass(frozen=True)
class EpisodeTrace:
    """Arrival log sorted by (arrival interval, origin id)."""

    fingerprint: str
    tasks: tuple[TaskRecord, ...]

    def __len__(self) -> int:
        return len(self.tasks)


# ---------------------------------------------------------------------------
# configuration


def build_scenario(config: dict) -> Scenario:
    """Validate a parsed configuration document and return the Scenario.

    Raises MalformedConfig for missing/badly-typed fields and
    InvariantViolation when field values break a domain invariant.
    """
    if not isinstance(config, dict):
        raise MalformedConfig("configuration root must be a mapping")

    def need(key, kind, caster=None):
        if key not in config:
            raise MalformedConfig(f"missing config key '{key}'")
        value = config[key]
        if caster is not None:
            try:
                return caster(value)
            except (TypeError, ValueError) as exc:
                raise MalformedConfig(f"config key '{key}': {exc}") from exc
        if not isinstance(value, kind):
            raise MalformedConfig(f"config key '{key}' must be {kind}")
        return value

    interval_len = need("interval_len", float, float)
    horizon = need("horizon_intervals", int, int)
    abs_count = need("abs_count", int, int)
    mec_count = need("mec_count", int, int)
    scale = need("energy_time_scale", float, float)
    seed = int(config.get("seed", 0))

    raw_types = need("task_types", list)
    task_types = []
    for i, row in enumerate(raw_types):
        if not isinstance(row, dict):
            raise MalformedConfig(f"task_types[{i}] must be a mapping")
        try:
            task_types.append(TaskType(
                id=int(row.get("id", i)),
                mean_interarrival=float(row["mean_interarrival"]),
                deadline=float(row["deadline"]),
                proc_time_abs=float(row["proc_time_abs"]),
                proc_time_mec=float(row["proc_time_mec"]),
                name=str(row.get("name", f"type{i}")),
            ))
        except KeyError as exc:
            raise MalformedConfig(f"task_types[{i}] is missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise MalformedConfig(f"task_types[{i}]: {exc}") from exc

    raw_energy = need("abs_energy", list)
    if len(raw_energy) == 1 and abs_count > 1:
        raw_energy = raw_energy * abs_count
    if len(raw_energy) != abs_count:
        raise MalformedConfig(
            f"abs_energy must list 1 or abs_count={abs_count} rows, got {len(raw_energy)}")
    energies = []
    for i, row in enumerate(raw_energy):
        if not isinstance(row, dict):
            raise MalformedConfig(f"abs_energy[{i}] must be a mapping")
        try:
            energies.append(EnergyParams(
                capacity=float(row["capacity"]),
                hover=float(row["hover"]),
                transmit=float(row["transmit"]),
                idle=float(row["idle"]),
                compute=float(row["compute"]),
            ))
        except KeyError as exc:
            raise MalformedConfig(f"abs_energy[{i}] is missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise MalformedConfig(f"abs_energy[{i}]: {exc}") from exc

    raw_delay = need("delay_model", dict)
    try:
        delay_model = DelayModel(
            iot_to_abs_base=float(raw_delay["iot_to_abs_base"]),
            iot_to_abs_jitter=float(raw_delay["iot_to_abs_jitter"]),
            abs_to_abs=float(raw_delay["abs_to_abs"]),
            abs_to_mec=float(raw_delay["abs_to_mec"]),
        )
    except KeyError as exc:
        raise MalformedConfig(f"delay_model is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise MalformedConfig(f"delay_model: {exc}") from exc

    resources = tuple(
        ResourceSpec(id=j, kind=ABS, energy=energies[j]) for j in range(abs_count)
    ) + tuple(
        ResourceSpec(id=abs_count + l, kind=MEC) for l in range(mec_count)
    )

    scenario = Scenario(
        interval_len=interval_len,
        horizon=horizon,
        abs_count=abs_count,
        mec_count=mec_count,
        task_types=tuple(task_types),
        resources=resources,
        delay_model=delay_model,
        energy_time_scale=scale,
        seed=seed,
    )
    scenario.validate()
    return scenario


def scenario_from_file(path) -> Scenario:
    """Load a YAML (or JSON) configuration file and build the Scenario."""
    import yaml

    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = yaml.safe_load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise MalformedConfig(f"cannot parse config {path}: {exc}") from exc
    return build_scenario(config)


# ---------------------------------------------------------------------------
# trace generation


def generate_trace(scenario: Scenario, seed: int) -> EpisodeTrace:
    """Draw one reproducible arrival log.

    Per (ABS, task type) pair the arrival epochs accumulate exponential gaps
    with the configured mean, quantized to interval indices.  Collisions on an
    ABS interval (between types, or within a type) defer the later entry to
    the next interval still free at that ABS; entries pushed past the horizon
    are dropped.  The draw is a pure function of (scenario, seed).
    """
    horizon_seconds = scenario.horizon * scenario.interval_len
    placed: list[TaskRecord] = []
    for j in scenario.abs_ids:
        # (quantized interval, type id, per-type draw index) defines placement order
        pending: list[tuple[int, int, int]] = []
        for tt in scenario.task_types:
            rng = np.random.default_rng((seed, j, tt.id))
            t_sec = rng.exponential(tt.mean_interarrival)
            draw = 0
            while t_sec < horizon_seconds:
                pending.append((int(t_sec / scenario.interval_len), tt.id, draw))
                draw += 1
                t_sec += rng.exponential(tt.mean_interarrival)
        pending.sort()
        occupied: set[int] = set()
        for interval, type_id, _ in pending:
            while interval in occupied:
                interval += 1
            if interval >= scenario.horizon:
                continue
            occupied.add(interval)
            placed.append(TaskRecord(arrival=interval, origin=j,
                                     type_id=type_id, iot_delay=0.0))
    placed.sort()  # (arrival, origin) order; keys are unique by construction
    delay_rng = np.random.default_rng((seed, 0x10, scenario.seed))
    tasks = tuple(
        TaskRecord(arrival=rec.arrival, origin=rec.origin, type_id=rec.type_id,
                   iot_delay=scenario.delay_model.sample_iot_delay(delay_rng))
        for rec in placed
    )
    return EpisodeTrace(fingerprint=scenario.fingerprint(), tasks=tasks)


# ---------------------------------------------------------------------------
# trace persistence: '#fingerprint=<hex>' header, then CSV rows j,t,k,alpha_I


def save_trace(trace: EpisodeTrace, path, manifest: str | None = None) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#fingerprint={trace.fingerprint}\n")
            if manifest:
                fh.write(f"#manifest={manifest}\n")
            fh.write("j,t,k,alpha_I\n")
            for rec in trace.tasks:
                fh.write(f"{rec.origin},{rec.arrival},{rec.type_id},{rec.iot_delay:.6f}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write trace {path}: {exc}") from exc


def load_trace(path, scenario: Scenario | None = None) -> EpisodeTrace:
    """Read a trace file; verifies the fingerprint when a scenario is given."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read trace {path}: {exc}") from exc
    if not lines or not lines[0].startswith("#fingerprint="):
        raise IoFailure(f"trace {path} has no fingerprint header")
    fingerprint = lines[0].split("=", 1)[1].strip()
    if scenario is not None and fingerprint != scenario.fingerprint():
        raise FingerprintMismatch(
            f"trace {path} was generated from scenario {fingerprint}, "
            f"expected {scenario.fingerprint()}")
    tasks = []
    for line in lines[1:]:
        if not line or line.startswith("#") or line.startswith("j,"):
            continue
        j, t, k, alpha = line.split(",")
        tasks.append(TaskRecord(arrival=int(t), origin=int(j),
                                type_id=int(k), iot_delay=float(alpha)))
    tasks.sort()
    return EpisodeTrace(fingerprint=fingerprint, tasks=tuple(tasks))
