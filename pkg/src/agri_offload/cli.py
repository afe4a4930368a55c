"""Operator surface: trace generation, training, evaluation, sweeps, oracle runs.

Every command writes a ``manifest.json`` into its output directory recording
the exact inputs (command, scenario fingerprint, seeds, policies, overrides)
and each produced file carries a ``#manifest=`` citation line.  Exit codes:
0 success, 2 validation/config error, 3 budget or infeasibility, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

from . import __version__
from .agents import load_tables, save_tables
from .baselines import POLICIES, make_policy
from .errors import (
    BudgetExceeded,
    InfeasibleSchedule,
    InvalidParams,
    InvalidRange,
    InvariantViolation,
    IoFailure,
    MalformedConfig,
    VersionMismatch,
)
from .lpformat import export_lp
from .oracle import ObjectiveWeights, brute_force, evaluate
from .presets import PRESETS, preset_config
from .scenario import Scenario, build_scenario, generate_trace, load_trace, save_trace
from .simenv import run_policy
from .training import TrainParams, train, write_curves

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    command: str
    scenario_fingerprint: str
    seeds: list[int] = field(default_factory=list)
    policies: list[str] = field(default_factory=list)
    overrides: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    version: str = __version__


def _write_manifest(out_dir: str, manifest: RunManifest) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# shared helpers


def _load_config(args) -> dict:
    if getattr(args, "preset", None):
        return preset_config(args.preset)
    if not args.config:
        raise MalformedConfig("a --config file is required")
    import yaml

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = yaml.safe_load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {args.config}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise MalformedConfig(f"cannot parse config {args.config}: {exc}") from exc
    return config


def _pool_size(n_items: int) -> int:
    cap_env = os.environ.get("AGRI_OFFLOAD_THREADS", "")
    cap = int(cap_env) if cap_env else 4
    return max(1, min(n_items, cap, os.cpu_count() or 1))


def _map_ordered(fn, items: list):
    """Fan work out to a process pool; results keep the submission order."""
    size = _pool_size(len(items))
    if size <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    try:
        with ProcessPoolExecutor(max_workers=size) as pool:
            return list(pool.map(fn, items))
    except (OSError, RuntimeError):
        return [fn(item) for item in items]


def _policy_specs(args) -> list[tuple[str, str]]:
    """Parse --policy (comma list of names) and --tables into policy specs."""
    specs: list[tuple[str, str]] = []
    if getattr(args, "policy", None):
        for name in str(args.policy).split(","):
            name = name.strip()
            if not name:
                continue
            if name in POLICIES:
                specs.append(("name", name))
            else:
                raise InvalidParams(
                    f"unknown policy '{name}' (choose from {sorted(POLICIES)})")
    if getattr(args, "tables", None):
        specs.append(("tables", args.tables))
    if not specs:
        raise InvalidParams("give --policy NAME and/or --tables PATH")
    return specs


def _spec_label(spec: tuple[str, str]) -> str:
    kind, value = spec
    if kind == "name":
        return value
    return os.path.splitext(os.path.basename(value))[0]


def _make_runner(scenario: Scenario, spec: tuple[str, str]):
    kind, value = spec
    if kind == "name":
        return make_policy(value)
    table_kind, agents, params = load_tables(value, scenario)
    from .training import TrainedPolicy

    return TrainedPolicy(scenario, table_kind, agents, params)


def _eval_one(task_args) -> dict:
    """Worker: evaluate one (config, seed, policy spec) combination."""
    config, seed, spec = task_args
    scenario = build_scenario(config)
    trace = generate_trace(scenario, seed)
    policy = _make_runner(scenario, spec)
    report, _ = run_policy(scenario, trace, policy)
    return {"seed": seed, "label": _spec_label(spec), "report": report}


def _write_kpi_csv(path: str, results: list[dict], manifest_name: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#manifest={manifest_name}\n")
        writer = csv.writer(fh)
        header = results[0]["report"].csv_header()
        writer.writerow(header)
        for row in results:
            writer.writerow(row["report"].csv_row(row["label"], row["seed"]))
        by_label: dict[str, list] = {}
        for row in results:
            by_label.setdefault(row["label"], []).append(row["report"])
        for label, reports in by_label.items():
            for stat, red in (("mean", statistics.fmean), ("std", _std)):
                agg = [label, stat,
                       f"{red([r.min_remaining_fraction for r in reports]):.9f}",
                       f"{red([r.mean_delay for r in reports]):.9f}",
                       f"{red([float(r.violation_count) for r in reports]):.3f}"]
                agg += [f"{red([float(r.per_resource_tasks[i]) for r in reports]):.3f}"
                        for i in range(len(reports[0].per_resource_tasks))]
                agg += [f"{red([float(r.per_resource_violations[i]) for r in reports]):.3f}"
                        for i in range(len(reports[0].per_resource_violations))]
                agg += [f"{red([r.per_abs_remaining_fraction[i] for r in reports]):.9f}"
                        for i in range(len(reports[0].per_abs_remaining_fraction))]
                writer.writerow(agg)


def _std(values) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    config = _load_config(args)
    scenario = build_scenario(config)
    manifest = RunManifest(command="gen", scenario_fingerprint=scenario.fingerprint(),
                           seeds=[args.seed + i for i in range(args.n_traces)])
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.n_traces):
        trace = generate_trace(scenario, args.seed + i)
        path = os.path.join(args.out, f"trace_{i:04d}.csv")
        save_trace(trace, path, manifest=MANIFEST_NAME)
        manifest.outputs.append(os.path.basename(path))
    _write_manifest(args.out, manifest)
    print(f"wrote {args.n_traces} trace(s) to {args.out}")
    return 0


def _train_params(args) -> TrainParams:
    params = TrainParams()
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise InvalidParams(f"--set expects key=value, got '{item}'")
        key, raw = item.split("=", 1)
        key = key.strip()
        valid = {f.name: f.type for f in fields(TrainParams)}
        if key not in valid:
            raise InvalidParams(f"unknown training parameter '{key}'")
        current = getattr(params, key)
        if isinstance(current, bool):
            value = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(raw)
        elif isinstance(current, float):
            value = float(raw)
        elif isinstance(current, tuple):
            value = tuple(float(v) for v in raw.split(":"))
        else:
            value = raw
        setattr(params, key, value)
        overrides[key] = value
    if args.episodes is not None:
        params.episodes = args.episodes
        overrides["episodes"] = args.episodes
    if args.seed is not None:
        params.seed = args.seed
        overrides["seed"] = args.seed
    if getattr(args, "w", None) is not None:
        params.w = float(args.w)
        overrides["w"] = params.w
    params.validate()
    args._overrides = overrides
    return params


def cmd_train(args) -> int:
    config = _load_config(args)
    scenario = build_scenario(config)
    params = _train_params(args)
    names = sorted(name for name in os.listdir(args.traces)
                   if name.startswith("trace_") and name.endswith(".csv"))
    if not names:
        raise IoFailure(f"no trace files found in {args.traces}")
    traces = [load_trace(os.path.join(args.traces, name), scenario) for name in names]
    result = train(args.kind, scenario, traces, params)
    os.makedirs(args.out, exist_ok=True)
    tables_path = os.path.join(args.out, f"tables_{args.kind}.npz")
    curves_path = os.path.join(args.out, f"curves_{args.kind}.csv")
    save_tables(result.agents, params, tables_path)
    write_curves(result.curves, curves_path)
    manifest = RunManifest(command="train", scenario_fingerprint=scenario.fingerprint(),
                           seeds=[params.seed], policies=[args.kind],
                           overrides=args._overrides,
                           outputs=[os.path.basename(tables_path),
                                    os.path.basename(curves_path)])
    _write_manifest(args.out, manifest)
    zeta = getattr(result.agents[0], "zeta", None)
    suffix = f", final zeta={zeta:.3f}" if zeta is not None else ""
    print(f"trained {args.kind} for {params.episodes} episode(s) "
          f"on {len(traces)} trace(s){suffix}")
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args)
    scenario = build_scenario(config)
    specs = _policy_specs(args)
    seeds = [args.seed + i for i in range(args.seeds)]
    jobs = [(config, seed, spec) for spec in specs for seed in seeds]
    results = _map_ordered(_eval_one, jobs)
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(command="eval", scenario_fingerprint=scenario.fingerprint(),
                           seeds=seeds, policies=[_spec_label(s) for s in specs])
    csv_path = os.path.join(args.out, "kpi.csv")
    _write_kpi_csv(csv_path, results, MANIFEST_NAME)
    manifest.outputs.append(os.path.basename(csv_path))
    for spec in specs:
        label = _spec_label(spec)
        rows = [r for r in results if r["label"] == label]
        report_doc = {
            "manifest": MANIFEST_NAME,
            "policy": label,
            "seeds": seeds,
            "per_seed": [json.loads(r["report"].to_json(seed=r["seed"])) for r in rows],
            "aggregate": {
                "min_remaining_fraction_mean": statistics.fmean(
                    [r["report"].min_remaining_fraction for r in rows]),
                "mean_delay_mean": statistics.fmean(
                    [r["report"].mean_delay for r in rows]),
                "violations_mean": statistics.fmean(
                    [float(r["report"].violation_count) for r in rows]),
                "violations_std": _std([float(r["report"].violation_count) for r in rows]),
            },
        }
        json_path = os.path.join(args.out, f"report_{label}.json")
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report_doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest.outputs.append(os.path.basename(json_path))
    _write_manifest(args.out, manifest)
    print(f"evaluated {len(specs)} policy(ies) over {len(seeds)} seed(s) -> {csv_path}")
    return 0


def _parse_range(spec: str) -> list[float]:
    try:
        start_s, stop_s, step_s = spec.split(":")
        start, stop, step = float(start_s), float(stop_s), float(step_s)
    except ValueError as exc:
        raise InvalidRange(f"--range expects a:b:step, got '{spec}'") from exc
    if step <= 0 or stop < start:
        raise InvalidRange(f"--range needs step > 0 and b >= a, got '{spec}'")
    values = []
    v = start
    while v <= stop + 1e-12:
        values.append(round(v, 12))
        v += step
    return values


def _sweep_config(config: dict, axis: str, value: float) -> dict:
    import copy

    modified = copy.deepcopy(config)
    target = None
    for row in modified.get("task_types", []):
        if "pesticide" in str(row.get("name", "")).lower():
            target = row
            break
    if target is None:
        raise InvalidRange("sweep axes target the pesticide-detection task type; "
                           "no task type with 'pesticide' in its name found")
    if axis == "pd_proc_time":
        target["proc_time_abs"] = value
        target["proc_time_mec"] = value / 2.0
    elif axis == "pd_deadline":
        target["deadline"] = value
    else:
        raise InvalidRange(f"unknown sweep axis '{axis}'")
    return modified


def cmd_sweep(args) -> int:
    config = _load_config(args)
    base_scenario = build_scenario(config)
    specs = _policy_specs(args)
    values = _parse_range(args.range)
    seeds = [args.seed + i for i in range(args.seeds)]
    point_configs = []
    for value in values:
        try:
            modified = _sweep_config(config, args.axis, value)
            build_scenario(modified)  # divisibility / invariant check up front
        except InvariantViolation as exc:
            raise InvalidRange(f"sweep value {value} is not usable: {exc}") from exc
        point_configs.append((value, modified))

    jobs = [(cfg, seed, spec)
            for value, cfg in point_configs for spec in specs for seed in seeds]
    results = _map_ordered(_eval_one, jobs)
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(command="sweep",
                           scenario_fingerprint=base_scenario.fingerprint(),
                           seeds=seeds, policies=[_spec_label(s) for s in specs],
                           overrides={"axis": args.axis, "range": args.range})
    csv_path = os.path.join(args.out, f"sweep_{args.axis}.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#manifest={MANIFEST_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "policy", "seed",
                         "min_remaining_fraction", "mean_delay_s", "violations"])
        idx = 0
        for value, _cfg in point_configs:
            for spec in specs:
                label = _spec_label(spec)
                reports = []
                for seed in seeds:
                    row = results[idx]
                    idx += 1
                    reports.append(row["report"])
                    writer.writerow([args.axis, value, label, seed,
                                     f"{row['report'].min_remaining_fraction:.9f}",
                                     f"{row['report'].mean_delay:.9f}",
                                     row["report"].violation_count])
                writer.writerow([args.axis, value, label, "mean",
                                 f"{statistics.fmean([r.min_remaining_fraction for r in reports]):.9f}",
                                 f"{statistics.fmean([r.mean_delay for r in reports]):.9f}",
                                 f"{statistics.fmean([float(r.violation_count) for r in reports]):.3f}"])
    manifest.outputs.append(os.path.basename(csv_path))
    _write_manifest(args.out, manifest)
    print(f"swept {args.axis} over {len(values)} point(s) -> {csv_path}")
    return 0


def cmd_oracle(args) -> int:
    config = _load_config(args)
    scenario = build_scenario(config)
    trace = generate_trace(scenario, args.seed)
    specs = _policy_specs(args) if (args.policy or args.tables) else \
        [("name", name) for name in ("rr", "lqhe", "local", "mec")]
    w_values = [float(v) for v in str(args.w).split(",")]
    os.makedirs(args.out, exist_ok=True)
    manifest = RunManifest(command="oracle", scenario_fingerprint=scenario.fingerprint(),
                           seeds=[args.seed], policies=[_spec_label(s) for s in specs],
                           overrides={"problem": args.problem, "w": w_values,
                                      "v_max": args.v_max})
    csv_path = os.path.join(args.out, f"oracle_{args.problem}.csv")
    rows = []
    for w in w_values:
        weights = ObjectiveWeights(w=w, v_max=args.v_max)
        best = brute_force(scenario, trace, args.problem, weights)
        if best.objective is None:
            rows.append(["oracle", w, "infeasible", "", "", "", ""])
            oracle_value = None
        else:
            obj = best.objective
            rows.append(["oracle", w, f"{obj.value:.9f}",
                         f"{obj.min_remaining_energy:.9f}", f"{obj.mean_delay:.9f}",
                         obj.violation_count, ""])
            oracle_value = obj.value
        if args.export_lp:
            lp_path = os.path.join(args.out, f"model_{args.problem}_w{w:g}.lp")
            export_lp(scenario, trace, args.problem, weights, lp_path)
            manifest.outputs.append(os.path.basename(lp_path))
        for spec in specs:
            policy = _make_runner(scenario, spec)
            _report, env = run_policy(scenario, trace, policy)
            schedule = env.to_schedule()
            obj = evaluate(scenario, trace, schedule, args.problem, weights)
            if args.problem == "p2" and not obj.feasible:
                dominated = ""
            elif oracle_value is None:
                dominated = ""
            else:
                dominated = str(obj.value <= oracle_value + 1e-9).lower()
            rows.append([_spec_label(spec), w, f"{obj.value:.9f}",
                         f"{obj.min_remaining_energy:.9f}", f"{obj.mean_delay:.9f}",
                         obj.violation_count, dominated])
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#manifest={MANIFEST_NAME}\n")
        writer = csv.writer(fh)
        writer.writerow(["method", "w", "objective", "min_remaining_energy",
                         "mean_delay_s", "violations", "dominated_by_oracle"])
        writer.writerows(rows)
    manifest.outputs.append(os.path.basename(csv_path))
    _write_manifest(args.out, manifest)
    print(f"oracle comparison ({args.problem}, {len(trace.tasks)} tasks) -> {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agri-offload",
        description="Smart-farm task-offloading simulator, learners and oracle")
    sub = parser.add_subparsers(dest="cmd", required=True)

    gen = sub.add_parser("gen", help="generate arrival traces")
    gen.add_argument("--config", help="scenario config file (YAML)")
    gen.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    gen.add_argument("--n-traces", type=int, default=100, dest="n_traces")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train agents offline on stored traces")
    tr.add_argument("--kind", choices=("qlearning", "risk", "energy"), required=True)
    tr.add_argument("--config", help="scenario config file (YAML)")
    tr.add_argument("--preset", choices=sorted(PRESETS))
    tr.add_argument("--traces", required=True, help="directory of trace files")
    tr.add_argument("--episodes", type=int, default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--w", type=float, default=None)
    tr.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override a training parameter")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate frozen policies on fresh traces")
    ev.add_argument("--config", help="scenario config file (YAML)")
    ev.add_argument("--preset", choices=sorted(PRESETS))
    ev.add_argument("--policy", help="comma list of baseline policies")
    ev.add_argument("--tables", help="trained table file (.npz)")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--seeds", type=int, default=10)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    sw = sub.add_parser("sweep", help="stress sweep with frozen tables")
    sw.add_argument("--config", help="scenario config file (YAML)")
    sw.add_argument("--preset", choices=sorted(PRESETS))
    sw.add_argument("--axis", choices=("pd_proc_time", "pd_deadline"), required=True)
    sw.add_argument("--range", required=True, metavar="A:B:STEP")
    sw.add_argument("--policy", help="comma list of baseline policies")
    sw.add_argument("--tables", help="trained table file (.npz)")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--seeds", type=int, default=3)
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)

    orc = sub.add_parser("oracle", help="exact optimum vs policies on a tiny instance")
    orc.add_argument("--preset", choices=sorted(PRESETS), default="tiny")
    orc.add_argument("--config", help="scenario config file (YAML), overrides --preset")
    orc.add_argument("--problem", choices=("p1", "p2"), default="p1")
    orc.add_argument("--w", default="0,0.5,1", help="comma list of energy weights")
    orc.add_argument("--v-max", type=int, default=3, dest="v_max")
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--policy", help="comma list of baseline policies")
    orc.add_argument("--tables", help="trained table file (.npz)")
    orc.add_argument("--export-lp", action="store_true", dest="export_lp")
    orc.add_argument("--out", required=True)
    orc.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        args.preset = None  # an explicit config beats any preset
    try:
        return args.func(args) or 0
    except (MalformedConfig, InvariantViolation, InvalidParams, InvalidRange,
            VersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceeded, InfeasibleSchedule) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (IoFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
