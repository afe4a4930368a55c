"""Ready-made scenario configurations.

``desk``      – the four-ABS / one-MEC farm with the reference task mix and
                energy table, 50 s horizon.  Interarrival means are the
                farm-wide rates divided across the four ABSs (per-ABS mean =
                4x the table value), which keeps the offered load at ~70% of
                system capacity; the table rates applied per ABS and per type
                would overload every resource several times over.
``stressed``  – the short-horizon hard variant: 4 s, interarrival 0.125 s
                farm-wide for all types, tightened deadlines.  Sized for LP
                export, far beyond the exhaustive-search budget.
``tiny``      – two ABSs + one MEC, 64 intervals, two task types; small
                enough for the exhaustive oracle (a handful of tasks).

Energy-rate calibration: the raw energy-table numbers are charged per
interval after multiplying by ``energy_time_scale``.  With the default 1e-5
a fully-busy 570-capacity ABS ends the 50 s desk run at

    1 - ((211+17+4320)*1000 + 8640*1000) * 1e-5 / 570  =  0.769

remaining, and a never-computing one at 1 - 45.48/570 = 0.920, so every
policy's minimum remaining fraction lands inside the reported 0.70..0.995
band.
"""

from __future__ import annotations

import copy

from .scenario import Scenario, build_scenario

_TABLE_ENERGY = [
    {"capacity": 570.0, "hover": 211.0, "transmit": 17.0, "idle": 4320.0, "compute": 12960.0},
    {"capacity": 570.0, "hover": 211.0, "transmit": 17.0, "idle": 4320.0, "compute": 12960.0},
    {"capacity": 627.0, "hover": 211.0, "transmit": 17.0, "idle": 4320.0, "compute": 12960.0},
    {"capacity": 627.0, "hover": 211.0, "transmit": 17.0, "idle": 4320.0, "compute": 12960.0},
]

_DELAY_MODEL = {
    "iot_to_abs_base": 0.01,
    "iot_to_abs_jitter": 0.02,
    "abs_to_abs": 0.01,
    "abs_to_mec": 0.01,
}

DESK = {
    "interval_len": 0.05,
    "horizon_intervals": 1000,   # 50 s
    "abs_count": 4,
    "mec_count": 1,
    "energy_time_scale": 1.0e-5,
    "seed": 1,
    "task_types": [
        {"id": 0, "name": "fire_detection", "mean_interarrival": 1.0,
         "deadline": 1.0, "proc_time_abs": 0.1, "proc_time_mec": 0.05},
        {"id": 1, "name": "pesticide_detection", "mean_interarrival": 1.0,
         "deadline": 2.0, "proc_time_abs": 0.2, "proc_time_mec": 0.1},
        {"id": 2, "name": "growth_monitoring", "mean_interarrival": 2.0,
         "deadline": 15.0, "proc_time_abs": 1.5, "proc_time_mec": 0.75},
    ],
    "abs_energy": _TABLE_ENERGY,
    "delay_model": _DELAY_MODEL,
}

STRESSED = {
    "interval_len": 0.05,
    "horizon_intervals": 80,     # 4 s
    "abs_count": 4,
    "mec_count": 1,
    "energy_time_scale": 1.0e-5,
    "seed": 1,
    "task_types": [
        {"id": 0, "name": "fire_detection", "mean_interarrival": 0.5,
         "deadline": 0.2, "proc_time_abs": 0.1, "proc_time_mec": 0.05},
        {"id": 1, "name": "pesticide_detection", "mean_interarrival": 0.5,
         "deadline": 0.6, "proc_time_abs": 0.2, "proc_time_mec": 0.1},
        {"id": 2, "name": "growth_monitoring", "mean_interarrival": 0.5,
         "deadline": 15.0, "proc_time_abs": 1.5, "proc_time_mec": 0.75},
    ],
    "abs_energy": _TABLE_ENERGY,
    "delay_model": _DELAY_MODEL,
}

TINY = {
    "interval_len": 0.05,
    "horizon_intervals": 64,     # 3.2 s
    "abs_count": 2,
    "mec_count": 1,
    "energy_time_scale": 1.0e-5,
    "seed": 1,
    "task_types": [
        {"id": 0, "name": "fire_detection", "mean_interarrival": 2.0,
         "deadline": 0.2, "proc_time_abs": 0.1, "proc_time_mec": 0.05},
        {"id": 1, "name": "pesticide_detection", "mean_interarrival": 3.0,
         "deadline": 0.6, "proc_time_abs": 0.2, "proc_time_mec": 0.1},
    ],
    "abs_energy": _TABLE_ENERGY[:2],
    "delay_model": _DELAY_MODEL,
}

PRESETS = {"desk": DESK, "stressed": STRESSED, "tiny": TINY}


def preset_config(name: str, **overrides) -> dict:
    """Deep copy of a named preset, optionally with top-level overrides."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset '{name}' (choose from {sorted(PRESETS)})")
    config = copy.deepcopy(PRESETS[name])
    config.update(overrides)
    return config


def preset_scenario(name: str, **overrides) -> Scenario:
    return build_scenario(preset_config(name, **overrides))
