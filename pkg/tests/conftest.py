import pytest

from agri_offload.scenario import EpisodeTrace, TaskRecord, build_scenario


def small_config(**overrides):
    """2 ABS + 1 MEC toy world with round numbers for hand computation."""
    config = {
        "interval_len": 0.05,
        "horizon_intervals": 40,
        "abs_count": 2,
        "mec_count": 1,
        "energy_time_scale": 0.01,
        "seed": 0,
        "task_types": [
            {"id": 0, "name": "fire_detection", "mean_interarrival": 1.0,
             "deadline": 1.0, "proc_time_abs": 0.1, "proc_time_mec": 0.05},
        ],
        "abs_energy": [
            {"capacity": 100.0, "hover": 1.0, "transmit": 1.0, "idle": 1.0,
             "compute": 2.0},
        ],
        "delay_model": {"iot_to_abs_base": 0.02, "iot_to_abs_jitter": 0.0,
                        "abs_to_abs": 0.05, "abs_to_mec": 0.01},
    }
    config.update(overrides)
    return config


@pytest.fixture
def small_scenario():
    return build_scenario(small_config())


def make_trace(scenario, tasks):
    """Build a trace from hand-written TaskRecords."""
    return EpisodeTrace(fingerprint=scenario.fingerprint(),
                        tasks=tuple(sorted(tasks)))


def task(j, t, k=0, iot=0.02):
    return TaskRecord(arrival=t, origin=j, type_id=k, iot_delay=iot)
