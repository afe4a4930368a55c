"""Smart-farm IoT task offloading: simulator, tabular learners, exact oracle."""

__version__ = "0.1.0"

from .scenario import (
    ABS,
    MEC,
    DelayModel,
    EnergyParams,
    EpisodeTrace,
    ResourceSpec,
    Scenario,
    TaskRecord,
    TaskType,
    build_scenario,
    generate_trace,
    load_trace,
    save_trace,
    scenario_from_file,
)
from .simenv import CompletionRecord, EnergyLedger, KpiReport, SimEnv, run_policy
from .baselines import (
    AlwaysLocalPolicy,
    AlwaysMecPolicy,
    LowestQueueHighestEnergyPolicy,
    POLICIES,
    RandomPolicy,
    RoundRobinPolicy,
    make_policy,
)
from .agents import (
    EncodedState,
    Observation,
    QLearningAgent,
    RiskAgent,
    StateEncoder,
    battery_reward_level,
    delay_bucket,
    encode_state,
    energy_centric_risk,
    load_tables,
    observe,
    q_reward,
    q_update,
    q_update_min,
    rs_reward,
    rs_risk_cost,
    save_tables,
    violation_severity,
)
from .training import TrainParams, TrainResult, TrainedPolicy, train, write_curves
from .oracle import (
    BruteForceLimits,
    BruteForceResult,
    Finding,
    ObjectiveBreakdown,
    ObjectiveWeights,
    Schedule,
    ScheduleEntry,
    brute_force,
    evaluate,
    validate,
)
from .lpformat import export_lp, parse_lp, read_solution, schedule_from_solution
from .presets import PRESETS, preset_config, preset_scenario
