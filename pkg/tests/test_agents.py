import numpy as np
import pytest

from agri_offload.agents import (
    EncodedState,
    QLearningAgent,
    RiskAgent,
    StateEncoder,
    encode_state,
    energy_centric_risk,
    hysteresis_units,
    load_tables,
    make_agents,
    observe,
    save_tables,
)
from agri_offload.errors import InvalidParams, VersionMismatch
from agri_offload.scenario import build_scenario, generate_trace
from agri_offload.simenv import SimEnv
from agri_offload.training import TrainParams

from conftest import make_trace, small_config, task


@pytest.fixture
def encoder(small_scenario):
    return StateEncoder.for_scenario(small_scenario, include_prev_action=True)


class TestEncoder:
    def test_state_space_size(self, small_scenario):
        plain = StateEncoder.for_scenario(small_scenario, include_prev_action=False)
        risk = StateEncoder.for_scenario(small_scenario, include_prev_action=True)
        # K * 3^(J+L) * 3^J, times (J+L) with the previous action
        assert plain.n_states == 1 * 3 ** 3 * 3 ** 2
        assert risk.n_states == plain.n_states * 3

    def test_bijection(self, encoder):
        rng = np.random.default_rng(0)
        for _ in range(200):
            state = EncodedState(
                type_id=0,
                delay_buckets=tuple(rng.integers(3) for _ in range(3)),
                battery_levels=tuple(rng.integers(3) for _ in range(2)),
                prev_action=int(rng.integers(3)))
            idx = encoder.index(state)
            assert 0 <= idx < encoder.n_states
            assert encoder.decode(idx) == state

    def test_all_indices_distinct(self):
        encoder = StateEncoder(n_types=2, n_resources=2, n_abs=1,
                               include_prev_action=True)
        seen = set()
        for k in range(2):
            for b0 in range(3):
                for b1 in range(3):
                    for lv in range(3):
                        for prev in range(2):
                            state = EncodedState(k, (b0, b1), (lv,), prev)
                            seen.add(encoder.index(state))
        assert len(seen) == encoder.n_states


class TestEncodeState:
    def test_idle_world_all_buckets_zero(self, small_scenario):
        env = SimEnv(small_scenario, make_trace(small_scenario, [task(0, 0)]))
        state = encode_state(env, task(0, 0))
        assert state.delay_buckets == (0, 0, 0)
        assert state.battery_levels == (2, 2)

    def test_overloaded_resource_bucket_two(self, small_scenario):
        env = SimEnv(small_scenario, make_trace(small_scenario, [task(0, 0)]))
        env.resources[1].busy_until = 40  # 2 s backlog vs 1 s deadline
        state = encode_state(env, task(0, 0))
        assert state.delay_buckets[1] == 2
        eps = hysteresis_units(small_scenario, 0.02)
        assert observe(env, task(0, 0), eps).violation_flags[1] is True

    def test_deterministic(self, small_scenario):
        env1 = SimEnv(small_scenario, make_trace(small_scenario, [task(0, 0)]))
        env2 = SimEnv(small_scenario, make_trace(small_scenario, [task(0, 0)]))
        assert encode_state(env1, task(0, 0)) == encode_state(env2, task(0, 0))


class TestSelect:
    def test_greedy_picks_best(self, small_scenario):
        agent = make_agents("qlearning", small_scenario, TrainParams())[0]
        agent.q[5] = [0.1, 0.9, 0.2]
        assert agent.select(5, 0.0) == 1

    def test_risk_greedy_picks_min(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams(zeta_init=1.0))[0]
        agent.q_risk[5] = [0.4, -0.3, 0.2]
        assert agent.select(5, 0.0) == 1

    def test_tie_breaks_to_lowest_id(self, small_scenario):
        agent = make_agents("qlearning", small_scenario, TrainParams())[0]
        assert agent.select(0, 0.0) == 0

    def test_uniform_exploration(self, small_scenario):
        agent = make_agents("qlearning", small_scenario, TrainParams())[0]
        rng = np.random.default_rng(7)
        draws = 10_000
        counts = np.bincount([agent.select(0, 1.0, rng) for _ in range(draws)],
                             minlength=3)
        expected = draws / 3
        sigma = np.sqrt(draws * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - expected) <= 3 * sigma)


class TestRiskAgentTables:
    def test_rs_step_on_zero_tables(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams())[0]
        agent.rs_step(3, 1, reward=-1.0, cost=-1.0, s_next=None)
        assert agent.q_reward[3, 1] == pytest.approx(-0.05, abs=1e-12)
        assert agent.q_risk[3, 1] == pytest.approx(-0.05, abs=1e-12)
        for zeta in (0.0, 0.3, 1.0):
            agent.zeta = zeta
            assert agent.action_values(3)[1] == pytest.approx(-0.05, abs=1e-12)

    def test_combined_identity(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams(zeta_init=0.37))[0]
        rng = np.random.default_rng(1)
        agent.q_risk[:10] = rng.normal(size=(10, 3))
        agent.q_reward[:10] = rng.normal(size=(10, 3))
        expected = 0.37 * agent.q_risk + (1 - 0.37) * agent.q_reward
        assert np.array_equal(agent.q_combined, expected)

    def test_zeta_extremes_rank_by_single_table(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams())[0]
        rng = np.random.default_rng(2)
        agent.q_risk[:20] = rng.normal(size=(20, 3))
        agent.q_reward[:20] = rng.normal(size=(20, 3))
        agent.zeta = 1.0
        for s in range(20):
            assert agent.select(s, 0.0) == int(np.argmin(agent.q_risk[s]))
        agent.zeta = 0.0
        for s in range(20):
            assert agent.select(s, 0.0) == int(np.argmin(agent.q_reward[s]))


class TestZetaUpdate:
    def test_budget_exceeded_raises_weight(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams(
            zeta_init=0.0, zeta_step=0.02, v_max=3, gap=2))[0]
        assert agent.zeta_update(13) == pytest.approx(0.02)

    def test_lower_clamp(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams(
            zeta_init=0.01, zeta_step=0.02))[0]
        assert agent.zeta_update(0) == 0.0

    def test_upper_clamp(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams(
            zeta_init=1.0, zeta_step=0.02))[0]
        assert agent.zeta_update(99) == 1.0

    def test_stays_in_unit_interval_under_any_sequence(self, small_scenario):
        agent = make_agents("risk", small_scenario, TrainParams(
            zeta_init=0.5, zeta_step=0.15))[0]
        rng = np.random.default_rng(3)
        for _ in range(200):
            agent.zeta_update(int(rng.integers(10)))
            assert 0.0 <= agent.zeta <= 1.0


class TestEnergyCentricRisk:
    def test_balanced_batteries_safe(self, small_scenario):
        env = SimEnv(small_scenario, make_trace(small_scenario, []))
        assert energy_centric_risk(env, gap_threshold=0.02) is False

    def test_wide_gap_flags_risk(self, small_scenario):
        env = SimEnv(small_scenario, make_trace(small_scenario, []))
        env.ledgers[0].busy_intervals = 500  # 5 units = 5% of capacity
        assert energy_centric_risk(env, gap_threshold=0.02) is True

    def test_clears_when_rebalanced(self, small_scenario):
        env = SimEnv(small_scenario, make_trace(small_scenario, []))
        env.ledgers[0].busy_intervals = 500
        assert energy_centric_risk(env, gap_threshold=0.02) is True
        env.ledgers[1].busy_intervals = 500
        assert energy_centric_risk(env, gap_threshold=0.02) is False


class TestTableIo:
    def test_round_trip(self, small_scenario, tmp_path):
        params = TrainParams(zeta_init=0.42)
        agents = make_agents("risk", small_scenario, params)
        rng = np.random.default_rng(4)
        for agent in agents:
            agent.q_risk[:] = rng.normal(size=agent.q_risk.shape)
            agent.q_reward[:] = rng.normal(size=agent.q_reward.shape)
            agent.visits[:2] = 7
        path = tmp_path / "tables.npz"
        save_tables(agents, params, path)
        kind, loaded, loaded_params = load_tables(path, small_scenario)
        assert kind == "risk"
        assert loaded_params.zeta_init == pytest.approx(0.42)
        for a, b in zip(agents, loaded):
            assert np.array_equal(a.q_risk, b.q_risk)
            assert np.array_equal(a.q_reward, b.q_reward)
            assert np.array_equal(a.visits, b.visits)
            assert a.zeta == b.zeta

    def test_fresh_agent_round_trip(self, small_scenario, tmp_path):
        params = TrainParams()
        agents = make_agents("qlearning", small_scenario, params)
        path = tmp_path / "tables.npz"
        save_tables(agents, params, path)
        _, loaded, _ = load_tables(path, small_scenario)
        assert all(not b.q.any() for b in loaded)

    def test_dimension_mismatch(self, small_scenario, tmp_path):
        params = TrainParams()
        agents = make_agents("risk", small_scenario, params)
        path = tmp_path / "tables.npz"
        save_tables(agents, params, path)
        other = build_scenario(small_config(abs_count=3, abs_energy=[
            {"capacity": 100.0, "hover": 1.0, "transmit": 1.0, "idle": 1.0,
             "compute": 2.0}] * 3))
        with pytest.raises(VersionMismatch):
            load_tables(path, other)

    def test_unknown_kind_rejected(self, small_scenario):
        with pytest.raises(InvalidParams):
            make_agents("dqn", small_scenario, TrainParams())
