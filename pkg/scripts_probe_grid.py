"""Temporary experiment: criterion-3 grid over hop delay, N_UP, eps schedule."""
import time
import numpy as np
import agri_offload as ao
from agri_offload.agents import observe, hysteresis_units
from agri_offload.training import TrainParams, train
from agri_offload.presets import preset_config


def eval_decomposed(sc, pol, seeds):
    eps_units = hysteresis_units(sc, 0.02)
    rows = []
    for s in seeds:
        tr = ao.generate_trace(sc, s)
        env = ao.SimEnv(sc, tr)
        pol.reset(env)
        flagged = boundary = unavoidable = 0
        for task in tr.tasks:
            obs = observe(env, task, eps_units)
            a = pol.decide(env, task)
            rec = env.commit_decision(task, a)
            if rec.violated:
                if not obs.violation_flags[a]:
                    boundary += 1
                elif all(obs.violation_flags):
                    unavoidable += 1
                else:
                    flagged += 1
        rep = env.finalize()
        rows.append((rep.violation_count, flagged, boundary, unavoidable))
    return rows


def run(tag, hop, kind, nup, eps_start, eps_end, w=0.5):
    cfg = preset_config('desk')
    cfg['delay_model']['abs_to_abs'] = hop
    cfg['delay_model']['abs_to_mec'] = hop
    sc = ao.build_scenario(cfg)
    traces = [ao.generate_trace(sc, 100 + i) for i in range(20)]
    params = TrainParams(episodes=5000, update_every=nup, eps_start=eps_start,
                         eps_end=eps_end, w=w, seed=0)
    t0 = time.time()
    res = train(kind, sc, traces, params)
    dt = time.time() - t0
    zeta = getattr(res.agents[0], 'zeta', None)
    rows = eval_decomposed(sc, res.policy(), range(1000, 1010))
    totals = [r[0] for r in rows]
    print(f"{tag}: {dt:.0f}s zeta={zeta} totals={totals} mean={np.mean(totals):.1f} "
          f"<=5:{sum(1 for v in totals if v <= 5)}/10 "
          f"flagged={sum(r[1] for r in rows)} boundary={sum(r[2] for r in rows)} "
          f"unavoidable={sum(r[3] for r in rows)}", flush=True)


run('hop01-risk-nup25', 0.01, 'risk', 25, 0.1, 0.01)
run('hop01-risk-nup10-eps2', 0.01, 'risk', 10, 0.2, 0.05)
run('hop01-q05', 0.01, 'qlearning', 1000, 0.1, 0.01)
run('hop05-risk-nup25', 0.05, 'risk', 25, 0.1, 0.01)
run('hop05-risk-nup10-eps2', 0.05, 'risk', 10, 0.2, 0.05)
run('hop05-q05', 0.05, 'qlearning', 1000, 0.1, 0.01)
