"""Temporary experiment: mixed hop delays for criterion-3 separation."""
import time
import numpy as np
import agri_offload as ao
from agri_offload.training import TrainParams, train
from agri_offload.presets import preset_config


def evaluate(sc, pol, seeds):
    out = []
    for s in seeds:
        rep, _ = ao.run_policy(sc, ao.generate_trace(sc, s), pol)
        out.append(rep.violation_count)
    return out


def run(tag, abs_hop, mec_hop, kind, nup=25, eps=(0.1, 0.01), w=0.5):
    cfg = preset_config('desk')
    cfg['delay_model']['abs_to_abs'] = abs_hop
    cfg['delay_model']['abs_to_mec'] = mec_hop
    sc = ao.build_scenario(cfg)
    traces = [ao.generate_trace(sc, 100 + i) for i in range(20)]
    params = TrainParams(episodes=5000, update_every=nup, eps_start=eps[0],
                         eps_end=eps[1], w=w, seed=0)
    t0 = time.time()
    res = train(kind, sc, traces, params)
    totals = evaluate(sc, res.policy(), range(1000, 1010))
    zeta = getattr(res.agents[0], 'zeta', None)
    print(f"{tag}: {time.time()-t0:.0f}s zeta={zeta} totals={totals} "
          f"mean={np.mean(totals):.1f} <=5:{sum(1 for v in totals if v <= 5)}/10",
          flush=True)


run('mix01-risk', 0.01, 0.05, 'risk')
run('mix01-q05', 0.01, 0.05, 'qlearning', nup=1000)
run('mix02-risk', 0.02, 0.05, 'risk')
run('mix02-q05', 0.02, 0.05, 'qlearning', nup=1000)
