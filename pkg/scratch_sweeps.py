import dataclasses
import time

import numpy as np

from vredge import AgentConfig
from vredge.environment import AblationFlags
from vredge.agent import evaluate, greedy_policy, make_state_fn, train
from vredge.runner import (ExperimentConfig, PretrainConfig, build_env,
                           converged_window_mean, pretrain_predictor)

t0 = time.perf_counter()
base = ExperimentConfig(
    seed=909,
    predictor=PretrainConfig(learning_rate=1e-3, iterations=1000, trace_slots=4000),
    agent=AgentConfig(hidden_width=64, episodes=250, slots_per_episode=100),
).resolved()

predictor, _ = pretrain_predictor(base)
print(f"[{time.perf_counter()-t0:.0f}s] predictor ready", flush=True)


def run_point(cfg, seed):
    env = build_env(cfg)
    result = train(env, cfg.agent, mode="lstm-ddpg", seed=seed, predictor=predictor)
    return converged_window_mean(result.metrics)

print("=== ablation: configs 1-4 x 3 seeds (converged total_reward)")
for idx in (1, 2, 3, 4):
    cfg = dataclasses.replace(base, flags=AblationFlags.from_config_index(idx))
    vals = []
    for seed in (1, 2, 3):
        s = run_point(cfg, seed)
        vals.append(s["total_reward"])
        print(f"  config {idx} seed {seed}: reward={s['total_reward']:.2f} "
              f"lat={s['mean_latency_s']:.3f} en={s['total_energy_J']:.1f} "
              f"[{time.perf_counter()-t0:.0f}s]", flush=True)
    print(f"  config {idx}: mean {np.mean(vals):.2f}")

print("=== omega spot points (single seed)")
for omega in (0.1, 0.3, 0.5, 0.7, 0.9):
    cfg = dataclasses.replace(base, omega=omega)
    s = run_point(cfg, 11)
    print(f"  omega={omega}: reward={s['total_reward']:.2f} "
          f"lat={s['mean_latency_s']:.3f} en={s['total_energy_J']:.1f} "
          f"[{time.perf_counter()-t0:.0f}s]", flush=True)

print("=== cache spot points (single seed)")
for m_e in (3, 8, 12):
    from vredge.runner import CacheConfig
    cfg = dataclasses.replace(base, cache=CacheConfig(3, m_e))
    s = run_point(cfg, 21)
    print(f"  m_mec={m_e}: reward={s['total_reward']:.2f} [{time.perf_counter()-t0:.0f}s]", flush=True)
for m_l in (1, 4, 7):
    from vredge.runner import CacheConfig
    cfg = dataclasses.replace(base, cache=CacheConfig(m_l, 8))
    s = run_point(cfg, 22)
    print(f"  m_local={m_l}: reward={s['total_reward']:.2f} [{time.perf_counter()-t0:.0f}s]", flush=True)
print(f"done [{time.perf_counter()-t0:.0f}s]")
