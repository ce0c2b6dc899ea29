import dataclasses
import time

import numpy as np

from vredge import AgentConfig
from vredge.agent import evaluate, greedy_policy, make_state_fn, random_policy_fn, train
from vredge.runner import ExperimentConfig, PretrainConfig, build_env, pretrain_predictor

t0 = time.perf_counter()
cfg = ExperimentConfig(
    seed=2026,
    predictor=PretrainConfig(learning_rate=1e-3, iterations=1200, trace_slots=4000),
    agent=AgentConfig(episodes=1000, slots_per_episode=100),
).resolved()

predictor, losses = pretrain_predictor(cfg, progress=True)
print(f"[{time.perf_counter()-t0:.0f}s] pretrain done")

env = build_env(cfg)
result = train(env, cfg.agent, mode="lstm-ddpg", seed=cfg.seed,
               predictor=predictor, progress=True)
print(f"[{time.perf_counter()-t0:.0f}s] training done")

state_fn, _ = make_state_fn("lstm-ddpg", env, cfg.agent.gain_scale)
policy = greedy_policy(result.agent, state_fn)

def seed_means(policy_fn, needs_pred):
    means = []
    for s in range(10):
        e = build_env(cfg, predictor_hook=predictor.predict if needs_pred else None)
        ms = evaluate(e, policy_fn, episodes=10, slots=100, seed=10_000 + s)
        means.append(np.mean([m.total_reward for m in ms]))
    return np.array(means)

trained = seed_means(policy, True)
rand = seed_means(random_policy_fn(99), False)
for name, v in (("trained", trained), ("random", rand)):
    ci = 1.96 * v.std(ddof=1) / np.sqrt(len(v))
    print(f"{name}: mean={v.mean():.2f} ci=[{v.mean()-ci:.2f}, {v.mean()+ci:.2f}]")
print(f"[{time.perf_counter()-t0:.0f}s] all done")

tail = result.metrics[-100:]
rewards = [m.total_reward for m in tail]
print("rolling-100 train reward: mean", np.mean(rewards), "std", np.std(rewards))
