"""Short end-to-end training run: LSTM-DDPG vs the random baseline.

Uses a reduced budget (200 episodes, width-64 networks) so the script
finishes in a few minutes on a laptop; the full protocol lives in the
acceptance suite and behind the `vredge train` CLI. Greedy evaluation on
held-out seeds shows the learned policy beating the random baseline and the
per-slot myopic bound sitting below both (it is a lower bound on cost,
so an upper bound on reward).
"""

import dataclasses

import numpy as np

from vredge import AgentConfig, best_myopic
from vredge.agent import (evaluate, greedy_policy, make_state_fn,
                          random_policy_fn, train)
from vredge.runner import (ExperimentConfig, PretrainConfig, build_env,
                           pretrain_predictor)

cfg = dataclasses.replace(
    ExperimentConfig(seed=42),
    predictor=PretrainConfig(learning_rate=1e-3, iterations=600,
                             trace_slots=3000),
    agent=AgentConfig(hidden_width=64, episodes=200, slots_per_episode=100),
).resolved()

print("pre-training the popularity forecaster...")
predictor, _ = pretrain_predictor(cfg, progress=True)

print("training LSTM-DDPG (200 episodes x 100 slots)...")
env = build_env(cfg)
result = train(env, cfg.agent, mode="lstm-ddpg", seed=cfg.seed,
               predictor=predictor, progress=True)

state_fn, _ = make_state_fn("lstm-ddpg", env, cfg.agent.gain_scale)
policy = greedy_policy(result.agent, state_fn)

eval_env = build_env(cfg, predictor_hook=predictor.predict)
trained = evaluate(eval_env, policy, episodes=10, slots=100, seed=777)
rand_env = build_env(cfg)
baseline = evaluate(rand_env, random_policy_fn(3), episodes=10, slots=100,
                    seed=777)

tr = [m.total_reward for m in trained]
br = [m.total_reward for m in baseline]
print(f"\ngreedy eval, 10 episodes x 100 slots (total reward):")
print(f"  LSTM-DDPG: {np.mean(tr):8.2f} +- {np.std(tr):.2f}")
print(f"  random   : {np.mean(br):8.2f} +- {np.std(br):.2f}")

# per-slot myopic bound on a fresh evaluation stream
bound_env = build_env(cfg, predictor_hook=predictor.predict)
bound_env.reset(777)
bound = 0.0
agent_cost = 0.0
for _ in range(200):
    snap = bound_env.snapshot()
    bound += best_myopic(snap)[1]
    outcome, _ = bound_env.step(policy(bound_env))
    agent_cost += outcome.cost
print(f"\n200-slot cost totals: myopic bound {bound:.1f} <= trained policy "
      f"{agent_cost:.1f}")
print("latency/energy per episode:",
      f"{np.mean([m.mean_latency_s for m in trained]):.3f} s,",
      f"{np.mean([m.total_energy_j for m in trained]):.1f} J")
