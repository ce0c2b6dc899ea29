"""Training the LSTM popularity forecaster.

Pre-trains the two-layer LSTM on a ground-truth trace of the hidden chain
(the one phase where true popularity labels exist), then compares its
held-out MSE against two reference predictors: the uniform distribution and
the raw empirical frequency of the last window. Runs in about two minutes.
"""

import dataclasses

import numpy as np

from vredge.predictor import PopularityPredictor, build_dataset, train_predictor
from vredge.runner import (ExperimentConfig, PretrainConfig, generate_popularity_trace,
                           predictor_config)

cfg = dataclasses.replace(
    ExperimentConfig(seed=5),
    predictor=PretrainConfig(learning_rate=1e-3, iterations=800,
                             trace_slots=3000)).resolved()

trace = generate_popularity_trace(cfg, cfg.predictor.trace_slots, seed=100)
pcfg = predictor_config(cfg)
model = PopularityPredictor(cfg.grid, pcfg, seed=7)
dataset = build_dataset(trace, pcfg.window)
print(f"pre-training on {len(dataset)} windows "
      f"({pcfg.epochs} epochs, batch {pcfg.batch_size}, lr {pcfg.learning_rate})")
model, losses = train_predictor(model, dataset)
print(f"training loss: {losses[0]:.5f} -> {losses[-1]:.5f}\n")

holdout = generate_popularity_trace(cfg, 600, seed=101)
samples = build_dataset(holdout, pcfg.window)
k = 24


def empirical(window):
    v = np.zeros(k)
    for req in window:
        v[req - 1] += 1
    return v / len(window)


mse_model = np.mean([np.sum((model.predict(s.requests) - s.label) ** 2)
                     for s in samples])
mse_uniform = np.mean([np.sum((np.full(k, 1 / k) - s.label) ** 2)
                       for s in samples])
mse_empirical = np.mean([np.sum((empirical(s.requests) - s.label) ** 2)
                         for s in samples])
print("held-out MSE against the true next-slot popularity:")
print(f"  LSTM forecaster        {mse_model:.5f}")
print(f"  last-window frequency  {mse_empirical:.5f}")
print(f"  uniform                {mse_uniform:.5f}")

one = samples[50]
print("\none window's forecast vs truth (top five viewpoints by truth):")
pred = model.predict(one.requests)
for idx in np.argsort(one.label)[::-1][:5]:
    print(f"  V{idx + 1:<2} true={one.label[idx]:.3f} predicted={pred[idx]:.3f}")
