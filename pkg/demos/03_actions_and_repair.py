"""From raw actor scores to a feasible hybrid action.

The actor emits continuous scores plus five learned thresholds; the repair
decoder binarizes, masks store bits to valid candidates, and balances each
cache's store/delete counts. This script shows the decoding on a hand-built
score vector, then soaks the environment under the random policy to show
that every decoded action is feasible and the caches stay exactly full.
"""

import numpy as np

from vredge import VrServiceEnv, action_dim, binarize_and_repair, random_policy

env = VrServiceEnv(seed=11)
env.reset()
snap = env.snapshot()
print(f"request V{snap.request}, FoV {snap.fov}")
print(f"local cache {snap.local_cache.tiles}, mec cache {snap.mec_cache.tiles}\n")

raw = np.zeros(action_dim(4, 3, 8))
raw[0:4] = [0.9, 0.2, 0.8, 0.1]      # offload scores
raw[4:8] = [0.9, 0.7, 0.0, 0.6]      # store-local scores
raw[8:11] = [0.8, 0.1, 0.1]          # delete-local scores
raw[11:15] = [0.9, 0.0, 0.9, 0.0]    # store-mec scores
raw[15:23] = 0.1
raw[23:] = 0.5                       # all five thresholds
action = binarize_and_repair(raw, snap)
print("raw scores  :", np.array2string(raw, precision=2))
print("decoded     :", action)
print("store bits survive only where the tile is computed on that device")
print("and not already cached; store/delete counts are balanced per cache.\n")

slots = 20_000
rng = np.random.default_rng(0)
offload_counts = np.zeros(5)
replacements = 0
for _ in range(slots):
    act = random_policy(env.snapshot(), rng)
    offload_counts[sum(act.offload)] += 1
    replacements += sum(act.store_local) + sum(act.store_mec)
    outcome, state = env.step(act)
    assert state.local_cache_vec.sum() == 3 and state.mec_cache_vec.sum() == 8

print(f"{slots} random-policy slots: zero feasibility violations, "
      "caches exactly full throughout")
print(f"offload-count histogram: {offload_counts / slots}")
print(f"cache replacements performed: {replacements}")
