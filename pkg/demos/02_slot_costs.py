"""Anatomy of one service slot: transfers, latencies, energies.

Fixes one snapshot (caches, request, channel) and walks every offload count
from all-local to all-MEC, printing the full cost breakdown, then asks the
exhaustive myopic oracle for the per-slot optimum at several tradeoff
weights.
"""

import dataclasses

import numpy as np

from vredge import best_myopic, default_grid, fov_tiles, recompute_cost
from vredge.environment import CacheState, HybridAction
from vredge.runner import ExperimentConfig, random_snapshot

cfg = ExperimentConfig().resolved()
rng = np.random.default_rng(3)
snap = random_snapshot(cfg, rng)
fov = snap.fov
print(f"request V{snap.request}, FoV tiles {fov}")
print(f"local cache {snap.local_cache.tiles}  "
      f"(hits: {[t for t in fov if t in snap.local_cache]})")
print(f"mec cache   {snap.mec_cache.tiles}  "
      f"(hits: {[t for t in fov if t in snap.mec_cache]})")
print(f"channel gain {snap.gain:.3e}\n")

print("offload count ->  t_mec  t_local t_total |  e_mec e_local  e_tx | cost@0.8")
for n in range(5):
    off = tuple(1 if i < n else 0 for i in range(4))
    action = HybridAction(off, (0,) * 4, (0,) * 3, (0,) * 4, (0,) * 8)
    o = recompute_cost(snap, action)
    print(f"  {off} -> {o.t_mec:6.3f} {o.t_local:7.3f} {o.t_total:7.3f} |"
          f" {o.e_mec:6.3f} {o.e_local:6.3f} {o.e_tx:6.3f} | {o.cost:7.3f}")

print("\nmyopic optimum per tradeoff weight (exhaustive over all feasible "
      "hybrid actions):")
for omega in (0.0, 0.2, 0.5, 0.8, 1.0):
    s = dataclasses.replace(snap, omega=omega)
    action, cost = best_myopic(s)
    print(f"  omega={omega:<3} -> offload={action.offload} cost={cost:.4f}")

print("\nlow omega prices energy (keep work local); high omega prices "
      "latency (push work to the MEC server).")
