"""Tile geometry and the hidden request process.

Walks the 7x5 tile plane used throughout the project: how viewpoints map to
FoV tile sets, how neighbouring FoVs overlap (the effect caching exploits),
and how the hidden Markov-modulated Zipf process generates requests.
"""

import numpy as np

from vredge import (MarkovZipfProcess, default_grid, fov_tiles, overlap,
                    random_transition_matrix, viewpoint_count, zipf_pmf)

grid = default_grid()
print(f"plane: {grid.n_rows} x {grid.n_cols} tiles, FoV {grid.fov_rows} x "
      f"{grid.fov_cols}, strides ({grid.delta_v}, {grid.delta_h})")
print(f"viewpoints K = {viewpoint_count(grid)}; "
      f"tile size = {grid.tile_bits / 1e6:.0f} Mbit "
      f"({grid.total_bits / 1e9:.2f} Gbit total)\n")

print("FoV tile sets of the first three viewpoints and the last:")
for k in (1, 2, 3, 24):
    print(f"  V{k:<2} -> {fov_tiles(grid, k)}")

print("\noverlaps (tiles a cache hit can reuse across consecutive requests):")
for k1, k2 in ((1, 2), (1, 8), (1, 9), (1, 24)):
    print(f"  V{k1} & V{k2}: {overlap(grid, k1, k2) or '(disjoint)'}")

print("\nZipf popularity at the exponents the hidden chain moves between:")
for gamma in (0.7, 1.0, 1.5, 2.5):
    pmf = zipf_pmf(gamma, viewpoint_count(grid))
    print(f"  gamma={gamma:<4} p1={pmf[0]:.3f} p2={pmf[1]:.3f} "
          f"p12={pmf[11]:.4f} p24={pmf[23]:.4f}")

rng = np.random.default_rng(7)
matrix = random_transition_matrix(4, rng)
chain = MarkovZipfProcess(np.array([0.7, 1.0, 1.5, 2.5]), matrix,
                          viewpoint_count(grid))
print("\nten slots of the hidden chain (gamma, then five sampled requests):")
for _ in range(10):
    chain.advance(rng)
    requests = [chain.sample_request(rng) for _ in range(5)]
    print(f"  gamma={chain.gamma:<4} requests={requests}")
print("\nthe serving system never sees gamma or the matrix, only the requests.")
