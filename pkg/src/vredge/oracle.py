"""Per-slot verification oracle.

Enumerates every feasible hybrid action at desk scale, recomputes slot costs
through an independent straight-line path (no code shared with the
environment's cost routines), and exposes the myopic per-slot optimum as a
reference bound. Used for differential testing and sanity reports, never as
a serving policy.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from .environment import HybridAction, SlotOutcome, SlotSnapshot

MAX_FOV = 6
MAX_LOCAL = 4
MAX_MEC = 10


class InstanceTooLarge(Exception):
    """Snapshot exceeds the enumeration guards (Z<=6, M_L<=4, M_E<=10)."""


def _guard(snapshot: SlotSnapshot) -> None:
    z = snapshot.grid.fov_size
    if z > MAX_FOV or snapshot.local_cache.capacity > MAX_LOCAL \
            or snapshot.mec_cache.capacity > MAX_MEC:
        raise InstanceTooLarge(
            f"Z={z}, M_L={snapshot.local_cache.capacity}, "
            f"M_E={snapshot.mec_cache.capacity} exceed the desk-scale guards")


def enumerate_feasible(snapshot: SlotSnapshot):
    """Yield every feasible action for the snapshot exactly once.

    Honors the ablation flags: with segmentation disabled only the all-local
    and all-MEC offload vectors appear; with caching replacement disabled all
    store/delete groups are empty.
    """
    _guard(snapshot)
    fov = snapshot.fov
    z = len(fov)
    m_l = snapshot.local_cache.capacity
    m_e = snapshot.mec_cache.capacity

    if snapshot.flags.segmentation_enabled:
        offloads = product((0, 1), repeat=z)
    else:
        offloads = [(0,) * z, (1,) * z]

    for off in offloads:
        off = tuple(off)
        if snapshot.flags.caching_replacement_enabled:
            cand_local = tuple(p for p in range(z)
                               if off[p] == 0 and fov[p] not in snapshot.local_cache)
            cand_mec = tuple(p for p in range(z)
                             if off[p] == 1 and fov[p] not in snapshot.mec_cache)
            local_moves = _cache_moves(cand_local, z, m_l)
            mec_moves = _cache_moves(cand_mec, z, m_e)
        else:
            local_moves = [((0,) * z, (0,) * m_l)]
            mec_moves = [((0,) * z, (0,) * m_e)]
        for (sl, dl), (sm, dm) in product(local_moves, mec_moves):
            yield HybridAction(off, sl, dl, sm, dm)


def _cache_moves(candidates: tuple, z: int, capacity: int) -> list:
    """All balanced (store bits, delete bits) pairs for one cache."""
    moves = []
    for r in range(min(len(candidates), capacity) + 1):
        for chosen in combinations(candidates, r):
            store = [0] * z
            for p in chosen:
                store[p] = 1
            for slots in combinations(range(capacity), r):
                delete = [0] * capacity
                for m in slots:
                    delete[m] = 1
                moves.append((tuple(store), tuple(delete)))
    return moves


def recompute_cost(snapshot: SlotSnapshot, action: HybridAction) -> SlotOutcome:
    """Independent re-derivation of the full slot outcome.

    Deliberately reimplements the transfer/latency/energy algebra in a
    different style from the environment (tuple scans, bit-by-bit
    accumulation) so the two paths can cross-check each other.
    """
    ch = snapshot.channel
    cp = snapshot.compute
    tau = snapshot.tau
    fov = snapshot.fov
    o = action.offload
    local_tiles = snapshot.local_cache.tiles
    mec_tiles = snapshot.mec_cache.tiles

    r_wl = ch.bandwidth_hz * float(np.log2(1.0 + ch.tx_power_w * snapshot.gain
                                           / ch.noise_power_w))
    r_bh = ch.backhaul_rate_bps

    d_mec_down = 0.0
    d_cloud_down = 0.0
    d_mec_back = 0.0
    offloaded = 0
    for pos, tile in enumerate(fov):
        if o[pos] == 1:
            offloaded += 1
            if tile not in mec_tiles:
                d_mec_back += tau
        else:
            if tile not in local_tiles:
                if tile in mec_tiles:
                    d_mec_down += tau
                else:
                    d_cloud_down += tau
    d_2d_down = d_mec_down + d_cloud_down
    d_3d_down = tau * snapshot.phi * offloaded
    d_local_back = d_cloud_down

    kept_local = len(fov) - offloaded
    t_com_mec = cp.cycles_per_bit * tau * offloaded / cp.f_mec_hz
    t_com_local = cp.cycles_per_bit * tau * kept_local / cp.f_local_hz

    t_mec = d_mec_back / r_bh + d_3d_down / r_wl + t_com_mec
    fetch_parallel = d_local_back / r_bh
    if d_mec_down / r_wl > fetch_parallel:
        fetch_parallel = d_mec_down / r_wl
    t_local = fetch_parallel + d_local_back / r_wl + t_com_local
    t_total = t_mec if t_mec > t_local else t_local

    e_mec = cp.kappa_mec * cp.f_mec_hz * cp.f_mec_hz * cp.cycles_per_bit * tau * offloaded
    e_local = cp.kappa_local * cp.f_local_hz * cp.f_local_hz \
        * cp.cycles_per_bit * tau * kept_local
    e_tx = ch.tx_power_w * (d_2d_down + d_3d_down) / r_wl
    e_total = e_mec + e_local + e_tx

    cost = snapshot.omega * t_total + (1.0 - snapshot.omega) * e_total
    return SlotOutcome(
        d_2d_down=d_2d_down, d_mec_down=d_mec_down, d_cloud_down=d_cloud_down,
        d_3d_down=d_3d_down, d_mec_back=d_mec_back, d_local_back=d_local_back,
        t_mec=t_mec, t_local=t_local, t_total=t_total,
        e_mec=e_mec, e_local=e_local, e_tx=e_tx, e_total=e_total,
        cost=cost, reward=-cost,
    )


def best_myopic(snapshot: SlotSnapshot) -> tuple:
    """Exhaustive argmin of the one-slot cost; ties go to the smallest bit-string.

    Returns (action, cost). A lower bound on any policy's cost for this slot.
    """
    best_action = None
    best_cost = None
    best_bits = None
    for action in enumerate_feasible(snapshot):
        cost = recompute_cost(snapshot, action).cost
        bits = action.bits()
        if best_cost is None or cost < best_cost \
                or (cost == best_cost and bits < best_bits):
            best_action, best_cost, best_bits = action, cost, bits
    return best_action, best_cost
