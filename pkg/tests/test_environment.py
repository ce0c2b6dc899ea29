import numpy as np
import pytest

from vredge import (AblationFlags, CacheState, ChannelConfig, ComputeConfig,
                    FeasibilityError, HybridAction, VrServiceEnv,
                    apply_caching, downlink_rate, draw_channel, fov_tiles,
                    random_policy, slot_cost, transfer_sizes, validate_action)
from vredge.environment import TransferSizes

TAU = 1.5e8


class _UnitFading:
    """rng stub whose exponential draw is exactly 1."""

    @staticmethod
    def exponential(scale):
        return 1.0


def test_draw_channel_unit_fading(channel):
    assert draw_channel(channel, _UnitFading()) == pytest.approx(1e-4, rel=1e-12)


def test_draw_channel_unit_distance():
    cfg = ChannelConfig(distance_m=1.0)
    assert draw_channel(cfg, _UnitFading()) == pytest.approx(1.0, rel=1e-12)


def test_draw_channel_mean(channel):
    rng = np.random.default_rng(8)
    draws = np.array([draw_channel(channel, rng) for _ in range(200)])
    # vectorized equivalent for the million-sample mean
    gains = rng.exponential(1.0, size=1_000_000) * channel.distance_m ** (-channel.pathloss_exp)
    assert abs(gains.mean() - 1e-4) / 1e-4 <= 0.01
    assert np.all(draws > 0)


def test_downlink_rate_reference_point(channel):
    # P_B = 1 W, sigma^2 = 10^-13.5 W, B = 100 MHz, h = 1e-4
    assert downlink_rate(1e-4, channel) == pytest.approx(3.1558e9, rel=1e-3)


def test_downlink_rate_limits(channel):
    assert downlink_rate(1e-30, channel) < 1.0
    doubled = ChannelConfig(bandwidth_hz=2 * channel.bandwidth_hz)
    assert downlink_rate(1e-4, doubled) == pytest.approx(
        2 * downlink_rate(1e-4, channel), rel=1e-12)
    with pytest.raises(ValueError):
        downlink_rate(0.0, channel)


def _caches_for_worked_example():
    # fov(1) = (1, 2, 8, 9): mec holds tile 1 but not 2 or 9; local holds 8 not 9
    local = CacheState([8, 20, 30], 3)
    mec = CacheState([1, 11, 12, 13, 14, 15, 16, 17], 8)
    return local, mec


def test_transfer_sizes_full_local_hit(grid):
    fov = fov_tiles(grid, 1)
    local = CacheState([1, 2, 8, 9], 4)
    mec = CacheState(list(range(10, 18)), 8)
    sizes = transfer_sizes(local, mec, fov, (0, 0, 0, 0), TAU, 3.0)
    assert sizes == TransferSizes(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_transfer_sizes_all_offloaded_all_mec_cached(grid):
    fov = fov_tiles(grid, 1)
    local = CacheState([20, 21, 22], 3)
    mec = CacheState([1, 2, 8, 9, 30, 31, 32, 33], 8)
    sizes = transfer_sizes(local, mec, fov, (1, 1, 1, 1), TAU, 3.0)
    assert sizes.d_2d_down == 0.0
    assert sizes.d_3d_down == TAU * 3.0 * 4
    assert sizes.d_mec_back == 0.0


def test_transfer_sizes_worked_example(grid):
    local, mec = _caches_for_worked_example()
    sizes = transfer_sizes(local, mec, fov_tiles(grid, 1), (1, 1, 0, 0), TAU, 3.0)
    assert sizes.d_mec_back == TAU
    assert sizes.d_cloud_down == TAU
    assert sizes.d_mec_down == 0.0
    assert sizes.d_3d_down == 2 * 3.0 * TAU
    assert sizes.d_2d_down == sizes.d_mec_down + sizes.d_cloud_down
    assert sizes.d_local_back == sizes.d_cloud_down


def test_transfer_sizes_length_mismatch(grid):
    local, mec = _caches_for_worked_example()
    with pytest.raises(ValueError):
        transfer_sizes(local, mec, fov_tiles(grid, 1), (1, 0), TAU, 3.0)


def test_slot_cost_worked_example(grid, channel):
    local, mec = _caches_for_worked_example()
    sizes = transfer_sizes(local, mec, fov_tiles(grid, 1), (1, 1, 0, 0), TAU, 3.0)
    compute = ComputeConfig(kappa_mec=1e-28, kappa_local=1e-28)
    out = slot_cost(sizes, 3.156e9, compute, channel, (1, 1, 0, 0), TAU, 0.8)
    assert out.t_mec == pytest.approx(0.750171102, rel=1e-6)
    assert out.t_local == pytest.approx(1.562528517, rel=1e-6)
    assert out.t_total == out.t_local
    assert out.e_mec == pytest.approx(45.0, rel=1e-12)
    assert out.e_local == pytest.approx(4.05, rel=1e-12)
    assert out.e_tx == pytest.approx(0.332699620, rel=1e-6)
    assert out.cost == pytest.approx(11.12656, rel=1e-5)
    assert out.reward == -out.cost


def test_slot_cost_pure_local_full_hit(grid, channel, compute):
    fov = fov_tiles(grid, 1)
    local = CacheState([1, 2, 8, 9], 4)
    mec = CacheState(list(range(10, 18)), 8)
    sizes = transfer_sizes(local, mec, fov, (0, 0, 0, 0), TAU, 3.0)
    omega = 0.6
    out = slot_cost(sizes, 3.156e9, compute, channel, (0, 0, 0, 0), TAU, omega)
    w, z = compute.cycles_per_bit, 4
    expected = (omega * w * TAU * z / compute.f_local_hz
                + (1 - omega) * compute.kappa_local * compute.f_local_hz ** 2
                * w * TAU * z)
    assert out.t_mec == 0.0 and out.e_mec == 0.0 and out.e_tx == 0.0
    assert out.cost == pytest.approx(expected, rel=1e-12)


def test_slot_cost_weight_endpoints(grid, channel, compute):
    local, mec = _caches_for_worked_example()
    sizes = transfer_sizes(local, mec, fov_tiles(grid, 1), (1, 1, 0, 0), TAU, 3.0)
    full_t = slot_cost(sizes, 3.156e9, compute, channel, (1, 1, 0, 0), TAU, 1.0)
    full_e = slot_cost(sizes, 3.156e9, compute, channel, (1, 1, 0, 0), TAU, 0.0)
    assert full_t.cost == full_t.t_total
    assert full_e.cost == full_e.e_total
    with pytest.raises(ValueError):
        slot_cost(sizes, 3.156e9, compute, channel, (1, 1, 0, 0), TAU, 1.5)


def test_energy_monotone_in_offload_count(grid, channel, compute):
    local, mec = _caches_for_worked_example()
    fov = fov_tiles(grid, 1)
    outs = []
    for n in range(5):
        off = tuple(1 if i < n else 0 for i in range(4))
        sizes = transfer_sizes(local, mec, fov, off, TAU, 3.0)
        outs.append(slot_cost(sizes, 3.156e9, compute, channel, off, TAU, 0.5))
    e_mec = [o.e_mec for o in outs]
    e_local = [o.e_local for o in outs]
    assert all(a <= b for a, b in zip(e_mec, e_mec[1:]))
    assert all(a >= b for a, b in zip(e_local, e_local[1:]))


def _noop(z=4, m_l=3, m_e=8):
    return HybridAction.noop(z, m_l, m_e)


def test_apply_caching_noop(grid):
    local = CacheState([1, 2, 3], 3)
    mec = CacheState([4, 5, 6, 7, 10, 11, 12, 13], 8)
    new_local, new_mec = apply_caching(local, mec, _noop(), fov_tiles(grid, 1))
    assert new_local == local and new_mec == mec


def test_apply_caching_store_and_delete(grid):
    # fov(1) = (1,2,8,9); tile 9 at position 3, computed locally, uncached
    local = CacheState([1, 2, 3], 3)
    mec = CacheState([4, 5, 6, 7, 10, 11, 12, 13], 8)
    action = HybridAction(offload=(1, 0, 0, 0), store_local=(0, 0, 0, 1),
                          delete_local=(0, 1, 0), store_mec=(0, 0, 0, 0),
                          delete_mec=(0,) * 8)
    new_local, new_mec = apply_caching(local, mec, action, fov_tiles(grid, 1))
    assert new_local.tiles == (1, 3, 9)
    assert new_mec == mec


def test_apply_caching_count_mismatch(grid):
    local = CacheState([1, 2, 3], 3)
    mec = CacheState([4, 5, 6, 7, 10, 11, 12, 13], 8)
    action = HybridAction(offload=(0, 0, 0, 0), store_local=(0, 0, 1, 1),
                          delete_local=(1, 0, 0), store_mec=(0, 0, 0, 0),
                          delete_mec=(0,) * 8)
    with pytest.raises(FeasibilityError) as err:
        apply_caching(local, mec, action, fov_tiles(grid, 1))
    assert err.value.constraint == "24d"


def test_apply_caching_rejects_already_cached(grid):
    local = CacheState([1, 2, 3], 3)  # tile 1 is fov position 0 and cached
    mec = CacheState([4, 5, 6, 7, 10, 11, 12, 13], 8)
    action = HybridAction(offload=(0, 0, 0, 0), store_local=(1, 0, 0, 0),
                          delete_local=(1, 0, 0), store_mec=(0, 0, 0, 0),
                          delete_mec=(0,) * 8)
    with pytest.raises(FeasibilityError) as err:
        apply_caching(local, mec, action, fov_tiles(grid, 1))
    assert err.value.constraint == "24g"


def test_validate_action_masks_and_flags(grid):
    fov = fov_tiles(grid, 1)
    local = CacheState([20, 21, 22], 3)
    mec = CacheState([4, 5, 6, 7, 10, 11, 12, 13], 8)
    flags = AblationFlags()

    # store on an offloaded position is not locally computed
    bad = HybridAction((1, 0, 0, 0), (1, 0, 0, 0), (1, 0, 0),
                       (0, 0, 0, 0), (0,) * 8)
    with pytest.raises(FeasibilityError) as err:
        validate_action(bad, fov, local, mec, flags)
    assert err.value.constraint == "24g"

    # mec store on a locally computed position
    bad = HybridAction((1, 0, 0, 0), (0, 0, 0, 0), (0, 0, 0),
                       (0, 1, 0, 0), (1, 0, 0, 0, 0, 0, 0, 0))
    with pytest.raises(FeasibilityError) as err:
        validate_action(bad, fov, local, mec, flags)
    assert err.value.constraint == "24h"

    # segmentation disabled forbids mixed offload vectors
    seg_off = AblationFlags(segmentation_enabled=False)
    mixed = HybridAction((1, 0, 0, 0), (0,) * 4, (0,) * 3, (0,) * 4, (0,) * 8)
    with pytest.raises(FeasibilityError) as err:
        validate_action(mixed, fov, local, mec, seg_off)
    assert err.value.constraint == "segmentation"

    # caching disabled forbids any store/delete bit
    cache_off = AblationFlags(caching_replacement_enabled=False)
    bad = HybridAction((0, 0, 0, 0), (1, 0, 0, 0), (1, 0, 0),
                       (0,) * 4, (0,) * 8)
    with pytest.raises(FeasibilityError) as err:
        validate_action(bad, fov, local, mec, cache_off)
    assert err.value.constraint == "caching"

    # non-binary offload entries
    bad = HybridAction((2, 0, 0, 0), (0,) * 4, (0,) * 3, (0,) * 4, (0,) * 8)
    with pytest.raises(FeasibilityError) as err:
        validate_action(bad, fov, local, mec, flags)
    assert err.value.constraint == "24f"


def test_env_requires_reset():
    env = VrServiceEnv(seed=0)
    with pytest.raises(RuntimeError):
        env.step(_noop())
    with pytest.raises(RuntimeError):
        env.state()


def test_env_reset_invariants():
    env = VrServiceEnv(seed=5)
    state = env.reset()
    assert state.local_cache_vec.sum() == 3
    assert state.mec_cache_vec.sum() == 8
    assert state.predicted_popularity.sum() == pytest.approx(1.0, abs=1e-9)
    assert state.channel_gain > 0
    # same seed reproduces the initial state exactly
    other = VrServiceEnv(seed=5).reset()
    assert np.array_equal(state.local_cache_vec, other.local_cache_vec)
    assert np.array_equal(state.mec_cache_vec, other.mec_cache_vec)
    assert state.channel_gain == other.channel_gain


def test_env_reset_tile_frequencies_hypergeometric():
    env = VrServiceEnv(seed=100)
    n, m_l = env.grid.n_tiles, env.m_local
    resets = 10_000
    counts = np.zeros(n)
    for i in range(resets):
        env.reset(seed=i)
        counts += env.state().local_cache_vec
    p = m_l / n
    bound = 3 * np.sqrt(p * (1 - p) / resets)
    assert np.all(np.abs(counts / resets - p) <= bound)


def test_env_step_bit_identical_streams():
    def run(seed):
        env = VrServiceEnv(seed=seed)
        env.reset()
        rng = np.random.default_rng(77)
        outs = []
        for _ in range(50):
            out, _ = env.step(random_policy(env.snapshot(), rng))
            outs.append(out)
        return outs

    assert run(9) == run(9)
    assert run(9) != run(10)


def test_env_segmentation_disabled_rejects_mixed():
    env = VrServiceEnv(flags=AblationFlags(segmentation_enabled=False), seed=1)
    env.reset()
    mixed = HybridAction((1, 0, 0, 0), (0,) * 4, (0,) * 3, (0,) * 4, (0,) * 8)
    with pytest.raises(FeasibilityError):
        env.step(mixed)


def test_env_caching_disabled_keeps_caches_frozen():
    env = VrServiceEnv(flags=AblationFlags(caching_replacement_enabled=False),
                       seed=2)
    first = env.reset()
    rng = np.random.default_rng(3)
    for _ in range(500):
        _, state = env.step(random_policy(env.snapshot(), rng))
    assert np.array_equal(state.local_cache_vec, first.local_cache_vec)
    assert np.array_equal(state.mec_cache_vec, first.mec_cache_vec)


def test_env_full_hit_dominance():
    env = VrServiceEnv(m_local=4, m_mec=8, seed=4)
    env.reset()
    # force the local cache to cover the requested FoV exactly
    fov = fov_tiles(env.grid, env.snapshot().request)
    env._local = CacheState(list(fov), 4)
    out, _ = env.step(HybridAction((0,) * 4, (0,) * 4, (0,) * 4, (0,) * 4, (0,) * 8))
    assert out.d_2d_down == out.d_3d_down == out.d_mec_back == out.d_local_back == 0.0
    assert out.e_mec == out.e_tx == 0.0 and out.t_mec == 0.0
