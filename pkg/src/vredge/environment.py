"""One-slot transition engine for the MEC-assisted VR service.

Each slot serves one viewpoint request: the requested FoV's tiles are split
between local and MEC computation by a binary offload vector, missing tiles
are fetched over the downlink/backhaul, and both caches may replace content
under paired store/delete actions. The slot cost is a weighted sum of total
service latency and total energy; the reward is its negative.

Action conventions (all vectors binary, tuple-of-int):
  - offload[z] refers to the z-th tile of the requested FoV in ascending
    tile-id order; 1 = compute at the MEC server, 0 = compute locally.
  - store_local[z] / store_mec[z] use the same positional mapping and may
    only be set where the tile was computed on that device this slot and is
    not already cached there.
  - delete_local[m] / delete_mec[m] refer to the m-th cached tile in
    ascending tile-id order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .popularity import MarkovZipfProcess, RequestRecorder, DEFAULT_GAMMA_SPACE
from .tiling import TileGrid, fov_tiles, default_grid, viewpoint_count


class FeasibilityError(Exception):
    """An action violates one of the per-slot feasibility constraints."""

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(f"[{constraint}] {message}")


@dataclass(frozen=True)
class ChannelConfig:
    """Downlink and backhaul parameters (defaults: 30 dBm, -105 dBm, 100 m)."""

    bandwidth_hz: float = 1e8
    tx_power_w: float = 1.0
    noise_power_w: float = 10 ** -13.5
    distance_m: float = 100.0
    pathloss_exp: float = 2.0
    backhaul_rate_bps: float = 1e10

    def __post_init__(self):
        for name in ("bandwidth_hz", "tx_power_w", "noise_power_w",
                     "distance_m", "pathloss_exp", "backhaul_rate_bps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class ComputeConfig:
    """CPU frequencies, cycles-per-bit workload, and per-cycle energy coefficients."""

    f_mec_hz: float = 1e10
    f_local_hz: float = 3e9
    cycles_per_bit: float = 15.0
    kappa_mec: float = 2e-30
    kappa_local: float = 2e-30

    def __post_init__(self):
        for name in ("f_mec_hz", "f_local_hz", "cycles_per_bit", "kappa_mec", "kappa_local"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.f_local_hz >= self.f_mec_hz:
            raise ValueError("local CPU must be slower than the MEC CPU")


@dataclass(frozen=True)
class AblationFlags:
    caching_replacement_enabled: bool = True
    segmentation_enabled: bool = True

    @classmethod
    def from_config_index(cls, index: int) -> "AblationFlags":
        """Configs 1-4: (caching, segmentation) = (T,T), (F,T), (T,F), (F,F)."""
        table = {1: (True, True), 2: (False, True), 3: (True, False), 4: (False, False)}
        if index not in table:
            raise ValueError("config index must be 1..4")
        caching, segmentation = table[index]
        return cls(caching, segmentation)


class CacheState:
    """A full cache: exactly `capacity` distinct tile ids, kept sorted."""

    __slots__ = ("tiles", "capacity", "_set")

    def __init__(self, tiles, capacity: int):
        self.tiles = tuple(sorted(int(t) for t in tiles))
        self.capacity = capacity
        self._set = frozenset(self.tiles)
        if len(self._set) != len(self.tiles):
            raise ValueError("cache holds duplicate tiles")
        if len(self.tiles) != capacity:
            raise ValueError(f"cache must hold exactly {capacity} tiles")

    def __contains__(self, tile: int) -> bool:
        return tile in self._set

    def as_vector(self, n_tiles: int) -> np.ndarray:
        vec = np.zeros(n_tiles, dtype=np.float64)
        for t in self.tiles:
            vec[t - 1] = 1.0
        return vec

    def __repr__(self):
        return f"CacheState({self.tiles}, capacity={self.capacity})"

    def __eq__(self, other):
        return isinstance(other, CacheState) and self.tiles == other.tiles \
            and self.capacity == other.capacity


@dataclass(frozen=True)
class HybridAction:
    """Joint offload + dual-cache replacement decision for one slot."""

    offload: tuple
    store_local: tuple
    delete_local: tuple
    store_mec: tuple
    delete_mec: tuple

    def bits(self) -> tuple:
        """Concatenated bit-string, used for lexicographic tie-breaking."""
        return self.offload + self.store_local + self.delete_local \
            + self.store_mec + self.delete_mec

    @classmethod
    def noop(cls, z: int, m_local: int, m_mec: int) -> "HybridAction":
        return cls((0,) * z, (0,) * z, (0,) * m_local, (0,) * z, (0,) * m_mec)


@dataclass(frozen=True)
class TransferSizes:
    """Per-slot transfer volumes in bits (Eq. 9/10/12 terms)."""

    d_2d_down: float
    d_mec_down: float
    d_cloud_down: float
    d_3d_down: float
    d_mec_back: float
    d_local_back: float


@dataclass(frozen=True)
class SlotOutcome:
    """Full cost breakdown of one slot."""

    d_2d_down: float
    d_mec_down: float
    d_cloud_down: float
    d_3d_down: float
    d_mec_back: float
    d_local_back: float
    t_mec: float
    t_local: float
    t_total: float
    e_mec: float
    e_local: float
    e_tx: float
    e_total: float
    cost: float
    reward: float

    def check(self) -> None:
        """Structural identities that must hold for every outcome."""
        assert self.d_2d_down == self.d_mec_down + self.d_cloud_down
        assert self.t_total == max(self.t_mec, self.t_local)
        assert self.e_total == self.e_mec + self.e_local + self.e_tx
        assert self.reward == -self.cost
        for v in (self.d_2d_down, self.d_3d_down, self.d_mec_back, self.d_local_back,
                  self.t_mec, self.t_local, self.e_mec, self.e_local, self.e_tx):
            assert v >= 0.0


@dataclass(frozen=True)
class SystemState:
    """Observable state: cache occupancy, popularity forecast, channel gain."""

    local_cache_vec: np.ndarray
    mec_cache_vec: np.ndarray
    predicted_popularity: np.ndarray
    channel_gain: float


@dataclass(frozen=True)
class SlotSnapshot:
    """Everything needed to evaluate one slot without touching the environment."""

    grid: TileGrid
    local_cache: CacheState
    mec_cache: CacheState
    request: int
    gain: float
    channel: ChannelConfig
    compute: ComputeConfig
    omega: float
    phi: float
    flags: AblationFlags

    @property
    def fov(self) -> tuple:
        return fov_tiles(self.grid, self.request)

    @property
    def tau(self) -> float:
        return float(self.grid.tile_bits)


def draw_channel(cfg: ChannelConfig, rng: np.random.Generator) -> float:
    """Channel gain h = g * d^(-alpha) with unit-mean exponential fading g."""
    g = rng.exponential(1.0)
    return g * cfg.distance_m ** (-cfg.pathloss_exp)


def downlink_rate(h: float, cfg: ChannelConfig) -> float:
    """Shannon downlink rate B * log2(1 + P_B * h / sigma^2) in bit/s."""
    if h <= 0:
        raise ValueError("channel gain must be > 0")
    snr = cfg.tx_power_w * h / cfg.noise_power_w
    return cfg.bandwidth_hz * math.log2(1.0 + snr)


def transfer_sizes(local_cache: CacheState, mec_cache: CacheState, fov: tuple,
                   offload: tuple, tau: float, phi: float) -> TransferSizes:
    """Transfer volumes implied by the offload vector and the cache states.

    Indicator logic runs over the Z FoV positions; cache membership is looked
    up by global tile id. Tiles computed locally but absent from the local
    cache arrive via the MEC cache (downlink) or the cloud (backhaul, then
    forwarded); tiles computed at the MEC but absent there arrive via the
    backhaul. The MEC's 3D output is phi times its 2D input.
    """
    if len(offload) != len(fov):
        raise ValueError("offload vector length must equal the FoV size")
    n_mec_down = 0
    n_cloud_down = 0
    n_mec_back = 0
    n_offloaded = 0
    for tile, o in zip(fov, offload):
        if o:
            n_offloaded += 1
            if tile not in mec_cache:
                n_mec_back += 1
        elif tile not in local_cache:
            if tile in mec_cache:
                n_mec_down += 1
            else:
                n_cloud_down += 1
    return TransferSizes(
        d_2d_down=tau * (n_mec_down + n_cloud_down),
        d_mec_down=tau * n_mec_down,
        d_cloud_down=tau * n_cloud_down,
        d_3d_down=tau * phi * n_offloaded,
        d_mec_back=tau * n_mec_back,
        d_local_back=tau * n_cloud_down,
    )


def slot_cost(sizes: TransferSizes, rate: float, compute: ComputeConfig,
              channel: ChannelConfig, offload: tuple, tau: float,
              omega: float) -> SlotOutcome:
    """Latency/energy breakdown and the weighted slot cost.

    The MEC leg is backhaul fetch + 3D-output downlink + MEC compute, in
    series. The local leg overlaps its cloud fetch with the MEC-cache
    downlink (parallel links), then adds the SBS forwarding of cloud tiles
    and the local compute. The two legs themselves run in parallel.
    """
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    z = len(offload)
    n_off = sum(offload)
    w = compute.cycles_per_bit

    t_com_mec = w * tau * n_off / compute.f_mec_hz
    t_com_local = w * tau * (z - n_off) / compute.f_local_hz

    t_mec = sizes.d_mec_back / channel.backhaul_rate_bps \
        + sizes.d_3d_down / rate + t_com_mec
    t_local = max(sizes.d_local_back / channel.backhaul_rate_bps,
                  sizes.d_mec_down / rate) \
        + sizes.d_local_back / rate + t_com_local
    t_total = max(t_mec, t_local)

    e_mec = compute.kappa_mec * compute.f_mec_hz ** 2 * w * tau * n_off
    e_local = compute.kappa_local * compute.f_local_hz ** 2 * w * tau * (z - n_off)
    e_tx = channel.tx_power_w * (sizes.d_2d_down + sizes.d_3d_down) / rate
    e_total = e_mec + e_local + e_tx

    cost = omega * t_total + (1.0 - omega) * e_total
    return SlotOutcome(
        d_2d_down=sizes.d_2d_down, d_mec_down=sizes.d_mec_down,
        d_cloud_down=sizes.d_cloud_down, d_3d_down=sizes.d_3d_down,
        d_mec_back=sizes.d_mec_back, d_local_back=sizes.d_local_back,
        t_mec=t_mec, t_local=t_local, t_total=t_total,
        e_mec=e_mec, e_local=e_local, e_tx=e_tx, e_total=e_total,
        cost=cost, reward=-cost,
    )


def _check_bits(vec: tuple, length: int, constraint: str, label: str) -> None:
    if len(vec) != length:
        raise ValueError(f"{label} must have length {length}, got {len(vec)}")
    for b in vec:
        if b not in (0, 1):
            raise FeasibilityError(constraint, f"{label} entries must be 0/1")


def validate_action(action: HybridAction, fov: tuple, local_cache: CacheState,
                    mec_cache: CacheState, flags: AblationFlags) -> None:
    """Raise FeasibilityError naming the violated constraint, if any."""
    z = len(fov)
    _check_bits(action.offload, z, "24f", "offload")
    _check_bits(action.store_local, z, "24g", "store_local")
    _check_bits(action.delete_local, local_cache.capacity, "24g", "delete_local")
    _check_bits(action.store_mec, z, "24h", "store_mec")
    _check_bits(action.delete_mec, mec_cache.capacity, "24h", "delete_mec")

    if not flags.segmentation_enabled:
        s = sum(action.offload)
        if s not in (0, z):
            raise FeasibilityError(
                "segmentation", "offload must be all-ones or all-zeros when "
                "task segmentation is disabled")
    if not flags.caching_replacement_enabled:
        if any(action.store_local) or any(action.delete_local) \
                or any(action.store_mec) or any(action.delete_mec):
            raise FeasibilityError(
                "caching", "store/delete bits must be empty when caching "
                "replacement is disabled")

    for pos, bit in enumerate(action.store_local):
        if bit and (action.offload[pos] == 1 or fov[pos] in local_cache):
            raise FeasibilityError(
                "24g", f"store_local[{pos}] flags a tile not locally computed "
                "or already cached locally")
    for pos, bit in enumerate(action.store_mec):
        if bit and (action.offload[pos] == 0 or fov[pos] in mec_cache):
            raise FeasibilityError(
                "24h", f"store_mec[{pos}] flags a tile not MEC-computed "
                "or already cached at the MEC")

    if sum(action.store_local) != sum(action.delete_local):
        raise FeasibilityError("24d", "local store/delete counts must match")
    if sum(action.store_mec) != sum(action.delete_mec):
        raise FeasibilityError("24e", "MEC store/delete counts must match")


def apply_caching(local: CacheState, mec: CacheState, action: HybridAction,
                  fov: tuple) -> tuple:
    """Apply paired store/delete replacement; returns the new cache pair.

    Store bits are positional over the FoV and may only flag tiles computed
    on that device this slot (per the offload vector) and absent from its
    cache, so a stored tile can never coincide with a kept one and the
    caches stay exactly full.
    """
    if sum(action.store_local) != sum(action.delete_local):
        raise FeasibilityError("24d", "local store/delete counts must match")
    if sum(action.store_mec) != sum(action.delete_mec):
        raise FeasibilityError("24e", "MEC store/delete counts must match")

    def replace(cache, store_bits, offload_value, delete_bits, cname):
        stored = []
        for pos, bit in enumerate(store_bits):
            if not bit:
                continue
            tile = fov[pos]
            if action.offload[pos] != offload_value:
                raise FeasibilityError(cname, f"tile {tile} was not computed "
                                              "on the storing device")
            if tile in cache:
                raise FeasibilityError(cname, f"tile {tile} already cached")
            stored.append(tile)
        kept = [t for t, d in zip(cache.tiles, delete_bits) if not d]
        return CacheState(kept + stored, cache.capacity)

    new_local = replace(local, action.store_local, 0, action.delete_local, "24g")
    new_mec = replace(mec, action.store_mec, 1, action.delete_mec, "24h")
    return new_local, new_mec


class VrServiceEnv:
    """Seeded single-user VR service environment.

    Mutable single-owner object: one slot per step() call. The determinism
    contract is (seed, action stream) -> identical trajectory; independent
    instances with independent seeds may run concurrently.
    """

    def __init__(self, grid: TileGrid = None, channel: ChannelConfig = None,
                 compute: ComputeConfig = None, m_local: int = 3, m_mec: int = 8,
                 omega: float = 0.8, phi: float = 3.0,
                 flags: AblationFlags = None, gamma_space=DEFAULT_GAMMA_SPACE,
                 transition: np.ndarray = None, window: int = 20,
                 predictor_hook=None, seed: int = 0):
        self.grid = grid or default_grid()
        self.channel = channel or ChannelConfig()
        self.compute = compute or ComputeConfig()
        if not 1 <= m_local <= m_mec <= self.grid.n_tiles:
            raise ValueError("need 1 <= m_local <= m_mec <= number of tiles")
        self.m_local = m_local
        self.m_mec = m_mec
        if not 0.0 <= omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        self.omega = omega
        self.phi = phi
        self.flags = flags or AblationFlags()
        self.gamma_space = np.asarray(gamma_space, dtype=np.float64)
        if transition is None:
            transition = np.full((len(self.gamma_space),) * 2, 1.0 / len(self.gamma_space))
        self.transition = np.asarray(transition, dtype=np.float64)
        self.window = window
        self.predictor_hook = predictor_hook
        self.seed = seed
        self._uniform_pmf = np.full(viewpoint_count(self.grid),
                                    1.0 / viewpoint_count(self.grid))
        self._initialized = False

    # -- lifecycle -----------------------------------------------------------

    def reset(self, seed: int = None) -> SystemState:
        """Re-seed and draw a fresh initial state (caches full, recorder warm)."""
        if seed is not None:
            self.seed = seed
        self._rng = np.random.default_rng(self.seed)
        n = self.grid.n_tiles
        self._local = CacheState(
            self._rng.choice(n, size=self.m_local, replace=False) + 1, self.m_local)
        self._mec = CacheState(
            self._rng.choice(n, size=self.m_mec, replace=False) + 1, self.m_mec)
        self._chain = MarkovZipfProcess(
            self.gamma_space, self.transition, viewpoint_count(self.grid),
            state=int(self._rng.integers(len(self.gamma_space))))
        self._recorder = RequestRecorder(self.window)
        for _ in range(self.window):
            self._chain.advance(self._rng)
            self._recorder.record(self._chain.sample_request(self._rng))
        self._request = self._recorder.last
        self._gain = draw_channel(self.channel, self._rng)
        self._phat = self._predict()
        self._initialized = True
        return self.state()

    def _predict(self) -> np.ndarray:
        if self.predictor_hook is None:
            return self._uniform_pmf
        return np.asarray(self.predictor_hook(self._recorder.window()), dtype=np.float64)

    # -- views ---------------------------------------------------------------

    def _require_init(self):
        if not self._initialized:
            raise RuntimeError("environment not initialized; call reset() first")

    def state(self) -> SystemState:
        self._require_init()
        return SystemState(
            local_cache_vec=self._local.as_vector(self.grid.n_tiles),
            mec_cache_vec=self._mec.as_vector(self.grid.n_tiles),
            predicted_popularity=self._phat,
            channel_gain=self._gain,
        )

    def snapshot(self) -> SlotSnapshot:
        self._require_init()
        return SlotSnapshot(
            grid=self.grid, local_cache=self._local, mec_cache=self._mec,
            request=self._request, gain=self._gain, channel=self.channel,
            compute=self.compute, omega=self.omega, phi=self.phi, flags=self.flags,
        )

    def request_window(self) -> tuple:
        """Recorder contents, newest last (input to the popularity predictor)."""
        self._require_init()
        return self._recorder.window()

    @property
    def true_popularity(self) -> np.ndarray:
        """Ground-truth pmf of the hidden chain (simulator-side; never in state)."""
        self._require_init()
        return self._chain.pmf

    # -- transition ----------------------------------------------------------

    def step(self, action: HybridAction) -> tuple:
        """Serve the current request under `action`; advance one slot.

        Returns (SlotOutcome for the served slot, SystemState of the next slot).
        """
        self._require_init()
        fov = fov_tiles(self.grid, self._request)
        validate_action(action, fov, self._local, self._mec, self.flags)

        tau = float(self.grid.tile_bits)
        sizes = transfer_sizes(self._local, self._mec, fov, action.offload, tau, self.phi)
        rate = downlink_rate(self._gain, self.channel)
        outcome = slot_cost(sizes, rate, self.compute, self.channel,
                            action.offload, tau, self.omega)
        outcome.check()

        self._local, self._mec = apply_caching(self._local, self._mec, action, fov)
        if len(self._local.tiles) != self.m_local:
            raise FeasibilityError("24b", "local cache no longer exactly full")
        if len(self._mec.tiles) != self.m_mec:
            raise FeasibilityError("24c", "MEC cache no longer exactly full")

        self._chain.advance(self._rng)
        self._request = self._chain.sample_request(self._rng)
        self._recorder.record(self._request)
        self._gain = draw_channel(self.channel, self._rng)
        self._phat = self._predict()
        return outcome, self.state()

