"""Hybrid-policy DDPG learner with learned binarization thresholds.

The actor emits continuous scores in [0, 1] for every offload/store/delete
bit plus five group thresholds; a deterministic repair step binarizes the
scores against the thresholds, masks store bits to valid candidates, and
balances store/delete counts so every executed action is feasible by
construction. The replay buffer stores the raw post-noise score vectors so
the critic differentiates through the actor's continuous output space.

Also provides the uniform-random baseline policy and the history-fed DDPG
variant that replaces the popularity forecast with the raw request window.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .environment import HybridAction, SlotSnapshot, SystemState, VrServiceEnv
from .nn import Adam, Mlp
from .predictor import encoding_matrix
from .tiling import viewpoint_count


@dataclass(frozen=True)
class AgentConfig:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    discount: float = 0.85          # per-slot discount of the cumulative cost
    soft_update_coef: float = 0.001
    target_interval: int = 1        # network updates between target blends
    noise_std: float = 0.1          # exploration noise, decayed per episode
    noise_std_final: float = 0.01
    batch_size: int = 64
    replay_capacity: int = 100_000
    episodes: int = 1000
    slots_per_episode: int = 100
    hidden_width: int = 128
    hidden_layers: int = 3
    gain_scale: float = 1e4         # conditions the channel gain in the state
    latency_scale: float = 1.0      # optional reward-shaping scales; raw
    energy_scale: float = 1.0       # rewards are always logged unscaled

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if not 0.0 < self.soft_update_coef < 1.0:
            raise ValueError("soft_update_coef must lie in (0, 1)")
        if self.noise_std < 0 or self.noise_std_final < 0:
            raise ValueError("noise levels must be >= 0")
        if self.target_interval < 1 or self.batch_size < 1 \
                or self.replay_capacity < 1:
            raise ValueError("target_interval, batch_size, replay_capacity "
                             "must be >= 1")


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    total_reward: float
    mean_latency_s: float
    p95_latency_s: float
    total_energy_j: float
    mean_cost: float


def action_dim(z: int, m_local: int, m_mec: int) -> int:
    """Scores for offload/store/delete groups plus the five thresholds."""
    return 3 * z + m_local + m_mec + 5


def vectorize_state(state: SystemState, gain_scale: float) -> np.ndarray:
    """[vec(local cache), vec(mec cache), popularity forecast, scaled gain]."""
    return np.concatenate([
        state.local_cache_vec, state.mec_cache_vec,
        state.predicted_popularity, [state.channel_gain * gain_scale]])


def select_action(actor: Mlp, state_vec: np.ndarray, explore: bool,
                  rng: np.random.Generator = None,
                  noise_std: float = 0.0) -> np.ndarray:
    """Actor forward pass, optionally with clipped Gaussian exploration noise."""
    raw = actor.forward(state_vec[None, :])[0]
    if explore and noise_std > 0.0:
        raw = np.clip(raw + rng.normal(0.0, noise_std, raw.shape), 0.0, 1.0)
    return raw


def binarize_and_repair(raw, snapshot: SlotSnapshot,
                        flags=None) -> HybridAction:
    """Decode a raw score/threshold vector into a feasible hybrid action.

    Bits are set where a score meets its group threshold; with segmentation
    disabled the offload group collapses to all-ones/all-zeros on its mean
    score. Store bits are masked to tiles computed on that device and not
    already cached there, then each cache's store/delete groups are balanced
    to the smaller count, keeping the highest scores (ties to the lower tile
    id). Total by construction: the result always validates.
    """
    flags = flags if flags is not None else snapshot.flags
    fov = snapshot.fov
    z = len(fov)
    m_l = snapshot.local_cache.capacity
    m_e = snapshot.mec_cache.capacity
    vals = [float(v) for v in raw]
    expected = action_dim(z, m_l, m_e)
    if len(vals) != expected:
        raise ValueError(f"raw action must have {expected} entries, got {len(vals)}")

    off_s = vals[0:z]
    sl_s = vals[z:2 * z]
    dl_s = vals[2 * z:2 * z + m_l]
    sm_s = vals[2 * z + m_l:3 * z + m_l]
    dm_s = vals[3 * z + m_l:3 * z + m_l + m_e]
    eps_o, eps_lp, eps_lm, eps_mp, eps_mm = vals[3 * z + m_l + m_e:]

    if flags.segmentation_enabled:
        offload = tuple(1 if s >= eps_o else 0 for s in off_s)
    else:
        offload = (1,) * z if sum(off_s) / z >= eps_o else (0,) * z

    if not flags.caching_replacement_enabled:
        return HybridAction(offload, (0,) * z, (0,) * m_l, (0,) * z, (0,) * m_e)

    def balanced_side(store_scores, eps_store, delete_scores, eps_delete,
                      offload_value, cache):
        stores = [p for p in range(z)
                  if store_scores[p] >= eps_store and offload[p] == offload_value
                  and fov[p] not in cache]
        deletes = [m for m in range(cache.capacity)
                   if delete_scores[m] >= eps_delete]
        keep = min(len(stores), len(deletes))
        if len(stores) > keep:
            stores = sorted(stores, key=lambda p: (-store_scores[p], fov[p]))[:keep]
        if len(deletes) > keep:
            # cache tiles are sorted ascending, so slot index orders tile ids
            deletes = sorted(deletes, key=lambda m: (-delete_scores[m], m))[:keep]
        store_bits = tuple(1 if p in stores else 0 for p in range(z))
        delete_bits = tuple(1 if m in deletes else 0 for m in range(cache.capacity))
        return store_bits, delete_bits

    store_local, delete_local = balanced_side(
        sl_s, eps_lp, dl_s, eps_lm, 0, snapshot.local_cache)
    store_mec, delete_mec = balanced_side(
        sm_s, eps_mp, dm_s, eps_mm, 1, snapshot.mec_cache)
    return HybridAction(offload, store_local, delete_local, store_mec, delete_mec)


def random_policy(snapshot: SlotSnapshot, rng: np.random.Generator) -> HybridAction:
    """Uniformly random scores/thresholds pushed through the repair decoder."""
    z = len(snapshot.fov)
    raw = rng.random(action_dim(z, snapshot.local_cache.capacity,
                                snapshot.mec_cache.capacity))
    return binarize_and_repair(raw, snapshot)


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions with uniform minibatch sampling."""

    def __init__(self, capacity: int, state_dim: int, act_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.size = 0
        self._ptr = 0

    def add(self, s, a, r, s2) -> None:
        i = self._ptr
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self._ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


def td_targets(rewards: np.ndarray, next_states: np.ndarray, target_actor: Mlp,
               target_critic: Mlp, discount: float) -> np.ndarray:
    """y_i = r_i + discount * Q'(s'_i, pi'(s'_i)) from the target networks."""
    if len(rewards) == 0:
        raise ValueError("empty batch")
    next_actions = target_actor.forward(next_states)
    q_next = target_critic.forward(
        np.concatenate([next_states, next_actions], axis=1))[:, 0]
    return rewards + discount * q_next


def update_critic(critic: Mlp, optimizer: Adam, states: np.ndarray,
                  actions: np.ndarray, targets: np.ndarray) -> float:
    """One Adam step on the mean squared TD error; returns the pre-step loss."""
    q = critic.forward(np.concatenate([states, actions], axis=1))[:, 0]
    diff = q - targets
    loss = float((diff * diff).mean())
    critic.backward((2.0 * diff / len(diff))[:, None])
    optimizer.step(critic.grads())
    return loss


def update_actor(actor: Mlp, optimizer: Adam, critic: Mlp,
                 states: np.ndarray) -> float:
    """Ascend mean Q(s, pi(s)) through the critic's action input.

    The critic stays frozen: its weight gradients from this pass are
    discarded (they are overwritten by the next critic update).
    """
    actions = actor.forward(states)
    batch = len(states)
    critic.forward(np.concatenate([states, actions], axis=1))
    grad_in = critic.backward(np.full((batch, 1), -1.0 / batch))
    grad_actions = grad_in[:, states.shape[1]:]
    actor.backward(grad_actions)
    grads = actor.grads()
    optimizer.step(grads)
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads)))


def soft_update(online: Mlp, target: Mlp, coef: float) -> None:
    """target <- coef * online + (1 - coef) * target, elementwise."""
    for p_online, p_target in zip(online.params(), target.params()):
        p_target *= 1.0 - coef
        p_target += coef * p_online


class DdpgAgent:
    """Actor/critic pair with target networks and a replay buffer."""

    def __init__(self, state_dim: int, act_dim: int, cfg: AgentConfig,
                 seed: int = 0):
        self.state_dim = state_dim
        self.act_dim = act_dim
        self.cfg = cfg
        seqs = np.random.SeedSequence(seed).spawn(3)
        actor_rng, critic_rng, self.rng = [np.random.default_rng(s) for s in seqs]
        hidden = [cfg.hidden_width] * cfg.hidden_layers
        self.actor = Mlp([state_dim] + hidden + [act_dim],
                         ["relu"] * cfg.hidden_layers + ["sigmoid"], actor_rng)
        self.critic = Mlp([state_dim + act_dim] + hidden + [1],
                          ["relu"] * cfg.hidden_layers + ["linear"], critic_rng)
        self.target_actor = copy.deepcopy(self.actor)
        self.target_critic = copy.deepcopy(self.critic)
        self.actor_opt = Adam(self.actor.params(), cfg.actor_lr)
        self.critic_opt = Adam(self.critic.params(), cfg.critic_lr)
        self.buffer = ReplayBuffer(cfg.replay_capacity, state_dim, act_dim)
        self._update_steps = 0

    def act(self, state_vec: np.ndarray, explore: bool = False,
            noise_std: float = 0.0) -> np.ndarray:
        return select_action(self.actor, state_vec, explore, self.rng, noise_std)

    def update(self) -> None:
        """One replay minibatch: critic step, actor step, soft target blend."""
        cfg = self.cfg
        s, a, r, s2 = self.buffer.sample(cfg.batch_size, self.rng)
        y = td_targets(r, s2, self.target_actor, self.target_critic, cfg.discount)
        update_critic(self.critic, self.critic_opt, s, a, y)
        update_actor(self.actor, self.actor_opt, self.critic, s)
        self._update_steps += 1
        if self._update_steps % cfg.target_interval == 0:
            soft_update(self.actor, self.target_actor, cfg.soft_update_coef)
            soft_update(self.critic, self.target_critic, cfg.soft_update_coef)

    def parameter_arrays(self) -> dict:
        arrays = {}
        for net_name, net in (("actor", self.actor), ("critic", self.critic),
                              ("target_actor", self.target_actor),
                              ("target_critic", self.target_critic)):
            for li, layer in enumerate(net.layers):
                arrays[f"{net_name}.{li}.w"] = layer.w
                arrays[f"{net_name}.{li}.b"] = layer.b
        return arrays

    def load_parameter_arrays(self, arrays: dict) -> None:
        for name, param in self.parameter_arrays().items():
            param[...] = arrays[name]


# -- state construction per agent flavor ---------------------------------------


def make_state_fn(mode: str, env: VrServiceEnv, gain_scale: float):
    """State-vector builder for a mode: 'lstm-ddpg' | 'ddpg' | 'random'.

    'ddpg' (the history-fed baseline) replaces the popularity-forecast
    segment with the flattened binary encodings of the raw request window.
    """
    if mode in ("lstm-ddpg", "random"):
        def state_fn(e: VrServiceEnv) -> np.ndarray:
            return vectorize_state(e.state(), gain_scale)
        dim = 2 * env.grid.n_tiles + viewpoint_count(env.grid) + 1
        return state_fn, dim
    if mode == "ddpg":
        encodings = encoding_matrix(env.grid)

        def state_fn(e: VrServiceEnv) -> np.ndarray:
            s = e.state()
            window = np.asarray(e.request_window(), dtype=np.intp) - 1
            return np.concatenate([
                s.local_cache_vec, s.mec_cache_vec,
                encodings[window].ravel(), [s.channel_gain * gain_scale]])
        dim = 2 * env.grid.n_tiles + env.window * env.grid.n_tiles + 1
        return state_fn, dim
    raise ValueError(f"unknown agent mode {mode!r}")


def _episode_metrics(index: int, outcomes: list) -> EpisodeMetrics:
    latencies = np.array([o.t_total for o in outcomes])
    return EpisodeMetrics(
        episode=index,
        total_reward=float(sum(o.reward for o in outcomes)),
        mean_latency_s=float(latencies.mean()),
        p95_latency_s=float(np.percentile(latencies, 95)),
        total_energy_j=float(sum(o.e_total for o in outcomes)),
        mean_cost=float(np.mean([o.cost for o in outcomes])),
    )


def _learning_reward(outcome, omega: float, cfg: AgentConfig) -> float:
    return -(omega * cfg.latency_scale * outcome.t_total
             + (1.0 - omega) * cfg.energy_scale * outcome.e_total)


@dataclass
class TrainResult:
    agent: DdpgAgent          # None for the random baseline
    metrics: list
    mode: str


def train(env: VrServiceEnv, cfg: AgentConfig, mode: str = "lstm-ddpg",
          seed: int = 0, predictor=None, progress: bool = False) -> TrainResult:
    """Run the training loop: per slot, act with exploration noise, repair,
    step the environment, store the transition, and update both networks
    from a replay minibatch, soft-blending the targets every few updates.

    `predictor` (pre-trained, frozen) supplies the popularity forecast for
    the 'lstm-ddpg' mode; 'ddpg' feeds the raw window instead; 'random'
    skips all learning and just rolls the random policy for the same budget.
    """
    master = np.random.SeedSequence(seed)
    agent_seq, episode_seq, random_seq = master.spawn(3)
    episode_seeds = episode_seq.generate_state(cfg.episodes)

    if mode == "lstm-ddpg" and predictor is not None:
        env.predictor_hook = predictor.predict
    elif mode in ("ddpg", "random"):
        env.predictor_hook = None

    if mode == "random":
        rng = np.random.default_rng(random_seq)
        metrics = []
        for ep in range(cfg.episodes):
            env.reset(int(episode_seeds[ep]))
            outcomes = []
            for _ in range(cfg.slots_per_episode):
                outcome, _ = env.step(random_policy(env.snapshot(), rng))
                outcomes.append(outcome)
            metrics.append(_episode_metrics(ep, outcomes))
        return TrainResult(None, metrics, mode)

    state_fn, state_dim = make_state_fn(mode, env, cfg.gain_scale)
    act_dim = action_dim(env.grid.fov_size, env.m_local, env.m_mec)
    agent = DdpgAgent(state_dim, act_dim, cfg,
                      seed=int(agent_seq.generate_state(1)[0]))

    metrics = []
    for ep in range(cfg.episodes):
        if cfg.episodes > 1 and cfg.noise_std > 0:
            decay = (cfg.noise_std_final / cfg.noise_std) ** (ep / (cfg.episodes - 1))
            noise_std = cfg.noise_std * decay
        else:
            noise_std = cfg.noise_std
        env.reset(int(episode_seeds[ep]))
        svec = state_fn(env)
        outcomes = []
        for _ in range(cfg.slots_per_episode):
            raw = agent.act(svec, explore=True, noise_std=noise_std)
            action = binarize_and_repair(raw, env.snapshot())
            outcome, _ = env.step(action)
            outcomes.append(outcome)
            next_svec = state_fn(env)
            agent.buffer.add(svec, raw,
                             _learning_reward(outcome, env.omega, cfg), next_svec)
            svec = next_svec
            if agent.buffer.size >= cfg.batch_size:
                agent.update()
        metrics.append(_episode_metrics(ep, outcomes))
        if progress and (ep + 1) % max(1, cfg.episodes // 20) == 0:
            print(f"episode {ep + 1}/{cfg.episodes}  "
                  f"total_reward={metrics[-1].total_reward:.3f}  "
                  f"noise={noise_std:.4f}")
    return TrainResult(agent, metrics, mode)


def greedy_policy(agent: DdpgAgent, state_fn):
    """Noise-free policy closure: env -> feasible HybridAction."""
    def policy(env: VrServiceEnv) -> HybridAction:
        raw = agent.act(state_fn(env), explore=False)
        return binarize_and_repair(raw, env.snapshot())
    return policy


def random_policy_fn(seed: int):
    rng = np.random.default_rng(seed)

    def policy(env: VrServiceEnv) -> HybridAction:
        return random_policy(env.snapshot(), rng)
    return policy


def evaluate(env: VrServiceEnv, policy, episodes: int, slots: int,
             seed: int = 0) -> list:
    """Roll `episodes` seeded episodes under a fixed policy; returns metrics."""
    episode_seeds = np.random.SeedSequence(seed).generate_state(episodes)
    metrics = []
    for ep in range(episodes):
        env.reset(int(episode_seeds[ep]))
        outcomes = []
        for _ in range(slots):
            outcome, _ = env.step(policy(env))
            outcomes.append(outcome)
        metrics.append(_episode_metrics(ep, outcomes))
    return metrics
