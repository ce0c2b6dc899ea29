"""Experiment orchestration and the command-line interface.

Subcommands: train, eval, sweep, check-oracle, check-grad. Every run writes
a fully resolved config echo next to its outputs, so any result can be
reproduced from the echo alone. Exit codes: 0 success, 1 usage/config
error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import agent as agent_mod
from . import nn, oracle
from .agent import AgentConfig, EpisodeMetrics, TrainResult, random_policy
from .environment import (AblationFlags, ChannelConfig, ComputeConfig,
                          CacheState, SlotSnapshot, VrServiceEnv, draw_channel,
                          slot_cost, transfer_sizes)
from .popularity import random_transition_matrix
from .predictor import (PopularityPredictor, PredictorConfig, build_dataset,
                        train_predictor)
from .tiling import TileGrid, default_grid, viewpoint_count

METRICS_HEADER = ["episode", "total_reward", "mean_latency_s",
                  "p95_latency_s", "total_energy_J", "mean_cost"]
AGENT_KINDS = ("lstm-ddpg", "ddpg", "random")
SWEEP_AXES = ("omega", "cache_mec", "cache_local", "ablation")


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class PopularityConfig:
    gamma_space: tuple = (0.7, 1.0, 1.5, 2.5)
    transition: tuple = ()     # row-major nested tuples; generated if empty
    window_slots: int = 20     # T_r


@dataclass(frozen=True)
class CacheConfig:
    m_local: int = 3
    m_mec: int = 8


@dataclass(frozen=True)
class PretrainConfig:
    lstm_hidden: int = 64
    learning_rate: float = 1e-5
    dropout_rate: float = 0.35
    batch_size: int = 32
    iterations: int = 1750
    trace_slots: int = 4000


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    agent_kind: str = "lstm-ddpg"
    omega: float = 0.8
    phi: float = 3.0
    grid: TileGrid = field(default_factory=default_grid)
    popularity: PopularityConfig = field(default_factory=PopularityConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    flags: AblationFlags = field(default_factory=AblationFlags)
    predictor: PretrainConfig = field(default_factory=PretrainConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def __post_init__(self):
        if self.agent_kind not in AGENT_KINDS:
            raise ConfigError(f"agent_kind must be one of {AGENT_KINDS}")
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError("omega must lie in [0, 1]")
        if self.phi <= 0:
            raise ConfigError("phi must be > 0")
        if not 1 <= self.cache.m_local <= self.cache.m_mec <= self.grid.n_tiles:
            raise ConfigError("cache sizes must satisfy "
                              "1 <= m_local <= m_mec <= number of tiles")
        n_states = len(self.popularity.gamma_space)
        if self.popularity.transition:
            t = np.asarray(self.popularity.transition, dtype=np.float64)
            if t.shape != (n_states, n_states):
                raise ConfigError("transition matrix shape must match gamma_space")
            if np.any(t < 0) or not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
                raise ConfigError("transition matrix rows must be stochastic")
        if self.popularity.window_slots < 1:
            raise ConfigError("window_slots must be >= 1")

    def resolved(self) -> "ExperimentConfig":
        """Materialize the seed-generated transition matrix, if absent."""
        if self.popularity.transition:
            return self
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x9090]))
        matrix = random_transition_matrix(len(self.popularity.gamma_space), rng)
        pop = dataclasses.replace(self.popularity,
                                  transition=_nested_tuple(matrix))
        return dataclasses.replace(self, popularity=pop)


def _nested_tuple(matrix: np.ndarray) -> tuple:
    return tuple(tuple(float(v) for v in row) for row in matrix)


def _from_section(cls, data: dict, section: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {sorted(unknown)}")
    return cls(**data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def as_dict(obj):
        return dataclasses.asdict(obj)

    return {
        "seed": cfg.seed,
        "agent_kind": cfg.agent_kind,
        "omega": cfg.omega,
        "phi": cfg.phi,
        "grid": as_dict(cfg.grid),
        "popularity": {
            "gamma_space": list(cfg.popularity.gamma_space),
            "transition": [list(r) for r in cfg.popularity.transition],
            "window_slots": cfg.popularity.window_slots,
        },
        "channel": as_dict(cfg.channel),
        "compute": as_dict(cfg.compute),
        "cache": as_dict(cfg.cache),
        "flags": as_dict(cfg.flags),
        "predictor": as_dict(cfg.predictor),
        "agent": as_dict(cfg.agent),
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    top_known = {"seed", "agent_kind", "omega", "phi", "grid", "popularity",
                 "channel", "compute", "cache", "flags", "predictor", "agent"}
    unknown = set(data) - top_known
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    def section(name, cls, convert=None):
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"'{name}' must be an object")
        if convert:
            raw = convert(dict(raw))
        return _from_section(cls, raw, name)

    def conv_popularity(raw):
        if "gamma_space" in raw:
            raw["gamma_space"] = tuple(float(g) for g in raw["gamma_space"])
        if "transition" in raw:
            raw["transition"] = tuple(tuple(float(v) for v in row)
                                      for row in raw["transition"])
        return raw

    return ExperimentConfig(
        seed=int(data.get("seed", 0)),
        agent_kind=data.get("agent_kind", "lstm-ddpg"),
        omega=float(data.get("omega", 0.8)),
        phi=float(data.get("phi", 3.0)),
        grid=section("grid", TileGrid),
        popularity=section("popularity", PopularityConfig, conv_popularity),
        channel=section("channel", ChannelConfig),
        compute=section("compute", ComputeConfig),
        cache=section("cache", CacheConfig),
        flags=section("flags", AblationFlags),
        predictor=section("predictor", PretrainConfig),
        agent=section("agent", AgentConfig),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- construction helpers -------------------------------------------------------


def build_env(cfg: ExperimentConfig, predictor_hook=None) -> VrServiceEnv:
    cfg = cfg.resolved()
    return VrServiceEnv(
        grid=cfg.grid, channel=cfg.channel, compute=cfg.compute,
        m_local=cfg.cache.m_local, m_mec=cfg.cache.m_mec, omega=cfg.omega,
        phi=cfg.phi, flags=cfg.flags,
        gamma_space=np.asarray(cfg.popularity.gamma_space),
        transition=np.asarray(cfg.popularity.transition),
        window=cfg.popularity.window_slots,
        predictor_hook=predictor_hook, seed=cfg.seed)


def predictor_config(cfg: ExperimentConfig) -> PredictorConfig:
    pre = cfg.predictor
    samples = pre.trace_slots - cfg.popularity.window_slots
    updates_per_epoch = max(1, math.ceil(samples / pre.batch_size))
    epochs = max(1, math.ceil(pre.iterations / updates_per_epoch))
    return PredictorConfig(
        window=cfg.popularity.window_slots, lstm_hidden=pre.lstm_hidden,
        learning_rate=pre.learning_rate, dropout=pre.dropout_rate,
        batch_size=pre.batch_size, epochs=epochs)


def generate_popularity_trace(cfg: ExperimentConfig, slots: int,
                              seed: int) -> list:
    """(request, true pmf) pairs from a fresh copy of the hidden chain."""
    cfg = cfg.resolved()
    env = build_env(cfg)
    env.reset(seed)
    trace = []
    for _ in range(slots):
        env._chain.advance(env._rng)
        trace.append((env._chain.sample_request(env._rng),
                      env._chain.pmf.copy()))
    return trace


def pretrain_predictor(cfg: ExperimentConfig, progress: bool = False):
    """Algorithm line-2 phase: fit the forecaster on a ground-truth trace."""
    cfg = cfg.resolved()
    pre_seed = int(np.random.SeedSequence([cfg.seed, 0x11]).generate_state(1)[0])
    trace = generate_popularity_trace(cfg, cfg.predictor.trace_slots, pre_seed)
    pcfg = predictor_config(cfg)
    model = PopularityPredictor(cfg.grid, pcfg, seed=pre_seed)
    dataset = build_dataset(trace, pcfg.window)
    model, losses = train_predictor(model, dataset)
    if progress:
        print(f"pre-training: {len(dataset)} samples, {pcfg.epochs} epochs, "
              f"loss {losses[0]:.6f} -> {losses[-1]:.6f}")
    return model, losses


# -- train / eval ---------------------------------------------------------------


def write_metrics_csv(path, metrics: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow([m.episode, m.total_reward, m.mean_latency_s,
                             m.p95_latency_s, m.total_energy_j, m.mean_cost])


def read_metrics_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != METRICS_HEADER:
            raise ConfigError(f"unexpected metrics header {header}")
        return [EpisodeMetrics(int(r[0]), *(float(v) for v in r[1:]))
                for r in reader]


def run_training(cfg: ExperimentConfig, out_dir, progress: bool = False) -> TrainResult:
    """Pre-train (if applicable), train, and persist metrics + checkpoint."""
    cfg = cfg.resolved()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config_echo.json")

    predictor = None
    arrays = {}
    if cfg.agent_kind == "lstm-ddpg":
        predictor, _ = pretrain_predictor(cfg, progress)
        arrays.update({f"predictor.{k}": v
                       for k, v in predictor.parameter_arrays().items()})

    env = build_env(cfg)
    result = agent_mod.train(env, cfg.agent, mode=cfg.agent_kind,
                             seed=cfg.seed, predictor=predictor,
                             progress=progress)
    write_metrics_csv(out / "metrics.csv", result.metrics)
    if result.agent is not None:
        arrays.update(result.agent.parameter_arrays())
    nn.save_checkpoint(out / "checkpoint.bin", arrays)
    return result


def load_trained_policy(cfg: ExperimentConfig, checkpoint_path):
    """Rebuild the policy stored by run_training; returns env + policy closure."""
    cfg = cfg.resolved()
    arrays = nn.load_checkpoint(checkpoint_path)
    predictor = None
    if cfg.agent_kind == "lstm-ddpg":
        predictor = PopularityPredictor(cfg.grid, predictor_config(cfg))
        predictor.load_parameter_arrays(
            {k[len("predictor."):]: v for k, v in arrays.items()
             if k.startswith("predictor.")})
    env = build_env(cfg, predictor_hook=predictor.predict if predictor else None)
    env.reset(cfg.seed)
    if cfg.agent_kind == "random":
        return env, agent_mod.random_policy_fn(cfg.seed)
    state_fn, state_dim = agent_mod.make_state_fn(cfg.agent_kind, env,
                                                  cfg.agent.gain_scale)
    act_dim = agent_mod.action_dim(cfg.grid.fov_size, cfg.cache.m_local,
                                   cfg.cache.m_mec)
    ddpg = agent_mod.DdpgAgent(state_dim, act_dim, cfg.agent)
    ddpg.load_parameter_arrays(
        {k: v for k, v in arrays.items() if not k.startswith("predictor.")})
    return env, agent_mod.greedy_policy(ddpg, state_fn)


def run_eval(out_dir, episodes: int = 10, seed: int = None) -> list:
    out = Path(out_dir)
    cfg = load_config(out / "config_echo.json")
    env, policy = load_trained_policy(cfg, out / "checkpoint.bin")
    eval_seed = cfg.seed + 1 if seed is None else seed
    metrics = agent_mod.evaluate(env, policy, episodes,
                                 cfg.agent.slots_per_episode, seed=eval_seed)
    write_metrics_csv(out / "eval_metrics.csv", metrics)
    return metrics


def converged_window_mean(metrics: list) -> dict:
    """Mean of each metric over the last 20% of episodes."""
    tail = metrics[-max(1, len(metrics) // 5):]
    return {
        "total_reward": float(np.mean([m.total_reward for m in tail])),
        "mean_latency_s": float(np.mean([m.mean_latency_s for m in tail])),
        "p95_latency_s": float(np.mean([m.p95_latency_s for m in tail])),
        "total_energy_J": float(np.mean([m.total_energy_j for m in tail])),
        "mean_cost": float(np.mean([m.mean_cost for m in tail])),
    }


# -- sweeps ---------------------------------------------------------------------


DEFAULT_SWEEP_VALUES = {
    "omega": [round(0.1 * i, 1) for i in range(1, 10)],
    "cache_mec": list(range(3, 13)),     # M_E in 3..12 at M_L = 3
    "cache_local": list(range(1, 8)),    # M_L in 1..7  at M_E = 8
    "ablation": [1, 2, 3, 4],
}


def sweep_point_config(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "omega":
        return dataclasses.replace(cfg, omega=float(value))
    if axis == "cache_mec":
        cache = CacheConfig(m_local=3, m_mec=int(value))
        return dataclasses.replace(cfg, cache=cache)
    if axis == "cache_local":
        cache = CacheConfig(m_local=int(value), m_mec=8)
        return dataclasses.replace(cfg, cache=cache)
    if axis == "ablation":
        return dataclasses.replace(
            cfg, flags=AblationFlags.from_config_index(int(value)))
    raise ConfigError(f"unknown sweep axis {axis!r}; pick from {SWEEP_AXES}")


def _sweep_worker(args):
    cfg_dict, axis, value, out_dir = args
    cfg = config_from_dict(cfg_dict)
    result = run_training(cfg, out_dir)
    summary = converged_window_mean(result.metrics)
    return axis, value, cfg.agent_kind, summary


def run_sweep(cfg: ExperimentConfig, axis: str, values=None, out_dir=".",
              agents=("lstm-ddpg",), jobs: int = 1) -> list:
    """One training per (value, agent); returns and writes aggregated rows."""
    cfg = cfg.resolved()
    values = DEFAULT_SWEEP_VALUES[axis] if values is None else values
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for value, agent_kind in product(values, agents):
        point_cfg = sweep_point_config(cfg, axis, value)
        point_cfg = dataclasses.replace(
            point_cfg, agent_kind=agent_kind,
            seed=int(np.random.SeedSequence(
                [cfg.seed, _axis_code(axis), int(round(float(value) * 1000)),
                 AGENT_KINDS.index(agent_kind)]).generate_state(1)[0]))
        point_dir = out / axis / str(value) / agent_kind
        tasks.append((config_to_dict(point_cfg), axis, value, str(point_dir)))

    if jobs > 1:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(jobs) as pool:
            rows = pool.map(_sweep_worker, tasks)
    else:
        rows = [_sweep_worker(t) for t in tasks]

    sweep_csv = out / f"sweep_{axis}.csv"
    with open(sweep_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "value", "agent", "total_reward",
                         "mean_latency_s", "p95_latency_s", "total_energy_J",
                         "mean_cost"])
        for ax, value, agent_kind, summary in rows:
            writer.writerow([ax, value, agent_kind, summary["total_reward"],
                             summary["mean_latency_s"], summary["p95_latency_s"],
                             summary["total_energy_J"], summary["mean_cost"]])
    return rows


def _axis_code(axis: str) -> int:
    return SWEEP_AXES.index(axis) + 1


# -- verification subcommands ----------------------------------------------------


def random_snapshot(cfg: ExperimentConfig, rng: np.random.Generator) -> SlotSnapshot:
    n = cfg.grid.n_tiles
    local = CacheState(rng.choice(n, cfg.cache.m_local, replace=False) + 1,
                       cfg.cache.m_local)
    mec = CacheState(rng.choice(n, cfg.cache.m_mec, replace=False) + 1,
                     cfg.cache.m_mec)
    return SlotSnapshot(
        grid=cfg.grid, local_cache=local, mec_cache=mec,
        request=int(rng.integers(1, viewpoint_count(cfg.grid) + 1)),
        gain=draw_channel(cfg.channel, rng), channel=cfg.channel,
        compute=cfg.compute, omega=cfg.omega, phi=cfg.phi, flags=cfg.flags)


def outcome_mismatch(a, b, rel_tol: float = 1e-9):
    """Name of the first SlotOutcome field whose values differ, or None."""
    for f in dataclasses.fields(a):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if abs(va - vb) > rel_tol * max(abs(va), abs(vb), 1.0):
            return f.name
    return None


def environment_outcome(snapshot: SlotSnapshot, action) -> "object":
    """The environment-side cost path, applied to a detached snapshot."""
    from .environment import downlink_rate
    sizes = transfer_sizes(snapshot.local_cache, snapshot.mec_cache,
                           snapshot.fov, action.offload, snapshot.tau,
                           snapshot.phi)
    rate = downlink_rate(snapshot.gain, snapshot.channel)
    return slot_cost(sizes, rate, snapshot.compute, snapshot.channel,
                     action.offload, snapshot.tau, snapshot.omega)


def expected_action_count(snapshot: SlotSnapshot) -> int:
    """Closed-form feasible-action count used to cross-check the enumerator."""
    fov = snapshot.fov
    z = len(fov)
    m_l = snapshot.local_cache.capacity
    m_e = snapshot.mec_cache.capacity
    if snapshot.flags.segmentation_enabled:
        offloads = list(product((0, 1), repeat=z))
    else:
        offloads = [(0,) * z, (1,) * z]
    total = 0
    for off in offloads:
        r = sum(1 for p in range(z)
                if off[p] == 0 and fov[p] not in snapshot.local_cache)
        s = sum(1 for p in range(z)
                if off[p] == 1 and fov[p] not in snapshot.mec_cache)
        if snapshot.flags.caching_replacement_enabled:
            lc = sum(math.comb(r, i) * math.comb(m_l, i)
                     for i in range(min(r, m_l) + 1))
            mc = sum(math.comb(s, i) * math.comb(m_e, i)
                     for i in range(min(s, m_e) + 1))
        else:
            lc = mc = 1
        total += lc * mc
    return total


def check_oracle(cfg: ExperimentConfig, trials: int = 1000, seed: int = 0,
                 out_dir=None) -> dict:
    """Differential + enumeration suites; returns a report dict."""
    cfg = cfg.resolved()
    rng = np.random.default_rng(seed)
    report = {"trials": trials, "mismatches": 0, "first_mismatch": None,
              "enumeration_checks": 0, "enumeration_failures": 0}
    if trials == 0:
        report["warning"] = "trials=0: nothing verified"
        return report
    for trial in range(trials):
        snapshot = random_snapshot(cfg, rng)
        action = random_policy(snapshot, rng)
        env_out = environment_outcome(snapshot, action)
        oracle_out = oracle.recompute_cost(snapshot, action)
        bad = outcome_mismatch(env_out, oracle_out)
        if bad is not None:
            report["mismatches"] += 1
            if report["first_mismatch"] is None:
                report["first_mismatch"] = {"trial": trial, "field": bad}
                if out_dir is not None:
                    _dump_snapshot(Path(out_dir) / "oracle_failure.json",
                                   snapshot, action, bad)
        if trial % max(1, trials // 20) == 0:
            n_enum = sum(1 for _ in oracle.enumerate_feasible(snapshot))
            report["enumeration_checks"] += 1
            if n_enum != expected_action_count(snapshot):
                report["enumeration_failures"] += 1
    report["ok"] = (report["mismatches"] == 0
                    and report["enumeration_failures"] == 0)
    return report


def _dump_snapshot(path, snapshot: SlotSnapshot, action, field_name: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump({
            "field": field_name,
            "request": snapshot.request,
            "gain": snapshot.gain,
            "local_cache": list(snapshot.local_cache.tiles),
            "mec_cache": list(snapshot.mec_cache.tiles),
            "omega": snapshot.omega,
            "phi": snapshot.phi,
            "action": {
                "offload": list(action.offload),
                "store_local": list(action.store_local),
                "delete_local": list(action.delete_local),
                "store_mec": list(action.store_mec),
                "delete_mec": list(action.delete_mec),
            },
        }, fh, indent=2)


def check_grad(seed: int = 0) -> dict:
    """Finite-difference suite over dense, LSTM, and critic-action gradients."""
    rng = np.random.default_rng(seed)
    report = {}

    # dense stack with every activation in play
    mlp = nn.Mlp([6, 8, 8, 3], ["tanh", "sigmoid", "softmax"],
                 np.random.default_rng(rng.integers(2 ** 32)))
    x = rng.normal(size=(5, 6))
    target = rng.random((5, 3))

    def mlp_loss():
        return nn.mse_loss(mlp.forward(x), target)[0]

    _, grad = nn.mse_loss(mlp.forward(x), target)
    mlp.backward(grad)
    report["dense"] = nn.finite_difference_check(mlp.params(), mlp.grads(),
                                                 mlp_loss)

    # two-layer LSTM + head, gradient only through the last hidden state
    lstm1 = nn.LstmLayer(4, 5, np.random.default_rng(rng.integers(2 ** 32)))
    lstm2 = nn.LstmLayer(5, 5, np.random.default_rng(rng.integers(2 ** 32)))
    head = nn.Dense(5, 3, "softmax", np.random.default_rng(rng.integers(2 ** 32)))
    seq = rng.normal(size=(3, 6, 4))
    seq_target = rng.random((3, 3))

    def lstm_forward():
        h2 = lstm2.forward(lstm1.forward(seq))
        return head.forward(h2[:, -1, :])

    def lstm_loss():
        return nn.mse_loss(lstm_forward(), seq_target)[0]

    _, grad = nn.mse_loss(lstm_forward(), seq_target)
    grad_h2 = np.zeros((3, 6, 5))
    grad_h2[:, -1, :] = head.backward(grad)
    lstm1.backward(lstm2.backward(grad_h2))
    params = lstm1.params() + lstm2.params() + head.params()
    grads = lstm1.grads() + lstm2.grads() + head.grads()
    report["lstm"] = nn.finite_difference_check(params, grads, lstm_loss)

    # critic-style net: gradient with respect to its action input
    critic = nn.Mlp([7, 10, 1], ["tanh", "linear"],
                    np.random.default_rng(rng.integers(2 ** 32)))
    sa = rng.normal(size=(4, 7))

    def q_mean():
        return float(critic.forward(sa).mean())

    critic.forward(sa)
    grad_in = critic.backward(np.full((4, 1), 1.0 / 4))
    step = 1e-5
    worst = 0.0
    for i in range(4):
        for j in range(7):
            orig = sa[i, j]
            sa[i, j] = orig + step
            up = q_mean()
            sa[i, j] = orig - step
            down = q_mean()
            sa[i, j] = orig
            fd = (up - down) / (2 * step)
            worst = max(worst, abs(fd - grad_in[i, j])
                        / max(abs(fd), abs(grad_in[i, j]), 1e-6))
    report["critic_action_input"] = worst
    report["ok"] = all(v <= 1e-4 for k, v in report.items() if k != "ok")
    return report


# -- CLI --------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, default=Path("runs/out"),
                        help="output directory")


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "agent", None):
        cfg = dataclasses.replace(cfg, agent_kind=args.agent)
    if getattr(args, "omega", None) is not None:
        cfg = dataclasses.replace(cfg, omega=args.omega)
    if getattr(args, "ablation", None) is not None:
        cfg = dataclasses.replace(
            cfg, flags=AblationFlags.from_config_index(args.ablation))
    if getattr(args, "episodes", None) is not None:
        cfg = dataclasses.replace(
            cfg, agent=dataclasses.replace(cfg.agent, episodes=args.episodes))
    return cfg.resolved()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vredge",
        description="MEC-assisted VR service simulator and hybrid-policy learner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="pre-train + train one agent")
    _add_common(p_train)
    p_train.add_argument("--agent", choices=AGENT_KINDS)
    p_train.add_argument("--ablation", type=int, choices=[1, 2, 3, 4])
    p_train.add_argument("--omega", type=float)
    p_train.add_argument("--episodes", type=int)
    p_train.add_argument("--progress", action="store_true")

    p_eval = sub.add_parser("eval", help="greedy evaluation of a finished run")
    p_eval.add_argument("--out", type=Path, required=True,
                        help="directory holding config_echo.json + checkpoint.bin")
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int)

    p_sweep = sub.add_parser("sweep", help="axis sweep of trainings")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p_sweep.add_argument("--values", nargs="*")
    p_sweep.add_argument("--agent", choices=AGENT_KINDS)
    p_sweep.add_argument("--episodes", type=int)
    p_sweep.add_argument("--omega", type=float)
    p_sweep.add_argument("--ablation", type=int, choices=[1, 2, 3, 4])
    p_sweep.add_argument("--jobs", type=int, default=1)

    p_oracle = sub.add_parser("check-oracle", help="differential cost verification")
    _add_common(p_oracle)
    p_oracle.add_argument("--trials", type=int, default=1000)

    p_grad = sub.add_parser("check-grad", help="finite-difference gradient suite")
    p_grad.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            cfg = _resolve_config(args)
            result = run_training(cfg, args.out, progress=args.progress)
            summary = converged_window_mean(result.metrics)
            print(f"trained agent={cfg.agent_kind} episodes={cfg.agent.episodes} "
                  f"converged total_reward={summary['total_reward']:.4f}")
            return 0
        if args.command == "eval":
            metrics = run_eval(args.out, episodes=args.episodes, seed=args.seed)
            rewards = [m.total_reward for m in metrics]
            print(f"eval episodes={len(metrics)} "
                  f"mean_total_reward={np.mean(rewards):.4f} "
                  f"std={np.std(rewards):.4f}")
            return 0
        if args.command == "sweep":
            cfg = _resolve_config(args)
            values = None
            if args.values:
                caster = float if args.axis == "omega" else int
                values = [caster(v) for v in args.values]
            agents = (cfg.agent_kind,)
            run_sweep(cfg, args.axis, values, args.out, agents, jobs=args.jobs)
            print(f"sweep axis={args.axis} written to {args.out}")
            return 0
        if args.command == "check-oracle":
            cfg = _resolve_config(args)
            report = check_oracle(cfg, trials=args.trials,
                                  seed=cfg.seed, out_dir=args.out)
            print(json.dumps(report, indent=2))
            return 0 if report.get("ok", True) else 2
        if args.command == "check-grad":
            report = check_grad(seed=args.seed)
            print(json.dumps(report, indent=2))
            return 0 if report["ok"] else 2
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
