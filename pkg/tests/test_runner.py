import dataclasses
import json

import numpy as np
import pytest

from vredge import nn
from vredge.agent import AgentConfig
from vredge.runner import (METRICS_HEADER, CacheConfig, ConfigError,
                           ExperimentConfig, check_grad, check_oracle,
                           config_from_dict, config_to_dict,
                           converged_window_mean, expected_action_count,
                           load_config, main, pretrain_predictor,
                           random_snapshot, read_metrics_csv, run_eval,
                           run_sweep, run_training, save_config,
                           sweep_point_config)

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


def _tiny_agent(**overrides):
    base = dict(hidden_width=8, hidden_layers=2, batch_size=8,
                episodes=3, slots_per_episode=10, replay_capacity=200)
    base.update(overrides)
    return AgentConfig(**base)


def _fast_config(agent_kind="random", seed=0):
    return dataclasses.replace(ExperimentConfig(), agent_kind=agent_kind,
                               seed=seed, agent=_tiny_agent()).resolved()


def test_config_roundtrip_lossless(tmp_path):
    cfg = ExperimentConfig().resolved()
    path = tmp_path / "config.json"
    save_config(cfg, path)
    again = load_config(path)
    assert again == cfg
    # a second round-trip produces identical bytes
    path2 = tmp_path / "config2.json"
    save_config(again, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_config_unknown_keys_rejected():
    data = config_to_dict(ExperimentConfig())
    data["typo_field"] = 1
    with pytest.raises(ConfigError, match="typo_field"):
        config_from_dict(data)
    data = config_to_dict(ExperimentConfig())
    data["channel"]["bandwith_hz"] = 1e8
    with pytest.raises(ConfigError, match="bandwith_hz"):
        config_from_dict(data)


def test_config_consistency_checks():
    with pytest.raises(ConfigError):
        ExperimentConfig(cache=CacheConfig(m_local=9, m_mec=8))
    with pytest.raises(ConfigError):
        ExperimentConfig(omega=1.2)
    with pytest.raises(ConfigError):
        ExperimentConfig(agent_kind="dqn")


def test_resolved_materializes_transition_matrix():
    cfg = ExperimentConfig(seed=3)
    assert cfg.popularity.transition == ()
    resolved = cfg.resolved()
    t = np.asarray(resolved.popularity.transition)
    assert t.shape == (4, 4)
    assert np.allclose(t.sum(axis=1), 1.0)
    # resolution is a pure function of the seed
    assert resolved.popularity.transition == \
        ExperimentConfig(seed=3).resolved().popularity.transition
    assert resolved.resolved() == resolved


def test_run_training_random_agent(tmp_path):
    cfg = _fast_config("random")
    result = run_training(cfg, tmp_path / "run")
    assert result.agent is None
    csv_path = tmp_path / "run" / "metrics.csv"
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(METRICS_HEADER)
    assert len(lines) == 1 + cfg.agent.episodes
    metrics = read_metrics_csv(csv_path)
    assert [m.episode for m in metrics] == [0, 1, 2]
    # config echo reproduces byte-identical metrics
    echo = load_config(tmp_path / "run" / "config_echo.json")
    run_training(echo, tmp_path / "again")
    assert (tmp_path / "again" / "metrics.csv").read_bytes() == csv_path.read_bytes()


def test_run_training_and_eval_lstm(tmp_path):
    cfg = dataclasses.replace(
        _fast_config("lstm-ddpg", seed=1),
        predictor=dataclasses.replace(ExperimentConfig().predictor,
                                      iterations=5, trace_slots=120,
                                      lstm_hidden=8))
    result = run_training(cfg, tmp_path / "run")
    assert result.agent is not None
    arrays = nn.load_checkpoint(tmp_path / "run" / "checkpoint.bin")
    assert any(k.startswith("predictor.") for k in arrays)
    assert any(k.startswith("actor.") for k in arrays)
    metrics = run_eval(tmp_path / "run", episodes=2)
    assert len(metrics) == 2
    assert (tmp_path / "run" / "eval_metrics.csv").exists()
    # greedy evaluation is deterministic given the stored parameters
    again = run_eval(tmp_path / "run", episodes=2)
    assert again == metrics


def test_converged_window_mean_uses_last_fifth():
    cfg = _fast_config("random")
    result = run_training.__wrapped__(cfg, "/tmp/unused") if False else None
    from vredge.agent import EpisodeMetrics
    metrics = [EpisodeMetrics(i, float(i), 0.0, 0.0, 0.0, 0.0)
               for i in range(10)]
    summary = converged_window_mean(metrics)
    assert summary["total_reward"] == pytest.approx(np.mean([8.0, 9.0]))


def test_sweep_single_value_degenerates_to_training(tmp_path):
    cfg = _fast_config("random")
    rows = run_sweep(cfg, "omega", values=[0.5], out_dir=tmp_path,
                     agents=("random",))
    assert len(rows) == 1
    axis, value, agent_kind, summary = rows[0]
    assert (axis, value, agent_kind) == ("omega", 0.5, "random")
    point_dir = tmp_path / "omega" / "0.5" / "random"
    assert (point_dir / "metrics.csv").exists()
    point_cfg = load_config(point_dir / "config_echo.json")
    assert point_cfg.omega == 0.5
    direct = run_training(point_cfg, tmp_path / "direct")
    assert converged_window_mean(direct.metrics) == summary
    sweep_csv = (tmp_path / "sweep_omega.csv").read_text().splitlines()
    assert sweep_csv[0].startswith("axis,value,agent,total_reward")
    assert len(sweep_csv) == 2


def test_sweep_parallel_jobs_match_serial(tmp_path):
    cfg = _fast_config("random")
    serial = run_sweep(cfg, "ablation", values=[1, 4], out_dir=tmp_path / "s",
                       agents=("random",), jobs=1)
    parallel = run_sweep(cfg, "ablation", values=[1, 4], out_dir=tmp_path / "p",
                         agents=("random",), jobs=2)
    assert serial == parallel


def test_sweep_point_config_axes():
    cfg = ExperimentConfig()
    assert sweep_point_config(cfg, "omega", 0.3).omega == 0.3
    assert sweep_point_config(cfg, "cache_mec", 12).cache == CacheConfig(3, 12)
    assert sweep_point_config(cfg, "cache_local", 7).cache == CacheConfig(7, 8)
    flags = sweep_point_config(cfg, "ablation", 4).flags
    assert not flags.caching_replacement_enabled
    assert not flags.segmentation_enabled
    with pytest.raises(ConfigError):
        sweep_point_config(cfg, "bandwidth", 1)


def test_check_oracle_passes_and_trials_zero():
    cfg = ExperimentConfig().resolved()
    report = check_oracle(cfg, trials=50, seed=0)
    assert report["ok"] and report["mismatches"] == 0
    assert report["enumeration_failures"] == 0
    empty = check_oracle(cfg, trials=0, seed=0)
    assert "warning" in empty


def test_check_oracle_negative_control(monkeypatch, tmp_path):
    from vredge import oracle as oracle_mod
    true_fn = oracle_mod.recompute_cost

    def corrupted(snapshot, action):
        out = true_fn(snapshot, action)
        return dataclasses.replace(out, t_mec=out.t_mec + 1e-3)

    monkeypatch.setattr(oracle_mod, "recompute_cost", corrupted)
    report = check_oracle(ExperimentConfig().resolved(), trials=20, seed=0,
                          out_dir=tmp_path)
    assert not report["ok"]
    assert report["first_mismatch"]["field"] == "t_mec"
    dump = json.loads((tmp_path / "oracle_failure.json").read_text())
    assert dump["field"] == "t_mec"
    assert len(dump["action"]["offload"]) == 4


def test_expected_action_count_spot(tmp_path):
    cfg = ExperimentConfig().resolved()
    rng = np.random.default_rng(1)
    snap = random_snapshot(cfg, rng)
    from vredge.oracle import enumerate_feasible
    assert expected_action_count(snap) == sum(1 for _ in enumerate_feasible(snap))


def test_check_grad_passes_and_is_seed_stable():
    verdicts = [check_grad(seed)["ok"] for seed in range(5)]
    assert all(verdicts)
    assert check_grad(3) == check_grad(3)


def test_check_grad_negative_control(monkeypatch):
    original = nn.Dense.backward

    def sign_flipped(self, grad_out):
        grad_in = original(self, grad_out)
        self.dw = -self.dw
        return grad_in

    monkeypatch.setattr(nn.Dense, "backward", sign_flipped)
    assert not check_grad(0)["ok"]


def test_cli_check_grad_exit_code():
    assert main(["check-grad", "--seed", "1"]) == 0


def test_cli_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert main(["train", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_cli_train_eval_random(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    save_config(_fast_config("random"), cfg_path)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--agent", "random",
                 "--out", str(out)]) == 0
    assert main(["eval", "--out", str(out), "--episodes", "2"]) == 0
    printed = capsys.readouterr().out
    assert "mean_total_reward" in printed


def test_cli_check_oracle(tmp_path):
    assert main(["check-oracle", "--trials", "20", "--seed", "0",
                 "--out", str(tmp_path)]) == 0


def test_cli_override_flags(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    save_config(_fast_config("random"), cfg_path)
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg_path), "--agent", "random",
                 "--ablation", "4", "--omega", "0.3", "--episodes", "2",
                 "--out", str(out)]) == 0
    echo = load_config(out / "config_echo.json")
    assert echo.omega == 0.3
    assert echo.agent.episodes == 2
    assert not echo.flags.segmentation_enabled
