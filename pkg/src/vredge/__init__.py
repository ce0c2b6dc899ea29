"""MEC-assisted tiled VR video service simulator and hybrid-policy learner.

Library layout (one module per subsystem):
  tiling       tile-plane geometry, viewpoints, FoV tile sets
  popularity   Markov-modulated Zipf requests and the sliding recorder
  environment  one-slot transition engine (costs, caching, feasibility)
  oracle       exhaustive per-slot verification and the myopic bound
  nn           from-scratch dense/LSTM layers, Adam, gradient checking
  predictor    LSTM popularity forecaster
  agent        DDPG hybrid-policy learner, repair decoder, baselines
  runner       experiment configs, sweeps, verification CLI
"""

from .tiling import TileGrid, default_grid, fov_tiles, overlap, viewpoint_count
from .popularity import (DEFAULT_GAMMA_SPACE, MarkovZipfProcess,
                         RequestRecorder, random_transition_matrix,
                         sample_request, zipf_pmf)
from .environment import (AblationFlags, CacheState, ChannelConfig,
                          ComputeConfig, FeasibilityError, HybridAction,
                          SlotOutcome, SlotSnapshot, SystemState,
                          VrServiceEnv, apply_caching, downlink_rate,
                          draw_channel, slot_cost, transfer_sizes,
                          validate_action)
from .oracle import best_myopic, enumerate_feasible, recompute_cost
from .predictor import (PopularityPredictor, PredictorConfig, build_dataset,
                        encode_request, train_predictor)
from .agent import (AgentConfig, DdpgAgent, EpisodeMetrics, ReplayBuffer,
                    action_dim, binarize_and_repair, evaluate, greedy_policy,
                    make_state_fn, random_policy, select_action, soft_update,
                    td_targets, train, update_actor, update_critic,
                    vectorize_state)
from .runner import (ExperimentConfig, check_grad, check_oracle, load_config,
                     run_eval, run_sweep, run_training, save_config)

__version__ = "0.1.0"
