"""Shared-capacity store replenishment: simulators, PPO trainers, baselines."""

__version__ = "0.1.0"

from .baselines import (
    BaseStockParams,
    SSParams,
    fit_base_stock,
    fit_ss_policy,
    run_base_stock,
    run_ss_policy,
    simulate_policy_profit,
)
from .context import AugmentSpec, ContextModelConfig, augment, extract_context, train_context_model
from .data import DemandDataset, load_demand_csv, sample_sku_params, split_train_test, synth_demand
from .errors import ConfigurationError, EpisodeExhausted, TrainingError
from .features import ACTION_MULTIPLIERS, OBS_LEN, PolicySpec, action_to_order, build_observation
from .local import ContextTrajectory, LocalSim
from .losses import compute_gae, overall_update, ppo_actor_loss, ppo_critic_loss
from .nets import ParamSet, adam_update, init_lstm, init_mlp, load_params, save_params
from .rollout import JointRecord, RolloutBuffer, SampleCounter, evaluate
from .store import (
    LeadTimeSpec,
    SkuConfig,
    StepOutcome,
    StoreConfig,
    StoreSim,
    compute_overflow_ratio,
    compute_profit,
)
from .training import TrainConfig, TrainResult, train_cdppo, train_ippo

__all__ = [name for name in dir() if not name.startswith("_")]
