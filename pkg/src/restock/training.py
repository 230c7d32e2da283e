"""Training loops: decoupled context-based PPO and independent PPO.

Both trainers share the same PPO machinery (GAE, clipped losses, Adam on
shared parameters).  The decoupled trainer alternates between collecting
occupancy trajectories in the joint store and updating each agent from its
own local simulator; the independent trainer samples the joint store only.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .context import (
    AugmentSpec,
    ContextModelConfig,
    ContextPredictor,
    augment,
    extract_context,
    train_context_model,
)
from .errors import ConfigurationError
from .features import N_ACTIONS, OBS_LEN, PolicySpec
from .local import LocalSim
from .losses import overall_update
from .nets import ParamSet, init_mlp
from .rollout import (
    JointRecord,
    RolloutBuffer,
    SampleCounter,
    collect_joint,
    collect_local_episodes,
    evaluate,
)
from .store import StoreConfig


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    critic_coef: float = 0.5
    lr: float = 0.00025
    parallel_envs: int = 10  # joint episodes per collection batch
    n_step: int = 5  # advantage horizon unless gae_horizon overrides
    gae_horizon: int | None = None
    chunk_len: int = 10
    outer_epochs: int = 20
    inner_rounds: int = 1
    local_episodes: int = 4  # per-agent local episodes per inner round
    update_epochs: int = 4  # minibatch passes over each buffer
    minibatch_size: int = 1024
    episode_len: int = 100
    hidden: int = 64
    reward_standardization: bool = True  # normalize advantages per buffer
    team_reward: bool = False
    context_features: bool = True
    normalize_obs: bool = True
    train_with_joint_data: bool = True
    local_fresh_windows: bool = False
    eval_episodes: int = 2
    eval_every: int = 1

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0 or not 0.0 < self.lam <= 1.0:
            raise ConfigurationError("train.gamma/lam: must lie in (0, 1]")
        if not 0.0 < self.clip_eps < 1.0:
            raise ConfigurationError("train.clip_eps: must lie in (0, 1)")
        if self.entropy_coef < 0 or self.critic_coef < 0 or self.lr < 0:
            raise ConfigurationError("train coefficients: must be >= 0")
        if min(self.parallel_envs, self.chunk_len, self.episode_len, self.update_epochs) < 1:
            raise ConfigurationError("train sizes: must be >= 1")
        if self.inner_rounds < 0 or self.local_episodes < 1 or self.n_step < 0:
            raise ConfigurationError("train schedule: invalid value")

    @property
    def horizon(self) -> int:
        return self.n_step if self.gae_horizon is None else self.gae_horizon

    def policy_spec(self) -> PolicySpec:
        return PolicySpec(context_features=self.context_features, normalize=self.normalize_obs)


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    joint_samples: int
    local_samples: int
    mean_profit: float
    std_profit: float
    elapsed_seconds: float


@dataclass
class TrainResult:
    rows: list[MetricsRow]
    policy: ParamSet
    value: ParamSet
    counter: SampleCounter
    predictor: ContextPredictor | None = None

    @property
    def final_profit(self) -> float:
        return self.rows[-1].mean_profit


def init_policy_value(rng: np.random.Generator, hidden: int = 64) -> tuple[ParamSet, ParamSet]:
    policy = init_mlp((OBS_LEN, hidden, hidden, N_ACTIONS), rng, head_scale=0.01)
    value = init_mlp((OBS_LEN, hidden, hidden, 1), rng)
    return policy, value


def run_ppo_updates(
    policy: ParamSet,
    value: ParamSet,
    buffer: RolloutBuffer,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> dict:
    """Minibatch passes over a finalized buffer; chunks stay contiguous."""
    chunks = buffer.chunk_indices(cfg.chunk_len)
    stats: dict = {}
    for _ in range(cfg.update_epochs):
        order = rng.permutation(len(chunks))
        batch: list[np.ndarray] = []
        size = 0
        for j in order:
            batch.append(chunks[j])
            size += len(chunks[j])
            if size >= cfg.minibatch_size:
                stats = _apply_minibatch(policy, value, buffer, np.concatenate(batch), cfg)
                batch, size = [], 0
        if batch:
            stats = _apply_minibatch(policy, value, buffer, np.concatenate(batch), cfg)
    return stats


def _apply_minibatch(policy, value, buffer, idx, cfg: TrainConfig) -> dict:
    return overall_update(
        policy,
        value,
        obs=buffer.obs[idx],
        actions=buffer.actions[idx],
        old_logprobs=buffer.logprobs[idx],
        advantages=buffer.advantages[idx],
        old_values=buffer.old_values[idx],
        targets=buffer.returns[idx],
        clip_eps=cfg.clip_eps,
        entropy_coef=cfg.entropy_coef,
        critic_coef=cfg.critic_coef,
        lr=cfg.lr,
    )


def _sample_windows(rng, series_len: int, T: int, count: int) -> list[int]:
    if series_len < T:
        raise ConfigurationError(
            f"training episode length {T} exceeds demand series length {series_len}"
        )
    return [int(s) for s in rng.integers(0, series_len - T + 1, size=count)]


def get_context_dynamics(
    policy: ParamSet,
    value: ParamSet,
    store_cfg: StoreConfig,
    train_demands: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    counter: SampleCounter,
) -> tuple[list[JointRecord], RolloutBuffer | None]:
    """Run a batch of joint episodes with the current policies.

    Returns the episode records (context extraction happens per agent later)
    and, when joint transitions also feed training, a finalized buffer.
    """
    T = cfg.episode_len
    B = cfg.parallel_envs
    starts = _sample_windows(rng, train_demands.shape[0], T, B)
    windows = [train_demands[s : s + T] for s in starts]
    seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=B)]
    records, buffer = collect_joint(
        policy,
        value,
        store_cfg,
        windows,
        seeds,
        starts,
        cfg.policy_spec(),
        rng,
        team=cfg.team_reward,
        counter=counter,
        build_buffer=cfg.train_with_joint_data,
    )
    if buffer is not None:
        buffer.finalize(cfg.gamma, cfg.lam, cfg.horizon, cfg.reward_standardization)
    return records, buffer


@dataclass(frozen=True)
class LocalBinding:
    """One local episode: trajectory plus the matching replay ingredients."""

    trajectory: object
    seed: int
    initial_stock: int
    demands: np.ndarray


def decentralized_ppo(
    policy: ParamSet,
    value: ParamSet,
    agent: int,
    store_cfg: StoreConfig,
    bindings: list[LocalBinding],
    cfg: TrainConfig,
    rng: np.random.Generator,
    counter: SampleCounter,
) -> dict:
    """Collect local episodes for one agent and update the shared networks."""
    sims = []
    series = []
    for b in bindings:
        sim = LocalSim(
            store_cfg.skus[agent], store_cfg, agent, seed=b.seed, initial_stock=b.initial_stock
        )
        sim.set_context_trajectory(b.trajectory)
        sims.append(sim)
        series.append(b.demands)
    buffer = collect_local_episodes(
        policy, value, sims, series, cfg.policy_spec(), rng, counter=counter
    )
    buffer.finalize(cfg.gamma, cfg.lam, cfg.horizon, cfg.reward_standardization)
    return run_ppo_updates(policy, value, buffer, cfg, rng)


def _eval_row(
    epoch, policy, store_cfg, test_demands, cfg, counter, eval_seed, t_start
) -> MetricsRow:
    mean, std, _ = evaluate(
        policy,
        store_cfg,
        test_demands,
        cfg.eval_episodes,
        eval_seed,
        cfg.policy_spec(),
    )
    return MetricsRow(
        epoch=epoch,
        joint_samples=counter.joint_samples,
        local_samples=counter.local_samples,
        mean_profit=mean,
        std_profit=std,
        elapsed_seconds=time.perf_counter() - t_start,
    )


def train_cdppo(
    store_cfg: StoreConfig,
    train_demands: np.ndarray,
    test_demands: np.ndarray,
    cfg: TrainConfig,
    aug: AugmentSpec,
    ctx_cfg: ContextModelConfig,
    seed: int,
) -> TrainResult:
    """Decoupled training: alternate joint context collection with per-agent
    local PPO on (optionally augmented) trajectories."""
    store_cfg = replace(store_cfg, horizon=cfg.episode_len)
    rng = np.random.default_rng(seed)
    policy, value = init_policy_value(rng, cfg.hidden)
    counter = SampleCounter()
    eval_seed = seed + 900_001
    t_start = time.perf_counter()
    n = store_cfg.n
    needs_predictor = aug.mode in ("predictor", "mixed")
    predictor: ContextPredictor | None = None

    rows = [_eval_row(0, policy, store_cfg, test_demands, cfg, counter, eval_seed, t_start)]
    episode_cursor = 0
    for epoch in range(1, cfg.outer_epochs + 1):
        records, joint_buffer = get_context_dynamics(
            policy, value, store_cfg, train_demands, cfg, rng, counter
        )
        if joint_buffer is not None:
            run_ppo_updates(policy, value, joint_buffer, cfg, rng)

        if needs_predictor:
            sample_trajs = [extract_context(rec, i) for rec in records for i in range(n)]
            predictor = train_context_model(
                sample_trajs, ctx_cfg, store_cfg.capacity, rng, warm_start=predictor
            )

        for _ in range(cfg.inner_rounds):
            for agent in range(n):
                bindings = []
                for _ in range(cfg.local_episodes):
                    rec = records[episode_cursor % len(records)]
                    episode_cursor += 1
                    traj = extract_context(rec, agent)
                    traj = augment(traj, aug, predictor, rng, store_cfg.capacity)
                    if cfg.local_fresh_windows:
                        start = _sample_windows(rng, train_demands.shape[0], cfg.episode_len, 1)[0]
                        demands = train_demands[start : start + cfg.episode_len, agent]
                        ep_seed = int(rng.integers(0, 2**31 - 1))
                    else:
                        demands = rec.demands[:, agent]
                        ep_seed = rec.seed
                    bindings.append(
                        LocalBinding(
                            trajectory=traj,
                            seed=ep_seed,
                            initial_stock=int(rec.initial_stock[agent]),
                            demands=demands,
                        )
                    )
                decentralized_ppo(
                    policy, value, agent, store_cfg, bindings, cfg, rng, counter
                )

        if epoch % cfg.eval_every == 0 or epoch == cfg.outer_epochs:
            rows.append(
                _eval_row(epoch, policy, store_cfg, test_demands, cfg, counter, eval_seed, t_start)
            )
    return TrainResult(rows=rows, policy=policy, value=value, counter=counter, predictor=predictor)


def train_ippo(
    store_cfg: StoreConfig,
    train_demands: np.ndarray,
    test_demands: np.ndarray,
    cfg: TrainConfig,
    seed: int,
) -> TrainResult:
    """Independent PPO baseline: all data comes from the joint store."""
    store_cfg = replace(store_cfg, horizon=cfg.episode_len)
    rng = np.random.default_rng(seed)
    policy, value = init_policy_value(rng, cfg.hidden)
    counter = SampleCounter()
    eval_seed = seed + 900_001
    t_start = time.perf_counter()

    rows = [_eval_row(0, policy, store_cfg, test_demands, cfg, counter, eval_seed, t_start)]
    for epoch in range(1, cfg.outer_epochs + 1):
        T = cfg.episode_len
        starts = _sample_windows(rng, train_demands.shape[0], T, cfg.parallel_envs)
        windows = [train_demands[s : s + T] for s in starts]
        seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=cfg.parallel_envs)]
        _, buffer = collect_joint(
            policy,
            value,
            store_cfg,
            windows,
            seeds,
            starts,
            cfg.policy_spec(),
            rng,
            team=cfg.team_reward,
            counter=counter,
            build_buffer=True,
        )
        buffer.finalize(cfg.gamma, cfg.lam, cfg.horizon, cfg.reward_standardization)
        run_ppo_updates(policy, value, buffer, cfg, rng)
        if epoch % cfg.eval_every == 0 or epoch == cfg.outer_epochs:
            rows.append(
                _eval_row(epoch, policy, store_cfg, test_demands, cfg, counter, eval_seed, t_start)
            )
    return TrainResult(rows=rows, policy=policy, value=value, counter=counter)
