"""Episode collection in the joint and local simulators, plus evaluation.

Joint episodes run several stores in lockstep so each policy forward pass
covers every (env, agent) pair at once.  Every episode also produces a
:class:`JointRecord` carrying the full per-step arrays needed to extract
context trajectories and to replay any agent locally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import (
    OBS_LEN,
    PolicySpec,
    action_to_order,
    build_observation,
    compute_reward,
    team_reward,
)
from .local import LocalSim
from .losses import compute_gae, normalize_advantages
from .nets import ParamSet, categorical_log_prob, categorical_sample, mlp_forward
from .store import StoreConfig, StoreSim


@dataclass
class SampleCounter:
    """Counts consumed environment interactions.

    One joint step with n agents counts as n samples; one local step counts
    as a single sample.  Evaluation never touches the counters.
    """

    joint_samples: int = 0
    local_samples: int = 0

    def count_joint(self, steps: int, n_agents: int) -> None:
        self.joint_samples += steps * n_agents

    def count_local(self, steps: int) -> None:
        self.local_samples += steps

    @property
    def total(self) -> int:
        return self.joint_samples + self.local_samples


@dataclass(frozen=True)
class JointRecord:
    """Everything that happened in one joint episode, step by step."""

    seed: int
    window_start: int
    initial_stock: np.ndarray  # (n,)
    demands: np.ndarray  # (T, n)
    orders: np.ndarray  # (T, n)
    lead_times: np.ndarray  # (T, n)
    sales: np.ndarray  # (T, n)
    stocks: np.ndarray  # (T, n), stock at the start of each step
    afterstates: np.ndarray  # (T, n)
    arrivals: np.ndarray  # (T, n), landed at the end of each step
    rho: np.ndarray  # (T,)
    profits: np.ndarray  # (T, n)
    final_stocks: np.ndarray  # (n,)

    @property
    def steps(self) -> int:
        return self.demands.shape[0]

    @property
    def n(self) -> int:
        return self.demands.shape[1]


@dataclass
class RolloutBuffer:
    """Transitions grouped into per-agent episode streams.

    Advantage estimation runs per stream; afterwards everything is flattened
    and can be cut into fixed-length chunks for minibatching.
    """

    _streams: list = field(default_factory=list)
    obs: np.ndarray | None = None
    actions: np.ndarray | None = None
    logprobs: np.ndarray | None = None
    rewards: np.ndarray | None = None
    old_values: np.ndarray | None = None
    dones: np.ndarray | None = None
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def add_stream(self, obs, actions, logprobs, rewards, values, dones) -> None:
        """One agent's episode; ``values`` includes the bootstrap entry."""
        self._streams.append(
            {
                "obs": np.asarray(obs, dtype=np.float64),
                "actions": np.asarray(actions, dtype=np.int64),
                "logprobs": np.asarray(logprobs, dtype=np.float64),
                "rewards": np.asarray(rewards, dtype=np.float64),
                "values": np.asarray(values, dtype=np.float64),
                "dones": np.asarray(dones, dtype=bool),
            }
        )

    def finalize(self, gamma: float, lam: float, horizon: int | None, normalize: bool) -> None:
        advs = []
        rets = []
        for s in self._streams:
            adv, ret = compute_gae(s["rewards"], s["values"], s["dones"], gamma, lam, horizon)
            advs.append(adv)
            rets.append(ret)
        self.obs = np.concatenate([s["obs"] for s in self._streams])
        self.actions = np.concatenate([s["actions"] for s in self._streams])
        self.logprobs = np.concatenate([s["logprobs"] for s in self._streams])
        self.rewards = np.concatenate([s["rewards"] for s in self._streams])
        self.old_values = np.concatenate([s["values"][:-1] for s in self._streams])
        self.dones = np.concatenate([s["dones"] for s in self._streams])
        self.advantages = np.concatenate(advs)
        self.returns = np.concatenate(rets)
        self._spans = []
        pos = 0
        for s in self._streams:
            self._spans.append((pos, pos + len(s["rewards"])))
            pos += len(s["rewards"])
        if normalize:
            self.advantages = normalize_advantages(self.advantages)

    def __len__(self) -> int:
        return sum(len(s["rewards"]) for s in self._streams)

    def chunk_indices(self, chunk_len: int) -> list[np.ndarray]:
        """Consecutive index blocks of ``chunk_len``, never crossing episodes."""
        if self.obs is None:
            raise RuntimeError("chunk_indices before finalize")
        chunks = []
        for start, end in self._spans:
            for a in range(start, end, chunk_len):
                chunks.append(np.arange(a, min(a + chunk_len, end)))
        return chunks


def max_price(store_cfg: StoreConfig) -> float:
    return max(s.price for s in store_cfg.skus)


def joint_observations(env: StoreSim, spec: PolicySpec, price_scale: float) -> np.ndarray:
    """(n, OBS_LEN) observation matrix for the current state of a joint env."""
    state = env.state
    cfg = env.config
    total_stock = float(state.stocks().sum())
    unloading = float(state.last_arrivals.sum())
    excess = state.last_rho * unloading
    rows = np.empty((cfg.n, OBS_LEN))
    for i, sku in enumerate(state.skus):
        rows[i] = build_observation(
            sku,
            cfg.skus[i],
            cfg,
            (total_stock, unloading, excess),
            context_features=spec.context_features,
            normalize=spec.normalize,
            price_scale=price_scale,
        )
    return rows


def local_observation(sim: LocalSim, spec: PolicySpec, price_scale: float) -> np.ndarray:
    return build_observation(
        sim.sku,
        sim.sku_cfg,
        sim.store_cfg,
        sim.totals(),
        context_features=spec.context_features,
        normalize=spec.normalize,
        price_scale=price_scale,
    )


def _select_actions(policy, obs, rng, greedy):
    if policy is None:
        n_actions = 15
        actions = rng.integers(0, n_actions, size=obs.shape[0])
        logprobs = np.full(obs.shape[0], -np.log(n_actions))
        return actions, logprobs, None
    logits, _ = mlp_forward(policy, obs)
    if greedy:
        actions = np.argmax(logits, axis=1)
    else:
        actions = categorical_sample(logits, rng)
    logprobs = categorical_log_prob(logits, actions)
    return actions, logprobs, logits


def collect_joint(
    policy: ParamSet | None,
    value: ParamSet | None,
    store_cfg: StoreConfig,
    demand_windows: list[np.ndarray],
    seeds: list[int],
    window_starts: list[int],
    spec: PolicySpec,
    rng: np.random.Generator,
    *,
    team: bool = False,
    greedy: bool = False,
    counter: SampleCounter | None = None,
    build_buffer: bool = True,
    initial_stock=None,
) -> tuple[list[JointRecord], RolloutBuffer | None]:
    """Run one batch of joint episodes in lockstep.

    ``demand_windows`` holds one (T, n) demand slice per episode: all slices
    must share T.  Returns the per-episode records and, when requested, a
    rollout buffer with one stream per (episode, agent).
    """
    B = len(demand_windows)
    T = demand_windows[0].shape[0]
    n = store_cfg.n
    price_scale = max_price(store_cfg)

    envs = [StoreSim(store_cfg) for _ in range(B)]
    for env, seed in zip(envs, seeds):
        env.reset(seed, initial_stock)

    rec = {
        name: np.zeros((B, T, n), dtype=np.int64)
        for name in ("orders", "lead_times", "sales", "stocks", "afterstates", "arrivals")
    }
    rec_rho = np.zeros((B, T))
    rec_profit = np.zeros((B, T, n))
    rewards = np.zeros((B, T, n))
    init_stocks = np.stack([env.state.stocks() for env in envs])

    if build_buffer:
        all_obs = np.zeros((T, B * n, OBS_LEN))
        all_actions = np.zeros((T, B * n), dtype=np.int64)
        all_logprobs = np.zeros((T, B * n))
        all_values = np.zeros((T + 1, B * n))

    for t in range(T):
        obs = np.concatenate([joint_observations(env, spec, price_scale) for env in envs])
        actions, logprobs, _ = _select_actions(policy, obs, rng, greedy)
        if build_buffer:
            all_obs[t] = obs
            all_actions[t] = actions
            all_logprobs[t] = logprobs
            if value is not None:
                all_values[t] = mlp_forward(value, obs)[0][:, 0]
        for b, env in enumerate(envs):
            state = env.state
            orders = np.array(
                [
                    action_to_order(
                        int(actions[b * n + i]), state.skus[i].sales_history, state.t
                    )
                    for i in range(n)
                ],
                dtype=np.int64,
            )
            demands = demand_windows[b][t]
            rec["stocks"][b, t] = state.stocks()
            outcome = env.step(orders, demands)
            rec["orders"][b, t] = orders
            rec["lead_times"][b, t] = outcome.lead_times
            rec["sales"][b, t] = outcome.sales
            rec["afterstates"][b, t] = outcome.afterstates
            rec["arrivals"][b, t] = outcome.arrivals
            rec_rho[b, t] = outcome.rho
            rec_profit[b, t] = outcome.profits
            if team:
                rewards[b, t, :] = team_reward(outcome.profits)
            else:
                rewards[b, t] = [compute_reward(p) for p in outcome.profits]

    if build_buffer and value is not None:
        final_obs = np.concatenate([joint_observations(env, spec, price_scale) for env in envs])
        all_values[T] = mlp_forward(value, final_obs)[0][:, 0]

    records = []
    for b, env in enumerate(envs):
        records.append(
            JointRecord(
                seed=seeds[b],
                window_start=window_starts[b],
                initial_stock=init_stocks[b],
                demands=demand_windows[b].copy(),
                orders=rec["orders"][b],
                lead_times=rec["lead_times"][b],
                sales=rec["sales"][b],
                stocks=rec["stocks"][b],
                afterstates=rec["afterstates"][b],
                arrivals=rec["arrivals"][b],
                rho=rec_rho[b],
                profits=rec_profit[b],
                final_stocks=env.state.stocks(),
            )
        )
        if counter is not None:
            counter.count_joint(T, n)

    buffer = None
    if build_buffer:
        buffer = RolloutBuffer()
        dones = np.zeros(T, dtype=bool)  # fixed-horizon truncation, bootstrap instead
        for b in range(B):
            for i in range(n):
                col = b * n + i
                buffer.add_stream(
                    all_obs[:, col],
                    all_actions[:, col],
                    all_logprobs[:, col],
                    rewards[b, :, i],
                    all_values[:, col],
                    dones,
                )
    return records, buffer


def collect_local_episodes(
    policy: ParamSet,
    value: ParamSet,
    sims: list[LocalSim],
    demand_series: list[np.ndarray],
    spec: PolicySpec,
    rng: np.random.Generator,
    *,
    team: bool = False,
    counter: SampleCounter | None = None,
) -> RolloutBuffer:
    """Run already-bound local sims in lockstep for one agent.

    ``demand_series`` holds one (T,) demand stream per sim.  Local episodes
    always produce individual rewards; under a team-reward config the other
    agents' profit contribution is not available locally, so the own profit
    is used (the joint phase still trains on true team rewards).
    """
    E = len(sims)
    T = min(len(d) for d in demand_series)
    price_scale = max_price(sims[0].store_cfg)
    all_obs = np.zeros((T + 1, E, OBS_LEN))
    all_actions = np.zeros((T, E), dtype=np.int64)
    all_logprobs = np.zeros((T, E))
    all_values = np.zeros((T + 1, E))
    rewards = np.zeros((T, E))

    for t in range(T):
        obs = np.stack([local_observation(sim, spec, price_scale) for sim in sims])
        actions, logprobs, _ = _select_actions(policy, obs, rng, greedy=False)
        values_t = mlp_forward(value, obs)[0][:, 0]
        all_obs[t] = obs
        all_actions[t] = actions
        all_logprobs[t] = logprobs
        all_values[t] = values_t
        for e, sim in enumerate(sims):
            order = action_to_order(int(actions[e]), sim.sku.sales_history, sim.t)
            outcome = sim.step(order, int(demand_series[e][t]))
            rewards[t, e] = compute_reward(float(outcome.profits[0]))

    final_obs = np.stack([local_observation(sim, spec, price_scale) for sim in sims])
    all_values[T] = mlp_forward(value, final_obs)[0][:, 0]

    buffer = RolloutBuffer()
    dones = np.zeros(T, dtype=bool)
    for e in range(E):
        buffer.add_stream(
            all_obs[:T, e],
            all_actions[:, e],
            all_logprobs[:, e],
            rewards[:, e],
            all_values[:, e],
            dones,
        )
        if counter is not None:
            counter.count_local(T)
    return buffer


def evaluate(
    policy: ParamSet | None,
    store_cfg: StoreConfig,
    test_window: np.ndarray,
    episodes: int,
    seed: int,
    spec: PolicySpec,
    initial_stock=None,
) -> tuple[float, float, np.ndarray]:
    """Greedy evaluation on a fixed demand window.

    Returns mean/std/per-episode totals of the raw (unscaled) store profit.
    ``policy=None`` evaluates the uniform-random policy.  No samples are
    counted: evaluation is free.
    """
    T, n = test_window.shape
    rng = np.random.default_rng(seed)
    totals = np.zeros(episodes)
    price_scale = max_price(store_cfg)
    for e in range(episodes):
        env = StoreSim(store_cfg)
        env.reset(seed + e, initial_stock)
        total = 0.0
        for t in range(T):
            obs = joint_observations(env, spec, price_scale)
            actions, _, _ = _select_actions(policy, obs, rng, greedy=policy is not None)
            state = env.state
            orders = np.array(
                [
                    action_to_order(int(actions[i]), state.skus[i].sales_history, state.t)
                    for i in range(n)
                ],
                dtype=np.int64,
            )
            outcome = env.step(orders, test_window[t])
            total += float(outcome.profits.sum())
        totals[e] = total
    return float(totals.mean()), float(totals.std()), totals
