"""Advantage estimation and clipped-surrogate policy/value losses.

All losses return both the scalar loss and its exact gradient w.r.t. the
flat parameter vector of the network involved, so updates go straight into
:func:`restock.nets.adam_update` and the gradients can be checked against
finite differences.
"""

from __future__ import annotations

import numpy as np

from .errors import TrainingError
from .nets import ParamSet, adam_update, log_softmax, mlp_backward, mlp_forward


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
    horizon: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially weighted advantage over TD errors, plus return targets.

    ``values`` must carry one extra entry (the bootstrap value).  A finite
    ``horizon`` truncates the weighted sum after that many TD terms; episode
    terminations cut it regardless.  Returns (advantages, returns-to-go).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    T = len(rewards)
    if len(values) != T + 1:
        raise ValueError("compute_gae: values must have len(rewards) + 1 entries")
    if len(dones) != T:
        raise ValueError("compute_gae: dones must match rewards")
    cont = 1.0 - dones.astype(np.float64)
    deltas = rewards + gamma * values[1:] * cont - values[:-1]
    adv = np.empty(T)
    if horizon is None or horizon >= T - 1:
        acc = 0.0
        for t in range(T - 1, -1, -1):
            acc = deltas[t] + gamma * lam * cont[t] * acc
            adv[t] = acc
    else:
        decay = gamma * lam
        for t in range(T):
            acc = 0.0
            coef = 1.0
            for l in range(horizon + 1):
                if t + l >= T:
                    break
                acc += coef * deltas[t + l]
                if dones[t + l]:
                    break
                coef *= decay
            adv[t] = acc
    return adv, adv + values[:-1]


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_actor_loss(
    policy: ParamSet,
    obs: np.ndarray,
    actions: np.ndarray,
    old_logprobs: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
):
    """Clipped-surrogate loss (negated objective) and its parameter gradient."""
    logits, cache = mlp_forward(policy, obs)
    logp_all = log_softmax(logits)
    B = logits.shape[0]
    idx = np.arange(B)
    actions = np.asarray(actions, dtype=np.int64)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - old_logprobs)
    if not np.all(np.isfinite(ratio)):
        raise TrainingError("ppo_actor_loss: non-finite probability ratio")
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    objective = np.minimum(surr1, surr2)
    loss = -objective.mean()

    # d(objective_i)/d(logp_i) = ratio_i * A_i when the unclipped branch is
    # active; the clipped branch is flat in the parameters.
    coeff = np.where(surr1 <= surr2, ratio * advantages, 0.0) / B
    probs = np.exp(logp_all)
    dlogits = probs * coeff[:, None]
    dlogits[idx, actions] -= coeff
    grad = mlp_backward(policy, cache, dlogits)
    info = {
        "ratio_mean": float(ratio.mean()),
        "clip_frac": float(np.mean(surr1 > surr2)),
    }
    return loss, grad, info


def ppo_critic_loss(
    value: ParamSet,
    obs: np.ndarray,
    old_values: np.ndarray,
    targets: np.ndarray,
    clip_eps: float,
):
    """Value loss with clipped update, taking the smaller of the two errors."""
    out, cache = mlp_forward(value, obs)
    v = out[:, 0]
    B = len(v)
    clipped = old_values + np.clip(v - old_values, -clip_eps, clip_eps)
    err_raw = (v - targets) ** 2
    err_clip = (clipped - targets) ** 2
    per_sample = np.minimum(err_raw, err_clip)
    loss = per_sample.mean()

    use_raw = err_raw <= err_clip
    in_range = np.abs(v - old_values) < clip_eps
    dv = np.where(use_raw, 2.0 * (v - targets), 2.0 * (clipped - targets) * in_range) / B
    grad = mlp_backward(value, cache, dv[:, None])
    return loss, grad


def policy_entropy(policy: ParamSet, obs: np.ndarray):
    """Mean action-distribution entropy and its parameter gradient."""
    logits, cache = mlp_forward(policy, obs)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    ent = -np.sum(np.where(probs > 0.0, probs * logp, 0.0), axis=1)
    mean_ent = ent.mean()
    B = logits.shape[0]
    dlogits = -probs * (logp + ent[:, None]) / B
    grad = mlp_backward(policy, cache, dlogits)
    return mean_ent, grad


def overall_update(
    policy: ParamSet,
    value: ParamSet,
    *,
    obs: np.ndarray,
    actions: np.ndarray,
    old_logprobs: np.ndarray,
    advantages: np.ndarray,
    old_values: np.ndarray,
    targets: np.ndarray,
    clip_eps: float,
    entropy_coef: float,
    critic_coef: float,
    lr: float,
) -> dict:
    """One combined minibatch step: actor + entropy on the policy net, scaled
    critic loss on the value net, both applied through Adam."""
    actor_loss, actor_grad, info = ppo_actor_loss(
        policy, obs, actions, old_logprobs, advantages, clip_eps
    )
    entropy, ent_grad = policy_entropy(policy, obs)
    critic_loss, critic_grad = ppo_critic_loss(value, obs, old_values, targets, clip_eps)
    adam_update(policy, actor_grad - entropy_coef * ent_grad, lr=lr)
    adam_update(value, critic_coef * critic_grad, lr=lr)
    return {
        "actor_loss": float(actor_loss),
        "critic_loss": float(critic_loss),
        "entropy": float(entropy),
        **info,
    }
