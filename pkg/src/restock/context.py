"""Per-agent occupancy extraction, the recurrent predictor, and augmentation.

The complement trajectory for agent ``i`` is obtained by subtracting the
agent's own stock/afterstate/arrivals from the store totals of a recorded
joint episode.  A small LSTM can be fit to the occupancy series and used to
regenerate trajectory items, either instead of or mixed with plain Gaussian
perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .local import ContextTrajectory
from .nets import ParamSet, adam_update, init_lstm, lstm_backward, lstm_forward

AUGMENT_MODES = ("none", "noise", "predictor", "mixed")


@dataclass(frozen=True)
class ContextModelConfig:
    """Training setup for the occupancy predictor."""

    window: int = 8
    hidden: int = 64
    minibatches: int = 300
    batch_size: int = 16
    lr: float = 0.01

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError("context_model.window: must be >= 1")
        if self.hidden < 1 or self.minibatches < 0 or self.batch_size < 1:
            raise ConfigurationError("context_model: sizes must be positive")
        if self.lr <= 0:
            raise ConfigurationError("context_model.lr: must be > 0")


@dataclass(frozen=True)
class AugmentSpec:
    """How to perturb context trajectories before local training."""

    mode: str = "none"
    p_aug: float = 0.0
    noise_scale: float = 0.05  # Gaussian std as a fraction of capacity

    def __post_init__(self):
        if self.mode not in AUGMENT_MODES:
            raise ConfigurationError(f"augment.mode: must be one of {AUGMENT_MODES}")
        if not 0.0 <= self.p_aug <= 1.0:
            raise ConfigurationError("augment.p_aug: must lie in [0, 1]")
        if self.noise_scale < 0:
            raise ConfigurationError("augment.noise_scale: must be >= 0")


def extract_context(record, agent: int) -> ContextTrajectory:
    """Complement occupancy for one agent from a recorded joint episode.

    A record of ``T`` steps yields ``T + 1`` points: point ``t`` carries the
    others' previous-step afterstate, their stock at the start of step ``t``,
    and their arrivals landing at the end of step ``t`` (zero for the final,
    never-stepped point).
    """
    T = record.steps
    stock_c = record.stocks.sum(axis=1) - record.stocks[:, agent]
    after_c = record.afterstates.sum(axis=1) - record.afterstates[:, agent]
    arr_c = record.arrivals.sum(axis=1) - record.arrivals[:, agent]
    final_c = float(record.final_stocks.sum() - record.final_stocks[agent])

    hat_prev = np.empty(T + 1)
    hat_prev[0] = stock_c[0]  # nothing has moved yet, afterstate == stock
    hat_prev[1:] = after_c
    dot = np.empty(T + 1)
    dot[:T] = stock_c
    dot[T] = final_c
    others_arrivals = np.zeros(T + 1)
    others_arrivals[:T] = arr_c
    return ContextTrajectory(hat_prev=hat_prev, dot=dot, others_arrivals=others_arrivals)


@dataclass
class ContextPredictor:
    """Trained occupancy model plus the scaling it was trained with."""

    params: ParamSet
    window: int
    scale: float
    ceiling: float
    final_mse: float = float("nan")


def train_context_model(
    trajectories,
    cfg: ContextModelConfig,
    capacity: int,
    rng: np.random.Generator,
    warm_start: "ContextPredictor | None" = None,
) -> ContextPredictor:
    """Fit the LSTM to predict the next occupancy value from a short window.

    Training pairs are all length-``window`` subsequences of the occupancy
    series, scaled by 1/capacity, against the following value.  Passing
    ``warm_start`` continues training an existing predictor instead of
    starting from fresh parameters.
    """
    windows = []
    targets = []
    scale = float(capacity)
    for traj in trajectories:
        series = np.asarray(traj.dot, dtype=np.float64) / scale
        for start in range(len(series) - cfg.window):
            windows.append(series[start : start + cfg.window])
            targets.append(series[start + cfg.window])
    if not windows:
        raise ConfigurationError(
            f"context model: need at least one trajectory longer than {cfg.window} points"
        )
    windows = np.asarray(windows)
    targets = np.asarray(targets)

    if warm_start is not None:
        params = warm_start.params
    else:
        params = init_lstm(1, cfg.hidden, 1, rng)
    mse = float("nan")
    for _ in range(cfg.minibatches):
        pick = rng.integers(0, len(windows), size=min(cfg.batch_size, len(windows)))
        grad = np.zeros_like(params.values)
        mse = 0.0
        for j in pick:
            ys, cache = lstm_forward(params, windows[j][:, None])
            err = ys[-1, 0] - targets[j]
            mse += err * err
            dys = np.zeros_like(ys)
            dys[-1, 0] = 2.0 * err / len(pick)
            grad += lstm_backward(params, cache, dys)
        mse /= len(pick)
        adam_update(params, grad, lr=cfg.lr)
    return ContextPredictor(
        params=params, window=cfg.window, scale=scale, ceiling=scale, final_mse=mse
    )


def context_model_mse(predictor: ContextPredictor, trajectories) -> float:
    """Mean squared next-value error over every window in the trajectories."""
    total = 0.0
    count = 0
    for traj in trajectories:
        series = np.asarray(traj.dot, dtype=np.float64) / predictor.scale
        for start in range(len(series) - predictor.window):
            ys, _ = lstm_forward(predictor.params, series[start : start + predictor.window][:, None])
            err = ys[-1, 0] - series[start + predictor.window]
            total += err * err
            count += 1
    if count == 0:
        raise ConfigurationError("context model: no evaluation windows")
    return total / count


def predict_next(predictor: ContextPredictor, window: np.ndarray) -> float:
    """Next occupancy value given the last ``predictor.window`` raw values."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (predictor.window,):
        raise ValueError(f"predict_next: window must have {predictor.window} values")
    ys, _ = lstm_forward(predictor.params, (window / predictor.scale)[:, None])
    raw = ys[-1, 0] * predictor.scale
    return float(np.clip(raw, 0.0, predictor.ceiling))


def augment(
    traj: ContextTrajectory,
    spec: AugmentSpec,
    predictor: ContextPredictor | None,
    rng: np.random.Generator,
    capacity: int,
) -> ContextTrajectory:
    """Independently replace trajectory items with probability ``p_aug``.

    One perturbation per item is applied to the stock and afterstate fields
    jointly, keeping them consistent; arrivals are rescaled proportionally.
    Predictor replacement reads the already-augmented preceding window, so
    ``p_aug = 1`` regenerates the whole tail autoregressively.
    """
    if spec.mode == "none" or spec.p_aug == 0.0:
        return traj
    if spec.mode in ("predictor", "mixed") and predictor is None:
        raise ConfigurationError(f"augment: mode {spec.mode!r} needs a trained predictor")

    hat = traj.hat_prev.copy()
    dot = traj.dot.copy()
    arr = traj.others_arrivals.copy()
    window = predictor.window if predictor is not None else 0
    for t in range(len(dot)):
        if rng.random() >= spec.p_aug:
            continue
        mode = spec.mode
        if mode == "mixed":
            mode = "noise" if rng.random() < 0.5 else "predictor"
        if mode == "predictor" and t < window:
            if spec.mode == "predictor":
                continue  # not enough history; leave the item alone
            mode = "noise"
        old = dot[t]
        if mode == "noise":
            new = max(0.0, np.round(old + rng.normal(0.0, spec.noise_scale * capacity)))
        else:
            new = predict_next(predictor, dot[t - window : t])
        delta = new - old
        dot[t] = new
        hat[t] = max(0.0, hat[t] + delta)
        if old > 0:
            arr[t] = max(0.0, arr[t] * new / old)
    return ContextTrajectory(hat_prev=hat, dot=dot, others_arrivals=arr)
