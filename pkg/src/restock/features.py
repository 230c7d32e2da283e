"""Observation vectors, the discrete order-multiplier table, and reward scaling.

The observation layout is fixed at 51 entries (see README for the index
table): capacity, own stock and transit, 21-day order and sales histories,
sales std, unit price and cost, and three store-wide context features
(total storage, total unloading, total excess).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .store import HISTORY_LEN, SkuConfig, SkuState, StoreConfig

ACTION_MULTIPLIERS = (
    0.0, 1 / 3, 2 / 3, 1.0, 4 / 3, 5 / 3, 2.0, 5 / 2, 3.0, 4.0, 5.0, 6.0, 7.0, 9.0, 12.0
)
N_ACTIONS = len(ACTION_MULTIPLIERS)

SALES_MEAN_WINDOW = 14

OBS_LEN = 3 + 2 * HISTORY_LEN + 3 + 3  # capacity/stock/transit, histories, std/p/q, context


@dataclass(frozen=True)
class PolicySpec:
    """Binds agents to simulators: action table plus observation options."""

    context_features: bool = True
    normalize: bool = True
    n_actions: int = N_ACTIONS
    obs_len: int = OBS_LEN


def build_observation(
    sku: SkuState,
    sku_cfg: SkuConfig,
    store_cfg: StoreConfig,
    totals: tuple[float, float, float],
    *,
    context_features: bool = True,
    normalize: bool = False,
    price_scale: float | None = None,
) -> np.ndarray:
    """Assemble the 51-entry feature vector for one agent.

    ``totals`` is (total storage, total unloading, total excess) across the
    whole store; passing ``context_features=False`` zeroes those three slots
    while keeping the layout fixed.  Normalization divides unit counts by
    the capacity and prices by ``price_scale`` (defaults to this SKU's price).
    """
    sales_hist = sku.sales_history.astype(np.float64)
    obs = np.empty(OBS_LEN)
    obs[0] = store_cfg.capacity
    obs[1] = sku.in_stock
    obs[2] = sku.in_transit
    obs[3 : 3 + HISTORY_LEN] = sku.order_history
    obs[3 + HISTORY_LEN : 3 + 2 * HISTORY_LEN] = sales_hist
    obs[45] = sales_hist.std()
    obs[46] = sku_cfg.price
    obs[47] = sku_cfg.cost
    if context_features:
        obs[48:51] = totals
    else:
        obs[48:51] = 0.0
    if normalize:
        scale = float(store_cfg.capacity)
        obs[0] = 1.0
        obs[1:46] /= scale
        ps = price_scale if price_scale is not None else sku_cfg.price
        obs[46:48] /= ps
        obs[48:51] /= scale
    return obs


def action_to_order(action_index: int, sales_history: np.ndarray, steps_elapsed: int) -> int:
    """Map a discrete action to order units.

    The multiplier is applied to the mean of the most recent two weeks of
    sales (fewer if the episode is younger than two weeks) and rounded
    half-up to an integer.
    """
    if not 0 <= action_index < N_ACTIONS:
        raise ValueError(f"action index {action_index} out of range [0, {N_ACTIONS})")
    window = min(SALES_MEAN_WINDOW, steps_elapsed)
    if window == 0:
        return 0
    mean_sales = float(np.mean(sales_history[-window:]))
    return int(math.floor(ACTION_MULTIPLIERS[action_index] * mean_sales + 0.5))


REWARD_SCALE = 1e6


def compute_reward(profit: float) -> float:
    """Per-agent reward: raw money scaled down by 1e6."""
    return profit / REWARD_SCALE


def team_reward(profits) -> float:
    """Shared reward: the store-wide profit, scaled like the individual one."""
    return float(np.sum(profits)) / REWARD_SCALE
