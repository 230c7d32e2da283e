"""Base-stock and (s,S) replenishment baselines fitted by exhaustive search.

Fitting replays a demand series through single-SKU dynamics (no shared
capacity, no order fee) and picks the parameter with the best total profit.
Because the replay is deterministic for a fixed parameter, sweeping a
bounded integer grid solves the same objective the paper's MIP would.
Execution then runs the fitted rules inside the joint simulator, where the
capacity constraint and overflow discards do apply.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .store import SkuConfig, StoreConfig, StoreSim


@dataclass(frozen=True)
class BaseStockParams:
    """Order-up-to level plus the execution-time knobs."""

    base_level: int
    utilization: float = 1.0  # multiplies the capacity cap at execution
    review_interval: int = 1  # order only every this many steps

    def __post_init__(self):
        if self.base_level < 0:
            raise ConfigurationError("base_stock.base_level: must be >= 0")
        if self.utilization < 1.0:
            raise ConfigurationError("base_stock.utilization: must be >= 1")
        if self.review_interval < 1:
            raise ConfigurationError("base_stock.review_interval: must be >= 1")


@dataclass(frozen=True)
class SSParams:
    """Reorder point s and order-up-to level S."""

    reorder_point: int
    order_up_to: int

    def __post_init__(self):
        if not 0 <= self.reorder_point <= self.order_up_to:
            raise ConfigurationError("ss_policy: need 0 <= s <= S")


def simulate_policy_profit(
    demands: np.ndarray,
    cfg: SkuConfig,
    lead: int,
    order_rule,
    initial_stock: int = 0,
) -> float:
    """Replay one SKU under an order rule; returns the total fitting profit.

    ``order_rule(t, on_hand, in_transit)`` is called at the start of each
    day, before that day's arrival lands.  An order placed on day t becomes
    sellable on day t + lead (same day for lead 0).  Holding cost is charged
    on the end-of-day stock, after sales.
    """
    demands = np.asarray(demands, dtype=np.int64)
    if demands.size == 0:
        raise ConfigurationError("simulate_policy_profit: empty demand series")
    if lead < 0:
        raise ConfigurationError("simulate_policy_profit: lead must be >= 0")
    on_hand = int(initial_stock)
    in_transit = 0
    ring = [0] * max(lead, 1)
    total = 0.0
    for t, d in enumerate(demands):
        order = int(order_rule(t, on_hand, in_transit))
        if order < 0:
            raise ValueError("order rule produced a negative order")
        if lead == 0:
            on_hand += order
        else:
            slot = t % lead
            arrival = ring[slot]
            ring[slot] = order
            on_hand += arrival
            in_transit += order - arrival
        sales = min(int(d), on_hand)
        on_hand -= sales
        total += cfg.price * sales - cfg.cost * order - cfg.holding_cost * on_hand
    return total


def base_stock_rule(level: int):
    def rule(t, on_hand, in_transit):
        return max(0, level - on_hand - in_transit)

    return rule


def ss_rule(reorder_point: int, order_up_to: int):
    def rule(t, on_hand, in_transit):
        position = on_hand + in_transit
        return order_up_to - position if position <= reorder_point else 0

    return rule


def _sweep_profits(demands, cfg, lead, kind, s_vals, S_vals, initial_stock=0):
    # Vectorized twin of simulate_policy_profit across all candidates at once;
    # identical per-step arithmetic so the totals match the scalar path bit
    # for bit.
    demands = np.asarray(demands, dtype=np.int64)
    K = len(S_vals)
    on_hand = np.full(K, int(initial_stock), dtype=np.int64)
    in_transit = np.zeros(K, dtype=np.int64)
    ring = np.zeros((max(lead, 1), K), dtype=np.int64)
    total = np.zeros(K)
    for t, d in enumerate(demands):
        position = on_hand + in_transit
        if kind == "base_stock":
            orders = np.maximum(0, S_vals - position)
        else:
            orders = np.where(position <= s_vals, S_vals - position, 0)
        if lead == 0:
            on_hand = on_hand + orders
        else:
            slot = t % lead
            arrival = ring[slot].copy()
            ring[slot] = orders
            on_hand = on_hand + arrival
            in_transit = in_transit + orders - arrival
        sales = np.minimum(int(d), on_hand)
        on_hand = on_hand - sales
        total += cfg.price * sales - cfg.cost * orders - cfg.holding_cost * on_hand
    return total


def default_level_grid(demands: np.ndarray, lead: int) -> np.ndarray:
    top = int(np.max(demands, initial=0)) * (lead + 2) * 4
    return np.arange(0, top + 1, dtype=np.int64)


def fit_base_stock(
    demands: np.ndarray,
    cfg: SkuConfig,
    lead: int,
    level_grid: np.ndarray | None = None,
    utilization: float = 1.0,
    review_interval: int = 1,
) -> tuple[BaseStockParams, float]:
    """Exhaustive search for the profit-maximizing order-up-to level.

    Ties break toward the smaller level.  Returns the fitted parameters and
    the fitting profit.
    """
    if level_grid is None:
        level_grid = default_level_grid(demands, lead)
    level_grid = np.unique(np.asarray(level_grid, dtype=np.int64))
    if level_grid.size == 0:
        raise ConfigurationError("fit_base_stock: empty level grid")
    profits = _sweep_profits(demands, cfg, lead, "base_stock", None, level_grid)
    best = int(np.argmax(profits))  # first max = smallest level, grid is sorted
    return (
        BaseStockParams(
            base_level=int(level_grid[best]),
            utilization=utilization,
            review_interval=review_interval,
        ),
        float(profits[best]),
    )


def fit_ss_policy(
    demands: np.ndarray,
    cfg: SkuConfig,
    lead: int,
    level_grid: np.ndarray | None = None,
) -> tuple[SSParams, float]:
    """Exhaustive search over the triangle s <= S of the level grid.

    Ties break toward smaller S, then smaller s.
    """
    if level_grid is None:
        level_grid = default_level_grid(demands, lead)
    level_grid = np.unique(np.asarray(level_grid, dtype=np.int64))
    if level_grid.size == 0:
        raise ConfigurationError("fit_ss_policy: empty level grid")
    pairs_s = []
    pairs_S = []
    for S in level_grid:
        for s in level_grid[level_grid <= S]:
            pairs_s.append(s)
            pairs_S.append(S)
    s_vals = np.asarray(pairs_s, dtype=np.int64)
    S_vals = np.asarray(pairs_S, dtype=np.int64)
    profits = _sweep_profits(demands, cfg, lead, "ss", s_vals, S_vals)
    # candidates are ordered by (S, s); first max honours the tie-break
    best = int(np.argmax(profits))
    return (
        SSParams(reorder_point=int(s_vals[best]), order_up_to=int(S_vals[best])),
        float(profits[best]),
    )


def base_stock_order(
    params: BaseStockParams,
    on_hand: int,
    in_transit: int,
    total_position: int,
    capacity: int,
    t: int,
) -> int:
    """Execution-time order: level gap, capped by store-wide slack, gated by
    the review interval."""
    if t % params.review_interval != 0:
        return 0
    order = max(0, params.base_level - on_hand - in_transit)
    slack = params.utilization * capacity - total_position
    return int(max(0, min(order, math.floor(slack))))


def effective_lead(cfg: SkuConfig) -> int:
    """Constant lead used for fitting: the (rounded) mean of the real one."""
    return max(1, round(cfg.lead_time.value))


@dataclass
class BaselineRun:
    """Outcome of executing a fitted policy in the joint simulator."""

    profit: float
    params: list
    fit_profits: list[float]
    discarded_units: int
    discard_events: int
    utilization: float = 1.0
    review_interval: int = 1


def _execute_joint(store_cfg: StoreConfig, demands: np.ndarray, seed: int, order_fn) -> tuple[float, int, int]:
    env = StoreSim(store_cfg)
    env.reset(seed)
    total = 0.0
    discarded = 0
    events = 0
    T, n = demands.shape
    for t in range(T):
        state = env.state
        stocks = state.stocks()
        transits = state.in_transit()
        total_position = int(stocks.sum() + transits.sum())
        orders = np.array(
            [order_fn(i, t, int(stocks[i]), int(transits[i]), total_position) for i in range(n)],
            dtype=np.int64,
        )
        outcome = env.step(orders, demands[t])
        total += float(outcome.profits.sum())
        d = int(outcome.discarded.sum())
        discarded += d
        events += d > 0
    return total, discarded, events


def _fit_levels(kind, demand_cols, store_cfg, level_grid=None):
    fitted = []
    fit_profits = []
    for i, cfg in enumerate(store_cfg.skus):
        lead = effective_lead(cfg)
        if kind == "base_stock":
            params, profit = fit_base_stock(demand_cols[:, i], cfg, lead, level_grid)
        else:
            params, profit = fit_ss_policy(demand_cols[:, i], cfg, lead, level_grid)
        fitted.append(params)
        fit_profits.append(profit)
    return fitted, fit_profits


def run_baseline(
    kind: str,
    variant: str,
    train_demands: np.ndarray,
    test_demands: np.ndarray,
    store_cfg: StoreConfig,
    seed: int,
    v_grid=(1.0, 1.25, 1.5),
    tau_grid=(1, 3, 7),
    refit_every: int = 30,
    refit_window: int = 90,
    level_grid=None,
) -> BaselineRun:
    """Fit per the variant's data source and execute on the test window.

    ``static`` fits once on the training series, ``oracle`` fits on the test
    series itself, and ``dynamic`` refits every ``refit_every`` steps on a
    trailing window of realized demand.  For base-stock policies the
    (utilization, review-interval) pair is grid searched on executed profit.
    """
    if kind not in ("base_stock", "ss"):
        raise ConfigurationError(f"baseline kind: unknown {kind!r}")
    if variant not in ("static", "dynamic", "oracle"):
        raise ConfigurationError(f"baseline variant: unknown {variant!r}")

    fit_source = test_demands if variant == "oracle" else train_demands
    fitted, fit_profits = _fit_levels(kind, fit_source, store_cfg, level_grid)

    schedules = None
    if variant == "dynamic":
        # Refit points are known upfront: demand replay is deterministic.
        history = np.concatenate([train_demands, test_demands])
        offset = train_demands.shape[0]
        schedules = {}
        for t in range(0, test_demands.shape[0], refit_every):
            lo = max(0, offset + t - refit_window)
            window = history[lo : offset + t]
            if window.shape[0] == 0:
                window = train_demands
            schedules[t] = _fit_levels(kind, window, store_cfg, level_grid)[0]

    def make_order_fn(params_list, v, tau):
        if kind == "base_stock":
            execs = [
                BaseStockParams(p.base_level, utilization=v, review_interval=tau)
                for p in params_list
            ]

            def order_fn(i, t, on_hand, transit, total_position):
                p = execs[i]
                if schedules is not None:
                    due = (t // refit_every) * refit_every
                    p = BaseStockParams(
                        schedules[due][i].base_level, utilization=v, review_interval=tau
                    )
                return base_stock_order(
                    p, on_hand, transit, total_position, store_cfg.capacity, t
                )

        else:

            def order_fn(i, t, on_hand, transit, total_position):
                p = params_list[i]
                if schedules is not None:
                    due = (t // refit_every) * refit_every
                    p = schedules[due][i]
                rule = ss_rule(p.reorder_point, p.order_up_to)
                return rule(t, on_hand, transit)

        return order_fn

    if kind == "base_stock":
        best = None
        for v in v_grid:
            for tau in tau_grid:
                profit, discarded, events = _execute_joint(
                    store_cfg, test_demands, seed, make_order_fn(fitted, v, tau)
                )
                if best is None or profit > best[0]:
                    best = (profit, discarded, events, v, tau)
        profit, discarded, events, v, tau = best
        return BaselineRun(
            profit=profit,
            params=fitted,
            fit_profits=fit_profits,
            discarded_units=discarded,
            discard_events=events,
            utilization=v,
            review_interval=tau,
        )

    profit, discarded, events = _execute_joint(
        store_cfg, test_demands, seed, make_order_fn(fitted, 1.0, 1)
    )
    return BaselineRun(
        profit=profit,
        params=fitted,
        fit_profits=fit_profits,
        discarded_units=discarded,
        discard_events=events,
    )


def run_base_stock(variant, train_demands, test_demands, store_cfg, seed, **kwargs) -> BaselineRun:
    return run_baseline("base_stock", variant, train_demands, test_demands, store_cfg, seed, **kwargs)


def run_ss_policy(variant, train_demands, test_demands, store_cfg, seed, **kwargs) -> BaselineRun:
    return run_baseline("ss", variant, train_demands, test_demands, store_cfg, seed, **kwargs)


def save_baseline_csv(run: BaselineRun, kind: str, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if kind == "base_stock":
            writer.writerow(["sku_id", "base_level", "v", "tau", "fit_profit"])
            for i, (p, fp) in enumerate(zip(run.params, run.fit_profits)):
                writer.writerow([i, p.base_level, run.utilization, run.review_interval, repr(fp)])
        else:
            writer.writerow(["sku_id", "s", "S", "v", "tau", "fit_profit"])
            for i, (p, fp) in enumerate(zip(run.params, run.fit_profits)):
                writer.writerow(
                    [i, p.reorder_point, p.order_up_to, run.utilization, run.review_interval, repr(fp)]
                )
