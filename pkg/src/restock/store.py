"""Joint multi-SKU store simulator.

All SKUs share one storage capacity. Each step runs a fixed event order:
order placement (with sampled lead time), sales against demand, overnight
arrivals, proportional overflow discard, stock update, profit accounting.

Two overflow modes are supported:

* ``paper``  -- the discard coefficient divides the capacity excess by the
  total afterstate and is applied to arrivals only.  Because stock retained
  from the previous day is never discarded, the summed stock can still end
  up above capacity; the simulator counts those violations.
* ``strict`` -- the excess is divided by the total arrivals (capped at 1),
  which guarantees the capacity constraint holds after every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

MAX_LEAD_TIME = 14
HISTORY_LEN = 21

OVERFLOW_MODES = ("paper", "strict")


@dataclass(frozen=True)
class LeadTimeSpec:
    """Lead time distribution for one SKU.

    ``constant`` always returns ``value`` steps.  ``geometric`` draws from a
    geometric distribution with mean ``value`` (discrete analogue of an
    exponential), truncated to [1, max_lead].
    """

    kind: str = "constant"
    value: float = 2.0
    max_lead: int = MAX_LEAD_TIME

    def __post_init__(self):
        if self.kind not in ("constant", "geometric"):
            raise ConfigurationError(f"lead_time.kind: unknown kind {self.kind!r}")
        if self.value < 1:
            raise ConfigurationError("lead_time.value: must be >= 1")
        if self.kind == "constant" and self.value != int(self.value):
            raise ConfigurationError("lead_time.value: constant lead must be an integer")
        if not 1 <= self.value <= self.max_lead:
            raise ConfigurationError(
                f"lead_time.value: must lie in [1, {self.max_lead}]"
            )

    def sample(self, rng: np.random.Generator) -> int:
        if self.kind == "constant":
            return int(self.value)
        return int(min(rng.geometric(1.0 / self.value), self.max_lead))


@dataclass(frozen=True)
class SkuConfig:
    """Prices and costs for one SKU."""

    price: float
    cost: float
    order_cost: float = 1.0
    holding_cost: float = 0.05
    lead_time: LeadTimeSpec = field(default_factory=LeadTimeSpec)

    def __post_init__(self):
        if self.price <= 0:
            raise ConfigurationError("sku.price: must be > 0")
        if self.cost < 0 or self.order_cost < 0 or self.holding_cost < 0:
            raise ConfigurationError("sku costs: must be >= 0")


@dataclass(frozen=True)
class StoreConfig:
    """Joint store: n SKUs sharing ``capacity`` units of storage."""

    capacity: int
    skus: tuple[SkuConfig, ...]
    overflow_mode: str = "strict"
    horizon: int = 100

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("store.skus: need at least one SKU")
        if self.capacity <= 0:
            raise ConfigurationError("store.capacity: must be > 0")
        if self.overflow_mode not in OVERFLOW_MODES:
            raise ConfigurationError(
                f"store.overflow_mode: must be one of {OVERFLOW_MODES}"
            )

    @property
    def n(self) -> int:
        return len(self.skus)

    def default_initial_stock(self) -> np.ndarray:
        return np.full(self.n, self.capacity // (2 * self.n), dtype=np.int64)


@dataclass
class SkuState:
    """Mutable per-SKU state inside a running simulation."""

    in_stock: int
    pipeline: list[tuple[int, int]] = field(default_factory=list)
    order_history: np.ndarray = field(
        default_factory=lambda: np.zeros(HISTORY_LEN, dtype=np.int64)
    )
    sales_history: np.ndarray = field(
        default_factory=lambda: np.zeros(HISTORY_LEN, dtype=np.int64)
    )

    @property
    def in_transit(self) -> int:
        return sum(q for _, q in self.pipeline)


@dataclass
class StoreState:
    """Full simulator state: clock, per-SKU states, per-SKU RNG streams."""

    t: int
    skus: list[SkuState]
    rngs: list[np.random.Generator]
    last_rho: float = 0.0
    last_arrivals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    last_afterstates: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    capacity_violations: int = 0

    def stocks(self) -> np.ndarray:
        return np.array([s.in_stock for s in self.skus], dtype=np.int64)

    def in_transit(self) -> np.ndarray:
        return np.array([s.in_transit for s in self.skus], dtype=np.int64)

    def snapshot(self) -> tuple:
        """Hashable full-state view, used to assert determinism in tests."""
        return (
            self.t,
            tuple(
                (
                    s.in_stock,
                    tuple(s.pipeline),
                    tuple(s.order_history.tolist()),
                    tuple(s.sales_history.tolist()),
                )
                for s in self.skus
            ),
            tuple(repr(r.bit_generator.state) for r in self.rngs),
            self.last_rho,
            tuple(self.last_arrivals.tolist()),
            tuple(self.last_afterstates.tolist()),
        )


@dataclass(frozen=True)
class StepOutcome:
    """Everything observable about one completed step."""

    sales: np.ndarray
    arrivals: np.ndarray
    afterstates: np.ndarray
    discarded: np.ndarray
    profits: np.ndarray
    lead_times: np.ndarray
    rho: float
    total_stock: int
    total_afterstate: int


def compute_overflow_ratio(
    total_afterstate: int, total_arrivals: int, capacity: int, mode: str
) -> float:
    """Fraction of arriving units to discard when the store would overflow."""
    excess = max(total_afterstate - capacity, 0)
    if mode == "paper":
        if total_afterstate == 0:
            return 0.0
        return excess / total_afterstate
    if mode == "strict":
        if total_arrivals == 0:
            return 0.0
        return min(1.0, excess / total_arrivals)
    raise ConfigurationError(f"overflow_mode: must be one of {OVERFLOW_MODES}")


def _kept_after_discard(
    arrivals: np.ndarray, total_afterstate: int, total_arrivals: int, capacity: int, mode: str
) -> np.ndarray:
    # Exact integer form of floor((1 - rho) * A): avoids float floor artifacts.
    excess = max(total_afterstate - capacity, 0)
    if excess == 0:
        return arrivals.copy()
    if mode == "paper":
        denom = total_afterstate
    else:
        denom = total_arrivals
        if excess >= denom:
            return np.zeros_like(arrivals)
    return (arrivals * (denom - excess)) // denom


def compute_profit(cfg: SkuConfig, sales: int, order: int, in_stock: int) -> float:
    """Immediate profit: revenue minus procurement, fixed order fee, and holding."""
    if sales < 0 or order < 0 or in_stock < 0:
        raise ValueError("compute_profit: inputs must be >= 0")
    fee = cfg.order_cost if order > 0 else 0.0
    return cfg.price * sales - cfg.cost * order - fee - cfg.holding_cost * in_stock


class StoreSim:
    """Joint simulator for one store.

    Single-threaded; every instance owns its state and RNG streams, so
    independent instances can run in parallel without sharing anything.
    """

    def __init__(self, config: StoreConfig):
        self.config = config
        self.state: StoreState | None = None

    def reset(self, seed: int, initial_stock=None) -> StoreState:
        cfg = self.config
        if initial_stock is None:
            initial_stock = cfg.default_initial_stock()
        initial_stock = np.asarray(initial_stock, dtype=np.int64)
        if initial_stock.shape != (cfg.n,):
            raise ConfigurationError(
                f"initial_stock: expected {cfg.n} entries, got {initial_stock.shape}"
            )
        if np.any(initial_stock < 0):
            raise ConfigurationError("initial_stock: entries must be >= 0")
        if int(initial_stock.sum()) > cfg.capacity:
            raise ConfigurationError(
                f"initial_stock: total {int(initial_stock.sum())} exceeds capacity {cfg.capacity}"
            )
        self.state = StoreState(
            t=0,
            skus=[SkuState(in_stock=int(s)) for s in initial_stock],
            rngs=[np.random.default_rng([seed, i]) for i in range(cfg.n)],
            last_arrivals=np.zeros(cfg.n, dtype=np.int64),
            last_afterstates=initial_stock.copy(),
        )
        return self.state

    def step(self, orders, demands) -> StepOutcome:
        state = self.state
        if state is None:
            raise RuntimeError("step before reset")
        cfg = self.config
        orders = np.asarray(orders, dtype=np.int64)
        demands = np.asarray(demands, dtype=np.int64)
        if orders.shape != (cfg.n,) or demands.shape != (cfg.n,):
            raise ValueError(f"orders/demands must have length {cfg.n}")
        if np.any(orders < 0) or np.any(demands < 0):
            raise ValueError("orders and demands must be >= 0")

        t = state.t
        stocks = state.stocks()
        total_stock = int(stocks.sum())

        # 1. place orders; lead time drawn per order at placement time
        lead_times = np.zeros(cfg.n, dtype=np.int64)
        for i, sku in enumerate(state.skus):
            if orders[i] > 0:
                lead = cfg.skus[i].lead_time.sample(state.rngs[i])
                lead_times[i] = lead
                sku.pipeline.append((t + lead, int(orders[i])))

        # 2. sales are capped by what is on the shelf
        sales = np.minimum(demands, stocks)

        # 3. orders due overnight leave the pipeline
        arrivals = np.zeros(cfg.n, dtype=np.int64)
        for i, sku in enumerate(state.skus):
            due = [(a, q) for a, q in sku.pipeline if a == t + 1]
            if due:
                arrivals[i] = sum(q for _, q in due)
                sku.pipeline = [(a, q) for a, q in sku.pipeline if a != t + 1]

        # 4-6. afterstate, overflow ratio, discard, stock update
        afterstates = stocks - sales + arrivals
        total_afterstate = int(afterstates.sum())
        total_arrivals = int(arrivals.sum())
        rho = compute_overflow_ratio(
            total_afterstate, total_arrivals, cfg.capacity, cfg.overflow_mode
        )
        kept = _kept_after_discard(
            arrivals, total_afterstate, total_arrivals, cfg.capacity, cfg.overflow_mode
        )
        new_stocks = stocks - sales + kept

        # 7. profit on this step's orders/sales; holding charged on opening stock
        profits = np.array(
            [
                compute_profit(cfg.skus[i], int(sales[i]), int(orders[i]), int(stocks[i]))
                for i in range(cfg.n)
            ]
        )

        # 8. rotate histories, advance the clock
        for i, sku in enumerate(state.skus):
            sku.order_history[:-1] = sku.order_history[1:]
            sku.order_history[-1] = orders[i]
            sku.sales_history[:-1] = sku.sales_history[1:]
            sku.sales_history[-1] = sales[i]
            sku.in_stock = int(new_stocks[i])

        state.t = t + 1
        state.last_rho = rho
        state.last_arrivals = arrivals
        state.last_afterstates = afterstates
        if int(new_stocks.sum()) > cfg.capacity:
            state.capacity_violations += 1

        return StepOutcome(
            sales=sales,
            arrivals=arrivals,
            afterstates=afterstates,
            discarded=arrivals - kept,
            profits=profits,
            lead_times=lead_times,
            rho=rho,
            total_stock=total_stock,
            total_afterstate=total_afterstate,
        )
