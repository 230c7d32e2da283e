"""Single-SKU simulator driven by a recorded occupancy trajectory.

A local simulator reproduces one agent's slice of the joint store without
running the other agents: the storage occupied by everyone else is read
from a bound :class:`ContextTrajectory` instead of being simulated.  With
the trajectory extracted from a joint rollout and the same order/demand
streams, the local run reproduces that agent's joint trajectory exactly.

Trajectory indexing: ``points[t]`` describes what the agent can see at the
start of step ``t`` (others' stock ``dot`` and their previous-step
afterstate ``hat_prev``) plus others' arrivals landing at the end of step
``t``.  Computing step ``t``'s overflow therefore also reads
``hat_prev`` of point ``t+1``, so a trajectory with ``P`` points supports
``P - 1`` steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EpisodeExhausted
from .store import (
    HISTORY_LEN,
    SkuConfig,
    SkuState,
    StepOutcome,
    StoreConfig,
    compute_overflow_ratio,
    compute_profit,
)


@dataclass(frozen=True)
class ContextTrajectory:
    """Occupancy of the shared storage attributable to the other agents.

    Arrays are float so augmented (perturbed or model-generated) values fit;
    extraction from a joint rollout produces whole numbers.
    """

    hat_prev: np.ndarray
    dot: np.ndarray
    others_arrivals: np.ndarray

    def __post_init__(self):
        n = len(self.hat_prev)
        if len(self.dot) != n or len(self.others_arrivals) != n:
            raise ConfigurationError("context trajectory: field lengths differ")
        for name in ("hat_prev", "dot", "others_arrivals"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ConfigurationError(f"context trajectory: {name} must be finite and >= 0")

    def __len__(self) -> int:
        return len(self.hat_prev)

    @property
    def max_steps(self) -> int:
        return len(self) - 1

    @classmethod
    def zeros(cls, length: int) -> "ContextTrajectory":
        z = np.zeros(length)
        return cls(hat_prev=z.copy(), dot=z.copy(), others_arrivals=z.copy())

    @classmethod
    def constant(cls, length: int, level: float, arrivals: float = 0.0) -> "ContextTrajectory":
        return cls(
            hat_prev=np.full(length, float(level)),
            dot=np.full(length, float(level)),
            others_arrivals=np.full(length, float(arrivals)),
        )


def save_context_csv(traj: ContextTrajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "hat_prev", "dot", "others_arrivals"])
        for t in range(len(traj)):
            writer.writerow(
                [t, repr(traj.hat_prev[t]), repr(traj.dot[t]), repr(traj.others_arrivals[t])]
            )


def load_context_csv(path) -> ContextTrajectory:
    hat, dot, arr = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            hat.append(float(row["hat_prev"]))
            dot.append(float(row["dot"]))
            arr.append(float(row["others_arrivals"]))
    return ContextTrajectory(np.array(hat), np.array(dot), np.array(arr))


def _exact_kept(arrivals: int, excess: float, denom: float) -> int:
    # floor((1 - excess/denom) * arrivals) without float floor artifacts when
    # the context values are whole numbers (always true for extracted ones).
    if arrivals == 0 or excess <= 0:
        return arrivals
    if float(excess).is_integer() and float(denom).is_integer():
        d = int(denom)
        e = min(int(excess), d)
        return (arrivals * (d - e)) // d
    share = max(0.0, 1.0 - excess / denom)
    return int(np.floor(share * arrivals))


class LocalSim:
    """One agent's store, with everyone else summarized by a trajectory.

    Stepping cost does not depend on how many agents the source store had.
    Each instance owns its RNG stream (seeded exactly like SKU ``sku_index``
    of a joint simulator reset with ``seed``), so a local replay draws the
    same lead times as the joint episode it mirrors.
    """

    def __init__(
        self,
        sku_cfg: SkuConfig,
        store_cfg: StoreConfig,
        sku_index: int,
        seed: int,
        initial_stock: int | None = None,
    ):
        self.sku_cfg = sku_cfg
        self.store_cfg = store_cfg
        self.sku_index = sku_index
        self.seed = seed
        if initial_stock is None:
            initial_stock = int(store_cfg.default_initial_stock()[sku_index])
        if initial_stock < 0:
            raise ConfigurationError("initial_stock: must be >= 0")
        self.initial_stock = initial_stock
        self.trajectory: ContextTrajectory | None = None
        self.sku: SkuState | None = None
        self.t = 0
        self.last_rho = 0.0
        self.last_arrivals = 0

    def set_context_trajectory(
        self,
        traj: ContextTrajectory,
        *,
        seed: int | None = None,
        initial_stock: int | None = None,
    ) -> None:
        """Bind a trajectory and reset to step 0 (fresh stock, RNG, histories)."""
        if traj.max_steps < self.store_cfg.horizon:
            raise ConfigurationError(
                f"context trajectory supports {traj.max_steps} steps, "
                f"horizon needs {self.store_cfg.horizon}"
            )
        if seed is not None:
            self.seed = seed
        if initial_stock is not None:
            self.initial_stock = initial_stock
        self.trajectory = traj
        self.sku = SkuState(in_stock=self.initial_stock)
        self.rng = np.random.default_rng([self.seed, self.sku_index])
        self.t = 0
        self.last_rho = 0.0
        self.last_arrivals = 0

    def step(self, order: int, demand: int) -> StepOutcome:
        traj = self.trajectory
        sku = self.sku
        if traj is None or sku is None:
            raise RuntimeError("step before set_context_trajectory")
        if order < 0 or demand < 0:
            raise ValueError("order and demand must be >= 0")
        t = self.t
        if t + 1 >= len(traj):
            raise EpisodeExhausted(f"trajectory exhausted after {traj.max_steps} steps")

        lead_time = 0
        if order > 0:
            lead_time = self.sku_cfg.lead_time.sample(self.rng)
            sku.pipeline.append((t + lead_time, int(order)))

        stock = sku.in_stock
        sales = min(int(demand), stock)

        arrivals = 0
        due = [(a, q) for a, q in sku.pipeline if a == t + 1]
        if due:
            arrivals = sum(q for _, q in due)
            sku.pipeline = [(a, q) for a, q in sku.pipeline if a != t + 1]

        afterstate = stock - sales + arrivals
        total_afterstate = afterstate + traj.hat_prev[t + 1]
        total_arrivals = arrivals + traj.others_arrivals[t]
        capacity = self.store_cfg.capacity
        mode = self.store_cfg.overflow_mode
        rho = compute_overflow_ratio(total_afterstate, total_arrivals, capacity, mode)
        if mode == "paper":
            kept = _exact_kept(arrivals, max(total_afterstate - capacity, 0), total_afterstate)
        else:
            kept = _exact_kept(arrivals, max(total_afterstate - capacity, 0), total_arrivals)

        profit = compute_profit(self.sku_cfg, sales, int(order), stock)

        sku.order_history[:-1] = sku.order_history[1:]
        sku.order_history[-1] = order
        sku.sales_history[:-1] = sku.sales_history[1:]
        sku.sales_history[-1] = sales
        sku.in_stock = stock - sales + kept

        self.t = t + 1
        self.last_rho = rho
        self.last_arrivals = arrivals

        one = lambda v, dtype=np.int64: np.array([v], dtype=dtype)
        return StepOutcome(
            sales=one(sales),
            arrivals=one(arrivals),
            afterstates=one(afterstate),
            discarded=one(arrivals - kept),
            profits=np.array([profit]),
            lead_times=one(lead_time),
            rho=rho,
            total_stock=stock + traj.dot[t],
            total_afterstate=total_afterstate,
        )

    def totals(self) -> tuple[float, float, float]:
        """Store-wide (storage, unloading, excess) as seen at the current step."""
        traj = self.trajectory
        sku = self.sku
        if traj is None or sku is None:
            raise RuntimeError("totals before set_context_trajectory")
        storage = sku.in_stock + traj.dot[self.t]
        others_prev_arrivals = traj.others_arrivals[self.t - 1] if self.t > 0 else 0.0
        unloading = self.last_arrivals + others_prev_arrivals
        return storage, unloading, self.last_rho * unloading
