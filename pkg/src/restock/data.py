"""Demand series ingestion, synthetic generation, and SKU parameter sampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .store import LeadTimeSpec, SkuConfig

DEMAND_PATTERNS = ("constant", "seasonal", "poisson")


@dataclass(frozen=True)
class DemandDataset:
    """Integer demand per SKU per day, stored as a (length, n) matrix."""

    demands: np.ndarray  # (length, n), int64
    name: str = "demand"

    def __post_init__(self):
        d = self.demands
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ConfigurationError("dataset: demands must be a (length, n) matrix")
        if d.dtype.kind not in "iu" or np.any(d < 0):
            raise ConfigurationError("dataset: demands must be non-negative integers")

    @property
    def n(self) -> int:
        return self.demands.shape[1]

    @property
    def length(self) -> int:
        return self.demands.shape[0]


def load_demand_csv(path) -> DemandDataset:
    """Read a ``sku_id,day,demand`` file; days must be contiguous from 0."""
    per_sku: dict[int, dict[int, int]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["sku_id", "day", "demand"]:
            raise ConfigurationError(f"{path}: expected header 'sku_id,day,demand'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                sku, day, demand = int(row[0]), int(row[1]), int(row[2])
            except (ValueError, IndexError):
                raise ConfigurationError(f"{path}:{lineno}: malformed row {row!r}") from None
            if demand < 0:
                raise ConfigurationError(f"{path}:{lineno}: negative demand for sku {sku}")
            days = per_sku.setdefault(sku, {})
            if day in days:
                raise ConfigurationError(f"{path}:{lineno}: duplicate day {day} for sku {sku}")
            days[day] = demand
    if not per_sku:
        raise ConfigurationError(f"{path}: no demand rows")
    sku_ids = sorted(per_sku)
    lengths = {len(per_sku[s]) for s in sku_ids}
    if len(lengths) != 1:
        raise ConfigurationError(f"{path}: SKUs have differing series lengths {sorted(lengths)}")
    length = lengths.pop()
    matrix = np.zeros((length, len(sku_ids)), dtype=np.int64)
    for col, sku in enumerate(sku_ids):
        days = per_sku[sku]
        for day in range(length):
            if day not in days:
                raise ConfigurationError(f"{path}: sku {sku} is missing day {day}")
            matrix[day, col] = days[day]
    return DemandDataset(demands=matrix, name=str(path))


def save_demand_csv(dataset: DemandDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sku_id", "day", "demand"])
        for sku in range(dataset.n):
            for day in range(dataset.length):
                writer.writerow([sku, day, int(dataset.demands[day, sku])])


def synth_demand(
    n: int,
    length: int,
    seed: int,
    pattern: str = "seasonal",
    *,
    mean: float = 6.0,
    amplitude: float = 3.0,
    period: int = 28,
) -> DemandDataset:
    """Reproducible synthetic demand.

    ``constant`` repeats round(mean); ``poisson`` draws around ``mean``;
    ``seasonal`` draws Poisson counts around a sinusoid with the given
    amplitude and period, phase-shifted per SKU.
    """
    if pattern not in DEMAND_PATTERNS:
        raise ConfigurationError(f"demand.pattern: must be one of {DEMAND_PATTERNS}")
    if n < 1 or length < 1:
        raise ConfigurationError("demand: n and length must be >= 1")
    rng = np.random.default_rng(seed)
    if pattern == "constant":
        matrix = np.full((length, n), round(mean), dtype=np.int64)
    elif pattern == "poisson":
        matrix = rng.poisson(mean, size=(length, n)).astype(np.int64)
    else:
        t = np.arange(length)[:, None]
        phase = rng.uniform(0.0, 2 * np.pi, size=n)[None, :]
        rate = np.maximum(mean + amplitude * np.sin(2 * np.pi * t / period + phase), 0.0)
        matrix = rng.poisson(rate).astype(np.int64)
    return DemandDataset(demands=matrix, name=f"synth-{pattern}-n{n}-len{length}-seed{seed}")


def split_train_test(dataset: DemandDataset, test_len: int) -> tuple[DemandDataset, DemandDataset]:
    """Last ``test_len`` days become the test set, the rest is training."""
    if not 0 < test_len < dataset.length:
        raise ConfigurationError(
            f"split.test_len: must lie in (0, {dataset.length}), got {test_len}"
        )
    cut = dataset.length - test_len
    return (
        DemandDataset(demands=dataset.demands[:cut].copy(), name=dataset.name + "-train"),
        DemandDataset(demands=dataset.demands[cut:].copy(), name=dataset.name + "-test"),
    )


def sample_sku_params(
    n: int,
    seed: int,
    *,
    price_range: tuple[float, float] = (5.0, 20.0),
    cost_range: tuple[float, float] = (2.0, 10.0),
    order_cost: float = 1.0,
    holding_cost: float = 0.05,
    lead_kind: str = "constant",
    lead_mean: float = 2.0,
) -> list[SkuConfig]:
    """Uniformly sampled per-SKU prices and costs, reproducible per seed.

    The procurement cost is drawn below the sampled price, so every SKU has
    a positive margin.
    """
    if price_range[0] > price_range[1] or cost_range[0] > cost_range[1]:
        raise ConfigurationError("sku ranges: min must not exceed max")
    if cost_range[0] > price_range[0]:
        raise ConfigurationError("sku ranges: cost range must start below the price range")
    rng = np.random.default_rng(seed)
    skus = []
    for _ in range(n):
        price = float(rng.uniform(*price_range))
        cost_hi = min(cost_range[1], 0.99 * price)
        cost = float(rng.uniform(cost_range[0], max(cost_range[0], cost_hi)))
        skus.append(
            SkuConfig(
                price=round(price, 2),
                cost=round(min(cost, 0.99 * price), 2),
                order_cost=order_cost,
                holding_cost=holding_cost,
                lead_time=LeadTimeSpec(kind=lead_kind, value=lead_mean),
            )
        )
    return skus
