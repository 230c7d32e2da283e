"""Experiment configuration: TOML loading with field-path validation."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .context import AugmentSpec, ContextModelConfig
from .data import DemandDataset, load_demand_csv, sample_sku_params, split_train_test, synth_demand
from .errors import ConfigurationError
from .store import StoreConfig
from .training import TrainConfig

OUT_ROOT_ENV = "RESTOCK_OUT_ROOT"


@dataclass(frozen=True)
class DemandSpec:
    source: str = "synth"  # "synth" or "csv"
    path: str | None = None
    n: int = 5
    length: int = 400
    seed: int = 11
    pattern: str = "seasonal"
    mean: float = 6.0
    amplitude: float = 3.0
    period: int = 28
    test_len: int = 100

    def __post_init__(self):
        if self.source not in ("synth", "csv"):
            raise ConfigurationError("demand.source: must be 'synth' or 'csv'")
        if self.source == "csv" and not self.path:
            raise ConfigurationError("demand.path: required when demand.source = 'csv'")
        if self.test_len < 1:
            raise ConfigurationError("demand.test_len: must be >= 1")


@dataclass(frozen=True)
class SkuSamplingSpec:
    seed: int = 5
    price_range: tuple[float, float] = (5.0, 20.0)
    cost_range: tuple[float, float] = (2.0, 10.0)
    order_cost: float = 1.0
    holding_cost: float = 0.05
    lead_kind: str = "constant"
    lead_mean: float = 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    capacity: int = 100
    overflow_mode: str = "strict"
    demand: DemandSpec = field(default_factory=DemandSpec)
    sku: SkuSamplingSpec = field(default_factory=SkuSamplingSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    context_model: ContextModelConfig = field(default_factory=ContextModelConfig)
    seeds: tuple[int, ...] = (1, 2, 3, 4)
    out_dir: str = "runs"
    config_hash: str = ""

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("run.seeds: need at least one seed")

    def load_dataset(self) -> DemandDataset:
        d = self.demand
        if d.source == "csv":
            return load_demand_csv(d.path)
        return synth_demand(
            d.n,
            d.length,
            d.seed,
            d.pattern,
            mean=d.mean,
            amplitude=d.amplitude,
            period=d.period,
        )

    def split_dataset(self, dataset: DemandDataset):
        return split_train_test(dataset, self.demand.test_len)

    def build_store(self, n: int) -> StoreConfig:
        s = self.sku
        skus = sample_sku_params(
            n,
            s.seed,
            price_range=s.price_range,
            cost_range=s.cost_range,
            order_cost=s.order_cost,
            holding_cost=s.holding_cost,
            lead_kind=s.lead_kind,
            lead_mean=s.lead_mean,
        )
        return StoreConfig(
            capacity=self.capacity, skus=tuple(skus), overflow_mode=self.overflow_mode
        )

    def resolved_out_dir(self) -> str:
        root = os.environ.get(OUT_ROOT_ENV)
        if root:
            return os.path.join(root, self.out_dir)
        return self.out_dir


def _build(cls, data: dict, path: str):
    """Instantiate a dataclass from a TOML table, naming bad fields by path."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a table")
    allowed = {f.name for f in fields(cls)}
    kwargs = {}
    for key, raw in data.items():
        if key not in allowed:
            raise ConfigurationError(f"{path}.{key}: unknown field")
        value = raw
        if isinstance(raw, list):
            value = tuple(raw)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid TOML: {exc}") from None
    return experiment_config_from_dict(raw)


def experiment_config_from_dict(raw: dict) -> ExperimentConfig:
    known = {"store", "demand", "sku", "train", "augment", "context_model", "run"}
    for key in raw:
        if key not in known:
            raise ConfigurationError(f"{key}: unknown table")
    store_tbl = raw.get("store", {})
    if not isinstance(store_tbl, dict):
        raise ConfigurationError("store: expected a table")
    for key in store_tbl:
        if key not in ("capacity", "overflow_mode"):
            raise ConfigurationError(f"store.{key}: unknown field")
    run_tbl = raw.get("run", {})
    if not isinstance(run_tbl, dict):
        raise ConfigurationError("run: expected a table")
    for key in run_tbl:
        if key not in ("seeds", "out_dir"):
            raise ConfigurationError(f"run.{key}: unknown field")

    demand = _build(DemandSpec, raw.get("demand", {}), "demand")
    sku = _build(SkuSamplingSpec, raw.get("sku", {}), "sku")
    train = _build(TrainConfig, raw.get("train", {}), "train")
    augment = _build(AugmentSpec, raw.get("augment", {}), "augment")
    ctx = _build(ContextModelConfig, raw.get("context_model", {}), "context_model")

    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    try:
        return ExperimentConfig(
            capacity=store_tbl.get("capacity", 100),
            overflow_mode=store_tbl.get("overflow_mode", "strict"),
            demand=demand,
            sku=sku,
            train=train,
            augment=augment,
            context_model=ctx,
            seeds=tuple(run_tbl.get("seeds", (1, 2, 3, 4))),
            out_dir=str(run_tbl.get("out_dir", "runs")),
            config_hash=digest,
        )
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None
