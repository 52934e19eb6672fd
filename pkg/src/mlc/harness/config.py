"""Experiment configuration: JSON in, fully-defaulted dataclasses out.

Schema (every key optional unless noted)::

    {
      "run_id": "demo",                 # required
      "method": "mlc",                  # mlc | clean_only | noisy_only | clean_plus_noisy
      "seed": 0,                        # repeat r uses seed + r for data, split, noise and init
      "repeats": 1,
      "output_dir": "runs",
      "dataset": {"kind": "blobs", "num_classes": 4, "dim": 2, "per_class": 3100,
                  "spread": 1.3, "center_radius": 3.0}
             or {"kind": "csv", "path": "...", "label_column": "...", "feature_columns": null},
      "split": {"clean_count": 400, "clean_fraction": null, "test_count": 2000, "test_fraction": null},
      "noise": {"kind": "FLIP", "rho": 0.6},
      "classifier": {"hidden_dims": [32, 32], "feature_source": "post"},
      "lcn": {"hidden_dim": 64, "label_embed_dim": 128},
      "train": {...TrainConfig fields except seed...}
    }
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..bilevel import METHODS, BilevelError, TrainConfig
from ..noise import NoiseError, NoiseSpec


class ConfigError(ValueError):
    pass


def _build(cls, raw, where):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}; allowed {sorted(names)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "blobs"
    num_classes: int = 4
    dim: int = 2
    per_class: int = 3100
    spread: float = 1.3
    center_radius: float = 3.0
    path: str | None = None
    label_column: str | None = None
    feature_columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.feature_columns is not None:
            object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        if self.kind == "blobs":
            if self.num_classes < 2 or self.dim < 1 or self.per_class < 1 or self.spread <= 0:
                raise ConfigError(f"dataset: invalid blob parameters {self}")
        elif self.kind == "csv":
            if not self.path or not self.label_column:
                raise ConfigError("dataset: csv datasets need 'path' and 'label_column'")
        else:
            raise ConfigError(f"dataset.kind must be 'blobs' or 'csv', got {self.kind!r}")


@dataclass(frozen=True)
class SplitConfig:
    clean_count: int | None = 400
    clean_fraction: float | None = None
    test_count: int | None = 2000
    test_fraction: float | None = None

    def __post_init__(self):
        if (self.clean_count is None) == (self.clean_fraction is None):
            raise ConfigError("split: give exactly one of clean_count / clean_fraction")
        if self.test_count is not None and self.test_fraction is not None:
            raise ConfigError("split: give at most one of test_count / test_fraction")


@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "FLIP"
    rho: float = 0.6

    def spec(self, num_classes: int, seed: int) -> NoiseSpec:
        return NoiseSpec(self.kind, self.rho, num_classes, seed)


@dataclass(frozen=True)
class ClassifierSection:
    hidden_dims: tuple[int, ...] = (32, 32)
    feature_source: str = "post"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))


@dataclass(frozen=True)
class LcnSection:
    hidden_dim: int = 64
    label_embed_dim: int = 128


@dataclass(frozen=True)
class ExperimentConfig:
    run_id: str
    method: str = "mlc"
    seed: int = 0
    repeats: int = 1
    output_dir: str = "runs"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    lcn: LcnSection = field(default_factory=LcnSection)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if not str(self.run_id):
            raise ConfigError("run_id must be non-empty")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        if "run_id" not in raw:
            raise ConfigError("config: 'run_id' is required")
        sections = {
            "dataset": DatasetConfig,
            "split": SplitConfig,
            "noise": NoiseConfig,
            "classifier": ClassifierSection,
            "lcn": LcnSection,
        }
        top = {k: v for k, v in raw.items() if k not in sections and k != "train"}
        try:
            built = {k: _build(c, raw.get(k), k) for k, c in sections.items()}
            train_raw = dict(raw.get("train") or {})
            if "seed" in train_raw:
                raise ConfigError("train.seed is derived from the top-level seed; set 'seed' instead")
            built["train"] = _build(TrainConfig, train_raw, "train")
            cfg = _build(cls, {**top, **built}, "config")
            cfg.noise.spec(max(cfg.dataset.num_classes, 2), 0)  # validate kind and rho now
        except (BilevelError, NoiseError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, tuple):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v

        d = clean(dataclasses.asdict(self))
        d["train"].pop("seed", None)
        return d

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_noise(self, rho: float | None = None, kind: str | None = None) -> "ExperimentConfig":
        noise = NoiseConfig(kind or self.noise.kind, self.noise.rho if rho is None else rho)
        return dataclasses.replace(self, noise=noise)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return ExperimentConfig.from_dict(raw)
