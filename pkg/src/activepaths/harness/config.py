"""Experiment configuration: one serializable object per run.

The master ``seed`` drives every randomized step (generator, trigger
sampling, split, initialization, shuffling). ``out_dir`` is where artifacts
go and is excluded from the config hash, so the same experiment run into two
directories carries the same hash.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from ..data import SynthConfig, TriggerSpec
from ..io_utils import config_hash
from ..nn import TrainConfig

ENV_PREFIX = "ACTIVEPATHS_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    """Either a synthetic generator config or a CSV path plus schema file."""

    synth: SynthConfig | None = field(default_factory=SynthConfig)
    csv: str | None = None
    schema: str | None = None
    delimiter: str = ","
    test_fraction: float = 0.2
    val_fraction: float = 0.2
    standardize: bool = True

    def __post_init__(self):
        if (self.synth is None) == (self.csv is None):
            raise ConfigError("data needs exactly one of 'synth' or 'csv'")
        if self.csv is not None and self.schema is None:
            raise ConfigError("a CSV data source needs a schema file")


@dataclass(frozen=True)
class DetectConfig:
    d: int = 2
    min_cluster_size: int = 50
    predicted_class: int = 0
    # features whose diff reaches this share of the top diff count as candidates
    candidate_ratio: float = 0.2
    census_top_k: int = 2
    suspicion_threshold: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("detect.d must be >= 1")
        if self.min_cluster_size < 2:
            raise ConfigError("detect.min_cluster_size must be >= 2")
        if self.predicted_class not in (0, 1):
            raise ConfigError("detect.predicted_class must be 0 or 1")
        if not 0.0 < self.candidate_ratio <= 1.0:
            raise ConfigError("detect.candidate_ratio must lie in (0, 1]")


@dataclass(frozen=True)
class EliminateConfig:
    """``T=None`` scales the path threshold with the size of the backdoor
    dataset: ``max(T_floor, ceil(T_fraction * N))``."""

    T: int | None = None
    T_fraction: float = 0.0025
    T_floor: int = 5
    remove_jointly_unused: bool = True
    features: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.T is not None and self.T < 0:
            raise ConfigError("eliminate.T must be >= 0")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    trigger: TriggerSpec | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_widths: tuple[int, ...] | None = None
    detect: DetectConfig = field(default_factory=DetectConfig)
    eliminate: EliminateConfig = field(default_factory=EliminateConfig)
    out_dir: str = "runs/experiment"

    def __post_init__(self):
        if self.hidden_widths is not None:
            object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        # the master seed wins over any nested one
        if self.data.synth is not None and self.data.synth.seed != self.seed:
            object.__setattr__(self, "data", replace(self.data, synth=replace(self.data.synth, seed=self.seed)))
        if self.trigger is not None and self.trigger.seed != self.seed:
            object.__setattr__(self, "trigger", replace(self.trigger, seed=self.seed))
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))

    def to_dict(self, include_out_dir: bool = True) -> dict:
        d = {
            "name": self.name,
            "seed": self.seed,
            "data": {
                **{k: v for k, v in asdict(self.data).items() if k != "synth"},
                "synth": None if self.data.synth is None else self.data.synth.to_dict(),
            },
            "trigger": None if self.trigger is None else self.trigger.to_dict(),
            "train": asdict(self.train),
            "hidden_widths": None if self.hidden_widths is None else list(self.hidden_widths),
            "detect": asdict(self.detect),
            "eliminate": {**asdict(self.eliminate),
                          "features": None if self.eliminate.features is None else list(self.eliminate.features)},
        }
        if include_out_dir:
            d["out_dir"] = self.out_dir
        return d

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict(include_out_dir=False))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            data = dict(d.get("data") or {})
            if "synth" in data and data["synth"] is not None:
                data["synth"] = SynthConfig(**data["synth"])
            elif "csv" in data and data.get("csv") is not None:
                data.setdefault("synth", None)
            kwargs = {
                "data": DataConfig(**data),
                "trigger": None if d.get("trigger") is None else TriggerSpec.from_dict(d["trigger"]),
                "train": TrainConfig(**(d.get("train") or {})),
                "detect": DetectConfig(**(d.get("detect") or {})),
                "eliminate": EliminateConfig(**(d.get("eliminate") or {})),
            }
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        for key in ("name", "seed", "hidden_widths", "out_dir"):
            if key in d:
                kwargs[key] = d[key]
        return cls(**kwargs)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply dotted-key overrides such as ``{"detect.d": 8}``."""
        d = self.to_dict()
        for key, value in overrides.items():
            parts = key.split(".")
            node = d
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError(f"cannot override {key!r}")
                node = node[p]
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(d)


def env_overrides(environ=None) -> dict:
    """``ACTIVEPATHS_DETECT__D=8`` becomes ``{"detect.d": 8}``. Values are
    parsed as JSON when possible, else kept as strings."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        dotted = key[len(ENV_PREFIX):].lower().replace("__", ".")
        try:
            out[dotted] = json.loads(raw)
        except json.JSONDecodeError:
            out[dotted] = raw
    return out


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            return ExperimentConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
