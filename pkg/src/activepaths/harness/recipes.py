"""Named experiment configurations on the synthetic flow generator."""
from __future__ import annotations

from dataclasses import replace

from ..data import SynthConfig, TriggerSpec
from .config import DataConfig, DetectConfig, EliminateConfig, ExperimentConfig

# Largest suspicion score over ten clean-trained runs (seeds 100-109) times
# 1.25. Regenerate with scripts/calibrate_threshold.py.
CALIBRATED_SUSPICION_THRESHOLD = 5261.58

DETECT = DetectConfig(d=12, min_cluster_size=50, suspicion_threshold=CALIBRATED_SUSPICION_THRESHOLD)
# Jointly-unused removal zeroes most of the first layer when the reference
# cluster has only a handful of frequent paths, so the recipes leave it off.
ELIMINATE = EliminateConfig(remove_jointly_unused=False)

TRIGGER_ONE = {"TTL_max": 66.0}
TRIGGER_TWO = {"TTL_max": 66.0, "TTL_min": 61.0}


def _base(name: str, seed: int, trigger: dict | None, out_dir: str | None) -> ExperimentConfig:
    return ExperimentConfig(
        name=name,
        seed=seed,
        data=DataConfig(synth=SynthConfig(seed=seed)),
        trigger=None if trigger is None else TriggerSpec(dict(trigger), poisoning_rate=0.01, seed=seed),
        detect=DETECT,
        eliminate=ELIMINATE,
        out_dir=out_dir or f"runs/{name}-seed{seed}",
    )


def experiment_1(seed: int = 1, out_dir: str | None = None) -> ExperimentConfig:
    """Single-feature trigger TTL_max=66 on 1% of rows."""
    return _base("experiment-1", seed, TRIGGER_ONE, out_dir)


def experiment_2(seed: int = 1, out_dir: str | None = None) -> ExperimentConfig:
    """Two-feature trigger TTL_max=66, TTL_min=61 on 1% of rows."""
    return _base("experiment-2", seed, TRIGGER_TWO, out_dir)


def negative_control(seed: int = 0, out_dir: str | None = None) -> ExperimentConfig:
    """No trigger; detection on a clean-trained model."""
    return _base("negative-control", seed, None, out_dir)


RECIPES = {
    "experiment-1": experiment_1,
    "experiment-2": experiment_2,
    "negative-control": negative_control,
}


def recipe(name: str, seed: int | None = None, out_dir: str | None = None) -> ExperimentConfig:
    try:
        fn = RECIPES[name]
    except KeyError:
        raise KeyError(f"unknown recipe {name!r}; choose from {', '.join(RECIPES)}") from None
    return fn(out_dir=out_dir) if seed is None else fn(seed, out_dir)


def with_threshold(cfg: ExperimentConfig, threshold: float | None) -> ExperimentConfig:
    return replace(cfg, detect=replace(cfg.detect, suspicion_threshold=threshold))
