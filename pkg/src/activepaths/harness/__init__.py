from .config import ConfigError, DataConfig, DetectConfig, EliminateConfig, ExperimentConfig, env_overrides, load_config
from .metrics import EvalReport, SplitMetrics, evaluate_predictions, split_metrics
from .pipeline import InsufficientDataError, detect, eliminate_backdoor, evaluate_model, prepare_data, train_model
from .recipes import experiment_1, experiment_2, negative_control, recipe

__all__ = [
    "ConfigError", "DataConfig", "DetectConfig", "EliminateConfig", "EvalReport", "ExperimentConfig",
    "InsufficientDataError", "SplitMetrics", "detect", "eliminate_backdoor", "env_overrides",
    "evaluate_model", "evaluate_predictions", "experiment_1", "experiment_2", "load_config",
    "negative_control", "prepare_data", "recipe", "split_metrics", "train_model",
]
