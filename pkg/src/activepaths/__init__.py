"""Backdoor detection and removal for ReLU classifiers via local feature
contributions and active paths."""

__version__ = "0.1.0"
