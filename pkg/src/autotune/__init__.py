"""Bayesian hyperparameter tuning for network architectures."""

__version__ = "0.1.0"
