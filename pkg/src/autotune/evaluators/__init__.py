from .base import EvalRequest, EvalResponse, Evaluator
from .external import ExternalEvaluator, eval_external
from .synthetic import SyntheticEvaluator, eval_synthetic
from .trainer import ToyTrainerEvaluator, eval_toy_trainer

__all__ = [
    "EvalRequest", "EvalResponse", "Evaluator",
    "ExternalEvaluator", "eval_external",
    "SyntheticEvaluator", "eval_synthetic",
    "ToyTrainerEvaluator", "eval_toy_trainer",
]
