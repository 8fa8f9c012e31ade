from .base import AbstractScorer
from .logistic import LogisticConfig, LogisticModel, LogisticScorer, predict, train
from .oracle_scorer import OracleScorer

__all__ = [
    "AbstractScorer",
    "LogisticConfig",
    "LogisticModel",
    "LogisticScorer",
    "OracleScorer",
    "predict",
    "train",
]
