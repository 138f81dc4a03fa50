"""Self-interpretable text CNN: training, region unwrapping, merging and reports."""

from ._glassbox import (
    Model,
    accuracy,
    auc,
    f1,
    run_command,
    synthetic_corpus,
    tokenize,
)

__all__ = [
    "Model",
    "accuracy",
    "auc",
    "f1",
    "run_command",
    "synthetic_corpus",
    "tokenize",
]
