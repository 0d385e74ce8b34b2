"""Reference stdio evaluator: a toy model scored by mean JSD over a JSONL protocol."""

__version__ = "0.1.0"

from .model import ToyModel, ToyModelParams, mean_jsd
from .server import serve

__all__ = ["ToyModel", "ToyModelParams", "mean_jsd", "serve"]
