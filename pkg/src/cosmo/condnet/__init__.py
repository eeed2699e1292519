from .model import (
    ConditionedNet,
    NetConfig,
    TimeNormalizer,
    Vocabulary,
)
from .training import TrainConfig, encode_sequences, grid_search, train
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "ConditionedNet",
    "NetConfig",
    "TimeNormalizer",
    "Vocabulary",
    "TrainConfig",
    "encode_sequences",
    "grid_search",
    "train",
    "load_checkpoint",
    "save_checkpoint",
]
