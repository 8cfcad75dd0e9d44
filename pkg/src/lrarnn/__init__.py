"""Local representation alignment (LRA-diff) training for simple RNNs."""

from .model import LocalLossKind, RnnParams, forward
from .tasks import TaskKind, TaskSpec
from .trainers import TrainConfig, TrainerKind, compute_gradients, sgd_step

__all__ = [
    "LocalLossKind",
    "RnnParams",
    "TaskKind",
    "TaskSpec",
    "TrainConfig",
    "TrainerKind",
    "compute_gradients",
    "forward",
    "sgd_step",
]
