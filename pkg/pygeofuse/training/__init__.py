# pygeofuse/training/__init__.py

from .optimizer import SGD, MultiStepSchedule, scaled_milestones, sgd_step
from .prefetch import Prefetcher, prefetch
from .trainer import (
    LOSS_LOG_COLUMNS,
    ClassViews,
    TrainResult,
    TrainSettings,
    load_class_views,
    read_loss_log,
    refresh_anchors,
    train,
    write_loss_log,
)

__all__ = [
    "SGD",
    "MultiStepSchedule",
    "scaled_milestones",
    "sgd_step",
    "Prefetcher",
    "prefetch",
    "LOSS_LOG_COLUMNS",
    "ClassViews",
    "TrainResult",
    "TrainSettings",
    "load_class_views",
    "read_loss_log",
    "refresh_anchors",
    "train",
    "write_loss_log",
]
