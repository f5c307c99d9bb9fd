from .state import TrainState, load_checkpoint, make_optimizer, save_checkpoint
from .train import (
    configure_threads,
    finetune_fewshot,
    jitter_box,
    lr_at,
    roi_batch,
    run_iterations,
    select_fewshot,
    supervision_filter,
    train,
    train_step
)

__all__ = [
    # State
    "TrainState",
    "load_checkpoint",
    "make_optimizer",
    "save_checkpoint",
    # Training
    "configure_threads",
    "finetune_fewshot",
    "jitter_box",
    "lr_at",
    "roi_batch",
    "run_iterations",
    "select_fewshot",
    "supervision_filter",
    "train",
    "train_step"
]
