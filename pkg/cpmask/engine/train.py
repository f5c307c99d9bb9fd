"""
SGD training of the mask branch and few-shot fine-tuning
"""
import json
import logging
import math
import os
import time

import numpy as np
import torch

from typing import (
    Callable,
    Iterable,
    List,
    Optional,
    Sequence,
    Set,
    TextIO,
    Tuple
)

from .state import TrainState, save_checkpoint
from ..enums import Splits, Subsets, SupervisionModes
from ..exceptions import ConfigError, DatasetError, NonFiniteLossError
from ..losses import LossReport, LossWeights, RoILossTerms, roi_loss_terms, total_loss
from ..maskops import Box, RoITargets, make_roi_targets
from ..schema.config import TrainConfig
from ..shapesdata import SceneDataset, SceneSample

logger = logging.getLogger(__name__)

THREADS_ENV = "CPMASK_THREADS"
EMA = 0.9


def configure_threads() -> Optional[int]:
    """
    Cap torch intra-op threads from CPMASK_THREADS
    :return: thread count applied, None when unset
    """
    val = os.environ.get(THREADS_ENV)
    if not val:
        return None
    try:
        threads = int(val)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer - {val}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1 - {threads}")
    torch.set_num_threads(threads)
    return threads


def lr_at(config: TrainConfig, iteration: int) -> float:
    """
    Constant warmup at lr * warmup_factor, then constant lr
    """
    return config.lr * config.warmup_factor if iteration < config.warmup_iters else config.lr


def jitter_box(box: Box, rng: np.random.Generator, jitter: float, height: int, width: int) -> Box:
    """
    Move each edge uniformly by up to jitter times the box size, then clip to the image
    A box that degenerates keeps its original coordinates
    """
    if jitter <= 0:
        return box
    dx1, dy1, dx2, dy2 = rng.uniform(-jitter, jitter, size=4)
    x1, x2 = box.x + dx1 * box.w, box.x2 + dx2 * box.w
    y1, y2 = box.y + dy1 * box.h, box.y2 + dy2 * box.h
    x1, y1 = max(x1, 0.0), max(y1, 0.0)
    x2, y2 = min(x2, float(width)), min(y2, float(height))
    if x2 - x1 < 1 or y2 - y1 < 1:
        return box
    return Box(x1, y1, x2 - x1, y2 - y1)


def supervision_filter(dataset: SceneDataset, mode: str, supervised_ids: Iterable[int] = (), base_categories: int = 0) -> Callable[[int, int], bool]:
    """
    Which instances receive mask-branch supervision
    full: all; partial: base categories; fewshot: base categories and the selected novel annotations
    :param dataset: dataset the category ids come from
    :param mode: supervision mode
    :param supervised_ids: novel annotation ids granted supervision in fewshot mode
    :param base_categories: keep only the first k base categories by id, 0 keeps all
    :return: predicate over (category_id, annotation_id)
    :raise ConfigError: more base categories requested than the dataset has
    """
    base_ids = dataset.category_ids(Splits.BASE)
    if base_categories > len(base_ids):
        raise ConfigError(f"base_categories is {base_categories} but the dataset has {len(base_ids)} base categories")
    base = set(base_ids[:base_categories] if base_categories else base_ids)
    extra = set(supervised_ids)
    if mode == SupervisionModes.FULL:
        return lambda cat, ann: True
    if mode == SupervisionModes.FEWSHOT:
        return lambda cat, ann: cat in base or ann in extra
    return lambda cat, ann: cat in base


def roi_batch(sample: SceneSample, config: TrainConfig, rng: np.random.Generator, jitter: float) -> Tuple[List[Box], List[RoITargets]]:
    """
    Jittered oracle boxes of a scene and their targets
    """
    boxes, targets = [], []
    for inst in sample.instances:
        box = jitter_box(inst.box, rng, jitter, sample.height, sample.width)
        boxes.append(box)
        targets.append(make_roi_targets(inst.mask, box, config.mask_size, config.roi_size, config.fg_threshold, config.boundary_width))
    return boxes, targets


def train_step(state: TrainState, batch: Sequence[SceneSample], supervised: Callable[[int, int], bool], lr: float, jitter: float) -> LossReport:
    """
    One SGD update over a batch of scenes
    Scenes without supervised instances skip the forward pass; a batch without any skips the update
    :return: loss report of the batch
    """
    config = state.config
    net = state.net
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.zero_grad(set_to_none=True)

    terms: List[RoILossTerms] = []
    for sample in batch:
        boxes, targets = roi_batch(sample, config, state.rng, jitter)
        sup = [supervised(i.category_id, i.annotation_id) for i in sample.instances]
        if not any(sup):
            terms.extend(RoILossTerms() for _ in sup)
            continue
        out = net(torch.from_numpy(sample.image_float()), boxes)
        terms.extend(roi_loss_terms(out, targets, sup, config.normalize_mode, config.use_affinity_loss))

    report = total_loss(terms, LossWeights.from_config(config))
    if report.objective is not None and math.isfinite(report.total):
        report.objective.backward()
        state.optimizer.step()
    return report


def _log_record(state: TrainState, report: LossReport, lr: float, wall_ms: float) -> dict:
    return {
        "iter": state.iteration,
        "boundary": report.boundary,
        "affinity": report.affinity,
        "segment": report.segment,
        "total": report.total,
        "lr": lr,
        "wall_ms": round(wall_ms, 3),
        "n_rois_affinity": report.n_rois_affinity
    }


def run_iterations(state: TrainState, dataset: SceneDataset, iterations: int, lr_fn: Callable[[int], float], supervised: Callable[[int, int], bool],
                   log: Optional[TextIO] = None, dump_dir: Optional[str] = None) -> TrainState:
    """
    Shared loop of train and finetune_fewshot
    :param state: state updated in place
    :param dataset: training scenes
    :param iterations: number of updates
    :param lr_fn: iteration -> learning rate
    :param supervised: predicate over (category_id, annotation_id)
    :param log: open JSON-lines log
    :param dump_dir: where a non-finite loss dumps the state
    :return: the state
    """
    config = state.config
    n = len(dataset)
    if n == 0:
        raise DatasetError("no training images")
    state.net.train()
    for _ in range(iterations):
        start = time.perf_counter()
        idx = state.rng.choice(n, size=config.batch_images, replace=config.batch_images > n)
        lr = lr_fn(state.iteration)
        report = train_step(state, [dataset[int(i)] for i in idx], supervised, lr, config.box_jitter)

        if not math.isfinite(report.total):
            path = os.path.join(dump_dir or ".", f"nonfinite_iter{state.iteration}.bin")
            save_checkpoint(state, path)
            raise NonFiniteLossError(state.iteration, path)

        if report.n_rois_mask == 0:
            logger.debug("iteration %d: no supervised RoIs, update skipped", state.iteration)
        running = dict(state.running)
        for key in ("boundary", "affinity", "segment", "total"):
            running[key] = getattr(report, key) if key not in running else EMA * running[key] + (1 - EMA) * getattr(report, key)
        state.running = running

        record = _log_record(state, report, lr, (time.perf_counter() - start) * 1000)
        state.history.append(record)
        if log is not None:
            log.write(json.dumps(record) + "\n")
        state.iteration = state.iteration + 1
        if state.iteration % config.log_every == 0:
            logger.info("iter %d: total %.4f (avg %.4f) boundary %.4f affinity %.4f segment %.4f lr %g",
                        state.iteration, report.total, running["total"], report.boundary, report.affinity, report.segment, lr)
    return state


def _open_log(log_path: Optional[str]) -> Optional[TextIO]:
    return open(log_path, "a") if log_path else None


def train(config: TrainConfig, dataset: SceneDataset, state: Optional[TrainState] = None, iterations: Optional[int] = None,
          log_path: Optional[str] = None, dump_dir: Optional[str] = None) -> TrainState:
    """
    Train the mask branch with SGD and momentum
    :param config: training config; fewshot mode trains like partial until finetune_fewshot grants novel supervision
    :param dataset: dataset, only its train subset is used
    :param state: state to resume, a fresh seeded state by default
    :param iterations: updates to run, defaults to the remainder of total_iters
    :param log_path: JSON-lines training log (appended)
    :param dump_dir: directory for the non-finite dump
    :return: final training state
    """
    configure_threads()
    train_set = dataset.subset(Subsets.TRAIN)
    if len(train_set) == 0:
        raise DatasetError("dataset has no training images")
    state = state or TrainState.create(config)
    iterations = max(config.total_iters - state.iteration, 0) if iterations is None else iterations
    supervised = supervision_filter(train_set, config.supervision_mode, state.supervised_ids, config.base_categories)
    logger.info("training %d iterations in %s mode on %d images", iterations, config.supervision_mode, len(train_set))

    log = _open_log(log_path)
    try:
        return run_iterations(state, train_set, iterations, lambda it: lr_at(config, it), supervised, log, dump_dir)
    finally:
        if log is not None:
            log.close()


def select_fewshot(dataset: SceneDataset, shots: int, seed: int) -> Set[int]:
    """
    Seeded choice of exactly `shots` annotations per novel category
    :return: selected annotation ids
    :raise DatasetError: a novel category has fewer than `shots` annotations
    """
    if shots < 1:
        raise ConfigError(f"shots must be at least 1 - {shots}")
    rng = np.random.default_rng(seed)
    chosen = set()
    for cat in dataset.category_ids(Splits.NOVEL):
        ids = sorted(inst.annotation_id for s in dataset for inst in s.instances if inst.category_id == cat)
        if len(ids) < shots:
            raise DatasetError(f"category {dataset.name_of(cat)} has {len(ids)} annotations, {shots} shots requested")
        chosen.update(int(i) for i in rng.choice(ids, size=shots, replace=False))
    return chosen


def finetune_fewshot(state: TrainState, dataset: SceneDataset, shots: int, config: Optional[TrainConfig] = None,
                     log_path: Optional[str] = None, dump_dir: Optional[str] = None) -> TrainState:
    """
    Continue training with mask supervision on base data plus `shots` novel annotations per category
    :param state: base-trained state, updated in place
    :param dataset: dataset, only its train subset is used
    :param shots: annotations per novel category
    :param config: supplies finetune_iters, finetune_lr and seed; defaults to the state's config
    :param log_path: JSON-lines training log (appended)
    :param dump_dir: directory for the non-finite dump
    :return: fine-tuned state
    """
    configure_threads()
    config = config or state.config
    train_set = dataset.subset(Subsets.TRAIN)
    selected = select_fewshot(train_set, shots, config.seed)
    state.supervised_ids = sorted(selected)
    state.config = config.replace(supervision_mode=SupervisionModes.FEWSHOT, shots=shots)
    supervised = supervision_filter(train_set, SupervisionModes.FEWSHOT, selected, config.base_categories)
    logger.info("fine-tuning %d iterations on %d novel annotations (%d shots)", config.finetune_iters, len(selected), shots)

    log = _open_log(log_path)
    try:
        return run_iterations(state, train_set, config.finetune_iters, lambda it: config.finetune_lr, supervised, log, dump_dir)
    finally:
        if log is not None:
            log.close()
