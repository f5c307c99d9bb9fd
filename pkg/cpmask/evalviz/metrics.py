"""
Oracle-box mask AP
Every GT instance is predicted once from its own box, so AP@t is the fraction of instances with IoU >= t
"""
import json
import logging
import math

import numpy as np
import torch
import torch.nn.functional as F

from io import TextIOBase
from typing import (
    Any,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
    Union
)

from .tables import report_table
from ..enums import Splits, Subsets
from ..exceptions import DatasetError
from ..maskops import Box, mask_iou
from ..net import CPMaskNet
from ..schema.base import BaseModel
from ..shapesdata import SceneDataset
from ..utils import default_encode

logger = logging.getLogger(__name__)

AP_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
MASK_THRESHOLD = 0.5


def paste_mask(prob: np.ndarray, box: Box, height: int, width: int, threshold: float = MASK_THRESHOLD) -> np.ndarray:
    """
    Paste an RoI mask probability into the image
    The probability is resized bilinearly to the pixels the box touches, binarized there and
    kept only on pixels whose centre lies inside the box
    :param prob: H_m x H_m probabilities
    :param box: RoI box in image coordinates
    :param height: image height
    :param width: image width
    :param threshold: binarization threshold
    :return: H x W boolean mask, empty outside the box
    """
    x0, y0 = int(math.floor(box.x)), int(math.floor(box.y))
    x1, y1 = int(math.ceil(box.x2)), int(math.ceil(box.y2))
    out = np.zeros((height, width), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return out
    resized = F.interpolate(torch.as_tensor(prob, dtype=torch.float32)[None, None], size=(y1 - y0, x1 - x0), mode="bilinear", align_corners=False)[0, 0].numpy()
    binary = resized >= threshold
    cols = np.arange(x0, x1) + 0.5
    rows = np.arange(y0, y1) + 0.5
    binary &= ((rows >= box.y) & (rows < box.y2))[:, None] & ((cols >= box.x) & (cols < box.x2))[None, :]
    cy0, cx0 = max(y0, 0), max(x0, 0)
    cy1, cx1 = min(y1, height), min(x1, width)
    if cy1 > cy0 and cx1 > cx0:
        out[cy0:cy1, cx0:cx1] = binary[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    return out


def ap_from_ious(ious: Sequence[float]) -> Dict[str, Any]:
    """
    AP, AP50 and AP75 of a set of instance IoUs
    :param ious: one IoU per instance
    :return: {AP, AP50, AP75, n}
    """
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size == 0:
        return {"AP": None, "AP50": None, "AP75": None, "n": 0}
    at = {t: float(np.mean(ious >= t)) for t in AP_THRESHOLDS}
    return {"AP": float(np.mean(list(at.values()))), "AP50": at[0.5], "AP75": at[0.75], "n": int(ious.size)}


def aggregate(per_category: Mapping[str, Mapping[str, Any]], names: Sequence[str]) -> Dict[str, Any]:
    """
    Unweighted mean over the listed categories that have instances
    """
    vals = [per_category[n] for n in names if n in per_category and per_category[n]["n"] > 0]
    if not vals:
        return {"AP": None, "AP50": None, "AP75": None, "n": 0}
    out = {k: float(np.mean([v[k] for v in vals])) for k in ("AP", "AP50", "AP75")}
    out["n"] = int(sum(v["n"] for v in vals))
    return out


class EvalReport(BaseModel):
    per_category: Dict[str, Dict[str, Any]]  # name -> {AP, AP50, AP75, n, split}
    base: Dict[str, Any]
    novel: Dict[str, Any]
    all: Dict[str, Any]

    __slots__ = ("per_category", "base", "novel", "all")

    def schema(self) -> dict:
        return default_encode(self.dict())

    def dumps(self, indent: int = 2) -> str:
        return json.dumps(self.schema(), indent=indent, sort_keys=True)

    def dump(self, fname: Union[str, TextIOBase], indent: int = 2) -> None:
        if isinstance(fname, TextIOBase):
            fname.write(self.dumps(indent))
        elif isinstance(fname, str):
            with open(fname, "w") as f:
                f.write(self.dumps(indent))
        else:
            raise TypeError("fname is not a valid type")

    @classmethod
    def loads(cls, text: str) -> "EvalReport":
        return cls(json.loads(text))

    @classmethod
    def load(cls, fname: str) -> "EvalReport":
        with open(fname, "r") as f:
            return cls.loads(f.read())

    def table(self) -> str:
        return report_table(self)


def _as_net(state) -> CPMaskNet:
    return state if isinstance(state, CPMaskNet) else state.net


def predict_masks(net: CPMaskNet, sample, boxes: Sequence[Box]) -> np.ndarray:
    """
    Mask probabilities of the given boxes
    :return: N x H_m x H_m
    """
    with torch.no_grad():
        out = net(torch.from_numpy(sample.image_float()), boxes)
        return torch.sigmoid(out["mask_logits"][:, 0]).double().numpy()


def evaluate(state, dataset: SceneDataset, split: str = Splits.ALL, subset: Optional[str] = Subsets.VAL,
             predictions: Optional[Mapping[int, np.ndarray]] = None) -> EvalReport:
    """
    Oracle-box AP per category and over the base, novel and all category sets
    :param state: TrainState or CPMaskNet
    :param dataset: dataset to evaluate
    :param split: categories to evaluate (base, novel or all)
    :param subset: image subset, None for every image
    :param predictions: annotation id -> H x W mask replacing the network prediction
    :return: evaluation report
    :raise DatasetError: no instance of the requested split
    """
    scenes = dataset.subset(subset) if subset else dataset
    cats = set(dataset.category_ids(split))
    net = _as_net(state)
    net.eval()

    ious: Dict[int, List[float]] = {c: [] for c in sorted(cats)}
    for sample in scenes:
        insts = [i for i in sample.instances if i.category_id in cats]
        if not insts:
            continue
        if predictions is None:
            probs = predict_masks(net, sample, [i.box for i in insts])
            preds = [paste_mask(p, i.box, sample.height, sample.width) for p, i in zip(probs, insts)]
        else:
            preds = [np.asarray(predictions[i.annotation_id], dtype=bool) for i in insts]
        for inst, pred in zip(insts, preds):
            ious[inst.category_id].append(mask_iou(pred, inst.mask))

    if sum(len(v) for v in ious.values()) == 0:
        raise DatasetError(f"no {split} instances to evaluate in subset {subset or 'all'}")

    per_category = {}
    for cat, vals in ious.items():
        if vals:
            per_category[dataset.name_of(cat)] = {**ap_from_ious(vals), "split": dataset.split_of(cat)}

    def names(s: str) -> List[str]:
        return [dataset.name_of(c) for c in dataset.category_ids(s)]

    report = EvalReport(
        per_category=per_category,
        base=aggregate(per_category, names(Splits.BASE)),
        novel=aggregate(per_category, names(Splits.NOVEL)),
        all=aggregate(per_category, names(Splits.ALL))
    )
    logger.info("evaluated %d instances: AP %s", sum(v["n"] for v in per_category.values()), report.all["AP"])
    return report
