"""
Mask-branch supervision terms and their weighted total
"""
import logging

import numpy as np
import torch
import torch.nn.functional as F

from typing import (
    Any,
    Dict,
    Optional,
    Sequence,
    Tuple,
    Union
)

from ..enums import NormalizeModes
from ..exceptions import ShapeMismatchError
from ..schema.base import BaseModel

logger = logging.getLogger(__name__)
Target = Union[np.ndarray, torch.Tensor]


class LossWeights(BaseModel):
    """
    lambda weights of the total loss; detection is recorded but has no term here
    """
    detection: float
    boundary: float
    affinity: float
    segment: float

    __slots__ = ("detection", "boundary", "affinity", "segment")
    _defaults = {"detection": 1.0, "boundary": 0.5, "affinity": 0.5, "segment": 1.0}

    def __setattr__(self, key: str, val: Any) -> None:
        if key in self.__slots__ and isinstance(val, (int, float)) and val < 0:
            raise ValueError(f"loss weight {key} must be >= 0 - {val}")
        super(LossWeights, self).__setattr__(key, val)

    @classmethod
    def from_config(cls, config) -> "LossWeights":
        return cls(config.loss_weights)


class LossReport(BaseModel):
    boundary: float
    affinity: float
    segment: float
    total: float
    n_rois_affinity: int
    n_rois_mask: int
    objective: Optional[torch.Tensor]  # differentiable total, None when nothing contributed

    __slots__ = ("boundary", "affinity", "segment", "total", "n_rois_affinity", "n_rois_mask", "objective")
    _defaults = {"objective": None}

    def record(self) -> Dict[str, Any]:
        """
        JSON-safe view for the training log
        """
        return {k: v for k, v in self.items() if k != "objective"}


class RoILossTerms(BaseModel):
    """
    Loss terms of one RoI; a term is None when the RoI does not contribute to it
    """
    boundary: Optional[torch.Tensor]
    affinity: Optional[torch.Tensor]
    segment: Optional[torch.Tensor]

    __slots__ = ("boundary", "affinity", "segment")
    _defaults = {"boundary": None, "affinity": None, "segment": None}

    @property
    def supervised(self) -> bool:
        return self.segment is not None


def _bce(logits: torch.Tensor, target: Target) -> torch.Tensor:
    target = torch.as_tensor(target).to(logits.dtype)
    if logits.numel() != target.numel() or tuple(logits.shape[-2:]) != tuple(target.shape[-2:]):
        raise ShapeMismatchError(f"logits {tuple(logits.shape)} and target {tuple(target.shape)} differ")
    return F.binary_cross_entropy_with_logits(logits, target.reshape(logits.shape))


def boundary_loss(logits: torch.Tensor, target: Target) -> torch.Tensor:
    """
    Mean binary cross-entropy of the boundary logits against GT_B
    :param logits: (1 x) H_m x H_m
    :param target: H_m x H_m boolean/float boundary target
    :return: scalar tensor
    """
    return _bce(logits, target)


def segment_loss(mask_logits: torch.Tensor, mask_target: Target) -> torch.Tensor:
    """
    Mean binary cross-entropy of the mask logits against the soft mask target
    :param mask_logits: (1 x) H_m x H_m
    :param mask_target: H_m x H_m values in [0, 1]
    :return: scalar tensor
    """
    return _bce(mask_logits, mask_target)


def affinity_sums(A: torch.Tensor, fg_indices: Target, bg_indices: Target, normalize_mode: str = NormalizeModes.ROW) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Foreground-foreground and foreground-background affinity mass
    :return: (s_fg, s_bg), divided by |Fg| in row mode
    """
    fg = torch.as_tensor(np.asarray(fg_indices), dtype=torch.long)
    bg = torch.as_tensor(np.asarray(bg_indices), dtype=torch.long)
    rows = A.index_select(0, fg)
    s_fg = rows.index_select(1, fg).sum()
    s_bg = rows.index_select(1, bg).sum()
    if normalize_mode == NormalizeModes.ROW:
        return s_fg / fg.numel(), s_bg / fg.numel()
    return s_fg, s_bg


def affinity_loss(A: torch.Tensor, fg_indices: Target, bg_indices: Target, normalize_mode: str = NormalizeModes.ROW) -> torch.Tensor:
    """
    L1 pull of the Fg-Fg affinity mass to 1 and the Fg-Bg mass to 0
    :param A: hw x hw post-softmax affinity
    :param fg_indices: flat foreground positions
    :param bg_indices: flat background positions
    :param normalize_mode: row or global, must match how A was normalized
    :return: scalar tensor, 0 when Fg or Bg is empty
    """
    if len(fg_indices) == 0 or len(bg_indices) == 0:
        return A.new_zeros(())
    s_fg, s_bg = affinity_sums(A, fg_indices, bg_indices, normalize_mode)
    return (1 - s_fg).abs() + s_bg.abs()


def roi_loss_terms(out: Dict[str, Optional[torch.Tensor]], targets: Sequence, supervised: Sequence[bool], normalize_mode: str = NormalizeModes.ROW, use_affinity_loss: bool = True) -> Sequence[RoILossTerms]:
    """
    Per-RoI terms of a batched forward
    Unsupervised RoIs get no terms at all, so nothing they produced enters the graph
    :param out: batched forward output (see CPMaskNet.forward_rois)
    :param targets: RoITargets per RoI
    :param supervised: whether each RoI receives mask-branch supervision
    :param normalize_mode: affinity normalization of the forward pass
    :param use_affinity_loss: include the affinity term
    :return: list of RoILossTerms
    """
    terms = []
    for i, (tgt, sup) in enumerate(zip(targets, supervised)):
        if not sup:
            terms.append(RoILossTerms())
            continue
        bl = None if out.get("boundary_logits") is None else boundary_loss(out["boundary_logits"][i], tgt.boundary_target)
        al = None
        if use_affinity_loss and out.get("A") is not None and tgt.affinity_valid:
            al = affinity_loss(out["A"][i], tgt.fg_indices, tgt.bg_indices, normalize_mode)
        terms.append(RoILossTerms(boundary=bl, affinity=al, segment=segment_loss(out["mask_logits"][i], tgt.mask_target)))
    return terms


def _mean(values: Sequence[torch.Tensor]) -> Optional[torch.Tensor]:
    return torch.stack(list(values)).mean() if values else None


def total_loss(terms: Sequence[RoILossTerms], weights: LossWeights = None) -> LossReport:
    """
    Per-term means over contributing RoIs combined with the lambda weights
    :param terms: per-RoI loss terms
    :param weights: loss weights, defaults {1, 0.5, 0.5, 1}
    :return: loss report; objective is None and every value 0 without contributors
    """
    if len(terms) == 0:
        raise ValueError("total_loss needs at least one RoI")
    weights = weights or LossWeights()
    means = {
        k: _mean([getattr(t, k) for t in terms if getattr(t, k) is not None])
        for k in ("boundary", "affinity", "segment")
    }
    n_mask = sum(1 for t in terms if t.supervised)
    n_aff = sum(1 for t in terms if t.affinity is not None)

    objective = None
    for k, v in means.items():
        if v is not None:
            term = getattr(weights, k) * v
            objective = term if objective is None else objective + term
    if objective is None:
        logger.debug("no RoI contributes to the mask branch loss")

    def val(t: Optional[torch.Tensor]) -> float:
        return 0.0 if t is None else float(t.detach())

    return LossReport(
        boundary=val(means["boundary"]),
        affinity=val(means["affinity"]),
        segment=val(means["segment"]),
        total=val(objective),
        n_rois_affinity=n_aff,
        n_rois_mask=n_mask,
        objective=objective
    )
