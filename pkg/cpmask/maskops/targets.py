"""
Per-RoI supervision targets
"""
import numpy as np

from .boundary import extract_boundary
from .geometry import Box, resample_to_roi
from ..schema.base import BaseModel


class RoITargets(BaseModel):
    mask_target: np.ndarray      # head_res x head_res soft mask (GT_S)
    boundary_target: np.ndarray  # head_res x head_res boolean inner boundary (GT_B)
    fg_indices: np.ndarray       # flat positions of the affinity grid inside the instance
    bg_indices: np.ndarray       # complement of fg_indices

    __slots__ = ("mask_target", "boundary_target", "fg_indices", "bg_indices")

    @property
    def affinity_valid(self) -> bool:
        """
        Both Fg and Bg are non-empty; the affinity loss skips RoIs where this is False
        """
        return self.fg_indices.size > 0 and self.bg_indices.size > 0

    def fg_mask(self) -> np.ndarray:
        """
        Boolean indicator of Fg over the flattened affinity grid
        """
        ind = np.zeros(self.fg_indices.size + self.bg_indices.size, dtype=bool)
        ind[self.fg_indices] = True
        return ind


def make_roi_targets(mask: np.ndarray, box: Box, head_res: int, affinity_res: int, fg_threshold: float = 0.5, boundary_width: int = 1) -> RoITargets:
    """
    Build GT_S, GT_B and the Fg/Bg partition for one RoI
    :param mask: H x W instance mask
    :param box: RoI box in image coordinates
    :param head_res: mask/boundary output resolution H_m
    :param affinity_res: affinity grid resolution h
    :param fg_threshold: area fraction at which an affinity cell counts as foreground
    :param boundary_width: boundary width in head pixels
    :return: RoI targets
    """
    if not 0 < fg_threshold < 1:
        raise ValueError(f"fg_threshold must be in (0, 1) - {fg_threshold}")
    mask = np.asarray(mask, dtype=np.float64)
    mask_target = resample_to_roi(mask, box, head_res)
    fg = (resample_to_roi(mask, box, affinity_res) >= fg_threshold).ravel()

    return RoITargets(
        mask_target=mask_target.astype(np.float32),
        boundary_target=extract_boundary(mask_target, 0.5, boundary_width),
        fg_indices=np.flatnonzero(fg),
        bg_indices=np.flatnonzero(~fg)
    )
