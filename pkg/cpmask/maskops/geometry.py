"""
Boxes, IoU, area resampling and RoIAlign
Continuous coordinates put pixel (i, j) on [j, j+1) x [i, i+1), so its centre is at (j + 0.5, i + 0.5)
"""
import math

from typing import (
    List,
    Sequence,
    Tuple,
    Union
)

import numpy as np
import torch

from ..exceptions import GeometryError, ShapeMismatchError
from ..schema.base import BaseModel

Tensor = Union[np.ndarray, torch.Tensor]


class Box(BaseModel):
    x: float  # left edge
    y: float  # top edge
    w: float
    h: float

    __slots__ = ("x", "y", "w", "h")

    def __init__(self, *args, **kwargs):
        if len(args) == 4:
            args = (list(args), )
        super(Box, self).__init__(*args, **kwargs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Box) and self.as_list() == other.as_list()

    def __hash__(self) -> int:
        return hash(tuple(self.as_list()))

    def check_w(self, val: float) -> float:
        if not (math.isfinite(val) and val > 0):
            raise GeometryError(f"box width must be positive - {val}")
        return val

    def check_h(self, val: float) -> float:
        if not (math.isfinite(val) and val > 0):
            raise GeometryError(f"box height must be positive - {val}")
        return val

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Box":
        """
        Tight pixel box of a mask
        :param mask: boolean grid with at least one foreground pixel
        :return: box covering the foreground pixels
        """
        rows = np.flatnonzero(np.asarray(mask).any(axis=1))
        cols = np.flatnonzero(np.asarray(mask).any(axis=0))
        if rows.size == 0:
            raise GeometryError("empty mask has no bounding box")
        return cls(cols[0], rows[0], cols[-1] - cols[0] + 1, rows[-1] - rows[0] + 1)

    def as_list(self) -> List[float]:
        return [self.x, self.y, self.w, self.h]

    def scale(self, factor: float) -> "Box":
        return Box(self.x * factor, self.y * factor, self.w * factor, self.h * factor)

    def intersects(self, height: int, width: int) -> bool:
        return self.x < width and self.x2 > 0 and self.y < height and self.y2 > 0

    def validate(self, height: int, width: int) -> "Box":
        """
        Check the box overlaps an image of the given size
        :param height: image height
        :param width: image width
        :return: the box
        """
        if not self.intersects(height, width):
            raise GeometryError(f"box {self.as_list()} does not intersect the {height}x{width} image")
        return self

    def clip(self, height: int, width: int) -> "Box":
        x1, y1 = max(self.x, 0.0), max(self.y, 0.0)
        x2, y2 = min(self.x2, float(width)), min(self.y2, float(height))
        return Box(x1, y1, x2 - x1, y2 - y1)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """
    Intersection over union of two binary masks, 1 when both are empty
    :param a: boolean grid
    :param b: boolean grid of the same shape
    :return: IoU in [0, 1]
    """
    a, b = np.asarray(a, dtype=bool), np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mask shapes differ - {a.shape} and {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _area_weights(start: float, length: float, out: int, size: int) -> np.ndarray:
    """
    Row i holds the overlap of output cell i with each input pixel, divided by the cell length
    """
    edges = start + length * np.arange(out + 1) / out
    pix = np.arange(size)
    lo = np.maximum(edges[:-1, None], pix[None, :])
    hi = np.minimum(edges[1:, None], pix[None, :] + 1)
    return np.clip(hi - lo, 0, None) / (length / out)


def resample_to_roi(grid: np.ndarray, box: Box, out: int) -> np.ndarray:
    """
    Area-weighted average of an image-resolution grid over out x out cells of the box
    Area outside the image counts as 0
    :param grid: H x W real grid with values in [0, 1]
    :param box: box in image coordinates
    :param out: output resolution
    :return: out x out grid
    """
    grid = np.asarray(grid, dtype=np.float64)
    height, width = grid.shape
    box.validate(height, width)
    wy = _area_weights(box.y, box.h, out, height)
    wx = _area_weights(box.x, box.w, out, width)
    return np.clip(wy @ grid @ wx.T, 0.0, 1.0)


def _bilinear_weights(start: float, length: float, out: int, size: int) -> np.ndarray:
    """
    Row i interpolates the sample at the centre of output cell i; samples past the
    outermost pixel centres extrapolate from the two nearest cells
    """
    weights = np.zeros((out, size))
    if size == 1:
        weights[:, 0] = 1.0
        return weights
    u = start + (np.arange(out) + 0.5) * length / out - 0.5
    i0 = np.clip(np.floor(u), 0, size - 2).astype(np.int64)
    t = u - i0
    rows = np.arange(out)
    weights[rows, i0] = 1.0 - t
    weights[rows, i0 + 1] += t
    return weights


def roi_align_weights(box: Box, out: int, height: int, width: int, spatial_scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Separable sampling matrices of one box
    :return: (out x height, out x width)
    """
    box = box.scale(spatial_scale) if spatial_scale != 1.0 else box
    box.validate(height, width)
    return _bilinear_weights(box.y, box.h, out, height), _bilinear_weights(box.x, box.w, out, width)


def roi_align(features: Tensor, box: Box, out: int, spatial_scale: float = 1.0) -> Tensor:
    """
    Bilinear RoIAlign, one sample at the centre of each output cell
    :param features: c x H x W feature map (numpy or torch, gradients flow through torch inputs)
    :param box: box, multiplied by spatial_scale into feature coordinates
    :param out: output resolution
    :param spatial_scale: image-to-feature scale (1 / stride)
    :return: c x out x out, same array type as the input
    """
    return_numpy = isinstance(features, np.ndarray)
    feats = torch.as_tensor(features)
    crops = roi_align_batch(feats, [box], out, spatial_scale)[0]
    return crops.numpy() if return_numpy else crops


def roi_align_batch(features: torch.Tensor, boxes: Sequence[Box], out: int, spatial_scale: float = 1.0) -> torch.Tensor:
    """
    RoIAlign of several boxes over one feature map
    :param features: c x H x W tensor
    :param boxes: boxes in image coordinates
    :param out: output resolution
    :param spatial_scale: image-to-feature scale
    :return: N x c x out x out
    """
    if features.dim() != 3:
        raise ShapeMismatchError(f"features must be c x H x W - given {tuple(features.shape)}")
    _, height, width = features.shape
    wy, wx = zip(*(roi_align_weights(b, out, height, width, spatial_scale) for b in boxes))
    wy = torch.as_tensor(np.stack(wy), dtype=features.dtype)
    wx = torch.as_tensor(np.stack(wx), dtype=features.dtype)
    return torch.einsum("noh,chw,npw->ncop", wy, features, wx)
