"""
Uncompressed column-major RLE (COCO style)
Counts alternate background/foreground runs, starting with background
"""
from typing import List, Optional, Sequence

import numpy as np

from ..exceptions import MalformedAnnotationError


def encode_rle(mask: np.ndarray) -> List[int]:
    """
    Encode a binary mask as run-length counts
    :param mask: H x W boolean grid
    :return: counts list
    """
    flat = np.asarray(mask, dtype=bool).ravel(order="F")
    if flat.size == 0:
        return [0]
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    return [0, *counts] if flat[0] else counts


def decode_rle(counts: Sequence[int], h: int, w: int, annotation_id: Optional[int] = None) -> np.ndarray:
    """
    Decode run-length counts into a binary mask
    :param counts: counts list
    :param h: mask height
    :param w: mask width
    :param annotation_id: reported on malformed counts
    :return: H x W boolean grid
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or (counts < 0).any():
        raise MalformedAnnotationError("RLE counts must be a flat list of non-negative integers", annotation_id)
    if int(counts.sum()) != h * w:
        raise MalformedAnnotationError(f"RLE counts sum to {int(counts.sum())}, expected {h * w} for a {h}x{w} mask", annotation_id)
    values = np.arange(counts.size) % 2 == 1
    return np.repeat(values, counts).reshape((h, w), order="F")
