"""
Mask geometry and supervision targets
A BinaryMask is an H x W boolean numpy array
"""
from .boundary import extract_boundary
from .geometry import Box, mask_iou, resample_to_roi, roi_align, roi_align_batch
from .rle import decode_rle, encode_rle
from .targets import RoITargets, make_roi_targets

__all__ = [
    "Box",
    "RoITargets",
    "decode_rle",
    "encode_rle",
    "extract_boundary",
    "make_roi_targets",
    "mask_iou",
    "resample_to_roi",
    "roi_align",
    "roi_align_batch"
]
