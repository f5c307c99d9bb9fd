"""
Boundary, affinity and mask-overlay heatmaps
Values are min-max normalized over all RoIs of an image, then colored with viridis (low blue, high yellow)
"""
import logging
import os

import matplotlib
import numpy as np
import torch
import torch.nn.functional as F

from PIL import Image
from typing import (
    Dict,
    List,
    Optional
)

from .metrics import MASK_THRESHOLD, paste_mask
from ..enums import HeatmapKinds
from ..maskops import make_roi_targets
from ..net import CPMaskNet
from ..shapesdata import SceneDataset, SceneSample

logger = logging.getLogger(__name__)

UPSCALE = 8
OVERLAY_COLOR = np.array([255, 64, 32], dtype=np.float64)


def affinity_heatmap(A: np.ndarray, fg_indices: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Mean of the affinity rows of the foreground pixels, as an h x w grid
    :param A: hw x hw affinity
    :param fg_indices: flat foreground rows, every row when empty
    :return: h x w heatmap
    """
    A = np.asarray(A, dtype=np.float64)
    rows = A[np.asarray(fg_indices, dtype=np.int64)] if len(fg_indices) else A
    return rows.mean(axis=0).reshape(height, width)


def minmax(values: np.ndarray, lo: Optional[float] = None, hi: Optional[float] = None) -> np.ndarray:
    """
    Scale to [0, 1]; a flat map becomes all zeros
    :param values: map to scale
    :param lo: value mapped to 0, the map minimum by default
    :param hi: value mapped to 1, the map maximum by default
    """
    values = np.asarray(values, dtype=np.float64)
    lo = values.min() if lo is None else lo
    hi = values.max() if hi is None else hi
    return (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)


def normalize_per_image(maps: List[Dict[str, np.ndarray]]) -> List[Dict[str, np.ndarray]]:
    """
    Min-max scale the boundary and affinity maps of one image with a range shared by its RoIs
    :param maps: heatmap_values output
    :return: per RoI {boundary, affinity} in [0, 1]
    """
    scaled = [{} for _ in maps]
    for kind in (HeatmapKinds.BOUNDARY, HeatmapKinds.AFFINITY):
        lo = min(float(m[kind].min()) for m in maps)
        hi = max(float(m[kind].max()) for m in maps)
        for out, m in zip(scaled, maps):
            out[kind] = minmax(m[kind], lo, hi)
    return scaled


def colorize(values: np.ndarray, upscale: int = UPSCALE) -> np.ndarray:
    """
    Viridis RGB image of a [0, 1] map, enlarged by nearest neighbour
    """
    rgb = matplotlib.colormaps["viridis"](np.clip(values, 0, 1))[..., :3]
    rgb = (rgb * 255).round().astype(np.uint8)
    return np.kron(rgb, np.ones((upscale, upscale, 1), dtype=np.uint8)) if upscale > 1 else rgb


def overlay(image: np.ndarray, mask: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    out = image.astype(np.float64)
    out[mask] = (1 - alpha) * out[mask] + alpha * OVERLAY_COLOR
    return out.round().astype(np.uint8)


def heatmap_values(net: CPMaskNet, sample: SceneSample) -> List[Dict[str, np.ndarray]]:
    """
    Raw (pre-normalization) heatmaps of every instance of a scene on its GT box
    Disabled modules are still evaluated with their current weights
    :return: per RoI {boundary: H_m x H_m, affinity: h x w, mask: H x W bool}
    """
    net.eval()
    boxes = [inst.box for inst in sample.instances]
    with torch.no_grad():
        out = net(torch.from_numpy(sample.image_float()), boxes)
        boundary_logits = out["boundary_logits"]
        if boundary_logits is None:
            boundary_logits = net.boundary_forward(out["X"])[0]
        A = out["A"] if out["A"] is not None else net.compute_affinity(out["C"])
        mask_prob = torch.sigmoid(out["mask_logits"])
        low_res = F.avg_pool2d(mask_prob, 2)

    h = w = net.roi_size
    maps = []
    for i, inst in enumerate(sample.instances):
        fg = make_roi_targets(inst.mask, boxes[i], net.mask_size, net.roi_size).fg_indices
        if fg.size == 0:
            fg = np.flatnonzero(low_res[i, 0].numpy().ravel() >= MASK_THRESHOLD)
            logger.debug("image %d roi %d: no GT foreground on the affinity grid, using the predicted mask", sample.image_id, i)
        maps.append({
            HeatmapKinds.BOUNDARY: torch.sigmoid(boundary_logits[i, 0]).double().numpy(),
            HeatmapKinds.AFFINITY: affinity_heatmap(A[i].double().numpy(), fg, h, w),
            "mask": paste_mask(mask_prob[i, 0].numpy(), boxes[i], sample.height, sample.width)
        })
    return maps


def emit_heatmaps(state, dataset: SceneDataset, image_id: int, out_dir: str, upscale: int = UPSCALE) -> List[str]:
    """
    Write {image}_{roi}_{kind}.png for the boundary, affinity and overlay heatmaps of every RoI
    Boundary and affinity maps share one color scale per kind across the RoIs of the image
    :param state: TrainState or CPMaskNet
    :param dataset: dataset holding the image
    :param image_id: image to visualize
    :param out_dir: output directory, created if missing
    :param upscale: nearest-neighbour enlargement of the RoI heatmaps
    :return: written paths
    :raise DatasetError: unknown image id
    """
    net = state if isinstance(state, CPMaskNet) else state.net
    sample = dataset.by_id(image_id)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    values = heatmap_values(net, sample)
    for roi, (maps, scaled) in enumerate(zip(values, normalize_per_image(values))):
        images = {
            HeatmapKinds.BOUNDARY: colorize(scaled[HeatmapKinds.BOUNDARY], upscale),
            HeatmapKinds.AFFINITY: colorize(scaled[HeatmapKinds.AFFINITY], upscale),
            HeatmapKinds.OVERLAY: overlay(sample.image, maps["mask"])
        }
        for kind, img in images.items():
            path = os.path.join(out_dir, f"{image_id}_{roi}_{kind}.png")
            Image.fromarray(img).save(path)
            paths.append(path)
    logger.info("wrote %d heatmaps for image %d to %s", len(paths), image_id, out_dir)
    return paths
