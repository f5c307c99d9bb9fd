"""
Synthetic scene generator
Base and novel instances draw their textures from the same sampler
"""
import json
import logging
import math
import os

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from typing import (
    Any,
    Dict,
    List,
    Sequence,
    Tuple
)

import inflect
import numpy as np

from PIL import Image

from .dataset import Instance, SceneSample
from .shapes import ShapeSpec, rasterize_shape
from .textures import render_texture, sample_texture
from ..enums import ShapeCategories, Splits, Subsets, TextureKinds
from ..exceptions import DatasetError
from ..maskops import Box, encode_rle, mask_iou
from ..schema import AnnotationFile
from ..utils import default_encode

logger = logging.getLogger(__name__)

GENERATOR_VERSION = "1.0"
DEFAULT_BASE = (ShapeCategories.SQUARE, ShapeCategories.CIRCLE, ShapeCategories.TRIANGLE)
DEFAULT_NOVEL = (ShapeCategories.PENTAGON, ShapeCategories.STAR, ShapeCategories.ELLIPSE)
MAX_INSTANCES = 3
MAX_OVERLAP = 0.2
PLACEMENT_ATTEMPTS = 50
BACKGROUND_TEXTURES = (TextureKinds.GRADIENT, TextureKinds.NOISE_TINT)


def _r(val: float) -> float:
    return round(float(val), 6)


def sample_spec(rng: np.random.Generator, category: str, height: int, width: int) -> ShapeSpec:
    """
    Draw one shape that fits the image
    :param rng: random generator
    :param category: shape category
    :param height: image height
    :param width: image width
    :return: shape spec
    """
    side = min(height, width)
    if category == ShapeCategories.SQUARE:
        scale = rng.uniform(16.0, max(16.0, 0.4 * side))
    else:
        scale = rng.uniform(8.0, max(8.0, 0.22 * side))
    texture, params = sample_texture(rng)
    spec = ShapeSpec(
        category=category,
        center=[0.0, 0.0],
        scale=_r(scale),
        rotation=_r(rng.uniform(0.0, 2 * math.pi)),
        texture=texture,
        texture_params=params,
        base_color=[_r(c) for c in rng.uniform(0.25, 1.0, size=3)]
    )
    r = spec.extent() + 2.0
    if 2 * r > side:
        raise DatasetError(f"{height}x{width} image is too small for a {category} of scale {spec.scale}")
    spec.center = [_r(rng.uniform(r, width - r)), _r(rng.uniform(r, height - r))]
    return spec


def sample_scene(rng: np.random.Generator, categories: Sequence[Tuple[int, str]], height: int, width: int, image_id: int = 0, subset: str = Subsets.TRAIN) -> SceneSample:
    """
    Compose one scene of 1-3 textured shapes on a textured background
    :param rng: random generator owned by this scene
    :param categories: (category_id, category name) pairs to draw from uniformly
    :param height: image height
    :param width: image width
    :param image_id: id stored on the scene
    :param subset: train or val
    :return: scene with visible masks and tight boxes
    """
    n_instances = int(rng.integers(1, MAX_INSTANCES + 1))
    placed: List[Tuple[int, ShapeSpec, np.ndarray]] = []

    for _ in range(n_instances):
        for _attempt in range(PLACEMENT_ATTEMPTS):
            cat_id, cat_name = categories[int(rng.integers(len(categories)))]
            spec = sample_spec(rng, cat_name, height, width)
            full = rasterize_shape(spec, height, width)
            if not full.any():
                continue
            if any(mask_iou(full, other) > MAX_OVERLAP for _, _, other in placed):
                continue
            # later shapes paint over earlier ones, every earlier shape must stay visible
            if any(not (other & ~full & ~_covered_after(placed, i + 1)).any() for i, (_, _, other) in enumerate(placed)):
                continue
            placed.append((cat_id, spec, full))
            break

    bg_kind, bg_params = sample_texture(rng, BACKGROUND_TEXTURES)
    bg_color = [_r(c) for c in rng.uniform(0.0, 0.6, size=3)]
    image = render_texture(bg_kind, bg_params, bg_color, height, width)

    for _, spec, full in placed:
        paint = render_texture(spec.texture, spec.texture_params, spec.base_color, height, width)
        image[full] = paint[full]

    instances = []
    for i, (cat_id, spec, full) in enumerate(placed):
        visible = full & ~_covered_after(placed, i + 1)
        instances.append(Instance(annotation_id=0, category_id=cat_id, mask=visible, box=Box.from_mask(visible), spec=spec))

    return SceneSample(
        image_id=image_id,
        image=np.round(image * 255.0).astype(np.uint8),
        instances=instances,
        background=dict(texture=bg_kind, texture_params=bg_params, base_color=bg_color),
        subset=subset
    )


def _covered_after(placed: List[Tuple[int, ShapeSpec, np.ndarray]], start: int) -> np.ndarray:
    covered = np.zeros_like(placed[0][2]) if placed else None
    for _, _, full in placed[start:]:
        covered |= full
    return covered


def category_table(base_cats: Sequence[str], novel_cats: Sequence[str]) -> List[Dict[str, Any]]:
    """
    Category records, base first, ids from 1
    """
    base_cats, novel_cats = list(base_cats), list(novel_cats)
    if not base_cats or not novel_cats:
        raise DatasetError("base and novel category lists must both be non-empty")
    overlap = set(base_cats) & set(novel_cats)
    if overlap:
        raise DatasetError(f"categories cannot be both base and novel: {', '.join(sorted(overlap))}")
    unknown = [c for c in base_cats + novel_cats if c not in ShapeCategories.values()]
    if unknown:
        raise DatasetError(f"unknown shape categories: {', '.join(unknown)}")
    if len(set(base_cats + novel_cats)) != len(base_cats + novel_cats):
        raise DatasetError("duplicate categories")

    splits = [Splits.BASE] * len(base_cats) + [Splits.NOVEL] * len(novel_cats)
    return [dict(id=i + 1, name=name, split=split) for i, (name, split) in enumerate(zip(base_cats + novel_cats, splits))]


def generate_dataset(seed: int, n_train: int, n_val: int, base_cats: Sequence[str] = DEFAULT_BASE, novel_cats: Sequence[str] = DEFAULT_NOVEL,
                     height: int = 96, width: int = 96, out_dir: str = "data", workers: int = None) -> Dict[str, Any]:
    """
    Write a synthetic dataset: images/*.png, annotations.json, manifest.json
    Each image seeds its own generator from (seed, image index)
    :param seed: dataset seed
    :param n_train: train image count
    :param n_val: val image count
    :param base_cats: mask-annotated categories
    :param novel_cats: held-out categories
    :param height: image height
    :param width: image width
    :param out_dir: output directory
    :param workers: generation threads (default: CPMASK_THREADS or 1)
    :return: manifest
    """
    categories = category_table(base_cats, novel_cats)
    if n_train < 0 or n_val < 0 or n_train + n_val == 0:
        raise DatasetError(f"image counts must be non-negative and not both zero - given {n_train} train, {n_val} val")
    workers = workers or int(os.environ.get("CPMASK_THREADS", "1") or 1)
    cat_pairs = [(c["id"], c["name"]) for c in categories]
    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)

    def build(index: int) -> SceneSample:
        subset = Subsets.TRAIN if index < n_train else Subsets.VAL
        rng = np.random.default_rng([seed, index])
        scene = sample_scene(rng, cat_pairs, height, width, image_id=index, subset=subset)
        Image.fromarray(scene.image).save(os.path.join(image_dir, f"{index:06d}.png"))
        return scene

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        scenes = list(pool.map(build, range(n_train + n_val)))

    images, annotations = [], []
    for scene in scenes:
        images.append(dict(id=scene.image_id, file_name=f"{scene.image_id:06d}.png", height=height, width=width, subset=scene.subset))
        for inst in scene.instances:
            inst.annotation_id = len(annotations) + 1
            annotations.append(dict(
                id=inst.annotation_id,
                image_id=scene.image_id,
                category_id=inst.category_id,
                bbox=inst.box.as_list(),
                segmentation=dict(counts=encode_rle(inst.mask), size=[height, width]),
                shape=inst.spec.record()
            ))

    AnnotationFile(dict(images=images, annotations=annotations, categories=categories)).dump(os.path.join(out_dir, "annotations.json"))

    manifest = dict(
        generator_version=GENERATOR_VERSION,
        seed=seed,
        size=[height, width],
        counts=dict(train=n_train, val=n_val, annotations=len(annotations)),
        splits=dict(
            base=[c["name"] for c in categories if c["split"] == Splits.BASE],
            novel=[c["name"] for c in categories if c["split"] == Splits.NOVEL]
        )
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        f.write(f"{json.dumps(default_encode(manifest), indent=2, sort_keys=True)}\n")

    p = inflect.engine()
    names = {c["id"]: c["name"] for c in categories}
    histogram = Counter(names[a["category_id"]] for a in annotations)
    logger.info("wrote %s and %s to %s", p.no("image", len(images)), p.no("annotation", len(annotations)), out_dir)
    logger.info("category histogram: %s", ", ".join(f"{k}={histogram.get(k, 0)}" for k in names.values()))
    texture_counts = Counter(a["shape"]["texture"] for a in annotations)
    logger.info("texture histogram: %s", ", ".join(f"{k}={texture_counts.get(k, 0)}" for k in sorted(TextureKinds.values())))
    return manifest
