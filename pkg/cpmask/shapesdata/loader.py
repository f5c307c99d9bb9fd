"""
Dataset ingestion
load, validate
"""
import json
import logging
import os

from typing import (
    List,
    Optional,
    Union
)

import numpy as np

from PIL import Image

from .dataset import Instance, SceneDataset, SceneSample
from .shapes import ShapeSpec
from ..exceptions import AnnotationValidationError, DatasetError, MalformedAnnotationError
from ..maskops import Box, decode_rle
from ..schema import AnnotationFile, AnnotationRecord, ImageRecord

logger = logging.getLogger(__name__)

BOX_TOLERANCE = 1.0


def decode_annotation(ann: AnnotationRecord) -> np.ndarray:
    """
    Decode the RLE mask of an annotation
    :param ann: annotation record
    :return: H x W boolean mask
    """
    h, w = ann.segmentation["size"]
    return decode_rle(ann.segmentation["counts"], h, w, annotation_id=ann.id)


def validate_instance(ann: AnnotationRecord, mask: np.ndarray) -> List[Exception]:
    """
    Check a decoded mask against its box
    :param ann: annotation record
    :param mask: decoded mask
    :return: list of errors
    """
    if not mask.any():
        return [AnnotationValidationError(f"annotation {ann.id} decodes to an empty mask", ann.image_id)]
    tight = Box.from_mask(mask)
    x, y, w, h = ann.bbox
    deltas = (x - tight.x, y - tight.y, (x + w) - tight.x2, (y + h) - tight.y2)
    if max(abs(d) for d in deltas) > BOX_TOLERANCE:
        return [AnnotationValidationError(f"annotation {ann.id} bbox {ann.bbox} disagrees with its mask bounds {tight.as_list()}", ann.image_id)]
    return []


def validate_annotations(annotations: AnnotationFile, silent: bool = False) -> Optional[List[Exception]]:
    """
    Validate an annotation file, decoding every mask
    :param annotations: loaded file
    :param silent: bool - raise or return errors
    :return: OPTIONAL(list of errors)
    """
    errors = list(annotations.verify(silent=True) or [])
    for ann in annotations.annotations:
        try:
            errors.extend(validate_instance(ann, decode_annotation(ann)))
        except MalformedAnnotationError as e:
            errors.append(e)

    if errors:
        if silent:
            return errors
        raise errors[0]
    return None


def _load_image(root: str, record: ImageRecord) -> np.ndarray:
    path = os.path.join(root, "images", record.file_name)
    if not os.path.isfile(path):
        raise AnnotationValidationError(f"image file not found - '{path}'", record.id)
    with Image.open(path) as img:
        image = np.asarray(img.convert("RGB"), dtype=np.uint8)
    if image.shape[:2] != (record.height, record.width):
        raise AnnotationValidationError(f"image is {image.shape[1]}x{image.shape[0]}, annotation says {record.width}x{record.height}", record.id)
    return image


def load_dataset(root: str, subset: Optional[str] = None) -> SceneDataset:
    """
    Load a dataset directory (images/, annotations.json, manifest.json)
    :param root: dataset directory
    :param subset: keep only train or val images
    :return: loaded scenes
    """
    ann_path = os.path.join(root, "annotations.json")
    if not os.path.isfile(ann_path):
        raise DatasetError(f"no annotations.json in '{root}'")
    manifest = {}
    manifest_path = os.path.join(root, "manifest.json")
    if os.path.isfile(manifest_path):
        with open(manifest_path, "r") as f:
            manifest = json.load(f)

    annotations = AnnotationFile.load(ann_path)
    annotations.verify()
    by_image = annotations.annotations_by_image()

    samples = []
    for record in annotations.images:
        if subset and record.subset != subset:
            continue
        instances = []
        for ann in by_image.get(record.id, []):
            mask = decode_annotation(ann)
            errors = validate_instance(ann, mask)
            if errors:
                raise errors[0]
            instances.append(Instance(
                annotation_id=ann.id,
                category_id=ann.category_id,
                mask=mask,
                box=Box(ann.bbox),
                spec=ShapeSpec(ann.shape) if ann.shape else None
            ))
        if not instances:
            logger.debug("image %d has no annotations, skipped", record.id)
            continue
        samples.append(SceneSample(
            image_id=record.id,
            image=_load_image(root, record),
            instances=instances,
            subset=record.subset
        ))

    logger.info("loaded %d images from %s", len(samples), root)
    return SceneDataset(samples, annotations.categories, manifest)


def loads_annotations(data: Union[bytes, str, dict]) -> AnnotationFile:
    """
    Parse and validate annotation JSON
    :param data: JSON text or dictionary
    :return: validated annotation file
    """
    annotations = AnnotationFile.loads(data)
    validate_annotations(annotations)
    return annotations
