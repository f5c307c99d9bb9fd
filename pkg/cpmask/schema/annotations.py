"""
Annotation File Models
COCO-style subset: images, annotations (bbox + uncompressed RLE), categories with a base/novel split
"""
import json
import os

from io import BufferedIOBase, TextIOBase
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Union
)

from .base import BaseModel
from ..enums import Splits, Subsets
from ..exceptions import AnnotationValidationError
from ..utils import default_encode


class ImageRecord(BaseModel):
    id: int
    file_name: str
    height: int
    width: int
    subset: str

    _defaults = {"subset": Subsets.TRAIN}

    __slots__ = ("id", "file_name", "height", "width", "subset")

    def check_subset(self, val: str) -> str:
        if val not in Subsets.values():
            raise ValueError(f"subset invalid - {val}")
        return val


class AnnotationRecord(BaseModel):
    id: int
    image_id: int
    category_id: int
    bbox: List[float]               # [x, y, w, h]
    segmentation: Dict[str, List[int]]  # {counts: [...], size: [h, w]}
    shape: Optional[Dict[str, Any]]     # generator ShapeSpec, when known

    _defaults = {"shape": None}

    __slots__ = ("id", "image_id", "category_id", "bbox", "segmentation", "shape")

    def check_bbox(self, val: List[float]) -> List[float]:
        if len(val) != 4:
            raise ValueError(f"bbox must have 4 values - given {len(val)}")
        return [float(v) for v in val]

    def check_segmentation(self, val: dict) -> dict:
        if {*val.keys()} != {"counts", "size"}:
            raise ValueError(f"segmentation must have keys counts and size - given {', '.join(val.keys())}")
        if len(val["size"]) != 2:
            raise ValueError("segmentation size must be [h, w]")
        return {"counts": [int(c) for c in val["counts"]], "size": [int(s) for s in val["size"]]}


class CategoryRecord(BaseModel):
    id: int
    name: str
    split: str

    __slots__ = ("id", "name", "split")

    def check_split(self, val: str) -> str:
        if val not in (Splits.BASE, Splits.NOVEL):
            raise ValueError(f"split invalid, must be base or novel - {val}")
        return val


class AnnotationFile(BaseModel):
    images: List[ImageRecord]
    annotations: List[AnnotationRecord]
    categories: List[CategoryRecord]

    __slots__ = ("images", "annotations", "categories")

    def __init__(self, data: Union[dict, "AnnotationFile"] = None, **kwargs):
        data = dict(data.dict() if isinstance(data, AnnotationFile) else (data or {}))
        for key in self.__slots__:
            data.setdefault(key, [])
        try:
            data["images"] = [i if isinstance(i, ImageRecord) else ImageRecord(i) for i in data["images"]]
            data["categories"] = [c if isinstance(c, CategoryRecord) else CategoryRecord(c) for c in data["categories"]]
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationValidationError(f"annotation file improperly formatted - {e}") from e

        annotations = []
        for ann in data["annotations"]:
            try:
                annotations.append(ann if isinstance(ann, AnnotationRecord) else AnnotationRecord(ann))
            except (KeyError, TypeError, ValueError) as e:
                image_id = ann.get("image_id") if isinstance(ann, dict) else None
                raise AnnotationValidationError(f"annotation {ann.get('id', '?')} improperly formatted - {e}", image_id) from e
        data["annotations"] = annotations
        super(AnnotationFile, self).__init__(data, **kwargs)

    def category_ids(self, split: str = Splits.ALL) -> List[int]:
        """
        Category ids belonging to a split
        :param split: base, novel or all
        :return: sorted ids
        """
        return sorted(c.id for c in self.categories if split == Splits.ALL or c.split == split)

    def annotations_by_image(self) -> Dict[int, List[AnnotationRecord]]:
        index = {img.id: [] for img in self.images}
        for ann in self.annotations:
            index.setdefault(ann.image_id, []).append(ann)
        return index

    def schema(self) -> dict:
        """
        Format the file into its JSON layout
        :return: JSON-ready dictionary
        """
        def record(r: BaseModel) -> dict:
            return {k: v for k, v in r.dict().items() if v is not None}

        return default_encode(dict(
            images=[record(i) for i in self.images],
            annotations=[record(a) for a in self.annotations],
            categories=[record(c) for c in self.categories]
        ))

    def verify(self, silent: bool = False) -> Optional[List[Exception]]:
        """
        Verify the cross-references of the file
        :param silent: bool - raise or return errors
        :return: OPTIONAL(list of errors)
        """
        errors = []
        images = {i.id: i for i in self.images}
        categories = {c.id for c in self.categories}

        if len(images) != len(self.images):
            errors.append(AnnotationValidationError("duplicate image ids"))
        if len({a.id for a in self.annotations}) != len(self.annotations):
            errors.append(AnnotationValidationError("duplicate annotation ids"))

        for ann in self.annotations:
            img = images.get(ann.image_id)
            if img is None:
                errors.append(AnnotationValidationError(f"annotation {ann.id} references an unknown image", ann.image_id))
                continue
            if ann.category_id not in categories:
                errors.append(AnnotationValidationError(f"annotation {ann.id} has unknown category {ann.category_id}", img.id))
            if ann.segmentation["size"] != [img.height, img.width]:
                errors.append(AnnotationValidationError(f"annotation {ann.id} size {ann.segmentation['size']} does not match the image", img.id))

        if errors:
            if silent:
                return errors
            raise errors[0]
        return None

    # Load/Dump
    def dumps(self, indent: int = 2) -> str:
        """
        Serialize the file byte-stably
        :param indent: spaces to indent
        :return: JSON text
        """
        return json.dumps(self.schema(), indent=indent, sort_keys=True)

    def dump(self, fname: Union[str, TextIOBase], indent: int = 2) -> None:
        """
        Write the annotation file
        :param fname: file to write to
        :param indent: spaces to indent
        """
        if isinstance(fname, TextIOBase):
            fname.write(f"{self.dumps(indent)}\n")
        elif isinstance(fname, str):
            with open(fname, "w") as f:
                f.write(f"{self.dumps(indent)}\n")
        else:
            raise TypeError("fname is not a valid type")

    @classmethod
    def loads(cls, data: Union[bytes, bytearray, dict, str]) -> "AnnotationFile":
        """
        Load an annotation file from a string
        :param data: JSON text or decoded dictionary
        :return: loaded file
        """
        if isinstance(data, dict):
            return cls(data)
        data = data.decode("utf-8", "backslashreplace") if isinstance(data, (bytes, bytearray)) else data
        try:
            return cls(json.loads(data))
        except json.JSONDecodeError as e:
            raise AnnotationValidationError(f"annotation file is not valid JSON - {e}") from e

    @classmethod
    def load(cls, fname: Union[str, BufferedIOBase, TextIOBase]) -> "AnnotationFile":
        """
        Load an annotation file from disk
        :param fname: path or open file
        :return: loaded file
        """
        if isinstance(fname, (BufferedIOBase, TextIOBase)):
            return cls.loads(fname.read())
        if isinstance(fname, str):
            if not os.path.isfile(fname):
                raise FileNotFoundError(f"Annotation file not found - '{fname}'")
            with open(fname, "rb") as f:
                return cls.loads(f.read())
        raise TypeError("fname is not a valid type")
