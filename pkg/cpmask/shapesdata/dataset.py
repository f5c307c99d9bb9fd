"""
In-memory scenes
"""
from typing import (
    Any,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence
)

import numpy as np

from .shapes import ShapeSpec
from ..enums import Splits
from ..exceptions import DatasetError
from ..maskops import Box
from ..schema import CategoryRecord
from ..schema.base import BaseModel


class Instance(BaseModel):
    annotation_id: int
    category_id: int
    mask: np.ndarray            # H x W boolean, visible pixels
    box: Box                    # tight box of mask
    spec: Optional[ShapeSpec]

    _defaults = {"spec": None}

    __slots__ = ("annotation_id", "category_id", "mask", "box", "spec")


class SceneSample(BaseModel):
    image_id: int
    image: np.ndarray           # H x W x 3 uint8
    instances: List[Instance]
    background: Dict[str, Any]  # background texture kind + params
    subset: str

    _defaults = {"background": dict, "subset": "train"}

    __slots__ = ("image_id", "image", "instances", "background", "subset")

    def check_instances(self, val: List[Instance]) -> List[Instance]:
        if len(val) == 0:
            raise ValueError(f"scene {getattr(self, 'image_id', '?')} has no instances")
        return val

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    def image_float(self) -> np.ndarray:
        """
        Image normalized to [0, 1], channels first
        """
        return np.ascontiguousarray(self.image.transpose(2, 0, 1), dtype=np.float32) / 255.0


class SceneDataset:
    """
    Loaded scenes plus their category table
    """
    def __init__(self, samples: Sequence[SceneSample], categories: Sequence[CategoryRecord], manifest: Dict[str, Any] = None):
        self.samples = list(samples)
        self.categories = {c.id: c for c in categories}
        self.manifest = dict(manifest or {})
        self._index = {s.image_id: i for i, s in enumerate(self.samples)}

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[SceneSample]:
        return iter(self.samples)

    def __getitem__(self, idx: int) -> SceneSample:
        return self.samples[idx]

    def by_id(self, image_id: int) -> SceneSample:
        if image_id not in self._index:
            raise DatasetError(f"image {image_id} is not in the dataset")
        return self.samples[self._index[image_id]]

    def category_ids(self, split: str = Splits.ALL) -> List[int]:
        return sorted(c.id for c in self.categories.values() if split == Splits.ALL or c.split == split)

    def split_of(self, category_id: int) -> str:
        return self.categories[category_id].split

    def name_of(self, category_id: int) -> str:
        return self.categories[category_id].name

    def subset(self, name: str) -> "SceneDataset":
        """
        Scenes of one image subset (train or val)
        """
        return SceneDataset([s for s in self.samples if s.subset == name], self.categories.values(), self.manifest)

    def restrict(self, image_ids: Sequence[int]) -> "SceneDataset":
        keep = set(image_ids)
        return SceneDataset([s for s in self.samples if s.image_id in keep], self.categories.values(), self.manifest)

    def instances(self, split: str = Splits.ALL) -> List[Instance]:
        ids = set(self.category_ids(split))
        return [inst for s in self.samples for inst in s.instances if inst.category_id in ids]
