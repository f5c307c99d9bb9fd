from .annotations import AnnotationFile, AnnotationRecord, CategoryRecord, ImageRecord
from .base import BaseModel
from .config import TrainConfig

__all__ = [
    "AnnotationFile",
    "AnnotationRecord",
    "BaseModel",
    "CategoryRecord",
    "ImageRecord",
    "TrainConfig"
]
