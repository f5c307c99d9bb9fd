"""
Synthetic shapes with base/novel category splits
"""
from .dataset import Instance, SceneDataset, SceneSample
from .generate import DEFAULT_BASE, DEFAULT_NOVEL, generate_dataset, sample_scene, sample_spec
from .loader import load_dataset, loads_annotations, validate_annotations
from .shapes import ShapeSpec, rasterize_shape
from .textures import render_texture, sample_texture

__all__ = [
    "DEFAULT_BASE",
    "DEFAULT_NOVEL",
    "Instance",
    "SceneDataset",
    "SceneSample",
    "ShapeSpec",
    "generate_dataset",
    "load_dataset",
    "loads_annotations",
    "rasterize_shape",
    "render_texture",
    "sample_scene",
    "sample_spec",
    "sample_texture",
    "validate_annotations"
]
