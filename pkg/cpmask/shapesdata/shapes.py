"""
Shape categories and rasterization
Shapes are tested in their own frame: pixel-centre offsets from the shape centre rotated by -rotation
"""
import math

from typing import (
    Any,
    Dict,
    List
)

import numpy as np

from .registry import register_shape, shapes
from ..enums import ShapeCategories, TextureKinds
from ..exceptions import GeometryError
from ..schema.base import BaseModel

MIN_SCALE = 8.0
MARGIN = 2.0


class ShapeBase:
    """
    Implicit shape in its own frame
    """
    name: str = None
    symmetry: int = 1  # rotational symmetry order, 0 = continuous

    def contains(self, u: np.ndarray, v: np.ndarray, scale: float) -> np.ndarray:
        raise NotImplementedError(f"{self.name} does not implement \"contains\"")

    def extent(self, scale: float) -> float:
        """
        Radius of a circle around the centre that holds the shape at any rotation
        """
        return scale

    def reduce_rotation(self, rotation: float) -> float:
        if self.symmetry == 0:
            return 0.0
        return math.fmod(rotation, 2 * math.pi / self.symmetry)


def _inside_polygon(u: np.ndarray, v: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """
    Even-odd crossing test against a closed polygon
    """
    inside = np.zeros(u.shape, dtype=bool)
    for (x1, y1), (x2, y2) in zip(verts, np.roll(verts, -1, axis=0)):
        crosses = (y1 > v) != (y2 > v)
        dy = y2 - y1
        x_cross = x1 + (x2 - x1) * (v - y1) / (dy if dy != 0 else 1.0)
        inside ^= crosses & (u < x_cross)
    return inside


def _star_vertices(points: int, outer: float, inner: float) -> np.ndarray:
    radii = np.where(np.arange(2 * points) % 2 == 0, outer, inner)
    angles = -math.pi / 2 + math.pi * np.arange(2 * points) / points
    return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)


@register_shape
class Square(ShapeBase):
    """
    Side length = scale
    """
    name = ShapeCategories.SQUARE
    symmetry = 4

    def contains(self, u, v, scale):
        half = scale / 2
        return (u >= -half) & (u < half) & (v >= -half) & (v < half)

    def extent(self, scale):
        return scale / math.sqrt(2)


@register_shape
class Circle(ShapeBase):
    """
    Radius = scale
    """
    name = ShapeCategories.CIRCLE
    symmetry = 0

    def contains(self, u, v, scale):
        return u ** 2 + v ** 2 <= scale ** 2


@register_shape
class Ellipse(ShapeBase):
    """
    Semi-major axis = scale, semi-minor = aspect * scale
    """
    name = ShapeCategories.ELLIPSE
    symmetry = 2
    aspect = 0.6

    def contains(self, u, v, scale):
        return (u / scale) ** 2 + (v / (self.aspect * scale)) ** 2 <= 1.0


class RegularPolygon(ShapeBase):
    """
    Circumradius = scale, one vertex pointing up
    """
    def contains(self, u, v, scale):
        angles = -math.pi / 2 + 2 * math.pi * np.arange(self.symmetry) / self.symmetry
        verts = scale * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return _inside_polygon(u, v, verts)


@register_shape
class Triangle(RegularPolygon):
    name = ShapeCategories.TRIANGLE
    symmetry = 3


@register_shape
class Pentagon(RegularPolygon):
    name = ShapeCategories.PENTAGON
    symmetry = 5


@register_shape
class Star(ShapeBase):
    """
    Five-pointed star, outer radius = scale
    """
    name = ShapeCategories.STAR
    symmetry = 5
    inner_ratio = 0.45

    def contains(self, u, v, scale):
        return _inside_polygon(u, v, _star_vertices(5, scale, self.inner_ratio * scale))


class ShapeSpec(BaseModel):
    category: str
    center: List[float]               # (cx, cy) in pixels
    scale: float                      # pixels, see the shape class for its meaning
    rotation: float                   # radians
    texture: str
    texture_params: Dict[str, Any]
    base_color: List[float]           # RGB in [0, 1]

    __slots__ = ("category", "center", "scale", "rotation", "texture", "texture_params", "base_color")

    def check_category(self, val: str) -> str:
        if val not in shapes():
            raise GeometryError(f"unknown shape category - {val}")
        return val

    def check_center(self, val: List[float]) -> List[float]:
        if len(val) != 2:
            raise GeometryError(f"center must be (cx, cy) - given {val}")
        return [float(c) for c in val]

    def check_scale(self, val: float) -> float:
        if val < MIN_SCALE:
            raise GeometryError(f"shape scale must be at least {MIN_SCALE} px - {val}")
        return val

    def check_texture(self, val: str) -> str:
        if val not in TextureKinds.values():
            raise ValueError(f"unknown texture - {val}")
        return val

    def check_base_color(self, val: List[float]) -> List[float]:
        if len(val) != 3:
            raise ValueError(f"base_color must be RGB - given {val}")
        return [float(c) for c in val]

    @property
    def shape(self) -> ShapeBase:
        return shapes()[self.category]

    def extent(self) -> float:
        return self.shape.extent(self.scale)

    def fits(self, height: int, width: int) -> bool:
        cx, cy = self.center
        r = self.extent()
        return cx - r >= MARGIN and cy - r >= MARGIN and cx + r <= width - MARGIN and cy + r <= height - MARGIN

    def record(self) -> Dict[str, Any]:
        return self.dict()


def rasterize_shape(spec: ShapeSpec, height: int, width: int) -> np.ndarray:
    """
    Boolean rasterization by testing pixel centres
    :param spec: shape to draw
    :param height: image height
    :param width: image width
    :return: H x W boolean mask
    """
    if not spec.fits(height, width):
        raise GeometryError(f"{spec.category} at {spec.center} with scale {spec.scale} does not fit a {height}x{width} image with a {MARGIN:g} px margin")

    shape = spec.shape
    rotation = shape.reduce_rotation(spec.rotation)
    cos, sin = math.cos(rotation), math.sin(rotation)
    dy, dx = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    dx -= spec.center[0]
    dy -= spec.center[1]
    if rotation == 0.0:
        u, v = dx, dy
    else:
        u, v = cos * dx + sin * dy, -sin * dx + cos * dy
    return shape.contains(u, v, spec.scale)
