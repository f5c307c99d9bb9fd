"""
Texture pool shared by every category
"""
import math

from typing import (
    Any,
    Dict,
    Sequence,
    Tuple
)

import numpy as np

from .registry import register_texture, textures
from ..enums import TextureKinds


class TextureBase:
    name: str = None

    def sample_params(self, rng: np.random.Generator) -> Dict[str, Any]:
        raise NotImplementedError(f"{self.name} does not implement \"sample_params\"")

    def pattern(self, params: Dict[str, Any], height: int, width: int) -> np.ndarray:
        """
        H x W x 3 multiplicative or additive modulation in roughly [-1, 1]
        """
        raise NotImplementedError(f"{self.name} does not implement \"pattern\"")

    def render(self, params: Dict[str, Any], base_color: Sequence[float], height: int, width: int) -> np.ndarray:
        color = np.asarray(base_color, dtype=np.float64)[None, None, :]
        return np.clip(color * (1.0 + self.pattern(params, height, width)), 0.0, 1.0)


def _coords(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    y, x = np.mgrid[0:height, 0:width].astype(np.float64) + 0.5
    return x, y


def _round(params: Dict[str, float]) -> Dict[str, float]:
    return {k: (round(float(v), 6) if isinstance(v, float) else v) for k, v in params.items()}


@register_texture
class Stripes(TextureBase):
    name = TextureKinds.STRIPES

    def sample_params(self, rng):
        return _round(dict(period=rng.uniform(4.0, 10.0), angle=rng.uniform(0.0, math.pi), contrast=rng.uniform(0.3, 0.6)))

    def pattern(self, params, height, width):
        x, y = _coords(height, width)
        proj = x * math.cos(params["angle"]) + y * math.sin(params["angle"])
        dark = np.sin(2 * math.pi * proj / params["period"]) > 0
        return np.repeat((-params["contrast"] * dark)[..., None], 3, axis=2)


@register_texture
class Dots(TextureBase):
    name = TextureKinds.DOTS

    def sample_params(self, rng):
        return _round(dict(spacing=rng.uniform(5.0, 10.0), radius=rng.uniform(1.0, 2.5), contrast=rng.uniform(0.3, 0.6)))

    def pattern(self, params, height, width):
        x, y = _coords(height, width)
        s = params["spacing"]
        du = np.mod(x, s) - s / 2
        dv = np.mod(y, s) - s / 2
        dot = du ** 2 + dv ** 2 <= params["radius"] ** 2
        return np.repeat((-params["contrast"] * dot)[..., None], 3, axis=2)


@register_texture
class NoiseTint(TextureBase):
    name = TextureKinds.NOISE_TINT

    def sample_params(self, rng):
        tint = rng.uniform(-0.15, 0.15, size=3)
        return _round(dict(amplitude=rng.uniform(0.05, 0.2), noise_seed=int(rng.integers(0, 2 ** 31)),
                           tint_r=tint[0], tint_g=tint[1], tint_b=tint[2]))

    def pattern(self, params, height, width):
        noise = np.random.default_rng(params["noise_seed"]).uniform(-1.0, 1.0, size=(height, width, 1))
        tint = np.asarray([params["tint_r"], params["tint_g"], params["tint_b"]])[None, None, :]
        return params["amplitude"] * noise + tint


@register_texture
class Gradient(TextureBase):
    name = TextureKinds.GRADIENT

    def sample_params(self, rng):
        return _round(dict(angle=rng.uniform(0.0, 2 * math.pi), strength=rng.uniform(0.3, 0.7)))

    def pattern(self, params, height, width):
        x, y = _coords(height, width)
        proj = (x - width / 2) * math.cos(params["angle"]) + (y - height / 2) * math.sin(params["angle"])
        ramp = proj / max(height, width)
        return np.repeat((params["strength"] * ramp)[..., None], 3, axis=2)


def sample_texture(rng: np.random.Generator, kinds: Sequence[str] = None) -> Tuple[str, Dict[str, Any]]:
    """
    Draw a texture kind and its parameters from the shared pool
    :param rng: random generator
    :param kinds: restrict to these kinds (default: every registered texture)
    :return: (kind, params)
    """
    kinds = sorted(kinds or textures().keys())
    kind = kinds[int(rng.integers(len(kinds)))]
    return kind, textures()[kind].sample_params(rng)


def render_texture(kind: str, params: Dict[str, Any], base_color: Sequence[float], height: int, width: int) -> np.ndarray:
    """
    Paint a full-image texture
    :return: H x W x 3 in [0, 1]
    """
    return textures()[kind].render(params, base_color, height, width)
