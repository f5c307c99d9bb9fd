"""
Boundary ground truth from masks
"""
import numpy as np

from scipy import ndimage

# 4-connectivity
_CROSS = ndimage.generate_binary_structure(2, 1)


def extract_boundary(mask: np.ndarray, threshold: float = 0.5, width: int = 1) -> np.ndarray:
    """
    Inner 4-connected boundary of a (soft) mask
    A pixel is boundary iff it is foreground and a 4-neighbour is background;
    pixels outside the grid count as background. The ring is then grown
    (width - 1) times, never leaving the foreground.
    :param mask: grid with values in [0, 1]
    :param threshold: binarization threshold (value >= threshold is foreground)
    :param width: boundary width in pixels
    :return: boolean grid, a subset of the binarized mask
    """
    if width < 1:
        raise ValueError(f"boundary width must be at least 1 - {width}")

    fg = np.asarray(mask) >= threshold
    edge = fg & ~ndimage.binary_erosion(fg, structure=_CROSS, border_value=0)
    if width > 1 and edge.any():
        edge = ndimage.binary_dilation(edge, structure=_CROSS, iterations=width - 1, mask=fg)
    return edge
