"""
CPMask Exceptions
"""
from typing import Optional


class CPMaskException(Exception):
    """
    Base CPMask Exception
    """


class MalformedAnnotationError(CPMaskException):
    """
    Annotation payload cannot be decoded (e.g. RLE counts do not sum to h*w)
    """
    def __init__(self, msg: str, annotation_id: Optional[int] = None):
        self.annotation_id = annotation_id
        prefix = f"annotation {annotation_id}: " if annotation_id is not None else ""
        super(MalformedAnnotationError, self).__init__(f"{prefix}{msg}")


class AnnotationValidationError(CPMaskException):
    """
    Annotation file violates the schema or a box disagrees with its mask
    """
    def __init__(self, msg: str, image_id: Optional[int] = None):
        self.image_id = image_id
        prefix = f"image {image_id}: " if image_id is not None else ""
        super(AnnotationValidationError, self).__init__(f"{prefix}{msg}")


class GeometryError(CPMaskException):
    """
    Degenerate or out-of-image box, or a shape that does not fit its image
    """


class ShapeMismatchError(CPMaskException, ValueError):
    """
    Array arguments that must agree in shape do not
    """


class ConfigError(CPMaskException):
    """
    Invalid training configuration value or config file
    """


class DatasetError(CPMaskException):
    """
    Dataset cannot serve the request (empty split, unknown image, too few shots)
    """


class CheckpointError(CPMaskException):
    """
    Checkpoint has an unknown version or a corrupt/truncated blob
    """


class NonFiniteLossError(CPMaskException):
    """
    Training produced a non-finite loss
    """
    def __init__(self, iteration: int, dump_path: Optional[str] = None):
        self.iteration = iteration
        self.dump_path = dump_path
        where = f", state dumped to {dump_path}" if dump_path else ""
        super(NonFiniteLossError, self).__init__(f"non-finite loss at iteration {iteration}{where}")


class GradientCheckError(CPMaskException):
    """
    Analytic or numeric gradient is not finite
    """
    def __init__(self, param: str, msg: str = "non-finite gradient"):
        self.param = param
        super(GradientCheckError, self).__init__(f"{param}: {msg}")


class OracleError(CPMaskException):
    """
    Brute-force oracle refused its input
    """
