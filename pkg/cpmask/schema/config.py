"""
Training configuration
"""
import logging
import os

from io import TextIOBase
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Union
)

from .base import BaseModel
from ..enums import NormalizeModes, SupervisionModes
from ..exceptions import ConfigError
from ..utils import check_values

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    supervision_mode: str       # full | partial | fewshot
    shots: int                  # samples per novel category (fewshot only)
    base_categories: int        # mask-supervised base categories, first k by id, 0 for all
    lr: float                   # learning rate after warmup
    momentum: float             # SGD momentum
    batch_images: int           # images per iteration
    warmup_iters: int           # constant warmup length
    warmup_factor: float        # lr multiplier held during warmup
    total_iters: int            # training iterations
    lambda_detection: float     # recorded only, no detection branch
    lambda_boundary: float
    lambda_affinity: float
    lambda_segment: float
    channels: int               # c
    roi_size: int               # h = w of the affinity grid
    mask_size: int              # H_m
    normalize_mode: str         # row | global
    use_boundary: bool          # Boundary-Parsing Module
    use_fusion: bool            # boundary probability fused into the head
    use_affinity: bool          # Non-local Affinity-Parsing Module
    use_affinity_loss: bool     # supervise the affinity matrix
    boundary_width: int
    fg_threshold: float
    box_jitter: float           # uniform jitter fraction per box coordinate
    finetune_iters: int
    finetune_lr: float
    seed: int
    log_every: int

    _defaults: Dict[str, Any] = {
        "supervision_mode": SupervisionModes.PARTIAL,
        "shots": 10,
        "base_categories": 0,
        "lr": 0.005,
        "momentum": 0.9,
        "batch_images": 8,
        "warmup_iters": 100,
        "warmup_factor": 0.1,
        "total_iters": 3000,
        "lambda_detection": 1.0,
        "lambda_boundary": 0.5,
        "lambda_affinity": 0.5,
        "lambda_segment": 1.0,
        "channels": 64,
        "roi_size": 14,
        "mask_size": 28,
        "normalize_mode": NormalizeModes.ROW,
        "use_boundary": True,
        "use_fusion": True,
        "use_affinity": True,
        "use_affinity_loss": True,
        "boundary_width": 1,
        "fg_threshold": 0.5,
        "box_jitter": 0.05,
        "finetune_iters": 500,
        "finetune_lr": 0.001,
        "seed": 0,
        "log_every": 50,
    }

    __slots__ = ("supervision_mode", "shots", "base_categories", "lr", "momentum", "batch_images", "warmup_iters", "warmup_factor",
                 "total_iters", "lambda_detection", "lambda_boundary", "lambda_affinity", "lambda_segment",
                 "channels", "roi_size", "mask_size", "normalize_mode", "use_boundary", "use_fusion",
                 "use_affinity", "use_affinity_loss", "boundary_width", "fg_threshold", "box_jitter",
                 "finetune_iters", "finetune_lr", "seed", "log_every")

    def __init__(self, data: Union[dict, "TrainConfig"] = None, **kwargs):
        try:
            super(TrainConfig, self).__init__(data, **kwargs)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
        self.verify()

    def __eq__(self, other: Any) -> bool:
        return isinstance(other, TrainConfig) and self.dict() == other.dict()

    def __setattr__(self, key: str, val: Any) -> None:
        try:
            super(TrainConfig, self).__setattr__(key, val)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{key}: {e}") from e

    def replace(self, **kwargs) -> "TrainConfig":
        """
        Copy this config with the given fields overridden
        :param kwargs: fields to override
        :return: new validated config
        """
        return TrainConfig({**self.dict(), **kwargs})

    @property
    def loss_weights(self) -> Dict[str, float]:
        return dict(
            detection=self.lambda_detection,
            boundary=self.lambda_boundary,
            affinity=self.lambda_affinity,
            segment=self.lambda_segment
        )

    # Validation functions
    def check_supervision_mode(self, val: str) -> str:
        if val not in SupervisionModes.values():
            raise ConfigError(f"supervision_mode invalid, must be one of {', '.join(SupervisionModes.values())} - given {val}")
        return val

    def check_normalize_mode(self, val: str) -> str:
        if val not in NormalizeModes.values():
            raise ConfigError(f"normalize_mode invalid, must be one of {', '.join(NormalizeModes.values())} - given {val}")
        return val

    def check_shots(self, val: int) -> int:
        if val < 1:
            raise ConfigError(f"shots invalid, must be at least 1 - {val}")
        return val

    def check_base_categories(self, val: int) -> int:
        if val < 0:
            raise ConfigError(f"base_categories invalid, must not be negative - {val}")
        return val

    def check_lr(self, val: float) -> float:
        if val < 0:
            raise ConfigError(f"lr invalid, must not be negative - {val}")
        return val

    def check_finetune_lr(self, val: float) -> float:
        if val < 0:
            raise ConfigError(f"finetune_lr invalid, must not be negative - {val}")
        return val

    def check_momentum(self, val: float) -> float:
        if not 0 <= val < 1:
            raise ConfigError(f"momentum invalid, must be in [0, 1) - {val}")
        return val

    def check_batch_images(self, val: int) -> int:
        if val < 1:
            raise ConfigError(f"batch_images invalid, must be at least 1 - {val}")
        return val

    def check_warmup_iters(self, val: int) -> int:
        if val < 0:
            raise ConfigError(f"warmup_iters invalid, must not be negative - {val}")
        return val

    def check_warmup_factor(self, val: float) -> float:
        if not 0 < val <= 1:
            raise ConfigError(f"warmup_factor invalid, must be in (0, 1] - {val}")
        return val

    def check_total_iters(self, val: int) -> int:
        if val < 0:
            raise ConfigError(f"total_iters invalid, must not be negative - {val}")
        return val

    def check_finetune_iters(self, val: int) -> int:
        if val < 0:
            raise ConfigError(f"finetune_iters invalid, must not be negative - {val}")
        return val

    def _check_weight(self, name: str, val: float) -> float:
        if val < 0:
            raise ConfigError(f"{name} invalid, loss weights must not be negative - {val}")
        return val

    def check_lambda_detection(self, val: float) -> float:
        return self._check_weight("lambda_detection", val)

    def check_lambda_boundary(self, val: float) -> float:
        return self._check_weight("lambda_boundary", val)

    def check_lambda_affinity(self, val: float) -> float:
        return self._check_weight("lambda_affinity", val)

    def check_lambda_segment(self, val: float) -> float:
        return self._check_weight("lambda_segment", val)

    def check_channels(self, val: int) -> int:
        if val < 2 or val % 2:
            raise ConfigError(f"channels invalid, must be an even number >= 2 - {val}")
        return val

    def check_roi_size(self, val: int) -> int:
        if val < 1:
            raise ConfigError(f"roi_size invalid, must be at least 1 - {val}")
        return val

    def check_boundary_width(self, val: int) -> int:
        if val < 1:
            raise ConfigError(f"boundary_width invalid, must be at least 1 - {val}")
        return val

    def check_fg_threshold(self, val: float) -> float:
        if not 0 < val < 1:
            raise ConfigError(f"fg_threshold invalid, must be in (0, 1) - {val}")
        return val

    def check_box_jitter(self, val: float) -> float:
        if not 0 <= val < 0.5:
            raise ConfigError(f"box_jitter invalid, must be in [0, 0.5) - {val}")
        return val

    def check_log_every(self, val: int) -> int:
        if val < 1:
            raise ConfigError(f"log_every invalid, must be at least 1 - {val}")
        return val

    def verify(self, silent: bool = False) -> Optional[List[Exception]]:
        """
        Verify the cross-field constraints of the config
        :param silent: bool - raise or return errors
        :return: OPTIONAL(list of errors)
        """
        errors = []
        if self.warmup_iters > self.total_iters:
            errors.append(ConfigError(f"warmup_iters ({self.warmup_iters}) exceeds total_iters ({self.total_iters})"))
        if self.mask_size != 2 * self.roi_size:
            errors.append(ConfigError(f"mask_size must be twice roi_size - given {self.mask_size} and {self.roi_size}"))
        if self.lr == 0:
            logger.warning("lr is 0, parameters will not change")

        if errors:
            if silent:
                return errors
            raise errors[0]
        return None

    # Serialization
    def dumps(self) -> str:
        """
        Format the config as flat key=value text
        :return: config text
        """
        def fmt(v: Any) -> str:
            return str(v).lower() if isinstance(v, bool) else str(v)
        return "".join(f"{k} = {fmt(getattr(self, k))}\n" for k in self.__slots__)

    def dump(self, fname: Union[str, TextIOBase]) -> None:
        """
        Write the config to a file
        :param fname: file to write to
        """
        if isinstance(fname, TextIOBase):
            fname.write(self.dumps())
        elif isinstance(fname, str):
            with open(fname, "w") as f:
                f.write(self.dumps())
        else:
            raise TypeError("fname is not a valid type")

    @classmethod
    def loads(cls, text: str, **overrides) -> "TrainConfig":
        """
        Load a config from key=value text
        :param text: config text
        :param overrides: fields applied after the file
        :return: validated config
        """
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got '{line}'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in cls.__slots__:
                raise ConfigError(f"line {lineno}: unknown config key '{key}'")
            values[key] = check_values(val)
        values.update(overrides)
        return cls(values)

    @classmethod
    def load(cls, fname: Union[str, TextIOBase], **overrides) -> "TrainConfig":
        """
        Load a config file
        :param fname: path or open file
        :param overrides: fields applied after the file
        :return: validated config
        """
        if isinstance(fname, TextIOBase):
            return cls.loads(fname.read(), **overrides)
        if isinstance(fname, str):
            if not os.path.isfile(fname):
                raise ConfigError(f"Config file not found - '{fname}'")
            with open(fname, "r") as f:
                return cls.loads(f.read(), **overrides)
        raise TypeError("fname is not a valid type")
