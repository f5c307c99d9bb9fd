"""
CPMask network
backbone -> RoIAlign -> boundary module -> shape fusion -> basic mask head -> non-local affinity -> predictor
"""
import logging

import torch
import torch.nn as nn
import torch.nn.functional as F

from typing import (
    Any,
    Dict,
    List,
    Optional,
    Sequence,
    Union
)

from .affinity import AffinityModule
from .layers import FINAL_BIAS, conv1x1, conv3x3, conv_stack
from ..exceptions import ShapeMismatchError
from ..maskops import Box, roi_align_batch
from ..schema.base import BaseModel
from ..schema.config import TrainConfig

logger = logging.getLogger(__name__)

STRIDE = 4
MIN_IMAGE = 16


def upsample2(x: torch.Tensor) -> torch.Tensor:
    return F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)


class RoIForward(BaseModel):
    X: torch.Tensor                           # c x h x w RoI feature
    boundary_logits: Optional[torch.Tensor]   # 1 x H_m x H_m, None when the boundary module is off
    C: torch.Tensor                           # c x h x w basic head output
    A: Optional[torch.Tensor]                 # hw x hw post-softmax affinity
    C_tilde: Optional[torch.Tensor]           # c x h x w attended features
    mask_logits: torch.Tensor                 # 1 x H_m x H_m

    __slots__ = ("X", "boundary_logits", "C", "A", "C_tilde", "mask_logits")
    _defaults = {"boundary_logits": None, "A": None, "C_tilde": None}


class Backbone(nn.Module):
    """
    Four [3x3 conv, ReLU] blocks, 2x average pooling after the first two (stride 4)
    """
    def __init__(self, channels: int):
        super().__init__()
        self.blocks = nn.ModuleList([
            nn.Sequential(conv3x3(3 if i == 0 else channels, channels), nn.ReLU())
            for i in range(4)
        ])

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        x = image
        for i, block in enumerate(self.blocks):
            x = block(x)
            if i < 2:
                x = F.avg_pool2d(x, 2, ceil_mode=True)
        return x


class BoundaryModule(nn.Module):
    """
    F_B: four [3x3 conv, ReLU], 2x bilinear upsample, 1x1 conv to one logit channel
    """
    def __init__(self, channels: int):
        super().__init__()
        self.convs = conv_stack(channels, channels, 4)
        self.out = conv1x1(channels, 1, FINAL_BIAS)

    def forward(self, X: torch.Tensor) -> torch.Tensor:
        return self.out(upsample2(self.convs(X)))


class CPMaskNet(nn.Module):
    """
    Mask branch of CPMask with oracle boxes

    Submodules always exist so that the parameter table only depends on the
    architecture sizes; the use_* flags gate the forward pass
    """
    def __init__(self, config: Union[TrainConfig, dict] = None, **kwargs):
        super().__init__()
        config = config if isinstance(config, TrainConfig) else TrainConfig(config or {})
        config = config.replace(**kwargs) if kwargs else config
        self.channels = config.channels
        self.roi_size = config.roi_size
        self.mask_size = config.mask_size
        self.normalize_mode = config.normalize_mode
        self.use_boundary = config.use_boundary
        self.use_fusion = config.use_fusion
        self.use_affinity = config.use_affinity

        c = self.channels
        self.backbone = Backbone(c)
        self.boundary = BoundaryModule(c)
        self.alpha = nn.Parameter(torch.tensor(1.0))
        self.head = conv_stack(c, c, 4)
        self.affinity = AffinityModule(c, self.normalize_mode)
        self.predictor = conv1x1(c, 1, FINAL_BIAS)

    def architecture(self) -> Dict[str, Any]:
        """
        Sizes and flags that define the parameter table and the forward path
        """
        return {
            "channels": self.channels,
            "roi_size": self.roi_size,
            "mask_size": self.mask_size,
            "normalize_mode": self.normalize_mode,
            "use_boundary": self.use_boundary,
            "use_fusion": self.use_fusion,
            "use_affinity": self.use_affinity
        }

    def param_table(self) -> Dict[str, List[int]]:
        return {name: list(p.shape) for name, p in self.named_parameters()}

    def all_finite(self) -> bool:
        return all(bool(torch.isfinite(p).all()) for p in self.parameters())

    # Stages
    def backbone_forward(self, image: torch.Tensor) -> torch.Tensor:
        """
        :param image: 3 x H x W (or B x 3 x H x W) in [0, 1]
        :return: c x ceil(H/4) x ceil(W/4) (batched if the input was)
        """
        image = torch.as_tensor(image, dtype=self.alpha.dtype)
        batched = image.dim() == 4
        image = image if batched else image.unsqueeze(0)
        if image.dim() != 4 or image.shape[1] != 3:
            raise ShapeMismatchError(f"image must be 3 x H x W - given {tuple(image.shape)}")
        if image.shape[-2] < MIN_IMAGE or image.shape[-1] < MIN_IMAGE:
            raise ShapeMismatchError(f"image must be at least {MIN_IMAGE}x{MIN_IMAGE} - given {tuple(image.shape[-2:])}")
        feats = self.backbone(image)
        return feats if batched else feats[0]

    def boundary_forward(self, X: torch.Tensor):
        """
        :param X: N x c x h x w RoI features
        :return: (boundary logits N x 1 x 2h x 2w, low-res boundary probability N x 1 x h x w)
        """
        logits = self.boundary(X)
        return logits, F.avg_pool2d(torch.sigmoid(logits), 2)

    def fuse_and_head(self, X: torch.Tensor, boundary_prob_lowres: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        C = G(X + alpha * P_B), the fusion term is dropped without a boundary probability or with fusion off
        """
        if boundary_prob_lowres is not None and self.use_fusion:
            if boundary_prob_lowres.shape[-2:] != X.shape[-2:]:
                raise ShapeMismatchError(f"boundary probability {tuple(boundary_prob_lowres.shape[-2:])} != features {tuple(X.shape[-2:])}")
            X = X + self.alpha * boundary_prob_lowres
        return self.head(X)

    def compute_affinity(self, C: torch.Tensor) -> torch.Tensor:
        return self.affinity.affinity(C)

    def nonlocal_attention(self, A: torch.Tensor, C: torch.Tensor) -> torch.Tensor:
        return self.affinity.attend(A, C)

    def mask_forward(self, C_tilde: Optional[torch.Tensor], C: torch.Tensor) -> torch.Tensor:
        """
        logits = 1x1 conv(upsample2(C~ + C)); the baseline head feeds C alone
        """
        head_in = C if C_tilde is None else C_tilde + C
        return self.predictor(upsample2(head_in))

    def forward_rois(self, X: torch.Tensor) -> Dict[str, Optional[torch.Tensor]]:
        """
        Mask branch over a batch of RoI features
        :param X: N x c x h x w
        :return: batched tensors keyed like RoIForward
        """
        boundary_logits = prob = None
        if self.use_boundary:
            boundary_logits, prob = self.boundary_forward(X)
        C = self.fuse_and_head(X, prob)
        A = C_tilde = None
        if self.use_affinity:
            A = self.compute_affinity(C)
            C_tilde = self.nonlocal_attention(A, C)
        return {
            "X": X,
            "boundary_logits": boundary_logits,
            "C": C,
            "A": A,
            "C_tilde": C_tilde,
            "mask_logits": self.mask_forward(C_tilde, C)
        }

    def forward(self, image: torch.Tensor, boxes: Sequence[Box]) -> Dict[str, Optional[torch.Tensor]]:
        """
        Batched forward of one image and its boxes
        :param image: 3 x H x W
        :param boxes: boxes in image coordinates
        :return: batched tensors keyed like RoIForward
        """
        if len(boxes) == 0:
            raise ValueError("at least one box is required")
        feats = self.backbone_forward(image)
        X = roi_align_batch(feats, [b if isinstance(b, Box) else Box(b) for b in boxes], self.roi_size, 1.0 / STRIDE)
        return self.forward_rois(X)

    def full_forward(self, image: torch.Tensor, boxes: Sequence[Box]) -> List[RoIForward]:
        """
        Run the whole pipeline and split the result per RoI
        :param image: 3 x H x W in [0, 1]
        :param boxes: one or more boxes
        :return: one RoIForward per box
        """
        out = self(image, boxes)
        return [
            RoIForward({k: None if v is None else v[i] for k, v in out.items()})
            for i in range(len(boxes))
        ]
