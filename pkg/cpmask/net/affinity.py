"""
Non-local affinity parsing
A[(i,j),(m,n)] = softmax( zscore(theta(C_ij)) . zscore(phi(C_mn)) )
C~_ij = sum_mn A[(i,j),(m,n)] g(C_mn)
"""
import torch
import torch.nn as nn
import torch.nn.functional as F

from .layers import conv1x1
from ..enums import NormalizeModes

EPS = 1e-5


def zscore(emb: torch.Tensor, eps: float = EPS) -> torch.Tensor:
    """
    Standardize each pixel's embedding over the embedding dimension
    :param emb: N x k x P
    :param eps: added to the population std
    :return: N x k x P
    """
    mu = emb.mean(dim=1, keepdim=True)
    var = ((emb - mu) ** 2).mean(dim=1, keepdim=True)
    sigma = var.clamp_min(eps ** 2).sqrt()
    return (emb - mu) / (sigma + eps)


def normalize_affinity(raw: torch.Tensor, normalize_mode: str = NormalizeModes.ROW) -> torch.Tensor:
    """
    :param raw: N x P x P logits
    :param normalize_mode: row (softmax per query) or global (softmax over all pairs)
    """
    if normalize_mode == NormalizeModes.ROW:
        return F.softmax(raw, dim=-1)
    if normalize_mode == NormalizeModes.GLOBAL:
        n = raw.shape[0]
        return F.softmax(raw.reshape(n, -1), dim=-1).reshape(raw.shape)
    raise ValueError(f"unknown normalize_mode - {normalize_mode}")


def compute_affinity(C: torch.Tensor, theta: nn.Module, phi: nn.Module, normalize_mode: str = NormalizeModes.ROW, eps: float = EPS) -> torch.Tensor:
    """
    Normalized pairwise affinity between RoI pixels
    :param C: N x c x h x w
    :return: N x hw x hw
    """
    u = zscore(theta(C).flatten(2), eps)
    v = zscore(phi(C).flatten(2), eps)
    return normalize_affinity(torch.bmm(u.transpose(1, 2), v), normalize_mode)


def nonlocal_attention(A: torch.Tensor, C: torch.Tensor, g: nn.Module) -> torch.Tensor:
    """
    Re-weight g(C) by the affinity rows
    :param A: N x hw x hw
    :param C: N x c x h x w
    :return: N x c x h x w
    """
    gC = g(C).flatten(2)
    return torch.bmm(gC, A.transpose(1, 2)).reshape(C.shape[0], -1, *C.shape[2:])


class AffinityModule(nn.Module):
    """
    theta, phi: 1x1 c -> c/2; g: 1x1 c -> c
    """
    def __init__(self, channels: int, normalize_mode: str = NormalizeModes.ROW, eps: float = EPS):
        super().__init__()
        self.theta = conv1x1(channels, channels // 2)
        self.phi = conv1x1(channels, channels // 2)
        self.g = conv1x1(channels, channels)
        self.normalize_mode = normalize_mode
        self.eps = eps

    def affinity(self, C: torch.Tensor) -> torch.Tensor:
        return compute_affinity(C, self.theta, self.phi, self.normalize_mode, self.eps)

    def attend(self, A: torch.Tensor, C: torch.Tensor) -> torch.Tensor:
        return nonlocal_attention(A, C, self.g)

    def forward(self, C: torch.Tensor):
        A = self.affinity(C)
        return A, self.attend(A, C)
