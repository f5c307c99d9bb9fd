"""
Double-loop reference for the affinity and attention computation
Pure python loops over pixel pairs, grids are limited to 8x8
"""
import math

import numpy as np

from typing import (
    Dict,
    List,
    Mapping,
    Tuple
)

from ..enums import NormalizeModes
from ..exceptions import OracleError

MAX_GRID = 8


def affinity_params(module) -> Dict[str, np.ndarray]:
    """
    Pull theta/phi/g weights of an AffinityModule as float64 arrays
    :param module: AffinityModule
    :return: name -> array, 1x1 conv weights squeezed to out x in
    """
    params = {}
    for name in ("theta", "phi", "g"):
        conv = getattr(module, name)
        params[f"{name}.weight"] = conv.weight.detach().double().numpy().reshape(conv.out_channels, conv.in_channels)
        params[f"{name}.bias"] = conv.bias.detach().double().numpy()
    return params


def _embed(C: np.ndarray, weight: np.ndarray, bias: np.ndarray, i: int, j: int) -> List[float]:
    out = []
    for o in range(weight.shape[0]):
        acc = float(bias[o])
        for k in range(weight.shape[1]):
            acc += float(weight[o, k]) * float(C[k, i, j])
        out.append(acc)
    return out


def _zscore(vec: List[float], eps: float) -> List[float]:
    mu = sum(vec) / len(vec)
    var = sum((x - mu) ** 2 for x in vec) / len(vec)
    sigma = math.sqrt(max(var, eps * eps))
    return [(x - mu) / (sigma + eps) for x in vec]


def brute_force_affinity(C: np.ndarray, params: Mapping[str, np.ndarray], normalize_mode: str = NormalizeModes.ROW, eps: float = 1e-5) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reference affinity matrix and attended features
    :param C: c x h x w features
    :param params: theta/phi/g weights and biases (see affinity_params)
    :param normalize_mode: row or global softmax
    :param eps: z-score epsilon
    :return: (A_ref hw x hw, C_tilde_ref c x h x w), float64
    :raise OracleError: grid larger than 8x8
    """
    C = np.asarray(C, dtype=np.float64)
    c, h, w = C.shape
    if h > MAX_GRID or w > MAX_GRID:
        raise OracleError(f"grid {h}x{w} too large for the brute-force oracle, max {MAX_GRID}x{MAX_GRID}")
    pixels = [(i, j) for i in range(h) for j in range(w)]
    P = len(pixels)

    u = [_zscore(_embed(C, params["theta.weight"], params["theta.bias"], i, j), eps) for i, j in pixels]
    v = [_zscore(_embed(C, params["phi.weight"], params["phi.bias"], i, j), eps) for i, j in pixels]
    g = [_embed(C, params["g.weight"], params["g.bias"], i, j) for i, j in pixels]

    raw = [[0.0] * P for _ in range(P)]
    for p in range(P):
        for q in range(P):
            raw[p][q] = sum(a * b for a, b in zip(u[p], v[q]))

    A = np.zeros((P, P))
    if normalize_mode == NormalizeModes.ROW:
        for p in range(P):
            top = max(raw[p])
            exps = [math.exp(x - top) for x in raw[p]]
            total = sum(exps)
            for q in range(P):
                A[p, q] = exps[q] / total
    elif normalize_mode == NormalizeModes.GLOBAL:
        top = max(max(row) for row in raw)
        total = sum(math.exp(x - top) for row in raw for x in row)
        for p in range(P):
            for q in range(P):
                A[p, q] = math.exp(raw[p][q] - top) / total
    else:
        raise ValueError(f"unknown normalize_mode - {normalize_mode}")

    out_c = len(g[0])
    C_tilde = np.zeros((out_c, h, w))
    for p, (i, j) in enumerate(pixels):
        for k in range(out_c):
            C_tilde[k, i, j] = sum(A[p, q] * g[q][k] for q in range(P))
    return A, C_tilde
