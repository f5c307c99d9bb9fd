"""
Finite-difference gradient checks of the loss pathways
"""
import logging

import numpy as np
import torch

from torch import nn
from typing import (
    Callable,
    Dict,
    Mapping,
    Sequence,
    Tuple,
    Union
)

from .terms import LossWeights, affinity_loss, boundary_loss, roi_loss_terms, segment_loss, total_loss
from ..enums import NormalizeModes
from ..exceptions import GradientCheckError
from ..maskops import Box, make_roi_targets

logger = logging.getLogger(__name__)

STEP = 1e-5
DENOM_FLOOR = 1e-8
MAX_ENTRIES = 200
Params = Union[Mapping[str, torch.Tensor], Sequence[Tuple[str, torch.Tensor]]]


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), DENOM_FLOOR)


def gradient_check(loss_fn: Callable[[], torch.Tensor], params: Params, seed: int = 0, max_entries: int = MAX_ENTRIES, step: float = STEP) -> float:
    """
    Compare autograd against central differences on randomly chosen entries
    The loss must be smooth around the current parameters, a step that crosses a
    kink (ReLU at zero) measures the kink and not the derivative
    :param loss_fn: closure recomputing the scalar loss from the current params
    :param params: named double-precision tensors with requires_grad
    :param seed: entry selection seed
    :param max_entries: number of entries to perturb
    :param step: central difference step
    :return: max relative error
    :raise GradientCheckError: non-finite analytic or numeric gradient
    """
    named = list(params.items()) if isinstance(params, Mapping) else list(params)
    for name, p in named:
        if p.dtype != torch.float64:
            raise GradientCheckError(name, f"gradient check needs float64 parameters, got {p.dtype}")

    loss = loss_fn()
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g.detach() for (_, p), g in zip(named, grads)]
    for (name, _), g in zip(named, grads):
        if not bool(torch.isfinite(g).all()):
            raise GradientCheckError(name)

    sizes = np.array([p.numel() for _, p in named])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    picks = rng.choice(int(offsets[-1]), size=min(max_entries, int(offsets[-1])), replace=False)

    def numeric(p: torch.Tensor, idx: int, h: float) -> float:
        flat = p.data.view(-1)
        orig = flat[idx].item()
        with torch.no_grad():
            flat[idx] = orig + h
            plus = float(loss_fn())
            flat[idx] = orig - h
            minus = float(loss_fn())
            flat[idx] = orig
        return (plus - minus) / (2 * h)

    worst = 0.0
    for pick in np.sort(picks):
        k = int(np.searchsorted(offsets, pick, side="right") - 1)
        name, p = named[k]
        idx = int(pick - offsets[k])
        analytic = float(grads[k].view(-1)[idx])
        num = numeric(p, idx, step)
        if not np.isfinite(num):
            raise GradientCheckError(name, f"non-finite numeric gradient at entry {idx}")
        err = _rel_err(analytic, num)
        if err > worst:
            logger.debug("%s[%d]: analytic %.3e numeric %.3e rel %.3e", name, idx, analytic, num, err)
        worst = max(worst, err)
    return worst


def smooth_activations(module: nn.Module) -> nn.Module:
    """
    Replace every ReLU below the module with Softplus, in place
    :param module: network or submodule
    :return: the same module
    """
    for name, child in module.named_children():
        if isinstance(child, nn.ReLU):
            setattr(module, name, nn.Softplus())
        else:
            smooth_activations(child)
    return module


def _pathway_fixture(seed: int, normalize_mode: str):
    """
    Small double-precision mask branch with a fixed RoI feature and targets
    Activations are Softplus so every perturbed entry sits on a smooth loss
    """
    from ..net import CPMaskNet

    torch.manual_seed(seed)
    net = smooth_activations(CPMaskNet(channels=8, roi_size=4, mask_size=8, normalize_mode=normalize_mode).double())
    gen = torch.Generator().manual_seed(seed)
    X = torch.rand(2, 8, 4, 4, generator=gen, dtype=torch.float64)

    yy, xx = np.mgrid[:32, :32]
    mask = (yy - 15.5) ** 2 + (xx - 15.5) ** 2 <= 8.0 ** 2
    targets = [
        make_roi_targets(mask, Box(4, 4, 24, 24), 8, 4),
        make_roi_targets(mask, Box(10, 6, 20, 20), 8, 4)
    ]
    return net, X, targets


def pathway_checks(seed: int = 0, max_entries: int = MAX_ENTRIES) -> Dict[str, float]:
    """
    Gradient check every loss pathway of the mask branch
    :param seed: parameter/feature/entry seed
    :param max_entries: entries perturbed per pathway
    :return: pathway name -> max relative error
    """
    results = {}
    for mode in (NormalizeModes.ROW, NormalizeModes.GLOBAL):
        net, X, targets = _pathway_fixture(seed, mode)
        params = [(n, p) for n, p in net.named_parameters() if not n.startswith("backbone.")]

        def run():
            return net.forward_rois(X)

        def boundary():
            out = net.boundary_forward(X)[0]
            return sum(boundary_loss(out[i], t.boundary_target) for i, t in enumerate(targets)) / len(targets)

        def affinity():
            A = run()["A"]
            return sum(affinity_loss(A[i], t.fg_indices, t.bg_indices, mode) for i, t in enumerate(targets)) / len(targets)

        def segment():
            out = run()["mask_logits"]
            return sum(segment_loss(out[i], t.mask_target) for i, t in enumerate(targets)) / len(targets)

        def composite(weights=None):
            terms = roi_loss_terms(run(), targets, [True] * len(targets), mode)
            return total_loss(terms, weights).objective

        if mode == NormalizeModes.ROW:
            results["boundary"] = gradient_check(boundary, [(n, p) for n, p in params if n.startswith("boundary.")], seed, max_entries)
            results["segment"] = gradient_check(segment, params, seed, max_entries)
            results["composite"] = gradient_check(composite, params, seed, max_entries)
            zero = LossWeights(detection=0, boundary=0, affinity=0, segment=0)
            results["constant"] = gradient_check(lambda: composite(zero), params, seed, max_entries)
        results[f"affinity_{mode}"] = gradient_check(affinity, params, seed, max_entries)

    for name, err in results.items():
        logger.info("gradient check %s: max relative error %.3e", name, err)
    return results
