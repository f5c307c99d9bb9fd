"""
Training state and its checkpoint
"""
import base64
import logging

import numpy as np
import torch

from collections import OrderedDict
from typing import (
    Any,
    Dict,
    List,
    Optional
)

from ..exceptions import CheckpointError, ConfigError
from ..net import CPMaskNet, dump_container, load_container
from ..schema.base import BaseModel
from ..schema.config import TrainConfig

logger = logging.getLogger(__name__)

TABLES = ("params", "momentum")


def make_optimizer(net: CPMaskNet, config: TrainConfig) -> torch.optim.SGD:
    return torch.optim.SGD(net.parameters(), lr=config.lr, momentum=config.momentum)


class TrainState(BaseModel):
    net: CPMaskNet
    optimizer: torch.optim.SGD
    iteration: int
    rng: np.random.Generator
    running: Dict[str, float]       # exponential moving averages of the loss terms
    config: TrainConfig
    supervised_ids: List[int]       # novel annotation ids granted mask supervision (few-shot)
    history: List[Dict[str, Any]]   # per-iteration log records of this process

    __slots__ = ("net", "optimizer", "iteration", "rng", "running", "config", "supervised_ids", "history")
    _defaults = {"iteration": 0, "running": dict, "supervised_ids": list, "history": list}

    @classmethod
    def create(cls, config: TrainConfig) -> "TrainState":
        """
        Fresh state: seeded parameter init and data RNG
        :param config: training config
        :return: new state
        """
        torch.manual_seed(config.seed)
        net = CPMaskNet(config)
        return cls(
            net=net,
            optimizer=make_optimizer(net, config),
            rng=np.random.default_rng(config.seed),
            config=config
        )

    def momentum_buffers(self) -> "OrderedDict[str, torch.Tensor]":
        bufs = OrderedDict()
        for name, p in self.net.named_parameters():
            buf = self.optimizer.state.get(p, {}).get("momentum_buffer")
            if buf is not None:
                bufs[name] = buf
        return bufs

    def losses(self, key: str = "total") -> List[float]:
        return [rec[key] for rec in self.history]


def save_checkpoint(state: TrainState, path: str) -> None:
    """
    Write parameters, momentum buffers, counters and RNG states
    :param state: training state
    :param path: output file
    """
    header = {
        "architecture": state.net.architecture(),
        "iteration": state.iteration,
        "running": state.running,
        "rng_state": state.rng.bit_generator.state,
        "torch_rng": base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode("ascii"),
        "config": state.config.dict(),
        "supervised_ids": state.supervised_ids
    }
    tables = {
        "params": OrderedDict((n, p.detach().cpu().numpy()) for n, p in state.net.named_parameters()),
        "momentum": OrderedDict((n, b.detach().cpu().numpy()) for n, b in state.momentum_buffers().items())
    }
    dump_container(path, header, tables)
    logger.debug("checkpoint written to %s at iteration %d", path, state.iteration)


def load_checkpoint(path: str, config: Optional[TrainConfig] = None) -> TrainState:
    """
    Rebuild a training state from a checkpoint
    :param path: checkpoint file
    :param config: config to continue with, defaults to the stored snapshot; must share the architecture
    :return: restored state
    :raise CheckpointError: version mismatch, corrupt blob or architecture mismatch
    """
    header, tables = load_container(path, TABLES)
    try:
        stored = TrainConfig(header["config"])
    except (KeyError, ConfigError) as e:
        raise CheckpointError(f"checkpoint config snapshot is invalid - {e}") from e
    config = config or stored

    net = CPMaskNet(config)
    if net.architecture() != header.get("architecture"):
        raise CheckpointError(f"checkpoint architecture {header.get('architecture')} does not match {net.architecture()}")

    named = dict(net.named_parameters())
    params = tables["params"]
    if set(params) != set(named):
        raise CheckpointError(f"checkpoint parameters differ: missing {sorted(set(named) - set(params))}, extra {sorted(set(params) - set(named))}")
    with torch.no_grad():
        for name, arr in params.items():
            if list(arr.shape) != list(named[name].shape):
                raise CheckpointError(f"parameter {name} has shape {list(arr.shape)}, expected {list(named[name].shape)}")
            named[name].copy_(torch.from_numpy(arr))

    optimizer = make_optimizer(net, config)
    for name, arr in tables["momentum"].items():
        if name not in named:
            raise CheckpointError(f"momentum buffer for unknown parameter {name}")
        optimizer.state[named[name]]["momentum_buffer"] = torch.from_numpy(arr.copy())

    rng = np.random.default_rng()
    try:
        rng.bit_generator.state = header["rng_state"]
        torch.set_rng_state(torch.from_numpy(np.frombuffer(base64.b64decode(header["torch_rng"]), dtype=np.uint8).copy()))
    except (KeyError, TypeError, ValueError, RuntimeError) as e:
        raise CheckpointError(f"checkpoint RNG state is invalid - {e}") from e

    return TrainState(
        net=net,
        optimizer=optimizer,
        iteration=header.get("iteration", 0),
        rng=rng,
        running={k: float(v) for k, v in header.get("running", {}).items()},
        config=config,
        supervised_ids=[int(i) for i in header.get("supervised_ids", [])]
    )
