"""
Convolution stacks with fan-in scaled init
"""
import math

import torch.nn as nn

FINAL_BIAS = -2.0  # sigmoid(-2) ~ 0.12 prior foreground/boundary probability


def init_conv(conv: nn.Conv2d, bias: float = 0.0) -> nn.Conv2d:
    """
    Centred uniform init with bound sqrt(6 / fan_in)
    """
    fan_in = conv.in_channels * conv.kernel_size[0] * conv.kernel_size[1]
    bound = math.sqrt(6.0 / fan_in)
    nn.init.uniform_(conv.weight, -bound, bound)
    nn.init.constant_(conv.bias, bias)
    return conv


def conv3x3(in_channels: int, out_channels: int) -> nn.Conv2d:
    return init_conv(nn.Conv2d(in_channels, out_channels, 3, padding=1))


def conv1x1(in_channels: int, out_channels: int, bias: float = 0.0) -> nn.Conv2d:
    return init_conv(nn.Conv2d(in_channels, out_channels, 1), bias)


def conv_stack(in_channels: int, channels: int, depth: int = 4) -> nn.Sequential:
    """
    depth x [3x3 conv, ReLU]
    """
    layers = []
    for i in range(depth):
        layers.extend([conv3x3(in_channels if i == 0 else channels, channels), nn.ReLU()])
    return nn.Sequential(*layers)
