"""U-Net encoder-decoder: parameter layout, initialization and forward pass."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import rng
from .errors import ConfigurationError, ShapeError
from .nn import ConvSpec, concat_channels, conv2d, conv_transpose2d, maxpool2d, relu
from .tensor import Node, as_node, get_dtype

ParamStore = dict  # canonical name -> ndarray, kept in sorted-name order


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 3
    out_channels: int = 1
    depth: int = 4
    base_width: int = 64
    img_size: int = 256

    def __post_init__(self):
        if min(self.in_channels, self.out_channels, self.base_width, self.depth, self.img_size) < 1:
            raise ConfigurationError(f"all UNetConfig fields must be >= 1: {self}")
        if self.img_size % (2 ** self.depth):
            raise ConfigurationError(
                f"img_size {self.img_size} is not divisible by 2**depth = {2 ** self.depth}")

    def width(self, stage: int) -> int:
        return self.base_width * 2 ** stage


def param_shapes(config: UNetConfig) -> dict[str, tuple]:
    """Shape of every parameter, keyed by canonical name, in sorted order."""
    shapes = {}

    def double_conv(prefix, cin, cout):
        shapes[f"{prefix}.conv0.w"] = (cout, cin, 3, 3)
        shapes[f"{prefix}.conv0.b"] = (cout,)
        shapes[f"{prefix}.conv1.w"] = (cout, cout, 3, 3)
        shapes[f"{prefix}.conv1.b"] = (cout,)

    cin = config.in_channels
    for i in range(config.depth):
        double_conv(f"enc{i}", cin, config.width(i))
        cin = config.width(i)
    double_conv("bottleneck", cin, config.width(config.depth))
    for i in range(config.depth):
        shapes[f"dec{i}.up.w"] = (config.width(i + 1), config.width(i), 2, 2)
        double_conv(f"dec{i}", 2 * config.width(i), config.width(i))
    shapes["head.w"] = (config.out_channels, config.base_width, 1, 1)
    shapes["head.b"] = (config.out_channels,)
    return dict(sorted(shapes.items()))


def _fan_in(name: str, shape: tuple) -> int:
    if name.endswith(".up.w"):
        # kernel 2 / stride 2: each output pixel sees one tap per input channel
        return shape[0]
    return shape[1] * shape[2] * shape[3]


def init_params(config: UNetConfig, seed: int) -> ParamStore:
    """He-normal weights, zero biases.

    Each weight tensor draws from its own SplitMix64 stream seeded with
    ``hash64(seed, name)``, so values do not depend on construction order.
    """
    dtype = get_dtype()
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        std = math.sqrt(2.0 / _fan_in(name, shape))
        draws = rng.normal(rng.hash64(seed, name), math.prod(shape))
        params[name] = (draws * std).astype(dtype).reshape(shape)
    return params


def param_count(params: Mapping[str, np.ndarray]) -> int:
    return sum(int(np.asarray(v).size) for v in params.values())


def _conv_block(p, prefix, x, cin, cout):
    for j in range(2):
        spec = ConvSpec(cin if j == 0 else cout, cout, kernel=3)
        x = relu(conv2d(x, p[f"{prefix}.conv{j}.w"], p[f"{prefix}.conv{j}.b"], spec))
    return x


def forward(params: Mapping, config: UNetConfig, batch) -> Node:
    """Logits of shape ``N x out_channels x S x S`` for an ``N x in_channels x S x S`` batch.

    ``params`` may hold plain arrays or tape nodes (to collect gradients).
    Any ``S`` divisible by ``2**depth`` is accepted.
    """
    x = as_node(batch)
    if x.value.ndim != 4 or x.shape[1] != config.in_channels:
        raise ShapeError(f"expected N x {config.in_channels} x S x S input, got {x.shape}")
    h, w = x.shape[2:]
    step = 2 ** config.depth
    if h % step or w % step:
        raise ShapeError(f"spatial extents {h}x{w} are not divisible by {step}")
    p = {name: as_node(v) for name, v in params.items()}

    skips = []
    cin = config.in_channels
    for i in range(config.depth):
        x = _conv_block(p, f"enc{i}", x, cin, config.width(i))
        skips.append(x)
        x = maxpool2d(x)
        cin = config.width(i)
    x = _conv_block(p, "bottleneck", x, cin, config.width(config.depth))
    for i in reversed(range(config.depth)):
        up = conv_transpose2d(x, p[f"dec{i}.up.w"])
        x = _conv_block(p, f"dec{i}", concat_channels(skips[i], up), 2 * config.width(i),
                        config.width(i))
    head = ConvSpec(config.base_width, config.out_channels, kernel=1)
    return conv2d(x, p["head.w"], p["head.b"], head)
