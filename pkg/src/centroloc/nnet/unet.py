"""The scaled-down U-Net: configuration, parameters, forward tape, backward.

Channel widths double at every level starting from ``base_channels``. For
depth D the layout is::

    encoder i in 0..D-1:  [conv3x3 -> batchnorm -> relu] x 2, then 2x2 maxpool
    bottleneck:           the same double-conv block, then dropout
    decoder i in D-1..0:  2x nearest upsample, concat the encoder-i skip,
                          double-conv block
    head:                 1x1 conv to one channel, sigmoid

Spatial resolution is preserved end to end; inputs need h and w divisible
by 2**depth. Parameters live in an insertion-ordered dict whose key order
(``param_spec``) is also the checkpoint serialization order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, ShapeError
from .layers import (
    batchnorm_forward,
    batchnorm_backward,
    concat_forward,
    concat_backward,
    conv1x1_forward,
    conv1x1_backward,
    conv2d_forward,
    conv2d_backward,
    dropout_forward,
    dropout_backward,
    maxpool2_forward,
    maxpool2_backward,
    relu_forward,
    relu_backward,
    sigmoid_forward,
    sigmoid_backward,
    upsample2_forward,
    upsample2_backward,
)

_LEARNABLE_SUFFIXES = (".w", ".b", ".gamma", ".beta")
_CONFIG_FIELDS = ("depth", "base_channels", "in_channels", "dropout_rate", "seed")


@dataclass(frozen=True)
class UNetConfig:
    depth: int = 3
    base_channels: int = 8
    in_channels: int = 3
    dropout_rate: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ParameterError(f"depth must be >= 1, got {self.depth}")
        if self.base_channels < 1:
            raise ParameterError(f"base_channels must be >= 1, got {self.base_channels}")
        if self.in_channels < 1:
            raise ParameterError(f"in_channels must be >= 1, got {self.in_channels}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def divisor(self) -> int:
        """Required divisor of the input's spatial dims."""
        return 2**self.depth

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "base_channels": self.base_channels,
            "in_channels": self.in_channels,
            "dropout_rate": self.dropout_rate,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        unknown = set(d) - set(_CONFIG_FIELDS)
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def _conv_blocks(cfg: UNetConfig) -> list[tuple[str, int, int]]:
    """(block name, in channels, out channels) for every double-conv block,
    in execution order."""
    blocks = []
    c_prev = cfg.in_channels
    for i in range(cfg.depth):
        c = cfg.base_channels * (2**i)
        blocks.append((f"enc{i}", c_prev, c))
        c_prev = c
    c = cfg.base_channels * (2**cfg.depth)
    blocks.append(("bottleneck", c_prev, c))
    c_prev = c
    for i in reversed(range(cfg.depth)):
        c = cfg.base_channels * (2**i)
        blocks.append((f"dec{i}", c_prev + c, c))  # + c for the encoder skip
        c_prev = c
    return blocks


def param_spec(cfg: UNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Every parameter tensor's (name, shape), in the canonical order that
    also defines checkpoint layout."""
    spec: list[tuple[str, tuple[int, ...]]] = []
    for name, c_in, c_out in _conv_blocks(cfg):
        for sub, ci in (("1", c_in), ("2", c_out)):
            spec.append((f"{name}.conv{sub}.w", (c_out, ci, 3, 3)))
            spec.append((f"{name}.conv{sub}.b", (c_out,)))
            for stat in ("gamma", "beta", "running_mean", "running_var"):
                spec.append((f"{name}.bn{sub}.{stat}", (c_out,)))
    spec.append(("head.w", (1, cfg.base_channels, 1, 1)))
    spec.append(("head.b", (1,)))
    return spec


@dataclass
class UNetParams:
    """All weights, biases, and batch-norm state, keyed by canonical name."""

    config: UNetConfig
    tensors: dict[str, np.ndarray]

    def learnable(self) -> dict[str, np.ndarray]:
        """The subset the optimizer updates (excludes running statistics)."""
        return {k: v for k, v in self.tensors.items() if k.endswith(_LEARNABLE_SUFFIXES)}

    def copy(self) -> "UNetParams":
        return UNetParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def param_count(self) -> int:
        return sum(int(v.size) for v in self.tensors.values())


def init_params(cfg: UNetConfig, dtype=np.float32) -> UNetParams:
    """He-uniform fan-in init for conv weights; biases 0, gamma 1, beta 0,
    running mean 0, running variance 1. Fully determined by cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_spec(cfg):
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            limit = math.sqrt(6.0 / fan_in)
            arr = rng.uniform(-limit, limit, size=shape)
        elif name.endswith((".gamma", ".running_var")):
            arr = np.ones(shape)
        else:  # conv bias, beta, running_mean
            arr = np.zeros(shape)
        tensors[name] = arr.astype(dtype)
    return UNetParams(cfg, tensors)


@dataclass
class Tape:
    """Execution record of one forward pass: layer caches in order, plus
    the running-stat updates batch norm computed in train mode."""

    entries: list = field(default_factory=list)
    stat_updates: dict[str, np.ndarray] = field(default_factory=dict)


def _block_forward(params, name, x, mode, tape):
    t = params.tensors
    for sub in ("1", "2"):
        conv = f"{name}.conv{sub}"
        x, cache = conv2d_forward(x, t[conv + ".w"], t[conv + ".b"])
        tape.entries.append(("conv", conv, cache))
        bn = f"{name}.bn{sub}"
        x, cache = batchnorm_forward(
            x, t[bn + ".gamma"], t[bn + ".beta"],
            t[bn + ".running_mean"], t[bn + ".running_var"], mode,
        )
        if mode == "train":
            tape.stat_updates[bn + ".running_mean"] = cache[4]
            tape.stat_updates[bn + ".running_var"] = cache[5]
        tape.entries.append(("bn", bn, cache))
        x, cache = relu_forward(x)
        tape.entries.append(("relu", None, cache))
    return x


def unet_apply(cfg: UNetConfig, params: UNetParams, x, mode="eval", rng=None):
    """Full forward pass; returns (output, tape). The tape feeds
    unet_backward and carries batch-norm stat updates in train mode."""
    if mode not in ("train", "eval"):
        raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")
    if x.ndim != 4 or x.shape[1] != cfg.in_channels:
        raise ShapeError(
            f"input must be (n, {cfg.in_channels}, h, w), got {x.shape}"
        )
    h, w = x.shape[2], x.shape[3]
    if h % cfg.divisor or w % cfg.divisor:
        raise ShapeError(
            f"input spatial dims {h}x{w} must be divisible by {cfg.divisor} "
            f"(depth {cfg.depth})"
        )
    tape = Tape()
    skips = []
    out = x
    for i in range(cfg.depth):
        out = _block_forward(params, f"enc{i}", out, mode, tape)
        skips.append(out)
        out, cache = maxpool2_forward(out)
        tape.entries.append(("pool", None, cache))
    out = _block_forward(params, "bottleneck", out, mode, tape)
    out, cache = dropout_forward(out, cfg.dropout_rate, mode, rng)
    tape.entries.append(("dropout", None, cache))
    for i in reversed(range(cfg.depth)):
        out, _ = upsample2_forward(out)
        tape.entries.append(("up", None, None))
        out, cache = concat_forward(out, skips[i])
        tape.entries.append(("concat", i, cache))
        out = _block_forward(params, f"dec{i}", out, mode, tape)
    out, cache = conv1x1_forward(out, params.tensors["head.w"], params.tensors["head.b"])
    tape.entries.append(("conv1x1", "head", cache))
    out, cache = sigmoid_forward(out)
    tape.entries.append(("sigmoid", None, cache))
    return out, tape


def unet_forward(cfg: UNetConfig, params: UNetParams, x, mode="eval", rng=None):
    """Forward pass when only the output is needed."""
    out, _ = unet_apply(cfg, params, x, mode, rng)
    return out


def _block_backward(grad, name, tape_iter, grads):
    for sub in ("2", "1"):
        kind, _, cache = next(tape_iter)
        assert kind == "relu", kind
        grad = relu_backward(grad, cache)
        kind, bn, cache = next(tape_iter)
        assert kind == "bn", kind
        grad, d_gamma, d_beta = batchnorm_backward(grad, cache)
        grads[bn + ".gamma"] = d_gamma
        grads[bn + ".beta"] = d_beta
        kind, conv, cache = next(tape_iter)
        assert kind == "conv", kind
        grad, d_w, d_b = conv2d_backward(grad, cache)
        grads[conv + ".w"] = d_w
        grads[conv + ".b"] = d_b
    return grad


def unet_backward(cfg: UNetConfig, params: UNetParams, tape: Tape, grad_out):
    """Backward through the taped pass; returns (input gradient, dict of
    gradients keyed like params.learnable())."""
    grads: dict[str, np.ndarray] = {}
    it = iter(reversed(tape.entries))
    kind, _, cache = next(it)
    assert kind == "sigmoid", kind
    grad = sigmoid_backward(grad_out, cache)
    kind, _, cache = next(it)
    assert kind == "conv1x1", kind
    grad, d_w, d_b = conv1x1_backward(grad, cache)
    grads["head.w"] = d_w
    grads["head.b"] = d_b
    skip_grads: dict[int, np.ndarray] = {}
    for i in range(cfg.depth):  # dec0 ran last, unwinds first
        grad = _block_backward(grad, f"dec{i}", it, grads)
        kind, idx, cache = next(it)
        assert kind == "concat" and idx == i, (kind, idx)
        grad, skip_grads[i] = concat_backward(grad, cache)
        kind, _, _ = next(it)
        assert kind == "up", kind
        grad = upsample2_backward(grad)
    kind, _, cache = next(it)
    assert kind == "dropout", kind
    grad = dropout_backward(grad, cache)
    grad = _block_backward(grad, "bottleneck", it, grads)
    for i in reversed(range(cfg.depth)):
        kind, _, cache = next(it)
        assert kind == "pool", kind
        grad = maxpool2_backward(grad, cache)
        grad = grad + skip_grads[i]
        grad = _block_backward(grad, f"enc{i}", it, grads)
    return grad, grads
