"""Building-block layers with hand-derived exact backward passes.

Every layer is a pure pair of functions: ``*_forward(...)`` returns
``(output, cache)`` and ``*_backward(grad_out, cache)`` returns the input
gradient, plus parameter gradients where the layer has parameters. No
layer object holds state, so passes are safe to run concurrently.

Activations are (n, c, h, w) arrays. dtype follows the input: float32 in
training, float64 in gradient-check tests. Convolutions are 3x3, stride 1,
zero padding 1 (spatial dims preserved); the network head additionally
uses a 1x1 convolution.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ParameterError, ShapeError

BN_EPS = 1e-5
BN_MOMENTUM = 0.9

_debug_checks = False


def set_debug_checks(enabled: bool) -> None:
    """Toggle NaN/Inf screening of layer inputs (off by default; it costs
    a full pass over the data)."""
    global _debug_checks
    _debug_checks = bool(enabled)


def check_tensor(x: np.ndarray, name: str = "tensor") -> None:
    if x.ndim != 4 or min(x.shape) < 1:
        raise ShapeError(f"{name} must be (n, c, h, w) with all dims >= 1, got {x.shape}")
    if _debug_checks and not np.isfinite(x).all():
        raise ParameterError(f"{name} contains non-finite values")


def _im2col3(x: np.ndarray) -> np.ndarray:
    """Unfold zero-padded 3x3 neighborhoods into columns: (c*9, n*h*w).

    Channels-first layout keeps the gather in long contiguous runs, which
    is what makes the convolution fast on one core.
    """
    n, c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(2, 3))
    return windows.transpose(1, 4, 5, 0, 2, 3).reshape(c * 9, n * h * w)


def conv2d_forward(x, weights, bias):
    """3x3 same-padding convolution. weights: (c_out, c_in, 3, 3)."""
    check_tensor(x, "conv input")
    if weights.ndim != 4 or weights.shape[2:] != (3, 3):
        raise ShapeError(f"conv weights must be (c_out, c_in, 3, 3), got {weights.shape}")
    c_out, c_in = weights.shape[:2]
    if x.shape[1] != c_in:
        raise ShapeError(f"conv expects {c_in} input channels, got {x.shape[1]}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv bias must have shape ({c_out},), got {bias.shape}")
    n, _, h, w = x.shape
    cols = _im2col3(x)
    out = weights.reshape(c_out, -1) @ cols
    out += bias[:, None]
    out = out.reshape(c_out, n, h, w).transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out), (x.shape, cols, weights)


def conv2d_backward(grad_out, cache):
    """Input, weight, and bias gradients: the exact transpose of forward."""
    (n, c_in, h, w), cols, weights = cache
    c_out = weights.shape[0]
    grad_mat = grad_out.transpose(1, 0, 2, 3).reshape(c_out, n * h * w)
    grad_w = (grad_mat @ cols.T).reshape(weights.shape)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    # dL/dx is the same-padded correlation of grad_out with the kernels
    # flipped in both spatial axes and transposed in the channel axes.
    flipped = np.ascontiguousarray(weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    grad_x, _ = conv2d_forward(grad_out, flipped, np.zeros(c_in, dtype=grad_out.dtype))
    return grad_x, grad_w, grad_b


def conv1x1_forward(x, weights, bias):
    """Pointwise convolution. weights: (c_out, c_in, 1, 1)."""
    check_tensor(x, "conv1x1 input")
    if weights.ndim != 4 or weights.shape[2:] != (1, 1):
        raise ShapeError(f"conv1x1 weights must be (c_out, c_in, 1, 1), got {weights.shape}")
    if x.shape[1] != weights.shape[1]:
        raise ShapeError(f"conv1x1 expects {weights.shape[1]} input channels, got {x.shape[1]}")
    w2 = weights[:, :, 0, 0]
    out = np.einsum("nchw,oc->nohw", x, w2, optimize=True)
    out += bias[None, :, None, None]
    return out, (x, weights)


def conv1x1_backward(grad_out, cache):
    x, weights = cache
    w2 = weights[:, :, 0, 0]
    grad_x = np.einsum("nohw,oc->nchw", grad_out, w2, optimize=True)
    grad_w = np.einsum("nohw,nchw->oc", grad_out, x, optimize=True)[:, :, None, None]
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def batchnorm_forward(
    x, gamma, beta, running_mean, running_var, mode, momentum=BN_MOMENTUM, eps=BN_EPS
):
    """Channel-wise standardization over the (n, h, w) axes.

    Train mode uses current-batch statistics (well defined at batch size 1,
    where n=1 still leaves h*w samples per channel) and carries updated
    running averages in the cache; eval mode normalizes with the running
    statistics and updates nothing.
    """
    check_tensor(x, "batchnorm input")
    c = x.shape[1]
    for name, arr in (
        ("gamma", gamma),
        ("beta", beta),
        ("running_mean", running_mean),
        ("running_var", running_var),
    ):
        if arr.shape != (c,):
            raise ShapeError(f"batchnorm {name} must have shape ({c},), got {arr.shape}")
    if mode == "train":
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
    elif mode == "eval":
        mean, var = running_mean, running_var
        new_mean = new_var = None
    else:
        raise ParameterError(f"batchnorm mode must be 'train' or 'eval', got {mode!r}")
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * x_hat + beta[None, :, None, None]
    return out, (mode, x_hat, inv_std, gamma, new_mean, new_var)


def batchnorm_backward(grad_out, cache):
    mode, x_hat, inv_std, gamma, _, _ = cache
    grad_gamma = (grad_out * x_hat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    g = (gamma * inv_std)[None, :, None, None]
    if mode == "eval":
        grad_x = grad_out * g
    else:
        # full backward through the batch statistics
        m = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
        s1 = grad_out.sum(axis=(0, 2, 3))[None, :, None, None]
        s2 = (grad_out * x_hat).sum(axis=(0, 2, 3))[None, :, None, None]
        grad_x = g / m * (m * grad_out - s1 - x_hat * s2)
    return grad_x, grad_gamma, grad_beta


def relu_forward(x):
    return np.maximum(x, 0), x


def relu_backward(grad_out, cache):
    return grad_out * (cache > 0)


def sigmoid_forward(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out, out


def sigmoid_backward(grad_out, cache):
    return grad_out * cache * (1.0 - cache)


def dropout_forward(x, rate, mode, rng=None):
    """Inverted dropout: survivors scale by 1/(1-rate), eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "eval" or rate == 0.0:
        return x, None
    if rng is None:
        raise ParameterError("train-mode dropout needs an rng")
    keep = rng.random(x.shape) >= rate
    scale = x.dtype.type(1.0 / (1.0 - rate))
    return x * keep * scale, (keep, scale)


def dropout_backward(grad_out, cache):
    if cache is None:
        return grad_out
    keep, scale = cache
    return grad_out * keep * scale


def maxpool2_forward(x):
    """2x2 max pooling at stride 2; h and w must be even."""
    check_tensor(x, "maxpool input")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool needs even spatial dims, got {h}x{w}")
    hh, ww = h // 2, w // 2
    blocks = x.reshape(n, c, hh, 2, ww, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, hh, ww, 4)
    idx = blocks.argmax(axis=-1)  # first max in row-major window order
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def maxpool2_backward(grad_out, cache):
    idx, (n, c, h, w) = cache
    blocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad_out.dtype)
    np.put_along_axis(blocks, idx[..., None], grad_out[..., None], axis=-1)
    return (
        blocks.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


def upsample2_forward(x):
    """Nearest-neighbor 2x replication."""
    check_tensor(x, "upsample input")
    return x.repeat(2, axis=2).repeat(2, axis=3), None


def upsample2_backward(grad_out, cache=None):
    n, c, h, w = grad_out.shape
    return grad_out.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def concat_forward(lead, skip):
    """Channel concatenation, lead (decoder) channels first."""
    if lead.shape[0] != skip.shape[0] or lead.shape[2:] != skip.shape[2:]:
        raise ShapeError(
            f"concat needs matching batch and spatial dims, got {lead.shape} vs {skip.shape}"
        )
    return np.concatenate([lead, skip], axis=1), lead.shape[1]


def concat_backward(grad_out, lead_channels):
    return grad_out[:, :lead_channels], grad_out[:, lead_channels:]


def mse_loss(pred, target):
    """Mean squared error over all elements and its gradient w.r.t. pred."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad
