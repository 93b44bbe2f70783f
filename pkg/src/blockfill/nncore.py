"""Numeric primitives: masked convolutions, the gated unit, losses, gradcheck.

Everything runs in 64-bit floats. Each forward operation has a hand-derived
backward companion; ``gradient_check`` compares any analytic gradient against
central finite differences and is the house oracle for all of them.

Two kernel stacks are distinguished by their causal masks:

* vertical stacks see rows above the current cell (all columns). Type A
  kernels zero every tap on or below the center row, type B kernels only
  those strictly below, which lets deeper layers read the previous layer's
  same-row features without ever touching the current row of the original
  input.
* horizontal stacks are single-row kernels seeing the current row's left
  context. Type A zeroes taps at and right of center, type B strictly right
  of center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import backends
from .errors import ShapeMismatch

VERTICAL = "vertical"
HORIZONTAL = "horizontal"


def build_mask(shape: tuple[int, int, int, int], stack: str, mask_type: str) -> np.ndarray:
    """0/1 mask enforcing the causal tap pattern for one kernel."""
    if mask_type not in ("A", "B"):
        raise ValueError(f"mask_type must be 'A' or 'B', got {mask_type!r}")
    _, _, kh, kw = shape
    mask = np.ones(shape, dtype=np.float64)
    if stack == VERTICAL:
        center = kh // 2
        cut = center if mask_type == "A" else center + 1
        mask[:, :, cut:, :] = 0.0
    elif stack == HORIZONTAL:
        if kh != 1:
            raise ShapeMismatch(f"horizontal kernels must have a single row, got {kh}")
        center = kw // 2
        cut = center if mask_type == "A" else center + 1
        mask[:, :, :, cut:] = 0.0
    else:
        raise ValueError(f"stack must be {VERTICAL!r} or {HORIZONTAL!r}, got {stack!r}")
    return mask


@dataclass
class MaskedKernel:
    """A convolution kernel whose masked taps are structurally zero."""

    weights: np.ndarray  # [c_out, c_in, k_rows, k_cols]
    bias: np.ndarray  # [c_out]
    stack: str
    mask_type: str
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 4:
            raise ShapeMismatch(f"kernel weights must be 4-d, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatch(
                f"bias shape {self.bias.shape} != ({self.weights.shape[0]},)"
            )
        kh, kw = self.weights.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeMismatch(f"kernel sizes must be odd, got {kh}x{kw}")
        self.mask = build_mask(self.weights.shape, self.stack, self.mask_type)
        self.weights *= self.mask


def _with_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeMismatch(f"expected [C,R,Cc] or [B,C,R,Cc], got shape {x.shape}")


def masked_conv_forward(kernel: MaskedKernel, x: np.ndarray) -> np.ndarray:
    """Same-padded cross-correlation with masked taps forced to zero."""
    xb, squeeze = _with_batch(np.asarray(x, dtype=np.float64))
    if xb.shape[1] != kernel.weights.shape[1]:
        raise ShapeMismatch(
            f"input has {xb.shape[1]} channels, kernel expects {kernel.weights.shape[1]}"
        )
    w = kernel.weights * kernel.mask
    y = backends.conv2d_forward(np.ascontiguousarray(xb), w, kernel.bias)
    return y[0] if squeeze else y


def masked_conv_backward(
    kernel: MaskedKernel, x: np.ndarray, gy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_input, d_weights, d_bias); masked weight slots stay zero."""
    xb, squeeze = _with_batch(np.asarray(x, dtype=np.float64))
    gyb, _ = _with_batch(np.asarray(gy, dtype=np.float64))
    w = kernel.weights * kernel.mask
    gx, gw, gb = backends.conv2d_backward(
        np.ascontiguousarray(xb), w, np.ascontiguousarray(gyb)
    )
    gw *= kernel.mask
    return (gx[0] if squeeze else gx), gw, gb


def conv1x1_forward(w: np.ndarray, x: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Pointwise channel mix: w is [c_out, c_in]."""
    xb, squeeze = _with_batch(x)
    if xb.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"input has {xb.shape[1]} channels, 1x1 kernel expects {w.shape[1]}")
    y = np.einsum("oc,bcrq->borq", w, xb)
    if bias is not None:
        y += bias[None, :, None, None]
    return y[0] if squeeze else y


def conv1x1_backward(
    w: np.ndarray, x: np.ndarray, gy: np.ndarray, with_bias: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    xb, squeeze = _with_batch(x)
    gyb, _ = _with_batch(gy)
    gx = np.einsum("oc,borq->bcrq", w, gyb)
    gw = np.einsum("borq,bcrq->oc", gyb, xb)
    gb = gyb.sum(axis=(0, 2, 3)) if with_bias else None
    return (gx[0] if squeeze else gx), gw, gb


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _split_halves(pre: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    axis = 0 if pre.ndim == 3 else 1
    channels = pre.shape[axis]
    if channels % 2 != 0:
        raise ShapeMismatch(f"gated input needs an even channel count, got {channels}")
    half = channels // 2
    if axis == 0:
        return pre[:half], pre[half:], axis
    return pre[:, :half], pre[:, half:], axis


def gated_activation(pre: np.ndarray) -> np.ndarray:
    """y = tanh(filter half) * sigmoid(gate half), halves split on channels."""
    f, g, _ = _split_halves(np.asarray(pre, dtype=np.float64))
    return np.tanh(f) * sigmoid(g)


def gated_activation_backward(pre: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the stacked pre-activation [filter; gate]."""
    f, g, axis = _split_halves(np.asarray(pre, dtype=np.float64))
    t = np.tanh(f)
    s = sigmoid(g)
    gf = gy * s * (1.0 - t * t)
    gg = gy * t * s * (1.0 - s)
    return np.concatenate([gf, gg], axis=axis)


def softmax(logits: np.ndarray, axis: int = 0) -> np.ndarray:
    """Max-subtracted softmax along ``axis``."""
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_xent(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss in nats and the stabilized probability vector for one prediction."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    e = np.exp(shifted)
    z = e.sum()
    probs = e / z
    loss = float(np.log(z) - shifted[target])
    return loss, probs


def xent_grid(logits: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample summed cross-entropy over a logit grid.

    logits: [B, C, R, Cc]; targets: [B, R, Cc] int. Returns (per-sample nat
    sums [B], probs [B, C, R, Cc]).
    """
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e.sum(axis=1, keepdims=True)
    probs = e / z
    b_idx, r_idx, c_idx = np.ogrid[
        0 : logits.shape[0], 0 : logits.shape[2], 0 : logits.shape[3]
    ]
    picked = shifted[b_idx, targets, r_idx, c_idx]
    losses = (np.log(z[:, 0]) - picked).sum(axis=(1, 2))
    return losses, probs


def xent_grid_backward(probs: np.ndarray, targets: np.ndarray, scale: float) -> np.ndarray:
    """d(scale * summed xent)/d logits = scale * (probs - onehot(targets))."""
    g = probs * scale
    b_idx, r_idx, c_idx = np.ogrid[0 : probs.shape[0], 0 : probs.shape[2], 0 : probs.shape[3]]
    g[b_idx, targets, r_idx, c_idx] -= scale
    return g


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, gy: np.ndarray) -> np.ndarray:
    return np.where(x > 0, gy, 0.0)


GradFn = Callable[[], tuple[float, dict[str, np.ndarray]]]


def gradient_check(
    loss_and_grads: GradFn,
    params: dict[str, np.ndarray],
    step: float = 1e-5,
    names: Iterable[str] | None = None,
) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_and_grads`` evaluates the loss (and its analytic gradients) from
    the current contents of ``params``; every entry of every checked tensor
    is perturbed by +-step in place and restored. The relative error divides
    by max(|analytic|, |numeric|, 1e-8).
    """
    loss0, grads = loss_and_grads()
    del loss0
    worst = 0.0
    for name in names if names is not None else params.keys():
        theta = params[name]
        analytic = grads[name]
        if theta.shape != analytic.shape:
            raise ShapeMismatch(f"gradient shape mismatch for {name!r}")
        flat = theta.reshape(-1)
        if not np.shares_memory(flat, theta):
            raise ShapeMismatch(f"parameter {name!r} must be contiguous for in-place probing")
        a_flat = analytic.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            plus, _ = loss_and_grads()
            flat[i] = saved - step
            minus, _ = loss_and_grads()
            flat[i] = saved
            numeric = (plus - minus) / (2.0 * step)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst


def fsum(values: Iterable[float]) -> float:
    """Order-independent exact float summation (re-export for callers)."""
    return math.fsum(values)
