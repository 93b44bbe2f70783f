"""One directional gated PixelCNN over block label grids.

The network factorizes the joint distribution of a grid in raster order:
every cell's class logits depend only on strictly earlier cells. A vertical
stack carries context from the rows above (type A first, type B after, so
deeper layers may reuse same-row features that themselves only encode rows
above), a horizontal stack carries the current row's left context, and each
layer links the vertical pre-activation into the horizontal stack before the
gated unit. Residual connections run along the horizontal stack from the
second layer on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blm import BLM, UNKNOWN
from .errors import (
    ClassCountMismatch,
    EmptyDataset,
    ShapeMismatch,
    StateError,
    UnknownCellPresent,
)
from .nncore import (
    HORIZONTAL,
    VERTICAL,
    MaskedKernel,
    conv1x1_backward,
    conv1x1_forward,
    gated_activation,
    gated_activation_backward,
    masked_conv_backward,
    masked_conv_forward,
    relu,
    relu_backward,
    softmax,
    xent_grid,
)


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int
    num_layers: int = 6
    features: int = 32
    first_kernel: int = 7
    hidden_kernel: int = 3
    head_channels: int = 64

    def __post_init__(self):
        if self.num_classes < 2:
            raise ShapeMismatch("need at least two classes")
        if self.num_layers < 1 or self.features < 1 or self.head_channels < 1:
            raise ShapeMismatch("layer, feature and head counts must be positive")
        if self.first_kernel % 2 == 0 or self.hidden_kernel % 2 == 0:
            raise ShapeMismatch("kernel sizes must be odd")


@dataclass
class GatedLayerParams:
    """Parameters of one gated layer (vertical + horizontal stack pair)."""

    vertical: MaskedKernel  # 2F output channels
    horizontal: MaskedKernel  # 2F output channels, single-row kernel
    vert_to_horiz: np.ndarray  # [2F, 2F] pointwise link
    horiz_residual: np.ndarray  # [F, F] pointwise mix on the gated output
    layer_index: int

    @property
    def is_first(self) -> bool:
        return self.layer_index == 0


@dataclass
class ModelParams:
    config: ModelConfig
    layers: list[GatedLayerParams]
    head_w1: np.ndarray  # [head_channels, F]
    head_b1: np.ndarray
    head_w2: np.ndarray  # [num_classes, head_channels]
    head_b2: np.ndarray

    def named_tensors(self) -> list[tuple[str, np.ndarray]]:
        """All parameter tensors in a fixed, documented order."""
        out: list[tuple[str, np.ndarray]] = []
        for layer in self.layers:
            p = f"layer{layer.layer_index}"
            out.append((f"{p}.v_weight", layer.vertical.weights))
            out.append((f"{p}.v_bias", layer.vertical.bias))
            out.append((f"{p}.h_weight", layer.horizontal.weights))
            out.append((f"{p}.h_bias", layer.horizontal.bias))
            out.append((f"{p}.v2h", layer.vert_to_horiz))
            out.append((f"{p}.res", layer.horiz_residual))
        out.append(("head.w1", self.head_w1))
        out.append(("head.b1", self.head_b1))
        out.append(("head.w2", self.head_w2))
        out.append(("head.b2", self.head_b2))
        return out

    def named_masks(self) -> dict[str, np.ndarray]:
        """Masks for tensors that have structurally-zero entries."""
        masks = {}
        for layer in self.layers:
            p = f"layer{layer.layer_index}"
            masks[f"{p}.v_weight"] = layer.vertical.mask
            masks[f"{p}.h_weight"] = layer.horizontal.mask
        return masks


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Random initialization scaled by each kernel's unmasked fan-in."""
    f = config.features
    layers = []
    c_in = config.num_classes
    for k in range(config.num_layers):
        ksize = config.first_kernel if k == 0 else config.hidden_kernel
        mask_type = "A" if k == 0 else "B"
        v = _init_masked(rng, 2 * f, c_in, ksize, ksize, VERTICAL, mask_type)
        h = _init_masked(rng, 2 * f, c_in, 1, ksize, HORIZONTAL, mask_type)
        v2h = rng.normal(0.0, 1.0 / math.sqrt(2 * f), size=(2 * f, 2 * f))
        res = rng.normal(0.0, 1.0 / math.sqrt(f), size=(f, f))
        layers.append(GatedLayerParams(v, h, v2h, res, layer_index=k))
        c_in = f
    head_w1 = rng.normal(0.0, 1.0 / math.sqrt(f), size=(config.head_channels, f))
    head_b1 = rng.normal(0.0, 0.1, size=config.head_channels)
    head_w2 = rng.normal(0.0, 1.0 / math.sqrt(config.head_channels), size=(config.num_classes, config.head_channels))
    head_b2 = rng.normal(0.0, 0.1, size=config.num_classes)
    return ModelParams(config, layers, head_w1, head_b1, head_w2, head_b2)


def _init_masked(
    rng: np.random.Generator, c_out: int, c_in: int, kh: int, kw: int, stack: str, mask_type: str
) -> MaskedKernel:
    kernel = MaskedKernel(
        weights=np.zeros((c_out, c_in, kh, kw)),
        bias=np.zeros(c_out),
        stack=stack,
        mask_type=mask_type,
    )
    taps = float(kernel.mask[0, 0].sum())
    std = 1.0 / math.sqrt(max(taps * c_in, 1.0))
    kernel.weights = rng.normal(0.0, std, size=(c_out, c_in, kh, kw)) * kernel.mask
    return kernel


def encode_cells(cells: np.ndarray, num_classes: int) -> np.ndarray:
    """One-hot channels [num_classes, rows, cols]; unknown cells all-zero."""
    return (cells[None, :, :] == np.arange(num_classes)[:, None, None]).astype(np.float64)


def encode_input(blm: BLM, num_classes: int | None = None) -> np.ndarray:
    if num_classes is not None and num_classes != blm.num_classes:
        raise ClassCountMismatch(f"grid has {blm.num_classes} classes, model expects {num_classes}")
    return encode_cells(blm.cells, blm.num_classes)


@dataclass
class ModelCache:
    """Forward activations retained for the backward pass."""

    x: np.ndarray
    layer_acts: list[dict[str, np.ndarray]]
    h_final: np.ndarray
    a1: np.ndarray


def _forward(params: ModelParams, x: np.ndarray, keep: bool):
    if x.shape[1] != params.config.num_classes:
        raise ShapeMismatch(
            f"input has {x.shape[1]} channels, model expects {params.config.num_classes}"
        )
    f = params.config.features
    v = x
    h = x
    acts: list[dict[str, np.ndarray]] = []
    for layer in params.layers:
        v_in, h_in = v, h
        v_pre = masked_conv_forward(layer.vertical, v_in)
        h_pre = masked_conv_forward(layer.horizontal, h_in) + conv1x1_forward(
            layer.vert_to_horiz, v_pre
        )
        h_gated = gated_activation(h_pre)
        h_mixed = conv1x1_forward(layer.horiz_residual, h_gated)
        v = gated_activation(v_pre)
        h = h_mixed if layer.is_first else h_mixed + h_in
        if keep:
            acts.append(
                {"v_in": v_in, "h_in": h_in, "v_pre": v_pre, "h_pre": h_pre, "h_gated": h_gated}
            )
    a1 = conv1x1_forward(params.head_w1, h, params.head_b1)
    logits = conv1x1_forward(params.head_w2, relu(a1), params.head_b2)
    cache = ModelCache(x=x, layer_acts=acts, h_final=h, a1=a1) if keep else None
    return logits, cache


def model_forward(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Class logits [num_classes, rows, cols]; causal in raster order."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 3
    logits, _ = _forward(params, x[None] if squeeze else x, False)
    return logits[0] if squeeze else logits


def model_forward_cached(params: ModelParams, x: np.ndarray) -> tuple[np.ndarray, ModelCache]:
    """Batched forward ([B, C, R, Cc]) retaining activations for backward."""
    return _forward(params, x, True)


def model_backward(
    params: ModelParams, cache: ModelCache | None, g_logits: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Analytic gradients for every parameter plus the input gradient."""
    if cache is None:
        raise StateError("backward requires the cache from model_forward_cached")
    grads: dict[str, np.ndarray] = {}
    r1 = relu(cache.a1)
    g_r1, gw2, gb2 = conv1x1_backward(params.head_w2, r1, g_logits, with_bias=True)
    g_a1 = relu_backward(cache.a1, g_r1)
    g_h, gw1, gb1 = conv1x1_backward(params.head_w1, cache.h_final, g_a1, with_bias=True)
    grads["head.w1"], grads["head.b1"] = gw1, gb1
    grads["head.w2"], grads["head.b2"] = gw2, gb2
    g_v = np.zeros_like(g_h, shape=(g_h.shape[0], params.config.features) + g_h.shape[2:])
    for layer, acts in zip(reversed(params.layers), reversed(cache.layer_acts)):
        p = f"layer{layer.layer_index}"
        g_hgated, g_res, _ = conv1x1_backward(layer.horiz_residual, acts["h_gated"], g_h)
        g_hpre = gated_activation_backward(acts["h_pre"], g_hgated)
        g_hin, g_wh, g_bh = masked_conv_backward(layer.horizontal, acts["h_in"], g_hpre)
        if not layer.is_first:
            g_hin = g_hin + g_h
        g_vpre, g_v2h, _ = conv1x1_backward(layer.vert_to_horiz, acts["v_pre"], g_hpre)
        g_vpre += gated_activation_backward(acts["v_pre"], g_v)
        g_vin, g_wv, g_bv = masked_conv_backward(layer.vertical, acts["v_in"], g_vpre)
        grads[f"{p}.v_weight"], grads[f"{p}.v_bias"] = g_wv, g_bv
        grads[f"{p}.h_weight"], grads[f"{p}.h_bias"] = g_wh, g_bh
        grads[f"{p}.v2h"], grads[f"{p}.res"] = g_v2h, g_res
        g_v, g_h = g_vin, g_hin
    g_input = g_v + g_h
    return grads, g_input


def _require_known_uniform(dataset: list[BLM]) -> tuple[int, int, int]:
    if not dataset:
        raise EmptyDataset("no grids to evaluate")
    rows, cols, classes = dataset[0].rows, dataset[0].cols, dataset[0].num_classes
    for blm in dataset:
        if (blm.rows, blm.cols, blm.num_classes) != (rows, cols, classes):
            raise ShapeMismatch("dataset grids must share one shape and class count")
        if not blm.fully_known():
            raise UnknownCellPresent("dataset grids must be fully known")
    return rows, cols, classes


def nll_bits_per_dim(params: ModelParams, dataset: list[BLM], batch_size: int = 64) -> float:
    """Mean -log2 p(true class | earlier blocks) per block over the dataset.

    Per-sample sums are combined with exact summation, so the result does
    not depend on dataset order or batching.
    """
    rows, cols, classes = _require_known_uniform(dataset)
    if classes != params.config.num_classes:
        raise ClassCountMismatch(
            f"dataset has {classes} classes, model expects {params.config.num_classes}"
        )
    sums: list[float] = []
    for start in range(0, len(dataset), batch_size):
        chunk = dataset[start : start + batch_size]
        x = np.stack([encode_input(b) for b in chunk])
        targets = np.stack([b.cells for b in chunk])
        logits, _ = _forward(params, x, False)
        losses, _ = xent_grid(logits, targets)
        sums.extend(losses.tolist())
    total = math.fsum(sums)
    return total / (len(dataset) * rows * cols * math.log(2.0))


def log_likelihood(params: ModelParams, blm: BLM) -> float:
    """Log joint probability (nats) of one fully known grid under the model."""
    if not blm.fully_known():
        raise UnknownCellPresent("log_likelihood needs a fully known grid")
    x = encode_input(blm)[None]
    logits, _ = _forward(params, x, False)
    losses, _ = xent_grid(logits, blm.cells[None])
    return -float(losses[0])


@dataclass
class InfillResult:
    """A completed grid plus the recorded distribution at each filled cell."""

    filled: BLM
    dists: dict[tuple[int, int], np.ndarray]


def infill_directional(params: ModelParams, blm: BLM) -> InfillResult:
    """Fill unknown cells in raster order, committing the argmax class.

    Each unknown cell's distribution conditions on the original known cells
    plus every previously committed fill; cells not yet reached stay
    zero-encoded and, by causality, cannot influence the prediction.
    """
    if blm.num_classes != params.config.num_classes:
        raise ClassCountMismatch(
            f"grid has {blm.num_classes} classes, model expects {params.config.num_classes}"
        )
    cells = blm.cells.copy()
    dists: dict[tuple[int, int], np.ndarray] = {}
    for r, c in blm.unknown_coords():
        logits = model_forward(params, encode_cells(cells, blm.num_classes))
        probs = softmax(logits[:, r, c])
        dists[(r, c)] = probs
        cells[r, c] = int(np.argmax(probs))  # first max wins: smallest class id
    return InfillResult(filled=blm.with_cells(cells), dists=dists)
