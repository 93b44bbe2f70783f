"""Gradient-descent training and deterministic checkpointing.

Training minimizes mean per-block negative log-likelihood (nats) over fully
known grids. Given the same config, dataset order and seed, two runs produce
bit-identical parameters: initialization and shuffling come from one seeded
generator, batches are traversed in a fixed order, and all arithmetic is
64-bit.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .blm import BLM
from .errors import EmptyDataset, FormatError, ShapeMismatch
from .model import (
    ModelConfig,
    ModelParams,
    _require_known_uniform,
    encode_input,
    init_params,
    model_backward,
    model_forward_cached,
)
from .nncore import xent_grid, xent_grid_backward


@dataclass(frozen=True)
class AdamSettings:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    epochs: int = 1
    optimizer: str = "adam"  # "adam" or "sgd"
    adam: AdamSettings = field(default_factory=AdamSettings)
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class _Adam:
    def __init__(self, settings: AdamSettings, lr: float, tensors: list[tuple[str, np.ndarray]]):
        self.s = settings
        self.lr = lr
        self.t = 0
        self.m = {name: np.zeros_like(arr) for name, arr in tensors}
        self.v = {name: np.zeros_like(arr) for name, arr in tensors}

    def step(self, tensors: list[tuple[str, np.ndarray]], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2, eps = self.s.beta1, self.s.beta2, self.s.eps
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for name, arr in tensors:
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            arr -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


class _SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, tensors: list[tuple[str, np.ndarray]], grads: dict[str, np.ndarray]) -> None:
        for name, arr in tensors:
            arr -= self.lr * grads[name]


def train(
    config: TrainConfig, model_config: ModelConfig, dataset: list[BLM]
) -> tuple[ModelParams, list[float]]:
    """Optimize a fresh model; returns it with the per-epoch mean NLL curve (nats)."""
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    rows, cols, classes = _require_known_uniform(dataset)
    if classes != model_config.num_classes:
        raise ShapeMismatch(
            f"dataset has {classes} classes, model config says {model_config.num_classes}"
        )
    rng = np.random.default_rng(config.seed)
    params = init_params(model_config, rng)
    tensors = params.named_tensors()
    opt = (
        _Adam(config.adam, config.learning_rate, tensors)
        if config.optimizer == "adam"
        else _SGD(config.learning_rate)
    )
    x_all = np.stack([encode_input(b) for b in dataset])
    t_all = np.stack([b.cells for b in dataset])
    n = len(dataset)
    curve: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        epoch_nats: list[float] = []
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x = x_all[idx]
            targets = t_all[idx]
            logits, cache = model_forward_cached(params, x)
            losses, probs = xent_grid(logits, targets)
            blocks = x.shape[0] * rows * cols
            epoch_nats.extend((losses / (rows * cols)).tolist())
            g_logits = xent_grid_backward(probs, targets, 1.0 / blocks)
            grads, _ = model_backward(params, cache, g_logits)
            opt.step(tensors, grads)
        curve.append(math.fsum(epoch_nats) / n)
    return params, curve


# --- checkpoint format -------------------------------------------------------
#
# ASCII header `QPCNv1 <num_tensors>\n`, then per tensor a descriptor line
# `<name> <ndim> <d0> <d1> ...\n` followed by the row-major IEEE-754
# binary64 little-endian payload, and a trailing `META <seed> <epochs>
# <final_loss>\n`. The model config rides along as the first tensor, named
# `config`. Four-direction ensembles concatenate one such section per
# sub-model, each prefixed with `DIR <quarter_turns>\n`.

_MAGIC = b"QPCNv1"

_CONFIG_FIELDS = (
    "num_classes",
    "num_layers",
    "features",
    "first_kernel",
    "hidden_kernel",
    "head_channels",
)


@dataclass
class CheckpointMeta:
    seed: int = 0
    epochs: int = 0
    final_loss: float = float("nan")


def _config_tensor(config: ModelConfig) -> np.ndarray:
    return np.array([float(getattr(config, name)) for name in _CONFIG_FIELDS])


def _config_from_tensor(values: np.ndarray) -> ModelConfig:
    if values.shape != (len(_CONFIG_FIELDS),):
        raise FormatError(f"config tensor must have {len(_CONFIG_FIELDS)} entries")
    return ModelConfig(**{name: int(v) for name, v in zip(_CONFIG_FIELDS, values)})


def write_section(fh: BinaryIO, params: ModelParams, meta: CheckpointMeta) -> None:
    entries = [("config", _config_tensor(params.config))] + params.named_tensors()
    fh.write(_MAGIC + f" {len(entries)}\n".encode("ascii"))
    for name, arr in entries:
        dims = " ".join(str(d) for d in arr.shape)
        fh.write(f"{name} {arr.ndim}{' ' + dims if dims else ''}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    fh.write(f"META {meta.seed} {meta.epochs} {meta.final_loss!r}\n".encode("ascii"))


def _read_line(fh: BinaryIO) -> bytes:
    chunks = bytearray()
    while True:
        byte = fh.read(1)
        if not byte:
            raise FormatError("unexpected end of file inside checkpoint header")
        if byte == b"\n":
            return bytes(chunks)
        chunks += byte
        if len(chunks) > 4096:
            raise FormatError("unterminated header line")


def read_section(fh: BinaryIO) -> tuple[ModelParams, CheckpointMeta]:
    header = _read_line(fh).split()
    if not header or header[0] != _MAGIC:
        magic = header[0].decode("ascii", "replace") if header else ""
        raise FormatError(f"bad magic {magic!r}, expected {_MAGIC.decode()!r}")
    try:
        count = int(header[1])
    except (IndexError, ValueError):
        raise FormatError("header must be 'QPCNv1 <num_tensors>'") from None
    tensors: dict[str, np.ndarray] = {}
    order: list[str] = []
    for _ in range(count):
        desc = _read_line(fh).split()
        if len(desc) < 2:
            raise FormatError("truncated tensor descriptor")
        name = desc[0].decode("ascii")
        try:
            ndim = int(desc[1])
            shape = tuple(int(d) for d in desc[2 : 2 + ndim])
        except ValueError:
            raise FormatError(f"bad tensor descriptor for {name!r}") from None
        if len(shape) != ndim:
            raise FormatError(f"descriptor for {name!r} lists {len(shape)} of {ndim} dims")
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        payload = fh.read(8 * size)
        if len(payload) != 8 * size:
            raise FormatError(f"truncated payload for tensor {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        order.append(name)
    meta_line = _read_line(fh).split()
    if not meta_line or meta_line[0] != b"META" or len(meta_line) != 4:
        raise FormatError("missing META trailer")
    meta = CheckpointMeta(
        seed=int(meta_line[1]), epochs=int(meta_line[2]), final_loss=float(meta_line[3])
    )
    if "config" not in tensors:
        raise FormatError("checkpoint lacks a config tensor")
    config = _config_from_tensor(tensors.pop("config"))
    params = init_params(config, np.random.default_rng(0))
    expected = params.named_tensors()
    if [n for n, _ in expected] != [n for n in order if n != "config"]:
        raise FormatError("checkpoint tensor names do not match the model layout")
    for name, arr in expected:
        stored = tensors[name]
        if stored.shape != arr.shape:
            raise ShapeMismatch(
                f"tensor {name!r} has shape {stored.shape}, config implies {arr.shape}"
            )
        arr[...] = stored
    return params, meta


def save_checkpoint(params: ModelParams, path: str | os.PathLike, meta: CheckpointMeta | None = None) -> None:
    with open(path, "wb") as fh:
        write_section(fh, params, meta or CheckpointMeta())


def load_checkpoint(path: str | os.PathLike) -> tuple[ModelParams, CheckpointMeta]:
    with open(path, "rb") as fh:
        params, meta = read_section(fh)
        if fh.read(1):
            raise FormatError("trailing bytes after checkpoint section")
    return params, meta
