"""Four-directional ensemble: training, infilling, probability maps.

Four sub-models are trained on the 0/90/180/270-degree counterclockwise
rotations of the dataset, so each scans the grid from a different corner.
At inference the four per-cell distributions are combined (arithmetic mean
by default) into one prediction that can condition on known context on
every side of the target cell.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .blm import BLM, UNKNOWN, rotate_blm, rotate_coord
from .errors import ClassCountMismatch, FormatError, LengthMismatch
from .model import (
    ModelConfig,
    ModelParams,
    _require_known_uniform,
    encode_cells,
    model_forward,
    softmax,
)
from .training import CheckpointMeta, TrainConfig, read_section, train, write_section

ARITHMETIC_MEAN = "arithmetic_mean"
GEOMETRIC_MEAN = "geometric_mean"


@dataclass
class QuadroParams:
    """Four directional sub-models indexed by training-rotation quarter turns."""

    sub_models: list[ModelParams]  # index k trained on k quarter-turn rotated data
    combine_rule: str = ARITHMETIC_MEAN

    def __post_init__(self):
        if len(self.sub_models) != 4:
            raise ValueError("a quadro ensemble needs exactly four sub-models")
        configs = {id(m.config) for m in self.sub_models}
        first = self.sub_models[0].config
        for m in self.sub_models[1:]:
            if m.config != first:
                raise ValueError("all four sub-models must share one model config")
        if self.combine_rule not in (ARITHMETIC_MEAN, GEOMETRIC_MEAN):
            raise ValueError(f"unknown combine rule {self.combine_rule!r}")
        del configs

    @property
    def config(self) -> ModelConfig:
        return self.sub_models[0].config


def train_quadro(
    config: TrainConfig, model_config: ModelConfig, dataset: list[BLM]
) -> tuple[QuadroParams, list[list[float]]]:
    """Train one sub-model per rotation; seeds are offset by the turn count."""
    subs = []
    curves = []
    for k in range(4):
        rotated = [rotate_blm(b, k) for b in dataset]
        sub_config = replace(config, seed=config.seed + k)
        params, curve = train(sub_config, model_config, rotated)
        subs.append(params)
        curves.append(curve)
    return QuadroParams(subs), curves


def combine_distributions(
    d0: np.ndarray, d1: np.ndarray, d2: np.ndarray, d3: np.ndarray, rule: str = ARITHMETIC_MEAN
) -> np.ndarray:
    """Combine four per-cell class distributions into one."""
    dists = [np.asarray(d, dtype=np.float64) for d in (d0, d1, d2, d3)]
    length = dists[0].shape[0]
    for d in dists[1:]:
        if d.shape != (length,):
            raise LengthMismatch(f"distribution lengths differ: {[d.shape for d in dists]}")
    stacked = np.stack(dists)
    if rule == ARITHMETIC_MEAN:
        return stacked.mean(axis=0)
    if rule == GEOMETRIC_MEAN:
        logs = np.log(np.clip(stacked, 1e-300, None)).mean(axis=0)
        unnorm = np.exp(logs - logs.max())
        return unnorm / unnorm.sum()
    raise ValueError(f"unknown combine rule {rule!r}")


def _directional_probs(
    quadro: QuadroParams, cells: np.ndarray, num_classes: int, r: int, c: int
) -> np.ndarray:
    """Per-direction distributions [4, C] for one target cell of the grid."""
    rows, cols = cells.shape
    out = np.empty((4, num_classes))
    for k in range(4):
        rot_cells = np.rot90(cells, k)
        rr, cc = rotate_coord(r, c, rows, cols, k)
        logits = model_forward(quadro.sub_models[k], encode_cells(rot_cells, num_classes))
        out[k] = softmax(logits[:, rr, cc])
    return out


@dataclass
class EnsembleInfill:
    """Filled grid, combined distributions, and the per-direction record."""

    filled: BLM
    dists: dict[tuple[int, int], np.ndarray]
    directional: dict[tuple[int, int], np.ndarray]  # [4, C] per coord


def ensemble_infill(quadro: QuadroParams, blm: BLM) -> EnsembleInfill:
    """Fill unknown cells in raster order using all four directions.

    For each target cell the current grid is rotated into every sub-model's
    frame; cells still unknown at that point stay zero-encoded. The four
    distributions are combined, the argmax committed (ties to the smallest
    class id) before the scan advances.
    """
    if blm.num_classes != quadro.config.num_classes:
        raise ClassCountMismatch(
            f"grid has {blm.num_classes} classes, ensemble expects {quadro.config.num_classes}"
        )
    cells = blm.cells.copy()
    dists: dict[tuple[int, int], np.ndarray] = {}
    directional: dict[tuple[int, int], np.ndarray] = {}
    for r, c in blm.unknown_coords():
        per_dir = _directional_probs(quadro, cells, blm.num_classes, r, c)
        combined = combine_distributions(*per_dir, rule=quadro.combine_rule)
        dists[(r, c)] = combined
        directional[(r, c)] = per_dir
        cells[r, c] = int(np.argmax(combined))
    return EnsembleInfill(filled=blm.with_cells(cells), dists=dists, directional=directional)


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-class probability over the unknown cells of one grid."""

    class_id: int
    rows: int
    cols: int
    values: dict[tuple[int, int], float]


def probability_map(quadro: QuadroParams, blm: BLM, class_id: int) -> ProbabilityMap:
    """Probability of one class at every unknown cell along the greedy fill."""
    if not 0 <= class_id < blm.num_classes:
        raise ClassCountMismatch(f"class {class_id} out of range [0, {blm.num_classes})")
    result = ensemble_infill(quadro, blm)
    values = {coord: float(probs[class_id]) for coord, probs in result.dists.items()}
    return ProbabilityMap(class_id=class_id, rows=blm.rows, cols=blm.cols, values=values)


def probability_map_csv(pmap: ProbabilityMap) -> str:
    """CSV export: header `row,col,prob`, 9 significant digits, raster order."""
    lines = ["row,col,prob"]
    for (r, c) in sorted(pmap.values):
        lines.append(f"{r},{c},{pmap.values[(r, c)]:.9g}")
    return "\n".join(lines) + "\n"


def probability_map_pgm(pmap: ProbabilityMap) -> bytes:
    """Binary PGM (P5, maxval 255); known cells render black."""
    img = np.zeros((pmap.rows, pmap.cols), dtype=np.uint8)
    for (r, c), p in pmap.values.items():
        img[r, c] = int(round(p * 255))
    header = f"P5\n{pmap.cols} {pmap.rows}\n255\n".encode("ascii")
    return header + img.tobytes()


def ensemble_nll_bits_per_dim(quadro: QuadroParams, dataset: list[BLM]) -> float:
    """Mean -log2 of the combined per-cell conditional, teacher-forced.

    Every grid is fully known, so each direction conditions on its own
    raster past of the true grid; the four probabilities for the true class
    are combined per cell and aggregated exactly like nll_bits_per_dim.
    """
    rows, cols, classes = _require_known_uniform(dataset)
    if classes != quadro.config.num_classes:
        raise ClassCountMismatch(
            f"dataset has {classes} classes, ensemble expects {quadro.config.num_classes}"
        )
    sums: list[float] = []
    for blm in dataset:
        per_dir = np.empty((4, classes, rows, cols))
        for k in range(4):
            rot = rotate_blm(blm, k)
            logits = model_forward(quadro.sub_models[k], encode_cells(rot.cells, classes))
            # undo the grid rotation so distributions line up cell-for-cell
            per_dir[k] = np.rot90(softmax(logits, axis=0), -k, axes=(1, 2))
        if quadro.combine_rule == ARITHMETIC_MEAN:
            combined = per_dir.mean(axis=0)
        else:
            combined = np.exp(np.log(np.clip(per_dir, 1e-300, None)).mean(axis=0))
            combined /= combined.sum(axis=0, keepdims=True)
        picked = combined[blm.cells, np.arange(rows)[:, None], np.arange(cols)[None, :]]
        sums.append(float(-np.log2(picked).sum()))
    return math.fsum(sums) / (len(dataset) * rows * cols)


# --- quadro checkpoints ------------------------------------------------------


def save_quadro(
    quadro: QuadroParams, path: str | os.PathLike, metas: list[CheckpointMeta] | None = None
) -> None:
    metas = metas or [CheckpointMeta() for _ in range(4)]
    with open(path, "wb") as fh:
        for k, (params, meta) in enumerate(zip(quadro.sub_models, metas)):
            fh.write(f"DIR {k}\n".encode("ascii"))
            write_section(fh, params, meta)


def load_quadro(path: str | os.PathLike) -> tuple[QuadroParams, list[CheckpointMeta]]:
    subs = []
    metas = []
    with open(path, "rb") as fh:
        for k in range(4):
            line = fh.readline()
            if line != f"DIR {k}\n".encode("ascii"):
                raise FormatError(
                    f"expected 'DIR {k}' section header, got {line.decode('ascii', 'replace')!r}"
                )
            params, meta = read_section(fh)
            subs.append(params)
            metas.append(meta)
        if fh.read(1):
            raise FormatError("trailing bytes after the four checkpoint sections")
    return QuadroParams(subs), metas
