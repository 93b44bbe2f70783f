"""Scoring: Top-N accuracy over occluded blocks and human-session accuracy.

Accuracies are pooled over all masked blocks of all images (not averaged
per image); the report header records this. Single-direction baselines
rotate the masked grid into each sub-model's native orientation, infill
there, and map the recorded distributions back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blm import BLM, MaskRegion, apply_mask, rotate_blm, rotate_coord
from .data import Dataset
from .errors import CoordMismatch, IncompleteLabels, MaskTooLarge
from .model import infill_directional
from .quadro import QuadroParams, ensemble_infill

SINGLE_MODEL_NAMES = [
    "gated_pixelcnn",
    "gated_pixelcnn_90",
    "gated_pixelcnn_180",
    "gated_pixelcnn_270",
]
ENSEMBLE_NAME = "four_directional"
TOP_NS = (5, 3, 1)


def top_n_accuracy(
    dists: dict[tuple[int, int], np.ndarray], truth: BLM, n: int
) -> float:
    """Percent of coords whose true class ranks in the n most probable.

    Ranking ties are broken toward the smaller class id, making the cutoff
    deterministic.
    """
    if not 1 <= n <= truth.num_classes:
        raise ValueError(f"n must lie in [1, {truth.num_classes}]")
    if not dists:
        raise CoordMismatch("no distributions to score")
    hits = 0
    for (r, c), probs in dists.items():
        if not truth.is_known(r, c):
            raise CoordMismatch(f"truth is unknown at ({r}, {c})")
        order = np.lexsort((np.arange(len(probs)), -probs))
        if truth.cell(r, c) in order[:n]:
            hits += 1
    return 100.0 * hits / len(dists)


@dataclass(frozen=True)
class EvalRow:
    model: str
    unknown_blocks: str  # e.g. "6x6"
    unknown_area_pct: float
    top5: float
    top3: float
    top1: float


@dataclass(frozen=True)
class EvalReport:
    rows: list[EvalRow]
    dataset_tag: str
    mask_spec: str
    aggregation: str = "pooled over all masked blocks of all images"

    def to_csv(self) -> str:
        lines = ["model,unknown_blocks,unknown_area_pct,top5,top3,top1"]
        for row in self.rows:
            lines.append(
                f"{row.model},{row.unknown_blocks},{row.unknown_area_pct:.2f},"
                f"{row.top5:.2f},{row.top3:.2f},{row.top1:.2f}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        headers = ["Model", "Unknown blocks", "Unknown area (%)", "Top-5 acc (%)", "Top-3 acc (%)", "Top-1 acc (%)"]
        cells = [headers] + [
            [
                row.model,
                row.unknown_blocks,
                f"{row.unknown_area_pct:.2f}",
                f"{row.top5:.2f}",
                f"{row.top3:.2f}",
                f"{row.top1:.2f}",
            ]
            for row in self.rows
        ]
        widths = [max(len(line[i]) for line in cells) for i in range(len(headers))]
        out = [f"# dataset={self.dataset_tag} mask={self.mask_spec} scoring={self.aggregation}"]
        for line in cells:
            out.append("  ".join(text.ljust(w) for text, w in zip(line, widths)).rstrip())
        return "\n".join(out) + "\n"


def _accuracy_counts(
    dists: dict[tuple[int, int], np.ndarray], truth: BLM
) -> dict[int, int]:
    counts = {n: 0 for n in TOP_NS}
    for (r, c), probs in dists.items():
        order = np.lexsort((np.arange(len(probs)), -probs))
        true_class = truth.cell(r, c)
        for n in TOP_NS:
            if true_class in order[: min(n, len(probs))]:
                counts[n] += 1
    return counts


def run_eval(
    quadro: QuadroParams,
    testset: Dataset,
    mask_height: int,
    mask_width: int,
    seed: int = 0,
    fixed_position: tuple[int, int] | None = None,
) -> EvalReport:
    """Score the four single-direction models and the ensemble.

    One mask per test image, placed uniformly at random under the seed (or
    at ``fixed_position``); every masked block of every image contributes
    one prediction per model.
    """
    rows, cols = testset.items[0].rows, testset.items[0].cols
    if mask_height > rows or mask_width > cols:
        raise MaskTooLarge(f"{mask_height}x{mask_width} mask cannot fit a {rows}x{cols} grid")
    rng = np.random.default_rng(seed)
    totals = {name: {n: 0 for n in TOP_NS} for name in SINGLE_MODEL_NAMES + [ENSEMBLE_NAME]}
    scored = 0
    for truth in testset.items:
        if fixed_position is not None:
            top, left = fixed_position
        else:
            top = int(rng.integers(0, rows - mask_height + 1))
            left = int(rng.integers(0, cols - mask_width + 1))
        region = MaskRegion(top=top, left=left, height=mask_height, width=mask_width)
        masked = apply_mask(truth, region)
        scored += mask_height * mask_width
        for k, name in enumerate(SINGLE_MODEL_NAMES):
            rotated = rotate_blm(masked, k)
            result = infill_directional(quadro.sub_models[k], rotated)
            back: dict[tuple[int, int], np.ndarray] = {}
            for (rr, cc), probs in result.dists.items():
                orig = rotate_coord(rr, cc, rotated.rows, rotated.cols, (4 - k) % 4)
                back[orig] = probs
            for n, hits in _accuracy_counts(back, truth).items():
                totals[name][n] += hits
        result = ensemble_infill(quadro, masked)
        for n, hits in _accuracy_counts(result.dists, truth).items():
            totals[ENSEMBLE_NAME][n] += hits
    area_pct = round(100.0 * mask_height * mask_width / (rows * cols), 2)
    blocks = f"{mask_height}x{mask_width}"
    report_rows = [
        EvalRow(
            model=name,
            unknown_blocks=blocks,
            unknown_area_pct=area_pct,
            top5=100.0 * totals[name][5] / scored,
            top3=100.0 * totals[name][3] / scored,
            top1=100.0 * totals[name][1] / scored,
        )
        for name in SINGLE_MODEL_NAMES + [ENSEMBLE_NAME]
    ]
    return EvalReport(rows=report_rows, dataset_tag=testset.split, mask_spec=f"{blocks}@seed{seed}")


@dataclass(frozen=True)
class SessionScore:
    session_id: str
    user_accuracy: float
    model_accuracy: float
    user_correct: dict[tuple[int, int], bool]
    model_correct: dict[tuple[int, int], bool]


def label_accuracy(
    truth: BLM, coords: list[tuple[int, int]], labels: dict[tuple[int, int], int]
) -> tuple[float, dict[tuple[int, int], bool]]:
    """Percent of ``coords`` whose label matches the truth, plus per-cell flags."""
    correct = {coord: labels[coord] == truth.cell(*coord) for coord in coords}
    pct = 100.0 * sum(correct.values()) / len(coords) if coords else 100.0
    return pct, correct


def score_session(
    masked: BLM,
    truth: BLM,
    user_labels: dict[tuple[int, int], int],
    model_filled: BLM,
    session_id: str = "",
) -> SessionScore:
    """Score one human-vs-machine trial over exactly the masked cells."""
    coords = masked.unknown_coords()
    coord_set = set(coords)
    missing = [c for c in coords if c not in user_labels]
    extra = [c for c in user_labels if c not in coord_set]
    if missing or extra:
        raise IncompleteLabels(missing, extra)
    user_pct, user_correct = label_accuracy(truth, coords, user_labels)
    model_labels = {coord: model_filled.cell(*coord) for coord in coords}
    model_pct, model_correct = label_accuracy(truth, coords, model_labels)
    return SessionScore(
        session_id=session_id,
        user_accuracy=user_pct,
        model_accuracy=model_pct,
        user_correct=user_correct,
        model_correct=model_correct,
    )
