"""Block label matrices: extraction, rotation, occlusion and text I/O.

A block label matrix (BLM) condenses a pixel-level segmentation map into a
small grid where every cell carries the dominant class of its image block.
Cells may also be unknown (occluded); unknown is a distinct cell state, not
a reserved class index.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, OutOfBounds, ParseError

UNKNOWN = -1  # sentinel used inside cell arrays; never a valid class id


def check_rotation(quarter_turns: int) -> int:
    """Validate a counterclockwise rotation given in quarter turns."""
    if quarter_turns not in (0, 1, 2, 3):
        raise ValueError(f"rotation must be 0..3 quarter turns, got {quarter_turns}")
    return quarter_turns


@dataclass(frozen=True)
class SegmentMap:
    """Pixel-level class labels, row-major."""

    height: int
    width: int
    num_classes: int
    pixels: np.ndarray  # int array [height, width]

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.int64)
        if px.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"pixel array shape {px.shape} != ({self.height}, {self.width})"
            )
        if self.height < 1 or self.width < 1:
            raise DimensionMismatch("segment maps must be at least 1x1")
        if px.size and (px.min() < 0 or px.max() >= self.num_classes):
            raise ValueError(f"pixel labels must lie in [0, {self.num_classes})")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class BLM:
    """A rows x cols grid of class labels with an explicit unknown state.

    ``cells`` holds class ids in [0, num_classes) or UNKNOWN (-1). The array
    is frozen after construction; all operations return new instances.
    """

    rows: int
    cols: int
    num_classes: int
    cells: np.ndarray  # int array [rows, cols], -1 = unknown

    def __post_init__(self):
        grid = np.asarray(self.cells, dtype=np.int64)
        if grid.shape != (self.rows, self.cols):
            raise DimensionMismatch(f"cell array shape {grid.shape} != ({self.rows}, {self.cols})")
        if self.rows < 1 or self.cols < 1:
            raise DimensionMismatch("BLMs must be at least 1x1")
        if grid.size and (grid.min() < UNKNOWN or grid.max() >= self.num_classes):
            raise ValueError(f"cells must be UNKNOWN or lie in [0, {self.num_classes})")
        grid = grid.copy()
        grid.flags.writeable = False
        object.__setattr__(self, "cells", grid)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BLM):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.num_classes == other.num_classes
            and bool(np.array_equal(self.cells, other.cells))
        )

    def cell(self, r: int, c: int) -> int:
        return int(self.cells[r, c])

    def is_known(self, r: int, c: int) -> bool:
        return self.cells[r, c] != UNKNOWN

    @property
    def known_mask(self) -> np.ndarray:
        return self.cells != UNKNOWN

    def unknown_coords(self) -> list[tuple[int, int]]:
        """Unknown cell coordinates in raster order."""
        rs, cs = np.nonzero(self.cells == UNKNOWN)
        return list(zip(rs.tolist(), cs.tolist()))

    def fully_known(self) -> bool:
        return bool((self.cells != UNKNOWN).all())

    def with_cells(self, cells: np.ndarray) -> "BLM":
        return BLM(self.rows, self.cols, self.num_classes, cells)


@dataclass(frozen=True)
class MaskRegion:
    """A rectangular occlusion: ``height`` x ``width`` blocks at (top, left)."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise OutOfBounds("mask regions must be at least 1x1")
        if self.top < 0 or self.left < 0:
            raise OutOfBounds("mask regions cannot start at negative coordinates")

    def check_within(self, rows: int, cols: int) -> None:
        if self.top + self.height > rows or self.left + self.width > cols:
            raise OutOfBounds(
                f"mask {self.height}x{self.width} at ({self.top}, {self.left}) "
                f"exceeds a {rows}x{cols} grid"
            )

    def coords(self) -> list[tuple[int, int]]:
        return [
            (r, c)
            for r in range(self.top, self.top + self.height)
            for c in range(self.left, self.left + self.width)
        ]


def extract_blm(seg: SegmentMap, rows: int, cols: int) -> BLM:
    """Pool a segment map into a BLM by per-block mode, ties to smallest id.

    The map height/width must divide evenly into the block grid.
    """
    if rows < 1 or cols < 1:
        raise DimensionMismatch("block grid must be at least 1x1")
    if seg.height % rows != 0 or seg.width % cols != 0:
        raise DimensionMismatch(
            f"{seg.height}x{seg.width} pixels do not divide into a {rows}x{cols} block grid"
        )
    bh, bw = seg.height // rows, seg.width // cols
    blocks = seg.pixels.reshape(rows, bh, cols, bw).transpose(0, 2, 1, 3).reshape(rows, cols, bh * bw)
    cells = np.empty((rows, cols), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            counts = np.bincount(blocks[r, c], minlength=seg.num_classes)
            cells[r, c] = int(np.argmax(counts))  # argmax takes the smallest id on ties
    return BLM(rows, cols, seg.num_classes, cells)


def rotate_blm(blm: BLM, quarter_turns: int) -> BLM:
    """Rotate counterclockwise; cell (r, c) of RxC lands at (C-1-c, r) per turn."""
    k = check_rotation(quarter_turns)
    rotated = np.rot90(blm.cells, k)
    return BLM(rotated.shape[0], rotated.shape[1], blm.num_classes, rotated)


def rotate_coord(r: int, c: int, rows: int, cols: int, quarter_turns: int) -> tuple[int, int]:
    """Where (r, c) of a rows x cols grid lands after a counterclockwise rotation."""
    k = check_rotation(quarter_turns)
    if not (0 <= r < rows and 0 <= c < cols):
        raise OutOfBounds(f"({r}, {c}) outside {rows}x{cols} grid")
    for _ in range(k):
        r, c = cols - 1 - c, r
        rows, cols = cols, rows
    return r, c


def apply_mask(blm: BLM, region: MaskRegion) -> BLM:
    """Return a copy with every cell inside ``region`` set to unknown."""
    region.check_within(blm.rows, blm.cols)
    cells = blm.cells.copy()
    cells[region.top : region.top + region.height, region.left : region.left + region.width] = UNKNOWN
    return blm.with_cells(cells)


# --- text format -----------------------------------------------------------
#
# First line:  BLMv1 <rows> <cols> <num_classes>
# Then exactly <rows> lines of <cols> whitespace-separated tokens, each a
# decimal class id in [0, num_classes) or `?` for unknown. UTF-8, \n endings.

_MAGIC = "BLMv1"


def write_blm(blm: BLM, path: str | os.PathLike) -> None:
    lines = [f"{_MAGIC} {blm.rows} {blm.cols} {blm.num_classes}"]
    for r in range(blm.rows):
        lines.append(" ".join("?" if v == UNKNOWN else str(v) for v in blm.cells[r].tolist()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_blm(text: str) -> BLM:
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise ParseError("empty input, expected BLMv1 header", line=1)
    header = lines[0].split()
    if header[0] != _MAGIC:
        raise ParseError(f"bad magic {header[0]!r}, expected {_MAGIC!r}", line=1)
    if len(header) != 4:
        raise ParseError("header must be 'BLMv1 <rows> <cols> <num_classes>'", line=1)
    try:
        rows, cols, num_classes = (int(tok) for tok in header[1:])
    except ValueError:
        raise ParseError("non-integer header field", line=1) from None
    if rows < 1 or cols < 1 or num_classes < 1:
        raise ParseError("rows, cols and num_classes must be positive", line=1)
    if len(lines) < 1 + rows:
        raise ParseError(f"expected {rows} data lines, found {len(lines) - 1}", line=len(lines))
    cells = np.empty((rows, cols), dtype=np.int64)
    for r in range(rows):
        tokens = lines[1 + r].split()
        if len(tokens) != cols:
            raise ParseError(f"expected {cols} tokens, found {len(tokens)}", line=2 + r)
        for c, tok in enumerate(tokens):
            if tok == "?":
                cells[r, c] = UNKNOWN
                continue
            try:
                value = int(tok)
            except ValueError:
                raise ParseError(f"bad token {tok!r}", line=2 + r, col=c + 1) from None
            if not 0 <= value < num_classes:
                raise ParseError(
                    f"class {value} out of range [0, {num_classes})", line=2 + r, col=c + 1
                )
            cells[r, c] = value
    for extra, line in enumerate(lines[1 + rows :], start=2 + rows):
        if line.strip():
            raise ParseError("trailing content after grid", line=extra)
    return BLM(rows, cols, num_classes, cells)


def read_blm(path: str | os.PathLike) -> BLM:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_blm(fh.read())
