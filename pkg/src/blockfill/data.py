"""Training corpora: synthetic layered scenes and label-map ingestion.

The synthetic generator produces street-scene-like grids with horizontal
bands (sky over trees over sidewalk over road) plus scattered cars on the
road and persons on the sidewalk, so contextual structure exists for the
models to learn and for probability-map checks to assert against.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blm import BLM, SegmentMap, extract_blm, parse_blm, read_blm
from .errors import EmptyDataset, InvalidGrammar, ParseError

CLASS_SKY = 0
CLASS_TREE = 1
CLASS_ROAD = 2
CLASS_SIDEWALK = 3
CLASS_CAR = 4
CLASS_PERSON = 5

SCENE_CLASS_NAMES = ["sky", "tree", "road", "sidewalk", "car", "person"]


@dataclass(frozen=True)
class SceneGrammar:
    """Layered street scene parameters; all randomness comes from ``seed``."""

    rows: int = 16
    cols: int = 16
    sky_tree_range: tuple[int, int] = (2, 6)
    tree_sidewalk_range: tuple[int, int] = (8, 10)
    sidewalk_road_range: tuple[int, int] = (10, 12)
    cars_mean: float = 1.5
    persons_mean: float = 1.0
    tree_runs_mean: float = 2.0
    seed: int = 0

    @property
    def num_classes(self) -> int:
        return len(SCENE_CLASS_NAMES)

    def __post_init__(self):
        ranges = (self.sky_tree_range, self.tree_sidewalk_range, self.sidewalk_road_range)
        last_hi = 0
        for lo, hi in ranges:
            if lo > hi:
                raise InvalidGrammar(f"band range ({lo}, {hi}) is inverted")
            if lo < 1 or hi >= self.rows:
                raise InvalidGrammar(f"band range ({lo}, {hi}) leaves the {self.rows}-row grid")
            last_hi = hi
        if not (self.sky_tree_range[0] < self.tree_sidewalk_range[0] <= self.tree_sidewalk_range[1] < self.sidewalk_road_range[1]):
            raise InvalidGrammar("band ranges must be ordered sky/tree < tree/sidewalk < sidewalk/road")
        if min(self.cars_mean, self.persons_mean, self.tree_runs_mean) < 0:
            raise InvalidGrammar("placement rates must be >= 0")
        if self.rows < 4 or self.cols < 2:
            raise InvalidGrammar("grid too small for a layered scene")
        del last_hi


@dataclass
class Dataset:
    items: list[BLM]
    split: str = "train"
    class_names: list[str] | None = None

    def __post_init__(self):
        if not self.items:
            raise EmptyDataset(f"no items in {self.split!r} dataset")
        rows, cols, classes = self.items[0].rows, self.items[0].cols, self.items[0].num_classes
        for b in self.items:
            if (b.rows, b.cols, b.num_classes) != (rows, cols, classes):
                raise ValueError("dataset items must share one shape and class count")

    @property
    def num_classes(self) -> int:
        return self.items[0].num_classes

    def __len__(self) -> int:
        return len(self.items)


def _poisson(rng: np.random.Generator, mean: float) -> int:
    """Inverse-CDF Poisson draw from the generator's uniform stream."""
    if mean <= 0:
        return 0
    u = rng.random()
    k = 0
    p = np.exp(-mean)
    cdf = p
    while u > cdf and k < 1000:
        k += 1
        p *= mean / k
        cdf += p
    return k


def _uniform_int(rng: np.random.Generator, lo: int, hi: int) -> int:
    """Inclusive uniform integer."""
    return int(rng.integers(lo, hi + 1))


def synth_scene(grammar: SceneGrammar, rng: np.random.Generator) -> np.ndarray:
    rows, cols = grammar.rows, grammar.cols
    b1 = _uniform_int(rng, *grammar.sky_tree_range)
    lo2 = max(grammar.tree_sidewalk_range[0], b1 + 1)
    b2 = _uniform_int(rng, lo2, max(lo2, grammar.tree_sidewalk_range[1]))
    lo3 = max(grammar.sidewalk_road_range[0], b2 + 1)
    b3 = _uniform_int(rng, lo3, max(lo3, grammar.sidewalk_road_range[1]))
    cells = np.empty((rows, cols), dtype=np.int64)
    cells[:b1] = CLASS_SKY
    cells[b1:b2] = CLASS_TREE
    cells[b2:b3] = CLASS_SIDEWALK
    cells[b3:] = CLASS_ROAD
    # jagged canopy: tree runs intrude into the last sky row
    for _ in range(_poisson(rng, grammar.tree_runs_mean)):
        length = _uniform_int(rng, 1, max(1, cols // 4))
        start = _uniform_int(rng, 0, cols - length)
        cells[b1 - 1, start : start + length] = CLASS_TREE
    # cars are 1x2 and live on the road
    for _ in range(_poisson(rng, grammar.cars_mean)):
        r = _uniform_int(rng, b3, rows - 1)
        c = _uniform_int(rng, 0, cols - 2)
        cells[r, c : c + 2] = CLASS_CAR
    # persons are single cells on the sidewalk
    for _ in range(_poisson(rng, grammar.persons_mean)):
        r = _uniform_int(rng, b2, b3 - 1)
        c = _uniform_int(rng, 0, cols - 1)
        cells[r, c] = CLASS_PERSON
    return cells


def synth_dataset(grammar: SceneGrammar, n: int, split: str = "train") -> Dataset:
    """Generate ``n`` fully known scene grids, deterministic in the seed."""
    if n < 1:
        raise EmptyDataset("n must be >= 1")
    rng = np.random.default_rng(grammar.seed)
    items = [
        BLM(grammar.rows, grammar.cols, grammar.num_classes, synth_scene(grammar, rng))
        for _ in range(n)
    ]
    return Dataset(items=items, split=split, class_names=list(SCENE_CLASS_NAMES))


def scene_band_rows(blm: BLM) -> dict[str, list[int]]:
    """Rows grouped by their dominant band class (ignores scattered objects)."""
    bands: dict[str, list[int]] = {"sky": [], "tree": [], "sidewalk": [], "road": []}
    names = {CLASS_SKY: "sky", CLASS_TREE: "tree", CLASS_SIDEWALK: "sidewalk", CLASS_ROAD: "road"}
    for r in range(blm.rows):
        row = blm.cells[r]
        counts = np.bincount(row[row >= 0], minlength=blm.num_classes)
        band = int(np.argmax(counts[: CLASS_CAR]))  # bands only, objects never dominate
        bands[names[band]].append(r)
    return bands


# --- label-map raster format -------------------------------------------------
#
# First line `SEGv1 <height> <width> <num_classes>`, then height lines of
# width decimal class ids. A sidecar `classes.txt` (one name per line)
# defines num_classes for a directory of maps.

_SEG_MAGIC = "SEGv1"
MANIFEST_NAME = "classes.txt"


def parse_segment_map(text: str) -> SegmentMap:
    lines = text.split("\n")
    header = lines[0].split() if lines else []
    if not header or header[0] != _SEG_MAGIC:
        raise ParseError(f"bad magic, expected {_SEG_MAGIC!r}", line=1)
    if len(header) != 4:
        raise ParseError("header must be 'SEGv1 <height> <width> <num_classes>'", line=1)
    try:
        height, width, num_classes = (int(t) for t in header[1:])
    except ValueError:
        raise ParseError("non-integer header field", line=1) from None
    if len(lines) < 1 + height:
        raise ParseError(f"expected {height} data lines", line=len(lines))
    pixels = np.empty((height, width), dtype=np.int64)
    for r in range(height):
        tokens = lines[1 + r].split()
        if len(tokens) != width:
            raise ParseError(f"expected {width} tokens, found {len(tokens)}", line=2 + r)
        for c, tok in enumerate(tokens):
            try:
                value = int(tok)
            except ValueError:
                raise ParseError(f"bad token {tok!r}", line=2 + r, col=c + 1) from None
            if not 0 <= value < num_classes:
                raise ParseError(
                    f"label {value} out of range [0, {num_classes})", line=2 + r, col=c + 1
                )
            pixels[r, c] = value
    return SegmentMap(height=height, width=width, num_classes=num_classes, pixels=pixels)


def read_segment_map(path: str | os.PathLike) -> SegmentMap:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_segment_map(fh.read())


def write_segment_map(seg: SegmentMap, path: str | os.PathLike) -> None:
    lines = [f"{_SEG_MAGIC} {seg.height} {seg.width} {seg.num_classes}"]
    for r in range(seg.height):
        lines.append(" ".join(str(v) for v in seg.pixels[r].tolist()))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(directory: str | os.PathLike) -> list[str]:
    path = Path(directory) / MANIFEST_NAME
    if not path.exists():
        raise ParseError(f"missing {MANIFEST_NAME} manifest in {directory}")
    names = [line.rstrip("\n") for line in path.read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n.strip()]
    if not names:
        raise ParseError(f"empty {MANIFEST_NAME} manifest in {directory}")
    return names


def write_manifest(directory: str | os.PathLike, class_names: list[str]) -> None:
    path = Path(directory) / MANIFEST_NAME
    path.write_text("\n".join(class_names) + "\n", encoding="utf-8")


def ingest_label_maps(
    directory: str | os.PathLike, rows: int, cols: int, split: str = "train"
) -> Dataset:
    """Pool every label map in a directory into BLMs, lexicographic order.

    Files that fail to parse or pool are reported on stderr and skipped;
    the run continues as long as at least one file is usable.
    """
    class_names = read_manifest(directory)
    num_classes = len(class_names)
    items = []
    for path in sorted(Path(directory).iterdir()):
        if path.name == MANIFEST_NAME or path.is_dir():
            continue
        try:
            seg = read_segment_map(path)
            if seg.num_classes != num_classes:
                raise ParseError(
                    f"map declares {seg.num_classes} classes, manifest has {num_classes}"
                )
            items.append(extract_blm(seg, rows, cols))
        except Exception as exc:
            print(f"skipping {path.name}: {exc}", file=sys.stderr)
    if not items:
        raise EmptyDataset(f"no usable label maps in {directory}")
    return Dataset(items=items, split=split, class_names=class_names)


def load_blm_dir(directory: str | os.PathLike, split: str = "train") -> Dataset:
    """Load every .blm file in a directory, lexicographic order."""
    class_names = None
    manifest = Path(directory) / MANIFEST_NAME
    if manifest.exists():
        class_names = read_manifest(directory)
    items = []
    for path in sorted(Path(directory).glob("*.blm")):
        items.append(read_blm(path))
    if not items:
        raise EmptyDataset(f"no .blm files in {directory}")
    return Dataset(items=items, split=split, class_names=class_names)
