"""Exception types shared across the package."""


class BlockfillError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(BlockfillError):
    """Pixel dimensions are not divisible by the requested block grid."""


class OutOfBounds(BlockfillError):
    """A coordinate or region lies outside the grid."""


class ParseError(BlockfillError):
    """A text file does not conform to its format.

    Carries the 1-based line and column of the offending token when known.
    """

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.col = col


class ShapeMismatch(BlockfillError):
    """Array shapes are inconsistent with each other or with a config."""


class ClassCountMismatch(BlockfillError):
    """A grid and a model disagree on the class vocabulary size."""


class UnknownCellPresent(BlockfillError):
    """An operation requiring fully known grids received unknown cells."""


class EmptyDataset(BlockfillError):
    """No usable items were found."""


class FormatError(BlockfillError):
    """A checkpoint file is malformed or truncated."""


class StateError(BlockfillError):
    """A backward pass was requested without retained forward activations."""


class CoordMismatch(BlockfillError):
    """Distribution coordinates do not line up with the masked input."""


class MaskTooLarge(BlockfillError):
    """The requested occlusion does not fit inside the grid."""


class IncompleteLabels(BlockfillError):
    """A label submission does not cover the unknown coordinates exactly."""

    def __init__(self, missing: list[tuple[int, int]], extra: list[tuple[int, int]] | None = None):
        self.missing = sorted(missing)
        self.extra = sorted(extra or [])
        parts = []
        if self.missing:
            parts.append(f"missing labels for {self.missing}")
        if self.extra:
            parts.append(f"labels for non-masked cells {self.extra}")
        super().__init__("; ".join(parts) or "incomplete labels")


class InvalidGrammar(BlockfillError):
    """Scene grammar parameters violate their invariants."""


class LengthMismatch(BlockfillError):
    """Distributions to be combined have different lengths."""
