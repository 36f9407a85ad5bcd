"""Uniform quantisation of normalised box coordinates into vocabulary tokens."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import Box


class BoxFormat(enum.Enum):
    CORNERS = "CORNERS"
    CENTER_WH_UNIFIED = "CENTER_WH_UNIFIED"
    CENTER_WH_SPLIT = "CENTER_WH_SPLIT"


@dataclass(frozen=True)
class VocabularyConfig:
    size: int = 400
    lo: float = -0.5
    hi: float = 1.5
    format: BoxFormat = BoxFormat.CORNERS

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("vocabulary size must be at least 2")
        if not self.lo < self.hi:
            raise ValueError("vocabulary range needs lo < hi")
        if not isinstance(self.format, BoxFormat):
            object.__setattr__(self, "format", BoxFormat(self.format))

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / (self.size - 1)

    @property
    def table_rows(self) -> int:
        """Rows in the embedding table: split formats keep a second vocabulary."""
        return 2 * self.size if self.format is BoxFormat.CENTER_WH_SPLIT else self.size

    def slot_range(self, slot: int) -> tuple[float, float]:
        """Value range quantised by token slot 0..3."""
        if self.format is BoxFormat.CENTER_WH_SPLIT and slot >= 2:
            return 0.0, self.hi - self.lo
        return self.lo, self.hi

    def slot_offset(self, slot: int) -> int:
        """Embedding-table offset of token slot 0..3."""
        if self.format is BoxFormat.CENTER_WH_SPLIT and slot >= 2:
            return self.size
        return 0

    def slot_values(self, slot: int) -> np.ndarray:
        """Coordinate value represented by each token of a slot."""
        lo, hi = self.slot_range(slot)
        return lo + np.arange(self.size) / (self.size - 1) * (hi - lo)


@dataclass(frozen=True)
class TokenizedBox:
    tokens: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.tokens) != 4:
            raise ValueError("a tokenized box has exactly 4 tokens")


def quantize(c: float, cfg: VocabularyConfig, lo: float | None = None,
             hi: float | None = None) -> int:
    lo = cfg.lo if lo is None else lo
    hi = cfg.hi if hi is None else hi
    c = min(max(float(c), lo), hi)
    return int(round((c - lo) / (hi - lo) * (cfg.size - 1)))


def detokenize(t: int, cfg: VocabularyConfig, lo: float | None = None,
               hi: float | None = None) -> float:
    lo = cfg.lo if lo is None else lo
    hi = cfg.hi if hi is None else hi
    if not 0 <= int(t) < cfg.size:
        raise IndexError(f"token {t} outside vocabulary of size {cfg.size}")
    return lo + int(t) / (cfg.size - 1) * (hi - lo)


def box_to_values(b: Box, fmt: BoxFormat) -> tuple[float, float, float, float]:
    if fmt is BoxFormat.CORNERS:
        return b.as_tuple()
    cx, cy = b.center
    return (cx, cy, b.width, b.height)


def values_to_box(v, fmt: BoxFormat) -> Box:
    """Decode four slot values into a canonical Box (inverted corners are swapped)."""
    a, b, c, d = (float(x) for x in v)
    if fmt is BoxFormat.CORNERS:
        return Box.canonical(a, b, c, d)
    return Box.from_center(a, b, abs(c), abs(d))


def tokenize_box(b: Box, cfg: VocabularyConfig) -> TokenizedBox:
    vals = box_to_values(b, cfg.format)
    return TokenizedBox(tuple(quantize(v, cfg, *cfg.slot_range(i)) for i, v in enumerate(vals)))


def detokenize_box(tb: TokenizedBox, cfg: VocabularyConfig) -> Box:
    vals = [detokenize(t, cfg, *cfg.slot_range(i)) for i, t in enumerate(tb.tokens)]
    return values_to_box(vals, cfg.format)


def embedding_ids(tb: TokenizedBox, cfg: VocabularyConfig) -> list[int]:
    """Rows of the embedding table addressed by a tokenized box."""
    return [t + cfg.slot_offset(i) for i, t in enumerate(tb.tokens)]
