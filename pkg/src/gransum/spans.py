"""Character spans and summarization units.

A TextSpan is a half-open character interval over exactly one sentence's
text.  A Unit is a span tagged with the granularity it was produced at;
units of one sentence and one kind always tile the sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class UnitKind(str, Enum):
    SENTENCE = "SENTENCE"
    SEGMENT = "SEGMENT"
    CLAUSE = "CLAUSE"


@dataclass(frozen=True)
class TextSpan:
    """Half-open character interval [start, end) into a sentence."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def slice(self, text: str) -> str:
        return text[self.start:self.end]

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Unit:
    """One summarization unit of a sentence.

    token_start/token_end give the half-open token-index interval the unit
    covers; span gives the character interval.  Character spans of the
    units of one sentence tile it exactly: the first unit starts at 0,
    each later unit starts where the previous one ends, and the last unit
    ends at the sentence length.
    """

    sentence_index: int
    unit_index: int
    kind: UnitKind
    span: TextSpan
    token_start: int
    token_end: int

    def text(self, sentence_text: str) -> str:
        return self.span.slice(sentence_text)

    def char_length(self, sentence_text: str) -> int:
        """Unit length in characters, whitespace excluded.

        This is the length used by every character-budget rule, so that
        join separators and incidental spacing never count against the
        budget.
        """
        return sum(1 for c in self.text(sentence_text) if not c.isspace())


def check_tiling(units: list[Unit], sentence_length: int) -> None:
    """Assert that units tile [0, sentence_length) contiguously."""
    if not units:
        raise ValueError("no units for sentence")
    if units[0].span.start != 0:
        raise ValueError("first unit does not start at 0")
    for prev, cur in zip(units, units[1:]):
        if cur.span.start != prev.span.end:
            raise ValueError(
                f"gap/overlap between units at {prev.span.end} vs {cur.span.start}"
            )
    if units[-1].span.end != sentence_length:
        raise ValueError("last unit does not reach sentence end")
