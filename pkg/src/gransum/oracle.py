"""Pseudo-label construction by greedy bigram-overlap ranking.

Every unit is scored with ROUGE-2 F1 against the reference summary,
units are sorted by descending score (ties in document order), and
selection walks the ranking accumulating unit character lengths.  The
unit that first pushes the running total past the budget is still
selected, then selection stops; the stricter drop-and-stop variant is
available for sensitivity analysis.  Selected units become the positive
training labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .rouge import rouge_n
from .spans import Unit
from .summarizer import budget_select

DEFAULT_BUDGET_CHARS = 1200


@dataclass(frozen=True)
class UnitText:
    """A unit with the token and character material scoring needs."""

    unit: Unit
    tokens: tuple[str, ...]
    char_length: int


@dataclass(frozen=True)
class LabeledUnit:
    unit: Unit
    score: float
    gold: bool


def make_oracle_labels(
    entries: list[UnitText],
    reference_tokens: list[str],
    budget_chars: float = DEFAULT_BUDGET_CHARS,
    mode: str = "keep",
) -> list[LabeledUnit]:
    """Score, rank, and budget-select units of one case.

    Returns one LabeledUnit per input entry, in input (document) order.
    Units shorter than two tokens carry no bigrams and score 0.
    """
    if budget_chars < 0:
        raise ValueError("budget_chars must be >= 0")
    if not entries:
        return []
    scores = [
        rouge_n(list(e.tokens), reference_tokens, 2).f1 for e in entries
    ]
    order = sorted(
        range(len(entries)),
        key=lambda i: (
            -scores[i],
            entries[i].unit.sentence_index,
            entries[i].unit.unit_index,
        ),
    )
    chosen = set(
        budget_select(order, [e.char_length for e in entries], budget_chars, mode)
    )
    return [
        LabeledUnit(e.unit, scores[i], i in chosen) for i, e in enumerate(entries)
    ]


def dump_labels(case_id: str, labels: list[LabeledUnit]) -> list[str]:
    lines = []
    for lab in labels:
        lines.append(
            json.dumps(
                {
                    "case_id": case_id,
                    "sentence_index": lab.unit.sentence_index,
                    "unit_index": lab.unit.unit_index,
                    "kind": lab.unit.kind.value,
                    "score": lab.score,
                    "gold": lab.gold,
                },
                ensure_ascii=False,
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    return lines


def save_labels(path: str, per_case: dict[str, list[LabeledUnit]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case_id, labels in per_case.items():
            for line in dump_labels(case_id, labels):
                fh.write(line)
                fh.write("\n")


def load_labels(path: str) -> dict[str, dict[tuple[int, int], bool]]:
    """Gold flags keyed by case id and (sentence_index, unit_index)."""
    table: dict[str, dict[tuple[int, int], bool]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            table.setdefault(obj["case_id"], {})[
                (obj["sentence_index"], obj["unit_index"])
            ] = bool(obj["gold"])
    return table
