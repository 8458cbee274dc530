"""Boundary detection scores, granularity statistics, relation taxonomy.

Boundary P/R/F1 treats a sentence left correctly unsplit (both boundary
sets empty) as perfect agreement; corpus-level scores micro-average over
boundary instances, with sentence-level macro averages reported next to
them.  The relation census classifies every intersecting
(segment, clause) pair as Equal, Inclusive, Included, or Overlap; pairs
that do not intersect are excluded unless explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .splitters import BoundarySet
from .tokenization import Token


class RelationType(str, Enum):
    EQUAL = "EQUAL"
    INCLUSIVE = "INCLUSIVE"
    INCLUDED = "INCLUDED"
    OVERLAP = "OVERLAP"


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float


def _prf(tp: int, pred: int, gold: int) -> PRF:
    if pred == 0 and gold == 0:
        return PRF(1.0, 1.0, 1.0)
    p = tp / pred if pred else 0.0
    r = tp / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f1)


def boundary_prf(predicted: BoundarySet, gold: BoundarySet) -> PRF:
    """P/R/F1 over internal boundary positions of one sentence."""
    pset = set(predicted.positions)
    gset = set(gold.positions)
    return _prf(len(pset & gset), len(pset), len(gset))


def corpus_boundary_prf(
    pairs: list[tuple[BoundarySet, BoundarySet]]
) -> tuple[PRF, PRF]:
    """(micro, macro) boundary scores over (predicted, gold) pairs."""
    tp = pred = gold = 0
    per_sentence = []
    for predicted, gold_set in pairs:
        pset = set(predicted.positions)
        gset = set(gold_set.positions)
        tp += len(pset & gset)
        pred += len(pset)
        gold += len(gset)
        per_sentence.append(_prf(len(pset & gset), len(pset), len(gset)))
    micro = _prf(tp, pred, gold)
    if per_sentence:
        n = len(per_sentence)
        macro = PRF(
            sum(s.precision for s in per_sentence) / n,
            sum(s.recall for s in per_sentence) / n,
            sum(s.f1 for s in per_sentence) / n,
        )
    else:
        macro = PRF(1.0, 1.0, 1.0)
    return micro, macro


def classify_relation(
    segment: tuple[int, int], clause: tuple[int, int]
) -> RelationType | None:
    """Relation of a segment token interval to a clause token interval.

    Intervals are half-open [start, end); disjoint pairs return None.
    """
    s0, s1 = segment
    c0, c1 = clause
    if s1 <= c0 or c1 <= s0:
        return None
    if s0 == c0 and s1 == c1:
        return RelationType.EQUAL
    if s0 <= c0 and c1 <= s1:
        return RelationType.INCLUSIVE
    if c0 <= s0 and s1 <= c1:
        return RelationType.INCLUDED
    return RelationType.OVERLAP


@dataclass
class RelationCensus:
    counts: dict[RelationType, int]
    disjoint: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict[RelationType, float]:
        total = self.total
        if total == 0:
            return {r: 0.0 for r in RelationType}
        return {r: 100.0 * self.counts[r] / total for r in RelationType}


def _intervals(boundaries: BoundarySet, n_tokens: int) -> list[tuple[int, int]]:
    starts = [0] + [p + 1 for p in boundaries.positions]
    ends = [p + 1 for p in boundaries.positions] + [n_tokens]
    return list(zip(starts, ends))


def relation_census(
    sentences: list[list[Token]],
    segment_splitter,
    clause_splitter,
    include_disjoint: bool = False,
) -> RelationCensus:
    """Classify all (segment, clause) pairs produced by two splitters.

    Splitters are callables mapping a token list to a BoundarySet.  Counts
    cover intersecting pairs and partition them exactly; disjoint pairs
    are tallied separately when requested.
    """
    counts = {r: 0 for r in RelationType}
    disjoint = 0
    for tokens in sentences:
        n = len(tokens)
        segs = _intervals(segment_splitter(tokens), n)
        clauses = _intervals(clause_splitter(tokens), n)
        for seg in segs:
            for cl in clauses:
                rel = classify_relation(seg, cl)
                if rel is None:
                    if include_disjoint:
                        disjoint += 1
                else:
                    counts[rel] += 1
    return RelationCensus(counts, disjoint)


@dataclass(frozen=True)
class GranularityStats:
    units_per_sentence: float
    tokens_per_unit: float
    chars_per_unit: float
    sentence_count: int
    unit_count: int


def granularity_stats(
    sentences: list[tuple[str, list[Token]]],
    splitter,
) -> GranularityStats:
    """Mean units/sentence, tokens/unit, and characters/unit.

    Character counts exclude whitespace, matching the budget length used
    everywhere else.  tokens/unit and chars/unit average over units.
    """
    if not sentences:
        raise ValueError("no sentences")
    total_units = 0
    total_tokens = 0
    total_chars = 0
    for text, tokens in sentences:
        bset = splitter(tokens)
        bset.validate(len(tokens))
        total_units += len(bset.positions) + 1
        total_tokens += len(tokens)
        total_chars += sum(1 for c in text if not c.isspace())
    n = len(sentences)
    return GranularityStats(
        units_per_sentence=total_units / n,
        tokens_per_unit=total_tokens / total_units,
        chars_per_unit=total_chars / total_units,
        sentence_count=n,
        unit_count=total_units,
    )
