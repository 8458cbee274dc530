"""ROUGE-N with clipped n-gram matching and union-LCS ROUGE-L.

ROUGE-N counts how many n-grams co-occur between candidate and reference,
clipping each n-gram's match count at its reference (resp. candidate)
multiplicity.  ROUGE-L scores, per reference sentence, the union of the
token positions matched by the longest common subsequence against each
candidate sentence, then normalizes by total reference / candidate tokens.

Token sequences are plain lists of surfaces; a character-level mode is
available for scripts where word tokenization is contested.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .kernels import lcs_ref_match_mask


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "RougeScore":
        if precision + recall == 0.0:
            return cls(precision, recall, 0.0)
        return cls(precision, recall, 2.0 * precision * recall / (precision + recall))


def ngram_counts(tokens: list[str], n: int) -> Counter:
    """Multiset of n-grams as a Counter of token tuples."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: list[str], reference: list[str], n: int) -> RougeScore:
    """Clipped n-gram overlap; zero denominators score 0."""
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    match = sum(min(count, ref[gram]) for gram, count in cand.items())
    total_ref = sum(ref.values())
    total_cand = sum(cand.values())
    recall = match / total_ref if total_ref else 0.0
    precision = match / total_cand if total_cand else 0.0
    return RougeScore.from_pr(precision, recall)


def chars_of(tokens: list[str]) -> list[str]:
    """Flatten token surfaces to characters for character-level ROUGE."""
    return [c for tok in tokens for c in tok]


def _intern_ids(reference: list[str], candidates: list[list[str]]):
    vocab: dict[str, int] = {}
    def ids(seq: list[str]) -> np.ndarray:
        out = np.empty(len(seq), dtype=np.int64)
        for i, tok in enumerate(seq):
            out[i] = vocab.setdefault(tok, len(vocab))
        return out
    return ids(reference), [ids(c) for c in candidates]


def union_lcs(reference: list[str], candidates: list[list[str]]) -> tuple[int, float]:
    """Union of LCS-matched reference positions across candidate sentences.

    Returns (matched token count, matched count / reference length).  Each
    candidate contributes one LCS against the reference (leftmost ties);
    the union is over reference positions, so repeated coverage of the
    same position is counted once.
    """
    if not reference:
        return 0, 0.0
    ref_ids, cand_ids = _intern_ids(reference, candidates)
    union = np.zeros(len(reference), dtype=bool)
    for cid in cand_ids:
        if cid.size == 0:
            continue
        union |= lcs_ref_match_mask(ref_ids, cid)
    count = int(union.sum())
    return count, count / len(reference)


def rouge_l(candidates: list[list[str]], references: list[list[str]]) -> RougeScore:
    """Union-LCS ROUGE-L over candidate and reference sentence lists."""
    matched = sum(union_lcs(ref, candidates)[0] for ref in references)
    total_ref = sum(len(ref) for ref in references)
    total_cand = sum(len(c) for c in candidates)
    recall = matched / total_ref if total_ref else 0.0
    precision = matched / total_cand if total_cand else 0.0
    return RougeScore.from_pr(precision, recall)
