"""Sentence splitting and rule-based unit splitters.

All unit splitters speak one currency: the BoundarySet, the sorted set of
internal split positions of one sentence expressed as token indices.  A
boundary at position b means "a unit ends after token b"; the sentence-
final position is never a boundary, so a sentence with n boundaries has
n + 1 units.

The clinical rule engine approximates the six segmentation heuristics
with an auditable, pattern-file-driven implementation: R1 proposes
boundaries at commas and verbal-noun predicate ends, R2 promotes
parenthesized content, R3/R4 force boundaries around disease mentions and
examination results, and R5/R6 suppress splits that separate non-medical
or meaning-free content.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .spans import TextSpan, Unit, UnitKind
from .tokenization import (
    FULLSTOP_CHARS,
    LexiconHooks,
    Tag,
    Token,
)


@dataclass(frozen=True)
class Sentence:
    """One sentence with its lossless absolute span in the source text."""

    text: str
    start: int
    end: int


@dataclass(frozen=True)
class BoundarySet:
    """Internal split positions of one sentence (token indices)."""

    sentence_index: int
    positions: tuple[int, ...]

    def __post_init__(self):
        norm = tuple(sorted(set(self.positions)))
        if norm != self.positions:
            object.__setattr__(self, "positions", norm)
        if any(p < 0 for p in self.positions):
            raise ValueError("boundary positions must be non-negative")

    def validate(self, n_tokens: int) -> None:
        if any(p >= n_tokens - 1 for p in self.positions):
            raise ValueError(
                f"boundary beyond last internal position for {n_tokens} tokens"
            )

    @property
    def unit_count(self) -> int:
        return len(self.positions) + 1

    def with_index(self, sentence_index: int) -> "BoundarySet":
        return replace(self, sentence_index=sentence_index)


def split_sentences(
    raw_text: str, fullstop_chars: frozenset[str] = FULLSTOP_CHARS
) -> list[Sentence]:
    """Split raw text into sentences at full stops and bare newlines.

    A sentence ends right after a full-stop mark, or at a newline when the
    statement has no full stop.  Empty candidates (e.g. a newline directly
    after a full stop) are dropped; spans slice the input exactly.
    """
    out: list[Sentence] = []

    def emit(start: int, end: int) -> None:
        while start < end and raw_text[start].isspace():
            start += 1
        while end > start and raw_text[end - 1].isspace():
            end -= 1
        if end > start:
            out.append(Sentence(raw_text[start:end], start, end))

    start = 0
    for i, c in enumerate(raw_text):
        if c in fullstop_chars:
            emit(start, i + 1)
            start = i + 1
        elif c == "\n":
            emit(start, i)
            start = i + 1
    emit(start, len(raw_text))
    return out


def _internal(positions, n_tokens: int):
    return tuple(p for p in positions if 0 <= p < n_tokens - 1)


def split_fullstop(tokens: list[Token], sentence_index: int = 0) -> BoundarySet:
    """Boundary after every full-stop token that is not sentence-final."""
    pos = [i for i, t in enumerate(tokens) if t.tag is Tag.FULLSTOP]
    return BoundarySet(sentence_index, _internal(pos, len(tokens)))


def split_fullstop_verb(
    tokens: list[Token], hooks: LexiconHooks, sentence_index: int = 0
) -> BoundarySet:
    """Full-stop boundaries plus verb-to-next-noun boundaries.

    For each verb token, a boundary is placed immediately before the next
    noun whose surface is not a non-independent noun; non-independent
    nouns are skipped, not boundary targets.
    """
    pos = set(split_fullstop(tokens, sentence_index).positions)
    n = len(tokens)
    for i, tok in enumerate(tokens):
        if not hooks.is_verb(tok.surface):
            continue
        for j in range(i + 1, n):
            surface = tokens[j].surface
            if hooks.is_noun(surface) and surface not in hooks.non_independent_list:
                pos.add(j - 1)
                break
    return BoundarySet(sentence_index, _internal(pos, n))


def split_clauses(
    tokens: list[Token], hooks: LexiconHooks, sentence_index: int = 0
) -> BoundarySet:
    """Clause boundaries: commas, verbs, verbal nouns before case particles."""
    pos = set()
    n = len(tokens)
    for i, tok in enumerate(tokens):
        if tok.tag is Tag.COMMA:
            pos.add(i)
        elif hooks.is_verb(tok.surface):
            pos.add(i)
        elif (
            tok.marker == "verbal_noun"
            and i + 1 < n
            and tokens[i + 1].surface in hooks.case_particle_list
        ):
            pos.add(i)
    return BoundarySet(sentence_index, _internal(pos, n))


DEFAULT_PATTERNS_VERSION = 1


@dataclass(frozen=True)
class RulePatterns:
    """Versioned pattern file backing rules R3--R6."""

    version: int = DEFAULT_PATTERNS_VERSION
    case_particles: frozenset[str] = frozenset()
    denial_surfaces: frozenset[str] = frozenset()
    plan_surfaces: frozenset[str] = frozenset()
    temporal_surfaces: frozenset[str] = frozenset()
    max_enum_chunk_tokens: int = 3

    @classmethod
    def from_json(cls, path: str) -> "RulePatterns":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        version = raw.get("version")
        if version != DEFAULT_PATTERNS_VERSION:
            raise ValueError(f"unsupported rule pattern file version: {version!r}")
        return cls(
            version=version,
            case_particles=frozenset(raw.get("case_particles", ())),
            denial_surfaces=frozenset(raw.get("denial_surfaces", ())),
            plan_surfaces=frozenset(raw.get("plan_surfaces", ())),
            temporal_surfaces=frozenset(raw.get("temporal_surfaces", ())),
            max_enum_chunk_tokens=int(raw.get("max_enum_chunk_tokens", 3)),
        )

    def to_json(self, path: str) -> None:
        payload = {
            "version": self.version,
            "case_particles": sorted(self.case_particles),
            "denial_surfaces": sorted(self.denial_surfaces),
            "plan_surfaces": sorted(self.plan_surfaces),
            "temporal_surfaces": sorted(self.temporal_surfaces),
            "max_enum_chunk_tokens": self.max_enum_chunk_tokens,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")


ALL_RULES = frozenset({"R1", "R2", "R3", "R4", "R5", "R6"})


@dataclass(frozen=True)
class RuleConfig:
    hooks: LexiconHooks
    patterns: RulePatterns = field(default_factory=RulePatterns)
    enabled_rules: frozenset[str] = ALL_RULES

    def __post_init__(self):
        unknown = self.enabled_rules - ALL_RULES
        if unknown:
            raise ValueError(f"unknown rules: {sorted(unknown)}")
        # R2-R6 are exceptions/extensions to the base rule.
        if self.enabled_rules and "R1" not in self.enabled_rules:
            raise ValueError("R1 must be enabled when any rule is")

    def particles(self) -> frozenset[str]:
        return self.patterns.case_particles or self.hooks.case_particle_list


def _attachment_run(tokens, i, config, allow_numbers: bool) -> int:
    """Last index of the phrase starting at token i (particles, attached nouns)."""
    hooks = config.hooks
    particles = config.particles()
    j = i
    n = len(tokens)
    while j + 1 < n:
        nxt = tokens[j + 1]
        attachable = (
            nxt.surface in particles
            or nxt.surface in hooks.non_independent_list
            or hooks.is_noun(nxt.surface)
            or (allow_numbers and nxt.tag is Tag.NUMBER)
        )
        if not attachable:
            break
        j += 1
    return j


def _phrase_boundaries(tokens, i, config, allow_numbers: bool) -> set[int]:
    """R3/R4 boundary candidates around the marker phrase starting at i."""
    pos: set[int] = set()
    if i > 0:
        pos.add(i - 1)
    j = _attachment_run(tokens, i, config, allow_numbers)
    # The after-phrase boundary exists only for a real phrase; adjacent
    # punctuation already carries its own boundary.
    if j > i and j + 1 < len(tokens) and tokens[j + 1].tag not in (
        Tag.COMMA,
        Tag.FULLSTOP,
        Tag.PAREN_CLOSE,
    ):
        pos.add(j)
    return pos


def _chunks(positions: list[int], n_tokens: int) -> list[tuple[int, int]]:
    """Inclusive token ranges delimited by the candidate boundaries."""
    starts = [0] + [p + 1 for p in positions]
    ends = list(positions) + [n_tokens - 1]
    return list(zip(starts, ends))


def _content_size(tokens, lo, hi) -> int:
    return sum(
        1
        for t in tokens[lo:hi + 1]
        if t.tag in (Tag.WORD, Tag.NUMBER, Tag.MARKER)
    )


def split_clinical_rules(
    tokens: list[Token], config: RuleConfig, sentence_index: int = 0
) -> BoundarySet:
    """Apply the clinical segmentation rule engine R1--R6."""
    n = len(tokens)
    rules = config.enabled_rules
    candidates: set[int] = set()

    if "R1" in rules:
        for i, tok in enumerate(tokens):
            if tok.tag is Tag.COMMA:
                candidates.add(i)
            elif tok.marker == "verbal_noun":
                j = _attachment_run(tokens, i, config, allow_numbers=False)
                if j + 1 < n and tokens[j + 1].tag not in (
                    Tag.COMMA,
                    Tag.FULLSTOP,
                    Tag.PAREN_CLOSE,
                ):
                    candidates.add(j)

    if "R3" in rules:
        for i, tok in enumerate(tokens):
            if tok.marker == "disease":
                candidates |= _phrase_boundaries(tokens, i, config, allow_numbers=False)

    if "R4" in rules:
        for i, tok in enumerate(tokens):
            if tok.marker == "exam":
                candidates |= _phrase_boundaries(tokens, i, config, allow_numbers=True)

    if "R2" in rules:
        stack: list[int] = []
        for i, tok in enumerate(tokens):
            if tok.tag is Tag.PAREN_OPEN:
                stack.append(i)
            elif tok.tag is Tag.PAREN_CLOSE and stack:
                o = stack.pop()
                if any(o <= p < i for p in candidates):
                    if o > 0:
                        candidates.add(o - 1)
                    candidates.add(i)

    positions = sorted(_internal(candidates, n))

    suppress: set[int] = set()
    if positions and ("R5" in rules or "R6" in rules):
        chunks = _chunks(positions, n)
        has_marker = [
            any(t.tag is Tag.MARKER for t in tokens[lo:hi + 1]) for lo, hi in chunks
        ]
        pat = config.patterns

        if "R5" in rules:
            for k, p in enumerate(positions):
                if not has_marker[k] and not has_marker[k + 1]:
                    suppress.add(p)

        if "R6" in rules:
            def chunk_has(lo, hi, surfaces):
                return any(t.surface in surfaces for t in tokens[lo:hi + 1])

            for k, (lo, hi) in enumerate(chunks):
                if chunk_has(lo, hi, pat.denial_surfaces):
                    # Enumeration of findings resolved by one denial: merge
                    # the run of short comma-separated chunks it closes.
                    run = k
                    while (
                        run > 0
                        and tokens[positions[run - 1]].tag is Tag.COMMA
                        and _content_size(tokens, *chunks[run - 1])
                        <= pat.max_enum_chunk_tokens
                    ):
                        suppress.add(positions[run - 1])
                        run -= 1
                if chunk_has(lo, hi, pat.plan_surfaces) and k > 0:
                    suppress.add(positions[k - 1])
                if chunk_has(lo, hi, pat.temporal_surfaces) and k < len(positions):
                    suppress.add(positions[k])

    final = tuple(p for p in positions if p not in suppress)
    return BoundarySet(sentence_index, final)


def units_from_boundaries(
    sentence_text: str,
    tokens: list[Token],
    boundaries: BoundarySet,
    kind: UnitKind,
) -> list[Unit]:
    """Materialize the tiling units a BoundarySet induces on a sentence.

    Unit character spans snap to token edges, except that the first unit
    starts at 0 and every unit extends to the start of the next, so the
    spans tile the sentence exactly.
    """
    if not tokens:
        raise ValueError("cannot materialize units for an empty token list")
    boundaries.validate(len(tokens))
    token_starts = [0] + [p + 1 for p in boundaries.positions]
    token_ends = [p + 1 for p in boundaries.positions] + [len(tokens)]
    char_starts = [
        0 if k == 0 else tokens[token_starts[k]].span.start
        for k in range(len(token_starts))
    ]
    char_ends = char_starts[1:] + [len(sentence_text)]
    units = []
    for k, (ts, te) in enumerate(zip(token_starts, token_ends)):
        units.append(
            Unit(
                sentence_index=boundaries.sentence_index,
                unit_index=k,
                kind=kind,
                span=TextSpan(char_starts[k], char_ends[k]),
                token_start=ts,
                token_end=te,
            )
        )
    return units


def sentence_as_unit(
    sentence_text: str, tokens: list[Token], sentence_index: int
) -> Unit:
    """The whole sentence as a single SENTENCE-kind unit."""
    return Unit(
        sentence_index=sentence_index,
        unit_index=0,
        kind=UnitKind.SENTENCE,
        span=TextSpan(0, len(sentence_text)),
        token_start=0,
        token_end=len(tokens),
    )
