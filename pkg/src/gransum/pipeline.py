"""Experiment orchestration: split, label, train, summarize, score.

run_experiment drives the full pipeline for each configured unit
granularity and writes one report (JSON plus table-style TSV sections) with
ROUGE-1/2/L per granularity, segmentation quality against planted
boundaries, granularity statistics, and the segment/clause relation
census.  Every stage is seeded from the config, so identical configs
produce byte-identical reports and bit-identical checkpoints.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .analysis import (
    GranularityStats,
    RelationCensus,
    RelationType,
    classify_relation,
    corpus_boundary_prf,
)
from .corpus import (
    Case,
    CorpusError,
    GeneratedCorpus,
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    load_gold_boundaries,
    save_corpus,
    save_gold_boundaries,
)
from .nn.checkpoint import save_checkpoint
from .oracle import UnitText, make_oracle_labels
from .rouge import RougeScore, rouge_l, rouge_n
from .spans import Unit, UnitKind
from .splitters import (
    BoundarySet,
    RuleConfig,
    RulePatterns,
    Sentence,
    sentence_as_unit,
    split_clauses,
    split_clinical_rules,
    split_fullstop,
    split_fullstop_verb,
    split_sentences,
    units_from_boundaries,
)
from .segmenter import (
    PointerSegmenter,
    SegmenterConfig,
    SentenceExample,
    segmenter_train,
)
from .summarizer import (
    DocumentExample,
    SummarizerConfig,
    summarize,
    summarizer_train,
)
from .tokenization import LexiconHooks, Token, tokenize

REPORT_VERSION = 1

SEGMENT_METHODS = ("pointer", "rules", "gold")


class ReportError(ValueError):
    """Unreadable or incompatible experiment report."""


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: str | None = None
    gold_boundaries_path: str | None = None
    hooks_path: str | None = None
    patterns_path: str | None = None
    synthetic: SyntheticSpec | None = field(default_factory=SyntheticSpec)
    kinds: tuple[UnitKind, ...] = (
        UnitKind.SENTENCE,
        UnitKind.SEGMENT,
        UnitKind.CLAUSE,
    )
    segment_method: str = "pointer"
    oracle_budget: float | str = "auto"
    oracle_mode: str = "keep"
    dev_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 1234
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    summarizer: SummarizerConfig = field(default_factory=SummarizerConfig)

    def __post_init__(self):
        if self.corpus_path is None and self.synthetic is None:
            raise ValueError("config needs corpus_path or a synthetic spec")
        if self.segment_method not in SEGMENT_METHODS:
            raise ValueError(f"segment_method must be one of {SEGMENT_METHODS}")
        if self.oracle_mode not in ("keep", "drop"):
            raise ValueError("oracle_mode must be keep or drop")
        if not 0.0 < self.dev_fraction < 1.0 or not 0.0 < self.test_fraction < 1.0:
            raise ValueError("split fractions must be in (0, 1)")
        if self.dev_fraction + self.test_fraction >= 1.0:
            raise ValueError("train split would be empty")
        if isinstance(self.oracle_budget, str) and self.oracle_budget != "auto":
            raise ValueError("oracle_budget must be a number or 'auto'")

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        kwargs = dict(raw)
        if kwargs.get("synthetic") is not None:
            kwargs["synthetic"] = SyntheticSpec.from_dict(kwargs["synthetic"])
        if "kinds" in kwargs:
            kwargs["kinds"] = tuple(UnitKind(k) for k in kwargs["kinds"])
        if "segmenter" in kwargs:
            kwargs["segmenter"] = SegmenterConfig(**kwargs["segmenter"])
        if "summarizer" in kwargs:
            kwargs["summarizer"] = SummarizerConfig(**kwargs["summarizer"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kinds"] = [k.value for k in self.kinds]
        return out


@dataclass
class CaseView:
    """A case after sentence splitting and tokenization."""

    case: Case
    sentences: list[Sentence]
    tokens: list[list[Token]]
    reference_sentences: list[list[str]]


def build_view(case: Case, hooks: LexiconHooks) -> CaseView:
    sentences = split_sentences(case.record_text)
    if not sentences:
        raise CorpusError(f"case {case.id}: record text has no sentences")
    tokens = [tokenize(s.text, hooks) for s in sentences]
    ref_sentences = [
        [t.surface for t in tokenize(s.text, hooks)]
        for s in split_sentences(case.summary_text)
    ]
    return CaseView(case, sentences, tokens, ref_sentences)


def build_views(cases: list[Case], hooks: LexiconHooks) -> list[CaseView]:
    return [build_view(c, hooks) for c in cases]


# ----------------------------------------------------------------------
# Splitter plumbing
# ----------------------------------------------------------------------

def make_boundary_fn(
    method: str,
    hooks: LexiconHooks,
    patterns: RulePatterns,
    pointer: PointerSegmenter | None = None,
):
    """Callable (tokens, sentence_index) -> BoundarySet for one method."""
    if method == "fullstop":
        return lambda toks, si=0: split_fullstop(toks, si)
    if method == "fullstop-verb":
        return lambda toks, si=0: split_fullstop_verb(toks, hooks, si)
    if method == "clauses":
        return lambda toks, si=0: split_clauses(toks, hooks, si)
    if method == "rules":
        config = RuleConfig(hooks=hooks, patterns=patterns)
        return lambda toks, si=0: split_clinical_rules(toks, config, si)
    if method == "pointer":
        if pointer is None:
            raise ValueError("pointer method needs a trained segmenter")
        return lambda toks, si=0: pointer.predict(toks, si)
    raise ValueError(f"unknown split method {method!r}")


BoundaryTable = dict[tuple[str, int], BoundarySet]


def _segment_table(
    config: PipelineConfig,
    views: list[CaseView],
    hooks: LexiconHooks,
    patterns: RulePatterns,
    pointer: PointerSegmenter | None,
    gold: dict[str, dict[int, tuple[int, ...]]] | None,
) -> BoundaryTable:
    """Segment boundaries for every sentence, computed once."""
    table: BoundaryTable = {}
    if config.segment_method == "gold":
        if gold is None:
            raise CorpusError("segment_method 'gold' needs side-channel boundaries")
        for view in views:
            case_gold = gold.get(view.case.id, {})
            for si, tokens in enumerate(view.tokens):
                bset = BoundarySet(si, case_gold.get(si, ()))
                bset.validate(len(tokens))
                table[(view.case.id, si)] = bset
        return table
    if config.segment_method == "pointer":
        fn = make_boundary_fn("pointer", hooks, patterns, pointer=pointer)
    else:
        fn = make_boundary_fn("rules", hooks, patterns)
    for view in views:
        for si, tokens in enumerate(view.tokens):
            table[(view.case.id, si)] = fn(tokens, si)
    return table


def units_for_view(
    view: CaseView,
    kind: UnitKind,
    segment_table: BoundaryTable | None,
    hooks: LexiconHooks,
) -> tuple[list[Unit], list[tuple[str, ...]], list[str], list[int]]:
    """Materialize units plus token/text/length material for one case."""
    units: list[Unit] = []
    unit_tokens: list[tuple[str, ...]] = []
    unit_texts: list[str] = []
    unit_lengths: list[int] = []
    for si, (sentence, tokens) in enumerate(zip(view.sentences, view.tokens)):
        if kind is UnitKind.SENTENCE:
            sent_units = [sentence_as_unit(sentence.text, tokens, si)]
        elif kind is UnitKind.SEGMENT:
            bset = segment_table[(view.case.id, si)]
            sent_units = units_from_boundaries(sentence.text, tokens, bset, kind)
        else:
            bset = split_clauses(tokens, hooks, si)
            sent_units = units_from_boundaries(sentence.text, tokens, bset, kind)
        for u in sent_units:
            units.append(u)
            unit_tokens.append(
                tuple(t.surface for t in tokens[u.token_start:u.token_end])
            )
            unit_texts.append(u.text(sentence.text))
            unit_lengths.append(u.char_length(sentence.text))
    return units, unit_tokens, unit_texts, unit_lengths


def build_document(
    view: CaseView,
    kind: UnitKind,
    segment_table: BoundaryTable | None,
    hooks: LexiconHooks,
    budget_chars: float,
    oracle_mode: str = "keep",
    with_labels: bool = True,
) -> DocumentExample:
    units, unit_tokens, unit_texts, unit_lengths = units_for_view(
        view, kind, segment_table, hooks
    )
    labels = None
    if with_labels:
        reference = [t for sent in view.reference_sentences for t in sent]
        entries = [
            UnitText(u, toks, ln)
            for u, toks, ln in zip(units, unit_tokens, unit_lengths)
        ]
        labeled = make_oracle_labels(entries, reference, budget_chars, oracle_mode)
        labels = tuple(int(lu.gold) for lu in labeled)
    return DocumentExample(
        case_id=view.case.id,
        kind=kind,
        sentences=tuple(tuple(t.surface for t in toks) for toks in view.tokens),
        units=tuple(units),
        unit_texts=tuple(unit_texts),
        unit_char_lengths=tuple(unit_lengths),
        labels=labels,
        reference_sentences=tuple(tuple(s) for s in view.reference_sentences),
    )


# ----------------------------------------------------------------------
# Evaluation helpers
# ----------------------------------------------------------------------

def rouge_eval(
    candidate_sentences: list[list[str]], reference_sentences: list[list[str]]
) -> dict[str, RougeScore]:
    cand_flat = [t for sent in candidate_sentences for t in sent]
    ref_flat = [t for sent in reference_sentences for t in sent]
    return {
        "rouge1": rouge_n(cand_flat, ref_flat, 1),
        "rouge2": rouge_n(cand_flat, ref_flat, 2),
        "rougeL": rouge_l(candidate_sentences, reference_sentences),
    }


def rouge_eval_texts(candidate_text: str, reference_text: str) -> dict[str, RougeScore]:
    cand = [
        [t.surface for t in tokenize(s.text)] for s in split_sentences(candidate_text)
    ]
    ref = [
        [t.surface for t in tokenize(s.text)] for s in split_sentences(reference_text)
    ]
    return rouge_eval(cand, ref)


def _mean_scores(per_case: list[dict[str, RougeScore]]) -> dict[str, dict[str, float]]:
    out = {}
    for key in ("rouge1", "rouge2", "rougeL"):
        out[key] = {
            "precision": 100.0 * float(np.mean([s[key].precision for s in per_case])),
            "recall": 100.0 * float(np.mean([s[key].recall for s in per_case])),
            "f1": 100.0 * float(np.mean([s[key].f1 for s in per_case])),
        }
    return out


def split_indices(n: int, dev_fraction: float, test_fraction: float, seed: int):
    """Deterministic document-level train/dev/test split."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    n_dev = max(1, int(round(n * dev_fraction)))
    if n_test + n_dev >= n:
        raise ValueError(f"corpus of {n} cases too small for the requested split")
    test = sorted(int(i) for i in order[:n_test])
    dev = sorted(int(i) for i in order[n_test:n_test + n_dev])
    train = sorted(int(i) for i in order[n_test + n_dev:])
    return train, dev, test


# ----------------------------------------------------------------------
# The experiment
# ----------------------------------------------------------------------

def _resolve_corpus(config: PipelineConfig, out_dir: str):
    if config.corpus_path is not None:
        cases = load_corpus(config.corpus_path)
        hooks = (
            LexiconHooks.from_json(config.hooks_path)
            if config.hooks_path
            else LexiconHooks()
        )
        patterns = (
            RulePatterns.from_json(config.patterns_path)
            if config.patterns_path
            else RulePatterns()
        )
        gold = None
        if config.gold_boundaries_path:
            table: dict[str, dict[int, tuple[int, ...]]] = {}
            for e in load_gold_boundaries(config.gold_boundaries_path):
                table.setdefault(e.case_id, {})[e.sentence_index] = e.positions
            gold = table
        return cases, hooks, patterns, gold

    generated: GeneratedCorpus = generate_synthetic(config.synthetic)
    save_corpus(generated.cases, os.path.join(out_dir, "corpus.jsonl"))
    save_gold_boundaries(
        generated.gold_boundaries, os.path.join(out_dir, "gold_boundaries.jsonl")
    )
    generated.hooks.to_json(os.path.join(out_dir, "hooks.json"))
    generated.patterns.to_json(os.path.join(out_dir, "patterns.json"))
    return generated.cases, generated.hooks, generated.patterns, generated.gold_by_case()


def _train_pointer(
    config: PipelineConfig,
    views: list[CaseView],
    train_idx: list[int],
    gold: dict[str, dict[int, tuple[int, ...]]],
) -> PointerSegmenter:
    examples = []
    for i in train_idx:
        view = views[i]
        case_gold = gold.get(view.case.id, {})
        for si, tokens in enumerate(view.tokens):
            positions = case_gold.get(si, ())
            examples.append(
                SentenceExample(
                    tuple(t.surface for t in tokens),
                    tuple(p for p in positions if p < len(tokens) - 1),
                )
            )
    model, _ = segmenter_train(examples, config.segmenter)
    return model


def _eval_segmentation(views, test_idx, gold, methods: dict) -> dict[str, dict]:
    out = {}
    for name in sorted(methods):
        fn = methods[name]
        pairs = []
        for i in test_idx:
            view = views[i]
            case_gold = gold.get(view.case.id, {})
            for si, tokens in enumerate(view.tokens):
                gold_set = BoundarySet(si, case_gold.get(si, ()))
                pairs.append((fn(tokens, si), gold_set))
        micro, macro = corpus_boundary_prf(pairs)
        out[name] = {
            "micro": {"precision": micro.precision, "recall": micro.recall, "f1": micro.f1},
            "macro": {"precision": macro.precision, "recall": macro.recall, "f1": macro.f1},
        }
    return out


def _census_from_tables(
    views: list[CaseView],
    segment_table: BoundaryTable,
    hooks: LexiconHooks,
) -> RelationCensus:
    counts = {r: 0 for r in RelationType}
    for view in views:
        for si, tokens in enumerate(view.tokens):
            n = len(tokens)
            seg = segment_table[(view.case.id, si)]
            cl = split_clauses(tokens, hooks, si)
            seg_iv = list(
                zip([0] + [p + 1 for p in seg.positions],
                    [p + 1 for p in seg.positions] + [n])
            )
            cl_iv = list(
                zip([0] + [p + 1 for p in cl.positions],
                    [p + 1 for p in cl.positions] + [n])
            )
            for s_iv in seg_iv:
                for c_iv in cl_iv:
                    rel = classify_relation(s_iv, c_iv)
                    if rel is not None:
                        counts[rel] += 1
    return RelationCensus(counts, disjoint=0)


def _stats_from_table(
    views: list[CaseView], lookup
) -> GranularityStats:
    total_units = 0
    total_tokens = 0
    total_chars = 0
    n_sentences = 0
    for view in views:
        for si, (sentence, tokens) in enumerate(zip(view.sentences, view.tokens)):
            bset = lookup(view.case.id, si, tokens)
            bset.validate(len(tokens))
            total_units += len(bset.positions) + 1
            total_tokens += len(tokens)
            total_chars += sum(1 for c in sentence.text if not c.isspace())
            n_sentences += 1
    return GranularityStats(
        units_per_sentence=total_units / n_sentences,
        tokens_per_unit=total_tokens / total_units,
        chars_per_unit=total_chars / total_units,
        sentence_count=n_sentences,
        unit_count=total_units,
    )


def run_experiment(config: PipelineConfig, out_dir: str) -> dict:
    """Execute the full pipeline per unit kind and write the report."""
    os.makedirs(out_dir, exist_ok=True)
    cases, hooks, patterns, gold = _resolve_corpus(config, out_dir)
    views = build_views(cases, hooks)
    train_idx, dev_idx, test_idx = split_indices(
        len(views), config.dev_fraction, config.test_fraction, config.seed
    )

    pointer = None
    segmentation_report = {}
    needs_pointer = (
        UnitKind.SEGMENT in config.kinds and config.segment_method == "pointer"
    )
    if needs_pointer:
        if gold is None:
            raise CorpusError(
                "segment_method 'pointer' needs gold boundaries to train on"
            )
        pointer = _train_pointer(config, views, train_idx, gold)
        save_checkpoint(
            pointer.to_checkpoint(), os.path.join(out_dir, "segmenter.ckpt")
        )
    if gold:
        methods = {
            "fullstop": make_boundary_fn("fullstop", hooks, patterns),
            "fullstop-verb": make_boundary_fn("fullstop-verb", hooks, patterns),
            "clauses": make_boundary_fn("clauses", hooks, patterns),
            "rules": make_boundary_fn("rules", hooks, patterns),
        }
        if pointer is not None:
            methods["pointer"] = make_boundary_fn(
                "pointer", hooks, patterns, pointer=pointer
            )
        segmentation_report = _eval_segmentation(views, test_idx, gold, methods)

    if config.oracle_budget == "auto":
        budget = float(
            np.mean(
                [
                    sum(1 for c in views[i].case.summary_text if not c.isspace())
                    for i in train_idx
                ]
            )
        )
    else:
        budget = float(config.oracle_budget)

    segment_table = None
    if UnitKind.SEGMENT in config.kinds:
        segment_table = _segment_table(config, views, hooks, patterns, pointer, gold)

    kind_reports = {}
    per_kind_stats = {}
    for kind in config.kinds:
        docs = [
            build_document(
                view, kind, segment_table, hooks, budget, config.oracle_mode
            )
            for view in views
        ]
        model, history = summarizer_train(
            [docs[i] for i in train_idx],
            [docs[i] for i in dev_idx],
            kind,
            replace(config.summarizer, seed=config.summarizer.seed + _kind_offset(kind)),
            budget_chars=budget,
        )
        save_checkpoint(
            model.to_checkpoint(),
            os.path.join(out_dir, f"summarizer_{kind.value.lower()}.ckpt"),
        )
        per_case = []
        summaries = []
        for i in test_idx:
            result = summarize(docs[i], model, budget_chars=budget)
            cand_sentences = _result_unit_tokens(docs[i], result)
            per_case.append(
                rouge_eval(cand_sentences, list(docs[i].reference_sentences))
            )
            summaries.append(
                {
                    "case_id": result.case_id,
                    "selected_units": [list(s) for s in result.selected],
                    "summary_text": result.summary_text,
                }
            )
        with open(
            os.path.join(out_dir, f"summaries_{kind.value.lower()}.jsonl"),
            "w",
            encoding="utf-8",
        ) as fh:
            for row in summaries:
                fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
                fh.write("\n")
        kind_reports[kind.value] = {
            "rouge": _mean_scores(per_case),
            "dev_rouge1_trajectory": [100.0 * s for s in history.dev_rouge1],
            "best_epoch": history.best_epoch,
            "test_cases": len(test_idx),
        }

        if kind is UnitKind.SENTENCE:
            lookup = lambda cid, si, toks: BoundarySet(si, ())
        elif kind is UnitKind.SEGMENT:
            lookup = lambda cid, si, toks: segment_table[(cid, si)]
        else:
            lookup = lambda cid, si, toks: split_clauses(toks, hooks, si)
        per_kind_stats[kind.value] = _stats_dict(_stats_from_table(views, lookup))

    census = None
    if segment_table is not None and UnitKind.CLAUSE in config.kinds:
        census = _census_from_tables(views, segment_table, hooks)

    report = {
        "report_version": REPORT_VERSION,
        "config": config.to_dict(),
        "corpus": {
            "cases": len(views),
            "train": len(train_idx),
            "dev": len(dev_idx),
            "test": len(test_idx),
            "oracle_budget_chars": budget,
        },
        "segmentation": segmentation_report,
        "summarization": kind_reports,
        "granularity": per_kind_stats,
        "relations": _census_dict(census) if census is not None else {},
    }
    write_report(report, out_dir)
    return report


def _kind_offset(kind: UnitKind) -> int:
    return {"SENTENCE": 101, "SEGMENT": 211, "CLAUSE": 307}[kind.value]


def _result_unit_tokens(doc: DocumentExample, result) -> list[list[str]]:
    """Selected units as candidate sentences for ROUGE-L."""
    index = {(u.sentence_index, u.unit_index): u for u in doc.units}
    out = []
    for si, ui in result.selected:
        u = index[(si, ui)]
        out.append(list(doc.sentences[si][u.token_start:u.token_end]))
    return out


def _stats_dict(stats: GranularityStats) -> dict:
    return {
        "units_per_sentence": stats.units_per_sentence,
        "tokens_per_unit": stats.tokens_per_unit,
        "chars_per_unit": stats.chars_per_unit,
        "sentence_count": stats.sentence_count,
        "unit_count": stats.unit_count,
    }


def _census_dict(census: RelationCensus) -> dict:
    pct = census.percentages()
    return {
        "counts": {r.value: census.counts[r] for r in RelationType},
        "percentages": {r.value: pct[r] for r in RelationType},
        "total_intersecting": census.total,
    }


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------

def write_report(report: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")

    lines = ["Units\tROUGE-1\tROUGE-2\tROUGE-L"]
    for kind in report["config"]["kinds"]:
        if kind not in report["summarization"]:
            continue
        r = report["summarization"][kind]["rouge"]
        lines.append(
            f"{kind.capitalize()}\t{r['rouge1']['f1']:.2f}"
            f"\t{r['rouge2']['f1']:.2f}\t{r['rougeL']['f1']:.2f}"
        )
    lines.append("")
    lines.append("Units\tUnits/Sentence\tTokens/Unit\tCharacters/Unit")
    for kind in report["config"]["kinds"]:
        if kind not in report["granularity"]:
            continue
        g = report["granularity"][kind]
        lines.append(
            f"{kind.capitalize()}\t{g['units_per_sentence']:.2f}"
            f"\t{g['tokens_per_unit']:.2f}\t{g['chars_per_unit']:.2f}"
        )
    if report["relations"]:
        lines.append("")
        lines.append("Relation types\tEqual\tInclusive\tIncluded\tOverlap")
        c = report["relations"]["counts"]
        p = report["relations"]["percentages"]
        lines.append(
            "Number of relationships\t"
            + "\t".join(str(c[r.value]) for r in RelationType)
        )
        lines.append(
            "Percentage\t" + "\t".join(f"{p[r.value]:.1f}%" for r in RelationType)
        )
    if report["segmentation"]:
        lines.append("")
        lines.append("Method\tPrecision\tRecall\tF1")
        for name in sorted(report["segmentation"]):
            m = report["segmentation"][name]["micro"]
            lines.append(
                f"{name}\t{m['precision']:.3f}\t{m['recall']:.3f}\t{m['f1']:.3f}"
            )
    with open(os.path.join(out_dir, "report.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    version = report.get("report_version")
    if version != REPORT_VERSION:
        raise ReportError(f"unsupported report version {version!r}")
    return report
