"""Command line interface.

Every command reads and writes files (nothing interactive) and exits with
0 on success, 1 on usage errors, 2 on data errors, 3 on numeric errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .analysis import RelationType, corpus_boundary_prf
from .corpus import (
    CorpusError,
    SyntheticSpec,
    generate_synthetic,
    load_corpus,
    load_gold_boundaries,
    save_corpus,
    save_gold_boundaries,
)
from .nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .nn.core import TrainingError
from .oracle import dump_labels, load_labels, make_oracle_labels, UnitText
from .pipeline import (
    PipelineConfig,
    ReportError,
    build_views,
    make_boundary_fn,
    rouge_eval_texts,
    run_experiment,
)
from .segmenter import (
    PointerSegmenter,
    SegmenterConfig,
    SentenceExample,
    segmenter_train,
)
from .spans import UnitKind
from .splitters import BoundarySet, RulePatterns, split_clauses, split_sentences
from .summarizer import (
    Summarizer,
    SummarizerConfig,
    summarize,
    summarizer_train,
)
from .tokenization import LexiconHooks

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_lines(path: str | None, lines: list[str]) -> None:
    if path is None:
        for line in lines:
            print(line)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")


def _load_hooks(args) -> LexiconHooks:
    return LexiconHooks.from_json(args.hooks) if args.hooks else LexiconHooks()


def _load_patterns(args) -> RulePatterns:
    return RulePatterns.from_json(args.patterns) if getattr(args, "patterns", None) else RulePatterns()


def _boundary_fn(args, hooks, patterns):
    if args.method == "pointer":
        if not args.checkpoint:
            raise CorpusError("--method pointer requires --checkpoint")
        ckpt = load_checkpoint(args.checkpoint, expect_kind=PointerSegmenter.KIND)
        pointer = PointerSegmenter.from_checkpoint(ckpt)
        return make_boundary_fn("pointer", hooks, patterns, pointer=pointer)
    return make_boundary_fn(args.method, hooks, patterns)


def _case_boundary_fn(args, hooks, patterns):
    """(case_id, sentence_index, tokens) -> BoundarySet for any method."""
    if args.method == "gold":
        if not getattr(args, "gold", None):
            raise CorpusError("--method gold requires --gold boundaries file")
        gold = _gold_table(args.gold)
        return lambda cid, si, toks: BoundarySet(
            si, gold.get(cid, {}).get(si, ())
        )
    fn = _boundary_fn(args, hooks, patterns)
    return lambda cid, si, toks: fn(toks, si)


def _gold_table(path: str):
    table: dict[str, dict[int, tuple[int, ...]]] = {}
    for e in load_gold_boundaries(path):
        table.setdefault(e.case_id, {})[e.sentence_index] = e.positions
    return table


def _segment_table_for_views(views, kind, boundary_fn, gold=None):
    if kind is not UnitKind.SEGMENT:
        return None
    table = {}
    for view in views:
        for si, tokens in enumerate(view.tokens):
            if gold is not None:
                positions = gold.get(view.case.id, {}).get(si, ())
                table[(view.case.id, si)] = BoundarySet(si, positions)
            else:
                table[(view.case.id, si)] = boundary_fn(tokens, si)
    return table


def _documents(views, kind, args, hooks, patterns, with_labels, budget, mode="keep"):
    from .pipeline import build_document

    gold = None
    fn = None
    if kind is UnitKind.SEGMENT:
        if args.method == "gold":
            if not getattr(args, "gold", None):
                raise CorpusError("--method gold requires --gold boundaries file")
            gold = _gold_table(args.gold)
        else:
            fn = _boundary_fn(args, hooks, patterns)
    table = _segment_table_for_views(views, kind, fn, gold)
    return [
        build_document(view, kind, table, hooks, budget, mode, with_labels)
        for view in views
    ]


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_gen_synthetic(args) -> int:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec = SyntheticSpec.from_dict(json.load(fh))
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
    else:
        spec = SyntheticSpec(
            case_count=args.cases,
            copy_rate=args.copy_rate,
            seed=args.seed if args.seed is not None else 1234,
        )
    generated = generate_synthetic(spec)
    save_corpus(generated.cases, args.corpus_out)
    if args.gold_out:
        save_gold_boundaries(generated.gold_boundaries, args.gold_out)
    if args.hooks_out:
        generated.hooks.to_json(args.hooks_out)
    if args.patterns_out:
        generated.patterns.to_json(args.patterns_out)
    print(f"wrote {len(generated.cases)} cases to {args.corpus_out}")
    return EXIT_OK


def cmd_split_sentences(args) -> int:
    cases = load_corpus(args.corpus)
    lines = []
    for case in cases:
        sentences = split_sentences(case.record_text)
        lines.append(
            json.dumps(
                {
                    "id": case.id,
                    "sentences": [
                        {"text": s.text, "start": s.start, "end": s.end}
                        for s in sentences
                    ],
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    _write_lines(args.output, lines)
    return EXIT_OK


def cmd_segment(args) -> int:
    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    fn = _case_boundary_fn(args, hooks, patterns)
    views = build_views(cases, hooks)
    lines = []
    for view in views:
        for si, tokens in enumerate(view.tokens):
            bset = fn(view.case.id, si, tokens)
            lines.append(
                json.dumps(
                    {
                        "id": view.case.id,
                        "sentence_index": si,
                        "boundaries": list(bset.positions),
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
    _write_lines(args.output, lines)
    return EXIT_OK


def _sentence_examples(views, gold):
    examples = []
    for view in views:
        case_gold = gold.get(view.case.id, {})
        for si, tokens in enumerate(view.tokens):
            positions = case_gold.get(si, ())
            examples.append(
                SentenceExample(
                    tuple(t.surface for t in tokens),
                    tuple(p for p in positions if p < len(tokens) - 1),
                )
            )
    return examples


def cmd_train_segmenter(args) -> int:
    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    gold = _gold_table(args.gold)
    views = build_views(cases, hooks)
    config = SegmenterConfig(
        epochs=args.epochs, seed=args.seed if args.seed is not None else 0
    )
    model, history = segmenter_train(_sentence_examples(views, gold), config)
    save_checkpoint(model.to_checkpoint(), args.out)
    print(
        f"trained segmenter: {len(history.epoch_losses)} epochs, "
        f"final loss {history.epoch_losses[-1]:.4f}, saved to {args.out}"
    )
    return EXIT_OK


def cmd_eval_segmenter(args) -> int:
    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    gold = _gold_table(args.gold)
    fn = _boundary_fn(args, hooks, patterns)
    views = build_views(cases, hooks)
    pairs = []
    for view in views:
        case_gold = gold.get(view.case.id, {})
        for si, tokens in enumerate(view.tokens):
            pairs.append((fn(tokens, si), BoundarySet(si, case_gold.get(si, ()))))
    micro, macro = corpus_boundary_prf(pairs)
    out = {
        "micro": {"precision": micro.precision, "recall": micro.recall, "f1": micro.f1},
        "macro": {"precision": macro.precision, "recall": macro.recall, "f1": macro.f1},
    }
    _write_lines(args.output, [json.dumps(out, sort_keys=True, indent=2)])
    return EXIT_OK


def cmd_make_oracle(args) -> int:
    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    views = build_views(cases, hooks)
    kind = UnitKind(args.kind)
    lines = []
    docs_inputs = _documents(
        views, kind, args, hooks, patterns, with_labels=False, budget=args.budget
    )
    for view, doc in zip(views, docs_inputs):
        reference = [t for sent in view.reference_sentences for t in sent]
        entries = [
            UnitText(u, tuple(doc.sentences[u.sentence_index][u.token_start:u.token_end]), ln)
            for u, ln in zip(doc.units, doc.unit_char_lengths)
        ]
        labeled = make_oracle_labels(entries, reference, args.budget, args.mode)
        lines.extend(dump_labels(view.case.id, labeled))
    _write_lines(args.output, lines)
    return EXIT_OK


def cmd_train_summarizer(args) -> int:
    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    views = build_views(cases, hooks)
    kind = UnitKind(args.kind)
    docs = _documents(
        views, kind, args, hooks, patterns, with_labels=False, budget=args.budget
    )
    gold_table = load_labels(args.labels)
    labeled_docs = []
    for doc in docs:
        case_labels = gold_table.get(doc.case_id)
        if case_labels is None:
            raise CorpusError(f"labels file has no entries for case {doc.case_id}")
        labels = []
        for u in doc.units:
            key = (u.sentence_index, u.unit_index)
            if key not in case_labels:
                raise CorpusError(
                    f"case {doc.case_id}: no label for unit {key}; "
                    "labels were built with a different splitter"
                )
            labels.append(int(case_labels[key]))
        labeled_docs.append(dataclasses.replace(doc, labels=tuple(labels)))
    seed = args.seed if args.seed is not None else 0
    order = np.random.default_rng(seed).permutation(len(labeled_docs))
    n_dev = max(1, int(round(len(labeled_docs) * args.dev_fraction)))
    if n_dev >= len(labeled_docs):
        raise CorpusError("corpus too small for the requested dev fraction")
    dev_i = sorted(int(i) for i in order[:n_dev])
    train_i = sorted(int(i) for i in order[n_dev:])
    config = SummarizerConfig(epochs=args.epochs, seed=seed)
    model, history = summarizer_train(
        [labeled_docs[i] for i in train_i],
        [labeled_docs[i] for i in dev_i],
        kind,
        config,
        budget_chars=args.budget,
    )
    save_checkpoint(model.to_checkpoint(), args.out)
    print(
        f"trained summarizer[{kind.value}]: best epoch {history.best_epoch}, "
        f"dev ROUGE-1 {history.dev_rouge1[history.best_epoch] * 100:.2f}, "
        f"saved to {args.out}"
    )
    return EXIT_OK


def cmd_summarize(args) -> int:
    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    views = build_views(cases, hooks)
    ckpt = load_checkpoint(args.model, expect_kind=Summarizer.KIND)
    model = Summarizer.from_checkpoint(ckpt)
    kind = model.unit_kind
    docs = _documents(
        views, kind, args, hooks, patterns, with_labels=False, budget=args.budget
    )
    lines = []
    for doc in docs:
        result = summarize(doc, model, budget_chars=args.budget, mode=args.mode)
        lines.append(
            json.dumps(
                {
                    "case_id": result.case_id,
                    "selected_units": [list(s) for s in result.selected],
                    "summary_text": result.summary_text,
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    _write_lines(args.output, lines)
    return EXIT_OK


def cmd_eval_rouge(args) -> int:
    cases = {c.id: c for c in load_corpus(args.corpus)}
    rows = []
    with open(args.candidates, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            case = cases.get(obj["case_id"])
            if case is None:
                raise CorpusError(f"candidate for unknown case {obj['case_id']!r}")
            scores = rouge_eval_texts(obj["summary_text"], case.summary_text)
            rows.append(
                {
                    "case_id": obj["case_id"],
                    "rouge1": dataclasses.asdict(scores["rouge1"]),
                    "rouge2": dataclasses.asdict(scores["rouge2"]),
                    "rougeL": dataclasses.asdict(scores["rougeL"]),
                }
            )
    means = {}
    for key in ("rouge1", "rouge2", "rougeL"):
        means[key] = {
            stat: float(np.mean([r[key][stat] for r in rows])) if rows else 0.0
            for stat in ("precision", "recall", "f1")
        }
    out = {"cases": rows, "means": means}
    _write_lines(args.output, [json.dumps(out, ensure_ascii=False, sort_keys=True, indent=2)])
    return EXIT_OK


def cmd_analyze_relations(args) -> int:
    from .analysis import RelationCensus, classify_relation

    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    views = build_views(cases, hooks)
    seg_fn = _case_boundary_fn(args, hooks, patterns)

    counts = {r: 0 for r in RelationType}
    for view in views:
        for si, tokens in enumerate(view.tokens):
            n = len(tokens)
            seg = seg_fn(view.case.id, si, tokens)
            cl = split_clauses(tokens, hooks, si)
            seg_iv = list(zip([0] + [p + 1 for p in seg.positions],
                              [p + 1 for p in seg.positions] + [n]))
            cl_iv = list(zip([0] + [p + 1 for p in cl.positions],
                             [p + 1 for p in cl.positions] + [n]))
            for a in seg_iv:
                for b in cl_iv:
                    rel = classify_relation(a, b)
                    if rel is not None:
                        counts[rel] += 1
    census = RelationCensus(counts, disjoint=0)
    pct = census.percentages()
    lines = [
        "Relation types\t" + "\t".join(r.value.capitalize() for r in RelationType),
        "Number of relationships\t"
        + "\t".join(str(census.counts[r]) for r in RelationType),
        "Percentage\t" + "\t".join(f"{pct[r]:.1f}%" for r in RelationType),
    ]
    _write_lines(args.output, lines)
    return EXIT_OK


def cmd_stats(args) -> int:
    from .analysis import granularity_stats

    cases = load_corpus(args.corpus)
    hooks = _load_hooks(args)
    patterns = _load_patterns(args)
    views = build_views(cases, hooks)
    kind = UnitKind(args.kind)
    if kind is UnitKind.SENTENCE:
        case_fn = lambda cid, si, toks: BoundarySet(si, ())
    elif kind is UnitKind.CLAUSE:
        case_fn = lambda cid, si, toks: split_clauses(toks, hooks, si)
    else:
        case_fn = _case_boundary_fn(args, hooks, patterns)
    rows = []
    planted = []
    for view in views:
        for si, (s, toks) in enumerate(zip(view.sentences, view.tokens)):
            rows.append((s.text, toks))
            planted.append(case_fn(view.case.id, si, toks))
    cursor = iter(planted)
    stats = granularity_stats(rows, lambda toks: next(cursor))
    lines = [
        "Units\tUnits/Sentence\tTokens/Unit\tCharacters/Unit",
        f"{kind.value.capitalize()}\t{stats.units_per_sentence:.2f}"
        f"\t{stats.tokens_per_unit:.2f}\t{stats.chars_per_unit:.2f}",
    ]
    _write_lines(args.output, lines)
    return EXIT_OK


def cmd_run_experiment(args) -> int:
    config = PipelineConfig.from_json(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    report = run_experiment(config, args.out)
    for kind, section in report["summarization"].items():
        r1 = section["rouge"]["rouge1"]["f1"]
        print(f"{kind}: ROUGE-1 F1 {r1:.2f}")
    print(f"report written to {args.out}/report.json")
    return EXIT_OK


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

def _add_split_args(p, gold_required=False):
    p.add_argument("--hooks", help="lexicon hooks JSON")
    p.add_argument("--patterns", help="rule pattern JSON")
    p.add_argument(
        "--method",
        default="rules",
        choices=["fullstop", "fullstop-verb", "clauses", "rules", "pointer", "gold"],
    )
    p.add_argument("--checkpoint", help="segmenter checkpoint (pointer method)")
    p.add_argument(
        "--gold",
        required=gold_required,
        help="gold boundaries JSONL (gold method / evaluation)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gransum", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic corpus")
    p.add_argument("--spec", help="SyntheticSpec JSON file")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--copy-rate", type=float, default=0.25)
    p.add_argument("--seed", type=int)
    p.add_argument("--corpus-out", required=True)
    p.add_argument("--gold-out")
    p.add_argument("--hooks-out")
    p.add_argument("--patterns-out")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("split-sentences", help="sentence-split record text")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_split_sentences)

    p = sub.add_parser("segment", help="emit unit boundaries per sentence")
    p.add_argument("--corpus", required=True)
    _add_split_args(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("train-segmenter", help="train the pointer segmenter")
    p.add_argument("--corpus", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--hooks")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_segmenter)

    p = sub.add_parser("eval-segmenter", help="boundary P/R/F1 against gold")
    p.add_argument("--corpus", required=True)
    _add_split_args(p, gold_required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_segmenter)

    p = sub.add_parser("make-oracle", help="greedy ROUGE-2 pseudo-labels")
    p.add_argument("--corpus", required=True)
    _add_split_args(p)
    p.add_argument("--kind", required=True, choices=[k.value for k in UnitKind])
    p.add_argument("--budget", type=float, default=1200)
    p.add_argument("--mode", default="keep", choices=["keep", "drop"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_make_oracle)

    p = sub.add_parser("train-summarizer", help="train the unit summarizer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", required=True)
    _add_split_args(p)
    p.add_argument("--kind", required=True, choices=[k.value for k in UnitKind])
    p.add_argument("--budget", type=float, default=1200)
    p.add_argument("--dev-fraction", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_summarizer)

    p = sub.add_parser("summarize", help="budgeted extractive inference")
    p.add_argument("--corpus", required=True)
    _add_split_args(p)
    p.add_argument("--model", required=True, help="summarizer checkpoint")
    p.add_argument("--budget", type=float, default=1200)
    p.add_argument("--mode", default="keep", choices=["keep", "drop"])
    p.add_argument("--output")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval-rouge", help="ROUGE of candidate summaries")
    p.add_argument("--candidates", required=True, help="JSONL with summary_text")
    p.add_argument("--corpus", required=True, help="reference corpus JSONL")
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval_rouge)

    p = sub.add_parser("analyze-relations", help="segment/clause relation census")
    p.add_argument("--corpus", required=True)
    _add_split_args(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_analyze_relations)

    p = sub.add_parser("stats", help="granularity statistics")
    p.add_argument("--corpus", required=True)
    _add_split_args(p)
    p.add_argument("--kind", required=True, choices=[k.value for k in UnitKind])
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("run-experiment", help="full pipeline per unit kind")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (
        CorpusError,
        CheckpointError,
        ReportError,
        FileNotFoundError,
        json.JSONDecodeError,
        ValueError,
        KeyError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
