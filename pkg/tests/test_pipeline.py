import json

import pytest

from gransum.corpus import SyntheticSpec
from gransum.pipeline import (
    PipelineConfig,
    ReportError,
    load_report,
    rouge_eval_texts,
    run_experiment,
    split_indices,
)
from gransum.segmenter import SegmenterConfig
from gransum.spans import UnitKind
from gransum.summarizer import SummarizerConfig

TINY = PipelineConfig(
    synthetic=SyntheticSpec(
        case_count=12,
        sentences_per_record=4,
        segments_per_sentence={2: 0.5, 3: 0.5},
        seed=9,
    ),
    segment_method="gold",
    dev_fraction=0.15,
    test_fraction=0.15,
    seed=3,
    segmenter=SegmenterConfig(bucket_count=256, epochs=1, seed=0),
    summarizer=SummarizerConfig(
        embed_dim=8, hidden=6, d_ff=12, bucket_count=256, epochs=1, seed=0
    ),
)


@pytest.fixture(scope="module")
def tiny_report(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    report = run_experiment(TINY, str(out))
    return report, out


class TestRunExperiment:
    def test_report_has_requested_kind_rows(self, tiny_report):
        report, _ = tiny_report
        assert set(report["summarization"]) == {"SENTENCE", "SEGMENT", "CLAUSE"}

    def test_single_kind_config(self, tmp_path):
        config = PipelineConfig(
            synthetic=TINY.synthetic,
            kinds=(UnitKind.SENTENCE,),
            segment_method="gold",
            dev_fraction=0.15,
            test_fraction=0.15,
            seed=3,
            segmenter=TINY.segmenter,
            summarizer=TINY.summarizer,
        )
        report = run_experiment(config, str(tmp_path))
        assert list(report["summarization"]) == ["SENTENCE"]
        assert report["relations"] == {}

    def test_report_files_written(self, tiny_report):
        _, out = tiny_report
        for name in (
            "report.json",
            "report.tsv",
            "corpus.jsonl",
            "gold_boundaries.jsonl",
            "hooks.json",
            "patterns.json",
            "summarizer_sentence.ckpt",
            "summaries_sentence.jsonl",
        ):
            assert (out / name).exists(), name

    def test_segmentation_section_scores_fullstop_zero(self, tiny_report):
        report, _ = tiny_report
        # generator plants no internal full stops, so the baseline finds nothing
        assert report["segmentation"]["fullstop"]["micro"]["f1"] == 0.0

    def test_sentence_granularity_row(self, tiny_report):
        report, _ = tiny_report
        assert report["granularity"]["SENTENCE"]["units_per_sentence"] == 1.0
        seg = report["granularity"]["SEGMENT"]
        sent = report["granularity"]["SENTENCE"]
        assert seg["chars_per_unit"] < sent["chars_per_unit"]

    def test_relations_partition(self, tiny_report):
        report, _ = tiny_report
        rel = report["relations"]
        assert sum(rel["counts"].values()) == rel["total_intersecting"]
        assert sum(rel["percentages"].values()) == pytest.approx(100.0)

    def test_report_version_round_trip(self, tiny_report):
        report, out = tiny_report
        loaded = load_report(str(out / "report.json"))
        assert loaded["report_version"] == report["report_version"]

    def test_unknown_report_version_rejected(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text(json.dumps({"report_version": 999}))
        with pytest.raises(ReportError):
            load_report(str(path))


class TestConfig:
    def test_fraction_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(synthetic=TINY.synthetic, dev_fraction=0.6, test_fraction=0.5)

    def test_unknown_segment_method(self):
        with pytest.raises(ValueError):
            PipelineConfig(synthetic=TINY.synthetic, segment_method="magic")

    def test_needs_corpus_or_synthetic(self):
        with pytest.raises(ValueError):
            PipelineConfig(corpus_path=None, synthetic=None)

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(TINY.to_dict()))
        loaded = PipelineConfig.from_json(str(path))
        assert loaded == TINY


class TestSplitIndices:
    def test_partition_and_determinism(self):
        train, dev, test = split_indices(50, 0.1, 0.1, seed=4)
        assert sorted(train + dev + test) == list(range(50))
        assert (train, dev, test) == split_indices(50, 0.1, 0.1, seed=4)

    def test_too_small_corpus_rejected(self):
        with pytest.raises(ValueError):
            split_indices(2, 0.4, 0.4, seed=0)


def test_rouge_eval_texts_identity():
    scores = rouge_eval_texts("a b。c d", "a b。c d")
    assert scores["rouge1"].f1 == 1.0
    assert scores["rougeL"].f1 == 1.0


def test_rouge_eval_texts_empty_candidate():
    scores = rouge_eval_texts("", "a b")
    assert scores["rouge1"].f1 == 0.0
