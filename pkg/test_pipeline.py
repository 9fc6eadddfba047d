import json

import pytest

from auto_distractor.common.errors import ContractViolationError, SpanError
from auto_distractor.models.backend_models import NliLabel
from auto_distractor.models.generation_models import AveragingType, DecodingStrategy, GenerationConfig
from auto_distractor.models.selection_models import DistractorSet, EliminationStage
from auto_distractor.pipeline import BLANK, DistractorPipeline, generate_distractors, render_cloze
from auto_distractor.services.mock_backend_service import (
    MockMaskedLMBackend,
    MockNliBackend,
    load_mock_config,
    mock_backends_from_config,
)
from conftest import GOLDEN_CONTEXT, GOLDEN_SPAN, MASK

GOLDEN_CONFIG = GenerationConfig(n_mask=0, dispersion=0, k=2, m_s=2, strategy=DecodingStrategy.CTL)


@pytest.fixture
def golden_pipeline(golden_config):
    return DistractorPipeline(*mock_backends_from_config(golden_config))


def test_golden_generation(golden_pipeline):
    result = golden_pipeline.generate(GOLDEN_CONTEXT, GOLDEN_SPAN, GOLDEN_CONFIG)

    assert [c.text for c in result.all_candidates] == ["dog", "fox", "rat"]
    assert result.distractor_set.distractors == ["fox", "rat"]
    assert result.distractor_set.answer == "cat"
    assert not result.distractor_set.underfilled
    assert result.distractor_set.unscanned == []
    [entry] = result.distractor_set.trace.entries
    assert (entry.candidate, entry.stage, entry.counterpart) == ("dog", EliminationStage.ANSWER_ENTAILMENT, "cat")
    assert entry.verdicts == (NliLabel.ENTAILMENT, NliLabel.ENTAILMENT)
    assert result.mask_counts == [1]
    assert result.config_echo == GOLDEN_CONFIG
    assert set(result.timing) == {"tokenize", "csg", "ds"}


def test_golden_generation_queries_the_masked_context_once(golden_config):
    mlm, nli = mock_backends_from_config(golden_config, record_calls=True)
    generate_distractors(GOLDEN_CONTEXT, GOLDEN_SPAN, GOLDEN_CONFIG, mlm, nli)
    assert mlm.calls == [(f"The {MASK} sat on the mat.", 1, 4)]


def test_generation_is_deterministic(vocabulary_config_path):
    config = GenerationConfig(n_mask=2, dispersion=1, k=3, seed=5)
    runs = []
    for _ in range(2):
        pipeline = DistractorPipeline(*load_mock_config(str(vocabulary_config_path)))
        result = pipeline.generate("A big dog ran home.", (2, 9), config)
        runs.append(json.dumps(result.to_json_dict(), sort_keys=True))
    assert runs[0] == runs[1]


def test_distractors_come_from_the_candidates(vocabulary_config_path):
    pipeline = DistractorPipeline(*load_mock_config(str(vocabulary_config_path)))
    result = pipeline.generate("A big dog ran home.", (2, 9), GenerationConfig(k=4))
    texts = [c.text for c in result.all_candidates]
    assert set(result.distractor_set.distractors) <= set(texts)
    assert "big dog" not in texts
    # the pairwise scan keeps rank order
    assert result.distractor_set.distractors == [t for t in texts if t in result.distractor_set.distractors]


def test_whole_context_answer():
    mlm = MockMaskedLMBackend(predictions={(MASK, 0): [("dog", 0.6), ("cat", 0.3)]})
    result = DistractorPipeline(mlm, MockNliBackend()).generate("cat", (0, 3), GenerationConfig(dispersion=0))
    assert result.distractor_set.distractors == ["dog"]
    assert result.distractor_set.underfilled
    assert "only 1 of 3 distractors selected" in result.warnings


def test_empty_candidate_set_is_reported():
    result = DistractorPipeline(MockMaskedLMBackend(), MockNliBackend()).generate(
        GOLDEN_CONTEXT, GOLDEN_SPAN, GenerationConfig(dispersion=0)
    )
    assert result.distractor_set.distractors == []
    assert "empty candidate set" in result.warnings


def test_averaging_changes_only_the_order(golden_config):
    def texts(avg):
        mlm, nli = mock_backends_from_config(golden_config)
        config = GOLDEN_CONFIG.model_copy(update={"avg": avg})
        return {c.text for c in generate_distractors(GOLDEN_CONTEXT, GOLDEN_SPAN, config, mlm, nli).all_candidates}

    assert texts(AveragingType.GEOMETRIC) == texts(AveragingType.HARMONIC)


def test_sentence_of_the_answer_is_the_comparison_frame():
    context = "It rained. The cat sat on the mat."
    nli = MockNliBackend({
        ("The dog sat on the mat.", "The cat sat on the mat."): NliLabel.ENTAILMENT,
        ("The cat sat on the mat.", "The dog sat on the mat."): NliLabel.ENTAILMENT,
    })
    mlm = MockMaskedLMBackend(predictions={("*", 3): [("dog", 0.5), ("fox", 0.4)]})
    result = DistractorPipeline(mlm, nli).generate(context, (15, 18), GenerationConfig(dispersion=0))
    assert result.distractor_set.distractors == ["fox"]
    assert result.distractor_set.trace.removed(EliminationStage.ANSWER_ENTAILMENT) == ["dog"]


@pytest.mark.parametrize("span", [(3, 3), (0, 99), (3, 4)])
def test_invalid_spans(golden_pipeline, span):
    with pytest.raises(SpanError):
        golden_pipeline.generate(GOLDEN_CONTEXT, span, GOLDEN_CONFIG)


def test_render_cloze():
    distractor_set = DistractorSet(distractors=["dog", "fox", "rat"], answer="cat")
    item = render_cloze(GOLDEN_CONTEXT, GOLDEN_SPAN, distractor_set, shuffle_seed=3)
    assert item.stem == f"The {BLANK} sat on the mat."
    assert sorted(item.options) == ["cat", "dog", "fox", "rat"]
    assert item.options[item.answer_index] == "cat"
    assert item.answer_key == "ABCD"[item.answer_index]
    assert not item.underfilled
    assert render_cloze(GOLDEN_CONTEXT, GOLDEN_SPAN, distractor_set, shuffle_seed=3) == item


def test_render_cloze_underfilled():
    item = render_cloze(GOLDEN_CONTEXT, GOLDEN_SPAN, DistractorSet(distractors=["dog"], answer="cat"), 0)
    assert len(item.options) == 2
    assert item.underfilled


def test_render_cloze_needs_a_distractor():
    with pytest.raises(ContractViolationError):
        render_cloze(GOLDEN_CONTEXT, GOLDEN_SPAN, DistractorSet(distractors=[], answer="cat"), 0)


@pytest.mark.parametrize("seed", range(20))
def test_render_cloze_keeps_the_top_three_distractors(seed):
    words = [f"word{index}" for index in range(30)]
    item = render_cloze("The cat sat.", (4, 7), DistractorSet(distractors=words, answer="cat"), seed)
    assert sorted(item.options) == ["cat", "word0", "word1", "word2"]
    assert item.answer_key == "ABCD"[item.answer_index]
    assert not item.underfilled
