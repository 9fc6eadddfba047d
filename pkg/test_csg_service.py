import itertools
import math
import random
import re

import numpy as np
import pytest

from auto_distractor.common.errors import ContractViolationError, SpanError
from auto_distractor.models.generation_models import AveragingType, Candidate, DecodingStrategy, GenerationConfig
from auto_distractor.services.backend_service import SequenceLengthError
from auto_distractor.services.csg_service import (
    CandidateSetGenerator,
    align_answer_tokens,
    build_masked_context,
    decode_order,
    fit_to_length,
    generate_candidates,
    mask_count_interval,
    rank_candidates,
    rank_score,
    resolve_mask_count,
    sample_mask_counts,
    score_candidate,
)
from auto_distractor.services.mock_backend_service import MockMaskedLMBackend
from conftest import MASK


def make_candidate(text, probabilities):
    return Candidate(
        token_strings=text.split() if len(text.split()) == len(probabilities) else [text] * len(probabilities),
        text=text,
        step_probabilities=probabilities,
        score_T=math.prod(probabilities),
        rank_score=rank_score(probabilities, AveragingType.GEOMETRIC),
        source_mask_count=len(probabilities),
    )


def masked(mask_count):
    return build_masked_context(["x", "answer", "y"], (1, 2), mask_count, MASK)


class OffsetBackend(MockMaskedLMBackend):
    """Whitespace mock that also reports character offsets."""
    def tokenize_with_offsets(self, text):
        return [(m.group(), m.start(), m.end()) for m in re.finditer(r"\S+", text)]


@pytest.mark.parametrize("strategy, mask_count, expected", [
    (DecodingStrategy.L2R, 5, [0, 1, 2, 3, 4]),
    (DecodingStrategy.R2L, 5, [4, 3, 2, 1, 0]),
    (DecodingStrategy.CTL, 5, [0, 4, 1, 3, 2]),
    (DecodingStrategy.CTL, 4, [0, 3, 1, 2]),
    (DecodingStrategy.CTL, 1, [0]),
    (DecodingStrategy.R2L, 1, [0]),
])
def test_decode_order(strategy, mask_count, expected):
    assert decode_order(strategy, mask_count) == expected


@pytest.mark.parametrize("mask_count", range(1, 12))
def test_decode_orders_are_permutations(mask_count):
    ctl = decode_order(DecodingStrategy.CTL, mask_count)
    for strategy in DecodingStrategy:
        assert sorted(decode_order(strategy, mask_count)) == list(range(mask_count))
    # interleaves the two directional orders
    assert ctl[0::2] == decode_order(DecodingStrategy.L2R, mask_count)[:len(ctl[0::2])]
    assert ctl[1::2] == decode_order(DecodingStrategy.R2L, mask_count)[:len(ctl[1::2])]


def test_decode_order_rejects_zero_masks():
    with pytest.raises(ContractViolationError):
        decode_order(DecodingStrategy.CTL, 0)


def test_resolve_mask_count():
    assert resolve_mask_count(GenerationConfig(n_mask=0), 3) == 3
    assert resolve_mask_count(GenerationConfig(n_mask=2), 3) == 2
    with pytest.raises(ContractViolationError):
        resolve_mask_count(GenerationConfig(), 0)


@pytest.mark.parametrize("n_mask, dispersion, expected", [
    (4, 0, (4, 4)),
    (3, 1, (2, 4)),
    (1, 2, (1, 3)),
    (3, 10, (1, 13)),
])
def test_mask_count_interval(n_mask, dispersion, expected):
    assert mask_count_interval(n_mask, dispersion) == expected


def test_sample_mask_counts_small_intervals():
    assert sample_mask_counts((4, 4), np.random.default_rng(0)) == [4]
    assert sorted(sample_mask_counts((2, 4), np.random.default_rng(0))) == [2, 3, 4]
    assert sorted(sample_mask_counts((1, 2), np.random.default_rng(5))) == [1, 2]


@pytest.mark.parametrize("seed", range(10))
def test_sample_mask_counts_is_seeded(seed):
    drawn = sample_mask_counts((1, 5), np.random.default_rng(seed))
    assert drawn == sample_mask_counts((1, 5), np.random.default_rng(seed))
    assert len(drawn) == len(set(drawn)) == 3
    assert all(1 <= count <= 5 for count in drawn)


def test_sample_mask_counts_snapshot():
    assert sample_mask_counts((1, 5), np.random.default_rng(0)) == [4, 5, 3]


def test_branch_width_defaults():
    assert GenerationConfig(k=3).branch_width(1) == 30
    assert GenerationConfig(k=3).branch_width(2) == 21
    assert GenerationConfig(k=2, m_s=4).branch_width(1) == 8


def test_build_masked_context():
    context = build_masked_context(["a", "b", "c", "d"], (1, 3), 3, MASK)
    assert context.tokens == ["a", MASK, MASK, MASK, "d"]
    assert context.mask_positions == [1, 2, 3]
    assert context.answer_text == "b c"
    assert context.original_tokens == ["a", "b", "c", "d"]


@pytest.mark.parametrize("span", [(2, 2), (3, 1), (0, 5), (-1, 1)])
def test_build_masked_context_rejects_bad_spans(span):
    with pytest.raises(SpanError):
        build_masked_context(["a", "b", "c", "d"], span, 1, MASK)


def test_fit_to_length_centers_the_window():
    tokens = [f"t{i}" for i in range(10)]
    context = build_masked_context(tokens, (7, 8), 1, MASK)
    fitted = fit_to_length(context, 5)
    assert fitted.tokens == ["t5", "t6", MASK, "t8", "t9"]
    assert fitted.mask_positions == [2]


def test_fit_to_length_shifts_at_the_edge():
    tokens = [f"t{i}" for i in range(10)]
    fitted = fit_to_length(build_masked_context(tokens, (9, 10), 1, MASK), 5)
    assert fitted.tokens == ["t5", "t6", "t7", "t8", MASK]
    assert fitted.mask_positions == [4]
    fitted = fit_to_length(build_masked_context(tokens, (0, 1), 2, MASK), 4)
    assert fitted.tokens == [MASK, MASK, "t1", "t2"]


def test_fit_to_length_keeps_short_contexts():
    context = masked(2)
    assert fit_to_length(context, 512) is context


def test_fit_to_length_rejects_long_mask_runs():
    with pytest.raises(SequenceLengthError):
        fit_to_length(masked(6), 5)


def test_score_candidate():
    assert score_candidate([0.5, 0.4]) == pytest.approx(0.2)
    assert score_candidate([0.7]) == 0.7
    with pytest.raises(ContractViolationError):
        score_candidate([])


@pytest.mark.parametrize("probabilities, geometric, harmonic", [
    ([0.5, 0.5], 0.5, 0.5),
    ([1.0, 0.25], 0.5, 0.4),
    ([0.8], 0.8, 0.8),
])
def test_rank_score_examples(probabilities, geometric, harmonic):
    assert rank_score(probabilities, AveragingType.GEOMETRIC) == pytest.approx(geometric)
    assert rank_score(probabilities, AveragingType.HARMONIC) == pytest.approx(harmonic)


def test_harmonic_rank_with_zero_probability():
    assert rank_score([0.5, 0.0], AveragingType.HARMONIC) == 0.0
    assert rank_score([0.5, 0.0], AveragingType.GEOMETRIC) == 0.0


def test_rank_score_on_random_vectors():
    rng = random.Random(7)
    for _ in range(1000):
        probabilities = [rng.uniform(0.001, 1.0) for _ in range(rng.randint(1, 6))]
        count = len(probabilities)
        geometric = rank_score(probabilities, AveragingType.GEOMETRIC)
        harmonic = rank_score(probabilities, AveragingType.HARMONIC)
        assert math.isclose(geometric, score_candidate(probabilities) ** (1 / count), abs_tol=1e-9)
        assert 0.0 <= harmonic <= geometric + 1e-12 <= 1.0 + 1e-12
        constant = [probabilities[0]] * count
        assert math.isclose(rank_score(constant, AveragingType.GEOMETRIC),
                            rank_score(constant, AveragingType.HARMONIC), abs_tol=1e-12)


def test_rank_candidates_orders_and_deduplicates():
    ranked = rank_candidates([
        make_candidate("rat", [0.2]),
        make_candidate("big dog", [0.9, 0.9]),
        make_candidate("cat", [0.5]),
        make_candidate("Cat", [0.6]),
        make_candidate("fox", [0.8]),
    ], AveragingType.GEOMETRIC)
    assert [c.text for c in ranked] == ["big dog", "fox", "Cat", "rat"]
    assert [c.rank_score for c in ranked] == sorted((c.rank_score for c in ranked), reverse=True)


def test_rank_candidates_tie_break():
    ranked = rank_candidates([
        make_candidate("b a", [0.25, 1.0]),
        make_candidate("zebra", [0.5]),
        make_candidate("apple", [0.5]),
    ], AveragingType.GEOMETRIC)
    assert [c.text for c in ranked] == ["apple", "zebra", "b a"]


def test_rank_is_monotone_in_step_probabilities():
    rng = random.Random(3)
    for _ in range(100):
        pool = [make_candidate(f"w{i}", [rng.uniform(0.01, 1.0) for _ in range(rng.randint(1, 3))])
                for i in range(6)]
        target = rng.randrange(len(pool))
        before = [c.text for c in rank_candidates(pool, AveragingType.GEOMETRIC)].index(f"w{target}")
        factor = rng.uniform(0.1, 0.99)
        lowered = list(pool)
        lowered[target] = make_candidate(f"w{target}", [p * factor for p in pool[target].step_probabilities])
        after = [c.text for c in rank_candidates(lowered, AveragingType.GEOMETRIC)].index(f"w{target}")
        assert after >= before


def test_single_mask_decoding():
    backend = MockMaskedLMBackend(predictions={(f"the {MASK}", 1): [("cat", 0.6), ("dog", 0.3), ("rat", 0.1)]})
    context = build_masked_context(["the", "mouse"], (1, 2), 1, MASK)
    candidates = generate_candidates(backend, context, [0], 2)
    assert [(c.text, c.step_probabilities) for c in candidates] == [("cat", [0.6]), ("dog", [0.3])]


@pytest.mark.parametrize("strategy", [DecodingStrategy.L2R, DecodingStrategy.R2L])
def test_later_positions_are_conditioned_on_committed_tokens(strategy):
    first, second = (1, 2) if strategy == DecodingStrategy.L2R else (2, 1)
    base = f"x {MASK} {MASK} y"

    def filled(position, token):
        tokens = base.split()
        tokens[position] = token
        return " ".join(tokens)

    backend = MockMaskedLMBackend(predictions={
        (base, first): [("big", 0.7), ("small", 0.2)],
        (filled(first, "big"), second): [("dog", 0.9)],
        (filled(first, "small"), second): [("cat", 0.8)],
    }, record_calls=True)
    candidates = generate_candidates(backend, masked(2), decode_order(strategy, 2), 2)
    assert [c.step_probabilities for c in candidates] == [[0.7, 0.9], [0.2, 0.8]]
    assert (filled(first, "big"), second, 1) in backend.calls


def test_call_count_matches_pseudo_beam():
    backend = MockMaskedLMBackend(vocabulary=["a", "b", "c", "d", "e"], record_calls=True)
    candidates = generate_candidates(backend, masked(3), [0, 2, 1], 4)
    assert len(candidates) == 4
    assert len(backend.calls) == 1 + 2 * 4
    assert [call[2] for call in backend.calls] == [4] + [1] * 8


def test_no_predictions_yields_no_candidates():
    assert generate_candidates(MockMaskedLMBackend(), masked(2), [0, 1], 3) == []


def test_generate_candidates_rejects_bad_orders():
    with pytest.raises(ContractViolationError):
        generate_candidates(MockMaskedLMBackend(vocabulary=["a"]), masked(2), [0, 0], 3)


def _random_table(rng, vocabulary, mask_count):
    table = {}
    for fill in itertools.product([MASK, *vocabulary], repeat=mask_count):
        if MASK not in fill:
            continue
        tokens = ["x", *fill, "y"]
        for offset, token in enumerate(fill):
            if token == MASK:
                chosen = rng.sample(vocabulary, rng.randint(1, len(vocabulary)))
                table[(" ".join(tokens), offset + 1)] = [(t, round(rng.uniform(0.01, 1.0), 6)) for t in chosen]
    return table


def _brute_force(table, mask_count, order, branch_width):
    def best(entries):
        return sorted(entries, key=lambda entry: (-entry[1], entry[0]))

    base = ["x", *[MASK] * mask_count, "y"]
    positions = [offset + 1 for offset in order]
    results = set()
    for token, probability in best(table[(" ".join(base), positions[0])])[:branch_width]:
        filled = list(base)
        filled[positions[0]] = token
        probabilities = [probability]
        for position in positions[1:]:
            next_token, next_probability = best(table[(" ".join(filled), position)])[0]
            filled[position] = next_token
            probabilities.append(next_probability)
        results.add((" ".join(filled[1:-1]), tuple(probabilities)))
    return results


def test_pseudo_beam_against_brute_force():
    rng = random.Random(1234)
    for _ in range(200):
        vocabulary = [f"v{i}" for i in range(rng.randint(1, 5))]
        mask_count = rng.randint(1, 3)
        branch_width = rng.randint(1, 6)
        order = decode_order(rng.choice(list(DecodingStrategy)), mask_count)
        table = _random_table(rng, vocabulary, mask_count)

        candidates = generate_candidates(MockMaskedLMBackend(predictions=table), masked(mask_count), order, branch_width)
        expected = _brute_force(table, mask_count, order, branch_width)

        assert len(candidates) == len(expected)
        assert {(c.text, tuple(c.step_probabilities)) for c in candidates} == expected
        for candidate in candidates:
            assert math.isclose(candidate.score_T, math.prod(candidate.step_probabilities), abs_tol=1e-9)


def test_align_answer_tokens_whitespace():
    backend = MockMaskedLMBackend()
    assert align_answer_tokens(backend, "The cat sat.", (4, 7)) == (["The", "cat", "sat."], (1, 2))
    assert align_answer_tokens(backend, "unlock the door", (2, 6)) == (["un", "lock", "the", "door"], (1, 2))
    assert align_answer_tokens(backend, "cat", (0, 3)) == (["cat"], (0, 1))


def test_align_answer_tokens_uses_offsets_when_they_line_up():
    backend = OffsetBackend()
    assert align_answer_tokens(backend, "a big dog ran", (2, 9)) == (["a", "big", "dog", "ran"], (1, 3))
    assert align_answer_tokens(backend, "unlock the door", (2, 6)) == (["un", "lock", "the", "door"], (1, 2))


@pytest.mark.parametrize("span", [(3, 3), (0, 99), (3, 4)])
def test_align_answer_tokens_rejects_bad_spans(span):
    with pytest.raises(SpanError):
        align_answer_tokens(MockMaskedLMBackend(), "The cat sat.", span)


def test_candidate_set_drops_the_answer():
    backend = MockMaskedLMBackend(predictions={(f"the {MASK} sat", 1): [("cat", 0.6), ("Dog", 0.3), ("dog", 0.1)]})
    config = GenerationConfig(n_mask=0, dispersion=0, k=1, m_s=3)
    candidate_set = CandidateSetGenerator(backend).generate(["the", "dog", "sat"], (1, 2), "dog", config)
    assert [c.text for c in candidate_set.candidates] == ["cat"]
    assert candidate_set.mask_counts == [1]


def test_candidate_set_pools_every_mask_count():
    backend = MockMaskedLMBackend(vocabulary=["ant", "bee", "owl"])
    config = GenerationConfig(n_mask=2, dispersion=1, k=1, m_s=2)
    candidate_set = CandidateSetGenerator(backend).generate(["x", "big", "dog", "y"], (1, 3), "big dog", config)
    assert sorted(candidate_set.mask_counts) == [1, 2, 3]
    assert {c.source_mask_count for c in candidate_set.candidates} == {1, 2, 3}
    ranks = [c.rank_score for c in candidate_set.candidates]
    assert ranks == sorted(ranks, reverse=True)


def test_candidate_set_records_empty_mask_counts():
    candidate_set = CandidateSetGenerator(MockMaskedLMBackend()).generate(
        ["x", "cat", "y"], (1, 2), "cat", GenerationConfig(dispersion=0)
    )
    assert candidate_set.candidates == []
    assert candidate_set.warnings == ["no candidates for mask count 1"]


def test_candidate_set_is_deterministic():
    config = GenerationConfig(n_mask=2, dispersion=2, k=2, seed=11)
    runs = [
        CandidateSetGenerator(MockMaskedLMBackend(vocabulary=["ant", "bee", "owl", "yak"])).generate(
            ["x", "big", "dog", "y"], (1, 3), "big dog", config
        ).model_dump()
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def test_averaging_only_changes_the_order():
    def texts(avg):
        backend = MockMaskedLMBackend(predictions={
            (f"x {MASK} y", 1): [("one", 0.5), ("two", 0.3)],
            (f"x {MASK} {MASK} y", 1): [("a", 0.9), ("b", 0.6)],
            (f"x a {MASK} y", 2): [("c", 0.3)],
            (f"x b {MASK} y", 2): [("d", 0.6)],
        })
        config = GenerationConfig(n_mask=1, dispersion=1, k=1, m_s=2, strategy=DecodingStrategy.L2R, avg=avg)
        return [c.text for c in CandidateSetGenerator(backend).generate(["x", "cat", "y"], (1, 2), "cat", config).candidates]

    geometric, harmonic = texts(AveragingType.GEOMETRIC), texts(AveragingType.HARMONIC)
    assert set(geometric) == set(harmonic) == {"one", "two", "a c", "b d"}
