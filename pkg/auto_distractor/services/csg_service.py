"""
Candidate set generation: mask the answer, decode the masks with pseudo-beam
search and rank the results.

The first position in decode order branches into k * m_s hypotheses; every
later position is filled greedily with the top-1 prediction, conditioned on
the tokens already committed to that hypothesis.
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from auto_distractor.common.errors import ContractViolationError, SpanError
from auto_distractor.common.text_utils import normalize_text
from auto_distractor.models.generation_models import (
    AveragingType,
    Candidate,
    CandidateSet,
    DecodingStrategy,
    GenerationConfig,
    MaskedContext,
)
from auto_distractor.services.backend_service import MaskedLMBackend, SequenceLengthError

TokenSpan = Tuple[int, int]


def resolve_mask_count(config: GenerationConfig, answer_token_count: int) -> int:
    if answer_token_count < 1:
        raise ContractViolationError("the answer must span at least one token")
    return answer_token_count if config.n_mask == 0 else config.n_mask


def mask_count_interval(n_mask: int, dispersion: int) -> Tuple[int, int]:
    if n_mask < 1:
        raise ContractViolationError(f"n_mask must be positive, got {n_mask}")
    return max(n_mask - dispersion, 1), n_mask + dispersion


def sample_mask_counts(interval: Tuple[int, int], rng: np.random.Generator) -> List[int]:
    """Draw up to three distinct mask counts from the closed interval."""
    low, high = interval
    if low > high:
        raise ContractViolationError(f"empty interval [{low}, {high}]")
    values = np.arange(low, high + 1)
    drawn = rng.choice(values, size=min(3, len(values)), replace=False)
    return [int(value) for value in drawn]


def build_masked_context(context_tokens: Sequence[str], answer_span: TokenSpan, mask_count: int,
                         mask_token: str, answer_text: Optional[str] = None) -> MaskedContext:
    start, end = answer_span
    if not 0 <= start < end <= len(context_tokens):
        raise SpanError(f"token span {answer_span} is invalid for {len(context_tokens)} tokens")
    if mask_count < 1:
        raise ContractViolationError(f"mask_count must be positive, got {mask_count}")
    tokens = list(context_tokens[:start]) + [mask_token] * mask_count + list(context_tokens[end:])
    return MaskedContext(
        tokens=tokens,
        mask_positions=list(range(start, start + mask_count)),
        answer_text=answer_text if answer_text is not None else " ".join(context_tokens[start:end]),
        original_tokens=list(context_tokens),
        mask_token=mask_token,
    )


def fit_to_length(masked_context: MaskedContext, max_length: int) -> MaskedContext:
    """Crop to a window of at most max_length tokens centered on the mask run."""
    total = len(masked_context.tokens)
    if total <= max_length:
        return masked_context
    run = masked_context.mask_count
    if run > max_length:
        raise SequenceLengthError(f"{run} mask tokens do not fit in {max_length} tokens")
    start = masked_context.mask_positions[0]
    room = max_length - run
    left, right = room // 2, room - room // 2
    left_available, right_available = start, total - (start + run)
    if left_available < left:
        left, right = left_available, right + (left - left_available)
    if right_available < right:
        left, right = left + (right - right_available), right_available
    low = start - left
    logger.debug(f"Windowing {total} tokens to [{low}, {start + run + right}) around the masks")
    return MaskedContext(
        tokens=masked_context.tokens[low:start + run + right],
        mask_positions=[position - low for position in masked_context.mask_positions],
        answer_text=masked_context.answer_text,
        original_tokens=masked_context.original_tokens,
        mask_token=masked_context.mask_token,
    )


def decode_order(strategy: DecodingStrategy, mask_count: int) -> List[int]:
    """Order in which the mask run is filled, as offsets into the run."""
    if mask_count < 1:
        raise ContractViolationError(f"mask_count must be positive, got {mask_count}")
    if strategy == DecodingStrategy.L2R:
        return list(range(mask_count))
    if strategy == DecodingStrategy.R2L:
        return list(range(mask_count - 1, -1, -1))
    # cocktail shaker: leftmost, rightmost, then inward
    order: List[int] = []
    left, right = 0, mask_count - 1
    while left <= right:
        order.append(left)
        left += 1
        if left <= right:
            order.append(right)
            right -= 1
    return order


def score_candidate(step_probabilities: Sequence[float]) -> float:
    if not step_probabilities:
        raise ContractViolationError("a candidate needs at least one step probability")
    return math.prod(step_probabilities)


def rank_score(step_probabilities: Sequence[float], avg: AveragingType) -> float:
    """Length-normalized score used to compare candidates of different token counts."""
    if not step_probabilities:
        raise ContractViolationError("a candidate needs at least one step probability")
    count = len(step_probabilities)
    if avg == AveragingType.GEOMETRIC:
        return min(1.0, math.prod(step_probabilities) ** (1.0 / count))
    if any(probability == 0.0 for probability in step_probabilities):
        logger.warning("Zero step probability under harmonic averaging; ranking the candidate at 0")
        return 0.0
    return min(1.0, count / sum(1.0 / probability for probability in step_probabilities))


def generate_candidates(backend: MaskedLMBackend, masked_context: MaskedContext, order: Sequence[int],
                        branch_width: int, avg: AveragingType = AveragingType.GEOMETRIC) -> List[Candidate]:
    """Pseudo-beam search over one masked context.

    Issues 1 + (r - 1) * branch_width fill_mask calls for r masks when the
    backend returns branch_width predictions at the first step.
    """
    if sorted(order) != list(range(masked_context.mask_count)):
        raise ContractViolationError(f"decode order {list(order)} is not a permutation of the mask run")
    if branch_width < 1:
        raise ContractViolationError(f"branch_width must be positive, got {branch_width}")
    positions = [masked_context.mask_positions[offset] for offset in order]

    first_step = backend.fill_mask(list(masked_context.tokens), positions[0], branch_width)
    if not first_step:
        logger.warning(f"No predictions for the first mask of a {masked_context.mask_count}-mask context")
        return []

    candidates: List[Candidate] = []
    for prediction in first_step:
        hypothesis = list(masked_context.tokens)
        hypothesis[positions[0]] = prediction.token
        probabilities = [prediction.probability]
        for position in positions[1:]:
            step = backend.fill_mask(hypothesis, position, 1)
            if not step:
                logger.warning(f"No prediction at position {position}; dropping hypothesis '{prediction.token}'")
                break
            hypothesis[position] = step[0].token
            probabilities.append(step[0].probability)
        else:
            token_strings = [hypothesis[position] for position in masked_context.mask_positions]
            candidates.append(Candidate(
                token_strings=token_strings,
                text=backend.detokenize(token_strings).strip(),
                step_probabilities=probabilities,
                score_T=score_candidate(probabilities),
                rank_score=rank_score(probabilities, avg),
                source_mask_count=masked_context.mask_count,
            ))
    logger.debug(f"Decoded {len(candidates)} candidates from a {masked_context.mask_count}-mask context")
    return candidates


def rank_candidates(candidates: Sequence[Candidate], avg: AveragingType) -> List[Candidate]:
    """Sort by rank score and collapse duplicate texts, keeping the best-ranked copy."""
    rescored = [
        candidate.model_copy(update={"rank_score": rank_score(candidate.step_probabilities, avg)})
        for candidate in candidates
    ]
    rescored.sort(key=lambda candidate: (-candidate.rank_score, candidate.source_mask_count, candidate.text))
    seen = set()
    ranked: List[Candidate] = []
    for candidate in rescored:
        key = normalize_text(candidate.text)
        if key in seen:
            continue
        seen.add(key)
        ranked.append(candidate)
    return ranked


def align_answer_tokens(backend: MaskedLMBackend, context: str, char_span: Tuple[int, int]) -> Tuple[List[str], TokenSpan]:
    """Tokenize the context and locate the answer span in token space.

    Uses tokenizer offsets when they line up with the span; otherwise the
    answer is isolated by whitespace and the three pieces are tokenized apart.
    """
    start, end = char_span
    if not 0 <= start < end <= len(context) or not context[start:end].strip():
        raise SpanError(f"character span {char_span} is empty or outside a context of length {len(context)}")

    offsets = backend.tokenize_with_offsets(context)
    if offsets:
        covered = [index for index, (_, token_start, token_end) in enumerate(offsets)
                   if token_start < end and token_end > start]
        if covered and offsets[covered[0]][1] == start and offsets[covered[-1]][2] == end:
            return [token for token, _, _ in offsets], (covered[0], covered[-1] + 1)
        logger.debug(f"Answer span {char_span} splits a token; re-tokenizing with the answer isolated")

    left, answer, right = context[:start].rstrip(), context[start:end].strip(), context[end:].strip()
    left_tokens = backend.tokenize(left) if left else []
    answer_tokens = backend.tokenize(f" {answer}" if left else answer)
    right_tokens = backend.tokenize(f" {right}") if right else []
    return left_tokens + answer_tokens + right_tokens, (len(left_tokens), len(left_tokens) + len(answer_tokens))


class CandidateSetGenerator:
    """
    Runs the whole generation stage for one context: sample mask counts,
    decode every masked variant and rank the pooled candidates.
    """
    def __init__(self, backend: MaskedLMBackend):
        self.backend = backend

    def generate(self, context_tokens: Sequence[str], answer_span: TokenSpan, answer_text: str,
                 config: GenerationConfig) -> CandidateSet:
        start, end = answer_span
        n_mask = resolve_mask_count(config, end - start)
        interval = mask_count_interval(n_mask, config.dispersion)
        mask_counts = sample_mask_counts(interval, np.random.default_rng(config.seed))
        branch_width = config.branch_width(n_mask)
        logger.info(f"Generating candidates with mask counts {mask_counts} from interval {interval}, "
                    f"branch width {branch_width}, strategy {config.strategy.value}")

        warnings: List[str] = []
        pool: List[Candidate] = []
        for mask_count in mask_counts:
            masked = build_masked_context(context_tokens, answer_span, mask_count, self.backend.mask_token, answer_text)
            masked = fit_to_length(masked, self.backend.info.max_sequence_length)
            generated = generate_candidates(
                self.backend, masked, decode_order(config.strategy, mask_count), branch_width, config.avg
            )
            if not generated:
                warnings.append(f"no candidates for mask count {mask_count}")
            pool.extend(generated)

        answer_key = normalize_text(answer_text)
        ranked = [
            candidate for candidate in rank_candidates(pool, config.avg)
            if candidate.text and normalize_text(candidate.text) != answer_key
        ]
        logger.info(f"Candidate set holds {len(ranked)} candidates from a pool of {len(pool)}")
        return CandidateSet(candidates=ranked, mask_counts=mask_counts, warnings=warnings)
