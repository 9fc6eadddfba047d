import string
import time
from contextlib import contextmanager
from typing import Dict, Tuple

import numpy as np
from loguru import logger

from auto_distractor.common.errors import ContractViolationError, SpanError
from auto_distractor.models.generation_models import GenerationConfig
from auto_distractor.models.result_models import ClozeItem, GenerationResult
from auto_distractor.models.selection_models import DistractorSet
from auto_distractor.services.backend_service import MaskedLMBackend, NliBackend
from auto_distractor.services.csg_service import CandidateSetGenerator, align_answer_tokens
from auto_distractor.services.data_service import extract_sentence
from auto_distractor.services.ds_service import select_distractors

BLANK = "_____"
MIN_DISTRACTORS = 3


@contextmanager
def _timed(timing: Dict[str, float], stage: str):
    started = time.perf_counter()
    try:
        yield
    finally:
        timing[stage] = (time.perf_counter() - started) * 1000.0


class DistractorPipeline:
    """
    Generates distractors for a (context, answer span) pair: candidate set
    generation over the whole context, then selection on the sentence that
    holds the answer.
    """
    def __init__(self, mlm_backend: MaskedLMBackend, nli_backend: NliBackend):
        self.mlm_backend = mlm_backend
        self.nli_backend = nli_backend
        self.generator = CandidateSetGenerator(mlm_backend)

    def generate(self, context: str, answer_span: Tuple[int, int], config: GenerationConfig) -> GenerationResult:
        start, end = answer_span
        if not 0 <= start < end <= len(context) or not context[start:end].strip():
            raise SpanError(f"answer span {answer_span} is empty or outside a context of length {len(context)}")
        answer = context[start:end]
        timing: Dict[str, float] = {}
        try:
            with _timed(timing, "tokenize"):
                tokens, token_span = align_answer_tokens(self.mlm_backend, context, answer_span)
            with _timed(timing, "csg"):
                candidate_set = self.generator.generate(tokens, token_span, answer, config)
            with _timed(timing, "ds"):
                sentence, sentence_span, _ = extract_sentence(context, answer_span)
                distractor_set = select_distractors(
                    self.nli_backend,
                    sentence,
                    answer,
                    [candidate.text for candidate in candidate_set.candidates],
                    config.k,
                    answer_span=sentence_span,
                )
        except Exception as e:
            logger.error(f"Distractor generation failed for answer '{answer}': {e}")
            raise

        warnings = list(candidate_set.warnings)
        if not candidate_set.candidates:
            warnings.append("empty candidate set")
        if distractor_set.underfilled:
            warnings.append(f"only {len(distractor_set.distractors)} of {config.k} distractors selected")
        logger.info(f"Selected {len(distractor_set.distractors)} distractors for '{answer}'")
        return GenerationResult(
            distractor_set=distractor_set,
            all_candidates=candidate_set.candidates,
            config_echo=config,
            mask_counts=candidate_set.mask_counts,
            timing=timing,
            warnings=warnings,
        )


def generate_distractors(context: str, answer_span: Tuple[int, int], config: GenerationConfig,
                         mlm_backend: MaskedLMBackend, nli_backend: NliBackend) -> GenerationResult:
    return DistractorPipeline(mlm_backend, nli_backend).generate(context, answer_span, config)


def render_cloze(context: str, answer_span: Tuple[int, int], distractor_set: DistractorSet,
                 shuffle_seed: int) -> ClozeItem:
    """Blank out the answer and shuffle it among the top three distractors."""
    if not distractor_set.distractors:
        raise ContractViolationError("a cloze item needs at least one distractor")
    start, end = answer_span
    answer = context[start:end]
    options = [answer, *distractor_set.distractors[:MIN_DISTRACTORS]]
    order = np.random.default_rng(shuffle_seed).permutation(len(options))
    shuffled = [options[index] for index in order]
    answer_index = int(np.flatnonzero(order == 0)[0])
    underfilled = len(distractor_set.distractors) < MIN_DISTRACTORS
    if underfilled:
        logger.warning(f"Cloze item for '{answer}' has only {len(options)} options")
    return ClozeItem(
        stem=f"{context[:start]}{BLANK}{context[end:]}",
        options=shuffled,
        answer_index=answer_index,
        answer_key=string.ascii_uppercase[answer_index],
        underfilled=underfilled,
    )
