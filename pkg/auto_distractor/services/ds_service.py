"""
Distractor selection by two-way entailment elimination.

Stage one drops candidates whose sentence entails the answer's sentence in
both directions. Stage two scans the survivors in rank order and keeps a
candidate only when it does not two-way entail any candidate already kept.
"""
from typing import List, Optional, Sequence, Tuple

from loguru import logger

from auto_distractor.common.text_utils import normalize_text
from auto_distractor.models.backend_models import NliLabel
from auto_distractor.models.selection_models import DistractorSet, EliminationStage, EliminationTrace
from auto_distractor.services.backend_service import NliBackend

Verdicts = Tuple[NliLabel, NliLabel]


class CandidateInstantiator:
    """Substitutes a candidate into the answer's position of a comparison sentence."""

    def __init__(self, comparison_text: str, answer_span: Tuple[int, int]):
        self.comparison_text = comparison_text
        self.start, self.end = answer_span

    @property
    def answer(self) -> str:
        return self.comparison_text[self.start:self.end]

    def __call__(self, candidate: str) -> str:
        return f"{self.comparison_text[:self.start]}{candidate}{self.comparison_text[self.end:]}"


def _entailment_verdicts(nli_backend: NliBackend, text_a: str, text_b: str) -> Optional[Verdicts]:
    """Both verdicts when a entails b and b entails a, else None."""
    forward = nli_backend.classify_nli(text_a, text_b)
    if not forward.is_entailment:
        return None
    backward = nli_backend.classify_nli(text_b, text_a)
    if not backward.is_entailment:
        return None
    return forward.label, backward.label


def two_way_entails(nli_backend: NliBackend, text_a: str, text_b: str) -> bool:
    return _entailment_verdicts(nli_backend, text_a, text_b) is not None


def filter_vs_answer(nli_backend: NliBackend, comparison_text: str, candidates: Sequence[str],
                     candidate_instantiator: CandidateInstantiator,
                     trace: Optional[EliminationTrace] = None) -> List[str]:
    answer = candidate_instantiator.answer
    answer_key = normalize_text(answer)
    kept: List[str] = []
    for candidate in candidates:
        if normalize_text(candidate) == answer_key:
            verdicts: Optional[Verdicts] = (NliLabel.ENTAILMENT, NliLabel.ENTAILMENT)
        else:
            verdicts = _entailment_verdicts(nli_backend, candidate_instantiator(candidate), comparison_text)
        if verdicts is None:
            kept.append(candidate)
            continue
        logger.debug(f"Removing '{candidate}': two-way entailment with the answer '{answer}'")
        if trace is not None:
            trace.record(candidate, EliminationStage.ANSWER_ENTAILMENT, answer, verdicts)
    return kept


def filter_pairwise(nli_backend: NliBackend, candidates: Sequence[str], k: int,
                    candidate_instantiator: CandidateInstantiator,
                    trace: Optional[EliminationTrace] = None) -> Tuple[List[str], List[str]]:
    """Greedy scan in rank order; returns (kept, unscanned surplus)."""
    kept: List[str] = []
    for index, candidate in enumerate(candidates):
        if len(kept) == k:
            return kept, list(candidates[index:])
        instantiated = candidate_instantiator(candidate)
        for other in kept:
            verdicts = _entailment_verdicts(nli_backend, instantiated, candidate_instantiator(other))
            if verdicts is not None:
                logger.debug(f"Removing '{candidate}': two-way entailment with higher-ranked '{other}'")
                if trace is not None:
                    trace.record(candidate, EliminationStage.PAIRWISE_ENTAILMENT, other, verdicts)
                break
        else:
            kept.append(candidate)
    return kept, []


def select_distractors(nli_backend: NliBackend, context: str, answer: str, candidates: Sequence[str], k: int,
                       answer_span: Optional[Tuple[int, int]] = None) -> DistractorSet:
    """Run both elimination stages over ranked candidate texts.

    context is the comparison frame (normally the sentence holding the
    answer); answer_span locates the answer in it and defaults to the first
    occurrence of answer.
    """
    if answer_span is None:
        start = context.find(answer)
        if start < 0:
            raise ValueError(f"answer '{answer}' does not occur in the comparison context")
        answer_span = (start, start + len(answer))
    trace = EliminationTrace()
    if not candidates:
        logger.warning("No candidates to select distractors from")
        return DistractorSet(distractors=[], answer=answer, trace=trace, underfilled=True)

    instantiator = CandidateInstantiator(context, answer_span)
    survivors = filter_vs_answer(nli_backend, context, candidates, instantiator, trace)
    logger.info(f"Answer entailment kept {len(survivors)} of {len(candidates)} candidates")
    distractors, unscanned = filter_pairwise(nli_backend, survivors, k, instantiator, trace)
    underfilled = len(distractors) < k
    if underfilled:
        logger.warning(f"Only {len(distractors)} of {k} distractors survived selection")
    return DistractorSet(
        distractors=distractors,
        answer=answer,
        trace=trace,
        underfilled=underfilled,
        unscanned=unscanned,
    )
