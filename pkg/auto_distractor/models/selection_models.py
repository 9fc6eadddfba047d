from enum import Enum
from typing import List, Tuple

from pydantic import BaseModel, Field

from auto_distractor.models.backend_models import NliLabel


class EliminationStage(str, Enum):
    ANSWER_ENTAILMENT = "answer-entailment"
    PAIRWISE_ENTAILMENT = "pairwise-entailment"


class EliminationEntry(BaseModel):
    candidate: str
    stage: EliminationStage
    counterpart: str
    # (candidate -> counterpart, counterpart -> candidate)
    verdicts: Tuple[NliLabel, NliLabel]


class EliminationTrace(BaseModel):
    entries: List[EliminationEntry] = Field(default_factory=list)

    def record(self, candidate: str, stage: EliminationStage, counterpart: str,
               verdicts: Tuple[NliLabel, NliLabel]) -> None:
        self.entries.append(EliminationEntry(
            candidate=candidate,
            stage=stage,
            counterpart=counterpart,
            verdicts=verdicts,
        ))

    def removed(self, stage: EliminationStage) -> List[str]:
        return [entry.candidate for entry in self.entries if entry.stage == stage]

    def __len__(self) -> int:
        return len(self.entries)


class DistractorSet(BaseModel):
    distractors: List[str]
    answer: str
    trace: EliminationTrace = Field(default_factory=EliminationTrace)
    underfilled: bool = False
    # ranked candidates never examined because k distractors were already kept
    unscanned: List[str] = Field(default_factory=list)
