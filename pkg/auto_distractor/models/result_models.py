from typing import Any, Dict, List

from pydantic import BaseModel, Field

from auto_distractor.models.generation_models import Candidate, GenerationConfig
from auto_distractor.models.selection_models import DistractorSet


class GenerationResult(BaseModel):
    distractor_set: DistractorSet
    all_candidates: List[Candidate]
    config_echo: GenerationConfig
    mask_counts: List[int] = Field(default_factory=list)
    # per-stage durations in milliseconds, left out of the JSON form
    timing: Dict[str, float] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "answer": self.distractor_set.answer,
            "distractors": self.distractor_set.distractors,
            "underfilled": self.distractor_set.underfilled,
            "candidates": [
                {
                    "text": candidate.text,
                    "rank_score": candidate.rank_score,
                    "score_T": candidate.score_T,
                    "probs": candidate.step_probabilities,
                    "mask_count": candidate.source_mask_count,
                }
                for candidate in self.all_candidates
            ],
            "trace": [entry.model_dump(mode="json") for entry in self.distractor_set.trace.entries],
            "unscanned": self.distractor_set.unscanned,
            "mask_counts": self.mask_counts,
            "warnings": self.warnings,
            "config": self.config_echo.model_dump(mode="json"),
        }


class ClozeItem(BaseModel):
    stem: str
    options: List[str]
    answer_index: int
    answer_key: str
    # fewer than three distractors were available
    underfilled: bool = False
