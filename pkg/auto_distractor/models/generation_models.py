import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, PositiveInt, model_validator


class DecodingStrategy(str, Enum):
    L2R = "l2r"
    R2L = "r2l"
    CTL = "ctl"


class AveragingType(str, Enum):
    GEOMETRIC = "geometric"
    HARMONIC = "harmonic"


class GenerationConfig(BaseModel):
    """Hyperparameters of one generation request.

    Defaults are the best configuration found in the hyperparameter study:
    matching mask count, dispersion 1 and cocktail shaker decoding.
    """
    model_config = ConfigDict(frozen=True)

    n_mask: NonNegativeInt = 0
    dispersion: NonNegativeInt = 1
    k: PositiveInt = 3
    m_s: Optional[PositiveInt] = None
    strategy: DecodingStrategy = DecodingStrategy.CTL
    avg: AveragingType = AveragingType.GEOMETRIC
    seed: int = 0

    def search_multiplier(self, resolved_mask_count: int) -> int:
        if self.m_s is not None:
            return self.m_s
        return 10 if resolved_mask_count == 1 else 7

    def branch_width(self, resolved_mask_count: int) -> int:
        return self.k * self.search_multiplier(resolved_mask_count)


class MaskedContext(BaseModel):
    """A token sequence whose answer span was replaced by a contiguous mask run."""
    model_config = ConfigDict(frozen=True)

    tokens: List[str]
    mask_positions: List[int] = Field(min_length=1)
    answer_text: str
    original_tokens: List[str]
    mask_token: str

    @model_validator(mode="after")
    def check_mask_run(self) -> "MaskedContext":
        start = self.mask_positions[0]
        if self.mask_positions != list(range(start, start + len(self.mask_positions))):
            raise ValueError(f"mask positions must be contiguous and ascending: {self.mask_positions}")
        for position in self.mask_positions:
            if not 0 <= position < len(self.tokens) or self.tokens[position] != self.mask_token:
                raise ValueError(f"position {position} does not hold the mask token")
        return self

    @property
    def mask_count(self) -> int:
        return len(self.mask_positions)


class Candidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    token_strings: List[str]
    text: str
    # in decode order
    step_probabilities: List[float]
    score_T: float
    rank_score: float = Field(ge=0.0, le=1.0)
    source_mask_count: PositiveInt

    @model_validator(mode="after")
    def check_scores(self) -> "Candidate":
        if len(self.step_probabilities) != self.source_mask_count:
            raise ValueError("one step probability is required per generated token")
        if not math.isclose(self.score_T, math.prod(self.step_probabilities), rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("score_T must equal the product of the step probabilities")
        return self


class CandidateSet(BaseModel):
    """Ranked output of the candidate set generator for one request."""
    candidates: List[Candidate]
    # mask counts in the order they were drawn
    mask_counts: List[int]
    warnings: List[str] = Field(default_factory=list)
