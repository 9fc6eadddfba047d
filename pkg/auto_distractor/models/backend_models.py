from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, PositiveInt


class NliLabel(str, Enum):
    ENTAILMENT = "entailment"
    NEUTRAL = "neutral"
    CONTRADICTION = "contradiction"


class TokenPrediction(BaseModel):
    """One vocabulary unit proposed for a mask position."""
    model_config = ConfigDict(frozen=True)

    token: str
    probability: float = Field(ge=0.0, le=1.0)


class NliVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: NliLabel

    @property
    def is_entailment(self) -> bool:
        return self.label == NliLabel.ENTAILMENT


class BackendInfo(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    max_sequence_length: PositiveInt
    mask_token: str = Field(min_length=1)
