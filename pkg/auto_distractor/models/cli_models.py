from enum import Enum
from typing import Optional

from pydantic import BaseModel, NonNegativeInt, PositiveInt

from auto_distractor.config import DEFAULT_NLI_MODEL
from auto_distractor.models.dataset_models import InputMode, PrefillMode
from auto_distractor.models.generation_models import AveragingType, DecodingStrategy, GenerationConfig


class Command(str, Enum):
    GENERATE = "generate"
    EVALUATE = "evaluate"
    TRACE = "trace"


class Preset(str, Enum):
    CLOTH = "cloth"


# Hyperparameters of the CLOTH evaluation: single-word answers and distractors.
CLOTH_PRESET = {
    "n_mask": 1,
    "dispersion": 0,
    "k": 10,
    "m_s": 7,
    "strategy": DecodingStrategy.L2R,
    "avg": AveragingType.GEOMETRIC,
}


class CliConfig(BaseModel):
    command: Command
    input_path: str
    output_path: Optional[str] = None
    model_id: Optional[str] = None
    nli_model_id: str = DEFAULT_NLI_MODEL
    strategy: DecodingStrategy = DecodingStrategy.CTL
    avg: AveragingType = AveragingType.GEOMETRIC
    n_mask: NonNegativeInt = 0
    dispersion: NonNegativeInt = 1
    k: PositiveInt = 3
    m_s: Optional[PositiveInt] = None
    seed: int = 0
    input_mode: InputMode = InputMode.PASSAGE
    prefill_mode: PrefillMode = PrefillMode.MODEL
    preset: Optional[Preset] = None
    limit: Optional[PositiveInt] = None
    jobs: PositiveInt = 1
    verbose: bool = False

    def generation_config(self) -> GenerationConfig:
        values = {
            "n_mask": self.n_mask,
            "dispersion": self.dispersion,
            "k": self.k,
            "m_s": self.m_s,
            "strategy": self.strategy,
            "avg": self.avg,
        }
        if self.preset == Preset.CLOTH:
            values.update(CLOTH_PRESET)
        return GenerationConfig(seed=self.seed, **values)
