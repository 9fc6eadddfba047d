import os
from dataclasses import dataclass, field
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

DEFAULT_NLI_MODEL = "geckos/bart-fined-tuned-on-entailment-classification"
MOCK_SCHEME = "mock:"


@dataclass
class BackendParameters:
    device: Optional[str] = field(default_factory=lambda: os.getenv("AUTO_DISTRACTOR_DEVICE"))
    cache_dir: Optional[str] = field(default_factory=lambda: os.getenv("AUTO_DISTRACTOR_CACHE_DIR"))
    # Checkpoints such as BART report an effectively unbounded model_max_length.
    max_length_cap: int = 512
