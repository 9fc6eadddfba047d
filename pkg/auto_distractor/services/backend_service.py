"""
Inference contracts for masked-LM fill and NLI classification.

Every algorithm in the package talks to models only through these two
classes. Concrete backends implement the underscored hooks; the public
methods validate preconditions and normalize outputs so that all backends
behave identically from the caller's point of view.
"""
from abc import ABC, abstractmethod
from typing import Iterable, List, Optional, Tuple

from auto_distractor.common.errors import ContractViolationError
from auto_distractor.models.backend_models import BackendInfo, NliVerdict, TokenPrediction

TokenOffsets = List[Tuple[str, int, int]]


def sort_predictions(predictions: Iterable[TokenPrediction]) -> List[TokenPrediction]:
    """Probability descending, ties broken by lexicographic token order."""
    return sorted(predictions, key=lambda prediction: (-prediction.probability, prediction.token))


class MaskedLMBackend(ABC):
    """Masked language model able to score the vocabulary at one mask position."""

    @property
    @abstractmethod
    def info(self) -> BackendInfo:
        pass

    @property
    def mask_token(self) -> str:
        return self.info.mask_token

    @abstractmethod
    def tokenize(self, text: str) -> List[str]:
        pass

    @abstractmethod
    def detokenize(self, tokens: List[str]) -> str:
        pass

    def tokenize_with_offsets(self, text: str) -> Optional[TokenOffsets]:
        """Tokens with character offsets, or None when the tokenizer cannot provide them."""
        return None

    def fill_mask(self, tokens: List[str], mask_position: int, top_k: int) -> List[TokenPrediction]:
        if top_k < 1:
            raise ContractViolationError(f"top_k must be positive, got {top_k}")
        if not 0 <= mask_position < len(tokens) or tokens[mask_position] != self.mask_token:
            raise ContractViolationError(f"position {mask_position} does not hold the mask token {self.mask_token!r}")
        if len(tokens) > self.info.max_sequence_length:
            raise SequenceLengthError(
                f"sequence of {len(tokens)} tokens exceeds the maximum of {self.info.max_sequence_length}"
            )
        return sort_predictions(self._predict(tokens, mask_position, top_k))[:top_k]

    @abstractmethod
    def _predict(self, tokens: List[str], mask_position: int, top_k: int) -> List[TokenPrediction]:
        """Return at least the top_k predictions for mask_position, in any order."""
        pass

    def __str__(self) -> str:
        return f"{self.__class__.__name__}({self.info.name})"


class NliBackend(ABC):
    """Sentence-pair classifier for entailment, neutral and contradiction."""

    @property
    @abstractmethod
    def info(self) -> BackendInfo:
        pass

    def classify_nli(self, premise: str, hypothesis: str) -> NliVerdict:
        if not premise.strip() or not hypothesis.strip():
            raise ContractViolationError("premise and hypothesis must be nonempty")
        return self._classify(premise, hypothesis)

    @abstractmethod
    def _classify(self, premise: str, hypothesis: str) -> NliVerdict:
        pass

    def __str__(self) -> str:
        return f"{self.__class__.__name__}({self.info.name})"


class BackendServiceError(Exception):
    """Raised when a model backend fails to load or run"""
    pass


class SequenceLengthError(ContractViolationError):
    """Raised when a token sequence is longer than the backend accepts"""
    pass
