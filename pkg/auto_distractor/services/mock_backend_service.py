"""
Table-driven backends for offline runs and tests.

The MLM table maps (context fingerprint, mask position) to a prediction list,
where the fingerprint is the context tokens joined by single spaces. The
fingerprint "*" matches any context at its position and is consulted only
after an exact miss; an optional vocabulary provides a uniform fallback.
"""
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from auto_distractor.common.errors import ContractViolationError
from auto_distractor.models.backend_models import BackendInfo, NliLabel, NliVerdict, TokenPrediction
from auto_distractor.services.backend_service import BackendServiceError, MaskedLMBackend, NliBackend

DEFAULT_MASK_TOKEN = "[MASK]"
WILDCARD = "*"

PredictionTable = Mapping[Tuple[str, int], Sequence[Tuple[str, float]]]


def fingerprint(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


class MockMaskedLMBackend(MaskedLMBackend):
    """Whitespace tokenizer plus a lookup table of predictions."""

    def __init__(self, predictions: Optional[PredictionTable] = None, mask_token: str = DEFAULT_MASK_TOKEN,
                 vocabulary: Optional[Sequence[str]] = None, max_sequence_length: int = 512,
                 name: str = "mock-mlm", record_calls: bool = False):
        self._info = BackendInfo(name=name, max_sequence_length=max_sequence_length, mask_token=mask_token)
        self._table: Dict[Tuple[str, int], List[TokenPrediction]] = {
            key: [TokenPrediction(token=token, probability=probability) for token, probability in top]
            for key, top in (predictions or {}).items()
        }
        self._vocabulary = sorted(set(vocabulary or []))
        self.record_calls = record_calls
        self.calls: List[Tuple[str, int, int]] = []

    @property
    def info(self) -> BackendInfo:
        return self._info

    def tokenize(self, text: str) -> List[str]:
        if not text.strip():
            raise ContractViolationError("cannot tokenize empty text")
        return text.split()

    def detokenize(self, tokens: List[str]) -> str:
        return " ".join(tokens)

    def _predict(self, tokens: List[str], mask_position: int, top_k: int) -> List[TokenPrediction]:
        key = fingerprint(tokens)
        if self.record_calls:
            self.calls.append((key, mask_position, top_k))
        for lookup in ((key, mask_position), (WILDCARD, mask_position)):
            if lookup in self._table:
                return list(self._table[lookup])
        if self._vocabulary:
            probability = 1.0 / len(self._vocabulary)
            return [TokenPrediction(token=token, probability=probability) for token in self._vocabulary]
        logger.debug(f"No mock predictions for position {mask_position} of '{key}'")
        return []


class MockNliBackend(NliBackend):
    def __init__(self, verdicts: Optional[Mapping[Tuple[str, str], NliLabel]] = None,
                 default_label: NliLabel = NliLabel.NEUTRAL, name: str = "mock-nli",
                 record_calls: bool = False):
        self._info = BackendInfo(name=name, max_sequence_length=512, mask_token=DEFAULT_MASK_TOKEN)
        self._table = {pair: NliLabel(label) for pair, label in (verdicts or {}).items()}
        self.default_label = NliLabel(default_label)
        self.record_calls = record_calls
        self.calls: List[Tuple[str, str]] = []

    @property
    def info(self) -> BackendInfo:
        return self._info

    def _classify(self, premise: str, hypothesis: str) -> NliVerdict:
        if self.record_calls:
            self.calls.append((premise, hypothesis))
        return NliVerdict(label=self._table.get((premise, hypothesis), self.default_label))


def mock_backends_from_config(config: Dict[str, Any],
                              record_calls: bool = False) -> Tuple[MockMaskedLMBackend, MockNliBackend]:
    """Build both mock backends from the JSON configuration document.

    record_calls keeps a log of every backend query on `calls`; it is off for CLI runs.
    """
    try:
        predictions = {
            (entry["fingerprint"], int(entry["position"])): [(str(token), float(p)) for token, p in entry["top"]]
            for entry in config.get("predictions", [])
        }
        verdicts = {(premise, hypothesis): NliLabel(label) for premise, hypothesis, label in config.get("nli", [])}
        mlm = MockMaskedLMBackend(
            predictions=predictions,
            mask_token=config.get("mask_token", DEFAULT_MASK_TOKEN),
            vocabulary=config.get("vocabulary"),
            max_sequence_length=int(config.get("max_sequence_length", 512)),
            record_calls=record_calls,
        )
        nli = MockNliBackend(verdicts=verdicts, default_label=NliLabel(config.get("nli_default", "neutral")),
                            record_calls=record_calls)
    except (KeyError, TypeError, ValueError) as e:
        raise BackendServiceError(f"Invalid mock backend configuration: {e}") from e
    return mlm, nli


def load_mock_config(path: str) -> Tuple[MockMaskedLMBackend, MockNliBackend]:
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise BackendServiceError(f"Could not read mock backend configuration {path}: {e}") from e
    logger.info(f"Loaded mock backend tables from {path}")
    return mock_backends_from_config(config)
