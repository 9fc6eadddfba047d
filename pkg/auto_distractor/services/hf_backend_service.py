"""
Adapters running real pretrained checkpoints behind the backend contracts.

Tokens exchanged with callers are raw vocabulary units (e.g. "Ġcat" for
byte-level BPE, "##ing" for WordPiece); `detokenize` turns them back into text.
NLI pairs are encoded with the tokenizer's own sentence-pair template, which is
how the checkpoint sees "<sentence_A><sentence_B>".
"""
from typing import Dict, List, Optional

from loguru import logger

from auto_distractor.common.errors import ContractViolationError
from auto_distractor.common.hf_client import TransformersClient
from auto_distractor.config import BackendParameters
from auto_distractor.models.backend_models import BackendInfo, NliLabel, NliVerdict, TokenPrediction
from auto_distractor.services.backend_service import BackendServiceError, MaskedLMBackend, NliBackend, TokenOffsets

# Label orders used by checkpoints whose config only carries LABEL_n names.
MNLI_LABEL_ORDER = [NliLabel.CONTRADICTION, NliLabel.NEUTRAL, NliLabel.ENTAILMENT]
RTE_LABEL_ORDER = [NliLabel.ENTAILMENT, NliLabel.CONTRADICTION]


class TransformersMaskedLMBackend(MaskedLMBackend):
    def __init__(self, model_id: str, params: Optional[BackendParameters] = None):
        self.client = TransformersClient(model_id, "AutoModelForMaskedLM", params)
        self._info: Optional[BackendInfo] = None

    @property
    def info(self) -> BackendInfo:
        if self._info is None:
            self.client.load_resources()
            self._info = BackendInfo(
                name=self.client.model_id,
                max_sequence_length=self.client.max_sequence_length(),
                mask_token=self.client.tokenizer.mask_token,
            )
        return self._info

    def tokenize(self, text: str) -> List[str]:
        if not text.strip():
            raise ContractViolationError("cannot tokenize empty text")
        self.client.load_resources()
        try:
            return self.client.tokenizer.tokenize(text)
        except Exception as e:
            raise BackendServiceError(f"Tokenizer of {self.client.model_id} failed: {e}") from e

    def detokenize(self, tokens: List[str]) -> str:
        self.client.load_resources()
        return self.client.tokenizer.convert_tokens_to_string(tokens).strip()

    def tokenize_with_offsets(self, text: str) -> Optional[TokenOffsets]:
        self.client.load_resources()
        tokenizer = self.client.tokenizer
        if not tokenizer.is_fast:
            return None
        encoding = tokenizer(text, add_special_tokens=False, return_offsets_mapping=True)
        tokens = tokenizer.convert_ids_to_tokens(encoding["input_ids"])
        return [(token, start, end) for token, (start, end) in zip(tokens, encoding["offset_mapping"])]

    def _predict(self, tokens: List[str], mask_position: int, top_k: int) -> List[TokenPrediction]:
        import torch

        try:
            with self.client.inference() as (model, tokenizer):
                ids = tokenizer.convert_tokens_to_ids(tokens)
                input_ids = tokenizer.build_inputs_with_special_tokens(ids)
                offset = 1 if (tokenizer.cls_token_id is not None or tokenizer.bos_token_id is not None) else 0
                inputs = torch.tensor([input_ids], device=self.client.device)
                logits = model(input_ids=inputs).logits[0, mask_position + offset]
                logits[tokenizer.all_special_ids] = float("-inf")
                probabilities = torch.softmax(logits, dim=-1)
                top = torch.topk(probabilities, k=min(top_k, probabilities.shape[-1]))
                predicted = tokenizer.convert_ids_to_tokens(top.indices.tolist())
        except Exception as e:
            raise BackendServiceError(f"Masked LM {self.client.model_id} failed: {e}") from e
        return [
            TokenPrediction(token=token, probability=min(1.0, float(probability)))
            for token, probability in zip(predicted, top.values.tolist())
        ]


class TransformersNliBackend(NliBackend):
    def __init__(self, model_id: str, params: Optional[BackendParameters] = None,
                 label_map: Optional[Dict[int, NliLabel]] = None):
        self.client = TransformersClient(model_id, "AutoModelForSequenceClassification", params)
        self._label_map = label_map
        self._info: Optional[BackendInfo] = None

    @property
    def info(self) -> BackendInfo:
        if self._info is None:
            self.client.load_resources()
            self._info = BackendInfo(
                name=self.client.model_id,
                max_sequence_length=self.client.max_sequence_length(),
                mask_token=self.client.tokenizer.mask_token or "<mask>",
            )
        return self._info

    @property
    def label_map(self) -> Dict[int, NliLabel]:
        if self._label_map is None:
            self.client.load_resources()
            self._label_map = map_nli_labels(self.client.model.config.id2label)
            logger.debug(f"NLI label map for {self.client.model_id}: {self._label_map}")
        return self._label_map

    def _classify(self, premise: str, hypothesis: str) -> NliVerdict:
        label_map = self.label_map
        try:
            with self.client.inference() as (model, tokenizer):
                inputs = tokenizer(premise, hypothesis, return_tensors="pt", truncation=True).to(self.client.device)
                predicted = int(model(**inputs).logits[0].argmax().item())
        except Exception as e:
            raise BackendServiceError(f"NLI model {self.client.model_id} failed: {e}") from e
        return NliVerdict(label=label_map[predicted])


def map_nli_labels(id2label: Dict[int, str]) -> Dict[int, NliLabel]:
    """Map a checkpoint's id2label onto the three NLI labels.

    Two-way checkpoints have no neutral class; their negative label maps to
    contradiction.
    """
    mapped: Dict[int, NliLabel] = {}
    for index, name in id2label.items():
        lowered = name.lower()
        if "not" in lowered or "non" in lowered or "contra" in lowered:
            mapped[int(index)] = NliLabel.CONTRADICTION
        elif "entail" in lowered:
            mapped[int(index)] = NliLabel.ENTAILMENT
        elif "neutral" in lowered:
            mapped[int(index)] = NliLabel.NEUTRAL
    if len(mapped) == len(id2label):
        return mapped
    if len(id2label) == 3:
        return dict(enumerate(MNLI_LABEL_ORDER))
    if len(id2label) == 2:
        return dict(enumerate(RTE_LABEL_ORDER))
    raise BackendServiceError(f"Cannot map NLI labels {id2label} onto entailment/neutral/contradiction")
