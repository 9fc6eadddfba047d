from typing import Optional

from loguru import logger

from auto_distractor.config import MOCK_SCHEME, BackendParameters
from auto_distractor.services.backend_service import MaskedLMBackend, NliBackend
from auto_distractor.services.mock_backend_service import load_mock_config


class BackendFactory:
    """Resolves backend identifiers: "mock:<path>" loads JSON mock tables, anything else is a checkpoint id."""

    @staticmethod
    def create_mlm(model_id: str, params: Optional[BackendParameters] = None) -> MaskedLMBackend:
        if model_id.startswith(MOCK_SCHEME):
            mlm, _ = load_mock_config(model_id[len(MOCK_SCHEME):])
            return mlm
        from auto_distractor.services.hf_backend_service import TransformersMaskedLMBackend

        logger.info(f"Creating masked LM backend for checkpoint: {model_id}")
        return TransformersMaskedLMBackend(model_id, params)

    @staticmethod
    def create_nli(model_id: str, params: Optional[BackendParameters] = None) -> NliBackend:
        if model_id.startswith(MOCK_SCHEME):
            _, nli = load_mock_config(model_id[len(MOCK_SCHEME):])
            return nli
        from auto_distractor.services.hf_backend_service import TransformersNliBackend

        logger.info(f"Creating NLI backend for checkpoint: {model_id}")
        return TransformersNliBackend(model_id, params)
