import threading
from contextlib import contextmanager
from typing import Any, Optional

from loguru import logger

from auto_distractor.config import BackendParameters


class TransformersClient:
    """Lazily loads one checkpoint and its tokenizer, and serializes inference on it.

    torch and transformers are imported on first use so the rest of the package
    works without the optional `hf` extra installed.
    """

    def __init__(self, model_id: str, model_class: str, params: Optional[BackendParameters] = None):
        self.model_id = model_id
        self.model_class = model_class
        self.params = params or BackendParameters()
        self.model: Any = None
        self.tokenizer: Any = None
        self.device: Any = None
        self._lock = threading.Lock()

    def load_resources(self) -> None:
        if self.model is not None:
            return
        with self._lock:
            if self.model is not None:
                return
            import torch
            import transformers

            self.device = torch.device(
                self.params.device or ("cuda" if torch.cuda.is_available() else "cpu")
            )
            logger.info(f"Loading {self.model_class} checkpoint {self.model_id} on {self.device}")
            self.tokenizer = transformers.AutoTokenizer.from_pretrained(self.model_id, cache_dir=self.params.cache_dir)
            model = getattr(transformers, self.model_class).from_pretrained(self.model_id, cache_dir=self.params.cache_dir)
            model.to(self.device)
            model.eval()
            self.model = model

    @contextmanager
    def inference(self):
        """Hold the client lock with gradients disabled for the duration of one forward pass."""
        self.load_resources()
        import torch

        with self._lock, torch.no_grad():
            yield self.model, self.tokenizer

    def max_sequence_length(self) -> int:
        self.load_resources()
        limit = min(int(self.tokenizer.model_max_length), self.params.max_length_cap)
        return limit - self.tokenizer.num_special_tokens_to_add(pair=False)
