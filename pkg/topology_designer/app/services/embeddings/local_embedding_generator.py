"""
Local embedding provider using sentence-transformers.
No API calls required - works offline
"""
import numpy as np

from topology_designer.app.core.errors import ConfigurationError, DimensionError
from topology_designer.app.core.logger import logger

from .embedding_generator import _normalize, _require_text

_models = {}


def get_local_model(model_name: str):
    """Get or initialize the local embedding model"""
    if model_name not in _models:
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:
            logger.error("sentence-transformers not installed. Install the 'local-embeddings' extra")
            raise ConfigurationError("sentence-transformers is not installed") from e
        logger.info(f"Loading local embedding model: {model_name}")
        _models[model_name] = SentenceTransformer(model_name)
        logger.info(f"Model embedding dimension: {_models[model_name].get_sentence_embedding_dimension()}")
    return _models[model_name]


class SentenceTransformerProvider:
    mode = "sentence-transformer"

    def __init__(self, model_name: str, d_raw: int):
        self.model_name = model_name
        self.d_raw = d_raw
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        _require_text(text)
        if text not in self._cache:
            vector = np.asarray(get_local_model(self.model_name).encode(text), dtype=np.float32)
            if vector.shape != (self.d_raw,):
                raise DimensionError(
                    f"{self.model_name} produces {vector.size}-dim embeddings, configured d_raw is {self.d_raw}"
                )
            self._cache[text] = _normalize(vector)
        return self._cache[text]
