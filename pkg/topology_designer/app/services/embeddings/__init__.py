from .embedding_generator import (
    EmbeddingProvider,
    FileEmbeddingProvider,
    HashedEmbeddingProvider,
    base_text_embedding,
    get_embedding_provider,
    load_embedding_file,
    normalize_embedding,
    query_embedding,
)
from .task_encoder import TASK_PARAM_NAMES, encode_task, encode_task_on_tape
from .role_registry import (
    END_TOKEN,
    RoleEntry,
    RoleRegistry,
    RoleSpec,
    end_token_embedding,
    extend_registry,
    load_role_pool,
    register_roles,
    role_pool_to_json,
)

__all__ = [
    "END_TOKEN",
    "TASK_PARAM_NAMES",
    "EmbeddingProvider",
    "FileEmbeddingProvider",
    "HashedEmbeddingProvider",
    "RoleEntry",
    "RoleRegistry",
    "RoleSpec",
    "base_text_embedding",
    "encode_task",
    "encode_task_on_tape",
    "end_token_embedding",
    "extend_registry",
    "get_embedding_provider",
    "load_embedding_file",
    "load_role_pool",
    "normalize_embedding",
    "query_embedding",
    "register_roles",
    "role_pool_to_json",
]
