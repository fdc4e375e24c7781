from .backends import AgentBackend, AgentCall, MockBackend, RemoteBackend, ScriptedBackend, get_backend, role_tag
from .oracle import RuntimeOracle, normalize_answer, success_oracle
from .protocol import (
    STRATEGIES,
    AgentInstance,
    AggregateResult,
    Invocation,
    Message,
    PromptPair,
    Transcript,
    aggregate,
    build_prompt,
    execute,
    extract_answer,
    prompt_tokens,
    summarizer_prompt,
    token_cost,
    token_proxy,
    topo_order,
    validate_dag,
)
from .transcript_io import read_transcript, transcript_from_json, transcript_to_json, write_transcript

__all__ = [
    "STRATEGIES",
    "AgentBackend",
    "AgentCall",
    "AgentInstance",
    "AggregateResult",
    "Invocation",
    "Message",
    "MockBackend",
    "PromptPair",
    "RemoteBackend",
    "RuntimeOracle",
    "ScriptedBackend",
    "Transcript",
    "aggregate",
    "build_prompt",
    "execute",
    "extract_answer",
    "get_backend",
    "normalize_answer",
    "prompt_tokens",
    "read_transcript",
    "role_tag",
    "success_oracle",
    "summarizer_prompt",
    "token_cost",
    "token_proxy",
    "topo_order",
    "transcript_from_json",
    "transcript_to_json",
    "validate_dag",
]
