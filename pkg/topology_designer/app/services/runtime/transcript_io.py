"""Transcript file format."""
import json
from typing import Any

from topology_designer.app.core.errors import InputError
from topology_designer.app.services.generator import graph_from_json, graph_to_json
from topology_designer.app.services.utils import atomic_write_text, read_json

from .protocol import SUMMARIZER_NODE, Invocation, Message, Transcript, token_proxy


def transcript_to_json(transcript: Transcript) -> dict[str, Any]:
    tokens = {(inv.node, inv.round): inv.prompt_tokens for inv in transcript.invocations}
    return {
        "graph": graph_to_json(transcript.graph),
        "K": transcript.K,
        "rounds": [
            [{"node": m.sender, "content": m.content, "prompt_tokens": tokens.get((m.sender, m.round), 0)} for m in messages]
            for messages in transcript.rounds
        ],
        "final": transcript.final,
        "strategy": transcript.strategy,
        "aggregation_prompt_tokens": tokens.get((SUMMARIZER_NODE, transcript.K + 1), 0),
        "total_prompt_tokens": transcript.total_prompt_tokens,
    }


def transcript_from_json(payload: dict[str, Any]) -> Transcript:
    try:
        transcript = Transcript(
            graph=graph_from_json(payload["graph"]), strategy=payload["strategy"], final=payload.get("final")
        )
        for k, entries in enumerate(payload["rounds"], start=1):
            messages = []
            for entry in entries:
                messages.append(
                    Message(sender=entry["node"], round=k, content=entry["content"], token_count=token_proxy(entry["content"]))
                )
                transcript.record(Invocation(node=entry["node"], round=k, prompt_tokens=entry["prompt_tokens"]))
            transcript.rounds.append(messages)
        extra = payload.get("aggregation_prompt_tokens", 0)
        if extra:
            transcript.record(Invocation(node=SUMMARIZER_NODE, round=transcript.K + 1, prompt_tokens=extra))
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"malformed transcript: {e}") from e
    if transcript.total_prompt_tokens != payload.get("total_prompt_tokens", transcript.total_prompt_tokens):
        raise InputError("transcript total_prompt_tokens does not match its rounds")
    return transcript


def write_transcript(path: str, transcript: Transcript) -> None:
    atomic_write_text(path, json.dumps(transcript_to_json(transcript), indent=2, ensure_ascii=False) + "\n")


def read_transcript(path: str) -> Transcript:
    return transcript_from_json(read_json(path))
