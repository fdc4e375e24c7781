"""Agent backends: deterministic mock, scripted fixtures and a remote chat-completion API."""
import hashlib
import os
import re
import time
from typing import Callable, Mapping, NamedTuple, Optional, Protocol, Sequence, Union

import httpx

from topology_designer.app.core.errors import BackendError, ConfigurationError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import BackendConfig

ROLE_TAG = re.compile(r"\[[^\]]+\]@round-\d+")


class AgentCall(NamedTuple):
    node: int
    role: str
    round: int


class AgentBackend(Protocol):
    mode: str

    def complete(self, system: str, user: str, call: AgentCall) -> str: ...


def role_tag(role: str, round_index: int) -> str:
    return f"[{role}]@round-{round_index}"


class MockBackend:
    """``[role]@round-k: digest`` where digest hashes the prompt and the run seed.

    With ``echo`` the reply also lists every role tag found in the user part,
    so information flow can be traced through a transcript.
    """

    mode = "mock"

    def __init__(self, seed: int = 0, echo: bool = False, digest_size: int = 4):
        self.seed = seed
        self.echo = echo
        self.digest_size = digest_size

    def digest(self, system: str, user: str) -> str:
        payload = f"{self.seed}\x00{system}\x00{user}".encode("utf-8")
        return hashlib.blake2b(payload, digest_size=self.digest_size).hexdigest()

    def complete(self, system: str, user: str, call: AgentCall) -> str:
        reply = f"{role_tag(call.role, call.round)}: {self.digest(system, user)}"
        if self.echo:
            heard = list(dict.fromkeys(ROLE_TAG.findall(user)))
            if heard:
                reply += " heard " + " ".join(heard)
        return reply


class ScriptedBackend:
    """Fixed replies per node id (one string, or one per round); node 0 is the summarizer."""

    mode = "scripted"

    def __init__(self, answers: Mapping[int, Union[str, Sequence[str]]], default: str = ""):
        self.answers = dict(answers)
        self.default = default
        self.calls: list[AgentCall] = []

    def complete(self, system: str, user: str, call: AgentCall) -> str:
        self.calls.append(call)
        answer = self.answers.get(call.node, self.default)
        if isinstance(answer, str):
            return answer
        return answer[min(call.round, len(answer)) - 1]


class RemoteBackend:
    """OpenAI-style ``/chat/completions`` client with exponential-backoff retries."""

    mode = "remote"

    def __init__(
        self,
        config: BackendConfig,
        transport: Optional[httpx.BaseTransport] = None,
        base_delay: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise ConfigurationError(f"environment variable {config.api_key_env} holding the API key is not set")
        self.config = config
        self.base_delay = base_delay
        self.sleep = sleep
        self.client = httpx.Client(
            timeout=config.timeout,
            transport=transport,
            headers={"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"},
        )

    @property
    def url(self) -> str:
        return f"{self.config.base_url.rstrip('/')}/chat/completions"

    def payload(self, system: str, user: str) -> dict:
        return {
            "model": self.config.model,
            "messages": [{"role": "system", "content": system}, {"role": "user", "content": user}],
            "temperature": self.config.temperature,
        }

    def complete(self, system: str, user: str, call: AgentCall) -> str:
        attempts = self.config.max_retries + 1
        for attempt in range(attempts):
            try:
                response = self.client.post(self.url, json=self.payload(system, user))
                response.raise_for_status()
                return response.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as e:
                logger.warning(f"Backend call for node {call.node} round {call.round} failed (attempt {attempt + 1}/{attempts}): {e}")
                if attempt == attempts - 1:
                    break
                delay = self.base_delay * (2**attempt)
                logger.warning(f"Retrying in {delay} seconds...")
                self.sleep(delay)
        raise BackendError(f"backend failed for node {call.node} round {call.round} after {attempts} attempts")

    def close(self) -> None:
        self.client.close()


def get_backend(config: BackendConfig, seed: int = 0) -> AgentBackend:
    if config.mode == "remote":
        return RemoteBackend(config)
    if config.mode == "scripted":
        return ScriptedBackend(config.answers)
    return MockBackend(seed=seed, echo=config.echo)
