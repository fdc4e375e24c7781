"""K-round message passing over a collaboration DAG."""
import asyncio
from collections import Counter
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

from pydantic import BaseModel, Field, model_validator

from topology_designer.app.core.errors import BackendError, ConfigurationError, CycleError, ExecutionError, InputError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.state import CollabGraph, TaskQuery
from topology_designer.app.services.curriculum import canonical_order, find_cycle

from .backends import AgentBackend, AgentCall

SUMMARIZER_NODE = 0
STRATEGIES = ("majority-vote", "terminal-agent", "last-in-order", "summarizer")

TokenCounter = Callable[[str], int]


def token_proxy(text: str) -> int:
    """Whitespace-delimited token count."""
    return len(text.split())


class PromptPair(NamedTuple):
    system: str
    user: str


class Message(BaseModel):
    sender: int
    round: int = Field(ge=1)
    content: str
    token_count: int = Field(ge=0)


class AgentInstance(BaseModel):
    node_id: int
    role: str
    description: str = ""
    memory: list[Message] = []

    def remember(self, message: Message) -> None:
        self.memory.append(message)


class Invocation(BaseModel):
    node: int
    round: int
    prompt_tokens: int = Field(ge=0)


class Transcript(BaseModel):
    graph: CollabGraph
    rounds: list[list[Message]] = []
    invocations: list[Invocation] = []
    final: Optional[str] = None
    strategy: str = "summarizer"
    total_prompt_tokens: int = 0

    @property
    def K(self) -> int:
        return len(self.rounds)

    @model_validator(mode="after")
    def _totals_match(self):
        if self.invocations and self.total_prompt_tokens != sum(inv.prompt_tokens for inv in self.invocations):
            raise ValueError("total prompt tokens must equal the per-invocation sum")
        return self

    def record(self, invocation: Invocation) -> None:
        self.invocations.append(invocation)
        self.total_prompt_tokens += invocation.prompt_tokens

    def messages(self) -> list[Message]:
        return [message for round_messages in self.rounds for message in round_messages]

    def message(self, node: int, round_index: int) -> Message:
        for message in self.rounds[round_index - 1]:
            if message.sender == node:
                return message
        raise KeyError((node, round_index))


def validate_dag(graph: CollabGraph) -> None:
    """Raise InputError for out-of-range endpoints, CycleError with one offending cycle."""
    if not graph.endpoints_in_range():
        raise InputError(f"edge endpoints must lie in 1..{graph.num_nodes}")
    cycle = find_cycle(graph)
    if cycle is not None:
        raise CycleError(cycle)


def topo_order(graph: CollabGraph) -> list[int]:
    return canonical_order(graph)


def serialize_memory(memory: Sequence[Message]) -> str:
    return "\n".join(f"[round {m.round}] {m.content}" for m in memory)


def build_prompt(agent: AgentInstance, query: TaskQuery, predecessor_msgs: Sequence[Message]) -> PromptPair:
    system_lines = [f"Role: {agent.role}."]
    if agent.description:
        system_lines.append(agent.description)
    if agent.memory:
        system_lines.append("Memory:\n" + serialize_memory(agent.memory))
    user_lines = [query.text]
    for message in sorted(predecessor_msgs, key=lambda m: m.sender):
        user_lines.append(f"From agent {message.sender}: {message.content}")
    return PromptPair("\n".join(system_lines), "\n\n".join(user_lines))


def prompt_tokens(prompt: PromptPair, counter: TokenCounter = token_proxy) -> int:
    return counter(prompt.system) + counter(prompt.user)


def extract_answer(content: str) -> str:
    """Last non-empty line, case-folded and trimmed."""
    lines = [line.strip() for line in content.splitlines() if line.strip()]
    return lines[-1].casefold() if lines else ""


class AggregateResult(NamedTuple):
    output: str
    prompt_tokens: int = 0


def aggregate(
    final_msgs: Sequence[Message],
    strategy: str,
    order: Optional[Sequence[int]] = None,
    terminal_agent: Optional[int] = None,
    summarize: Optional[Callable[[], tuple[str, int]]] = None,
) -> AggregateResult:
    if not final_msgs:
        raise InputError("no final-round messages to aggregate")
    by_sender = {m.sender: m for m in final_msgs}
    if strategy == "majority-vote":
        answers = {m.sender: extract_answer(m.content) for m in final_msgs}
        counts = Counter(answers.values())
        best = max(counts.values())
        winner = min(sender for sender, answer in answers.items() if counts[answer] == best)
        return AggregateResult(by_sender[winner].content)
    if strategy == "terminal-agent":
        if terminal_agent is None or terminal_agent not in by_sender:
            raise ConfigurationError(f"terminal agent {terminal_agent} is not part of the graph")
        return AggregateResult(by_sender[terminal_agent].content)
    if strategy == "last-in-order":
        last = (list(order) if order else sorted(by_sender))[-1]
        return AggregateResult(by_sender[last].content)
    if strategy == "summarizer":
        if summarize is None:
            raise ConfigurationError("summarizer strategy needs a backend")
        return AggregateResult(*summarize())
    raise ConfigurationError(f"unknown aggregation strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")


def summarizer_prompt(query: TaskQuery, rounds: Sequence[Sequence[Message]]) -> PromptPair:
    history = [f"Round {m.round}, agent {m.sender}: {m.content}" for messages in rounds for m in messages]
    user = "\n\n".join([f"Task: {query.text}", *history])
    return PromptPair("Role: summarizer. Combine the agents' final answers into one answer.", user)


def _call(backend: AgentBackend, prompt: PromptPair, call: AgentCall) -> str:
    try:
        return backend.complete(prompt.system, prompt.user, call)
    except BackendError:
        raise
    except Exception as e:
        raise BackendError(f"backend raised {type(e).__name__} for node {call.node} round {call.round}: {e}") from e


async def _gather_round(
    backend: AgentBackend, jobs: list[tuple[PromptPair, AgentCall]], max_in_flight: int
) -> list[str]:
    semaphore = asyncio.Semaphore(max_in_flight)

    async def run(prompt: PromptPair, call: AgentCall) -> str:
        async with semaphore:
            return await asyncio.to_thread(_call, backend, prompt, call)

    return await asyncio.gather(*(run(prompt, call) for prompt, call in jobs))


def execute(
    graph: CollabGraph,
    query: TaskQuery,
    rounds: int,
    backend: AgentBackend,
    strategy: str = "summarizer",
    terminal_agent: Optional[int] = None,
    descriptions: Optional[Mapping[str, str]] = None,
    concurrent: bool = False,
    max_in_flight: int = 4,
    counter: TokenCounter = token_proxy,
) -> Transcript:
    """Run K rounds; agent i in round k sees its in-neighbors' round k-1 messages."""
    if rounds < 1:
        raise InputError(f"rounds must be >= 1, got {rounds}")
    if graph.num_nodes < 1:
        raise InputError("cannot execute an empty graph")
    if strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown aggregation strategy {strategy!r}")
    validate_dag(graph)
    order = topo_order(graph)
    descriptions = descriptions or {}
    agents = {
        node: AgentInstance(node_id=node, role=graph.role(node), description=descriptions.get(graph.role(node), ""))
        for node in order
    }
    transcript = Transcript(graph=graph, strategy=strategy)
    previous: dict[int, Message] = {}

    for k in range(1, rounds + 1):
        jobs = []
        for node in order:
            inbox = [previous[j] for j in graph.in_neighbors(node)] if k > 1 else []
            jobs.append((build_prompt(agents[node], query, inbox), AgentCall(node, agents[node].role, k)))
        try:
            if concurrent:
                replies = asyncio.run(_gather_round(backend, jobs, max_in_flight))
            else:
                replies = [_call(backend, prompt, call) for prompt, call in jobs]
        except BackendError as e:
            logger.error(f"Execution aborted in round {k}: {e}")
            raise ExecutionError(str(e), partial_transcript=transcript) from e

        current = {}
        for (prompt, call), reply in zip(jobs, replies):
            message = Message(sender=call.node, round=k, content=reply, token_count=counter(reply))
            current[call.node] = message
            agents[call.node].remember(message)
            transcript.record(Invocation(node=call.node, round=k, prompt_tokens=prompt_tokens(prompt, counter)))
        transcript.rounds.append([current[node] for node in sorted(current)])
        previous = current

    def summarize() -> tuple[str, int]:
        prompt = summarizer_prompt(query, transcript.rounds)
        try:
            output = _call(backend, prompt, AgentCall(SUMMARIZER_NODE, "summarizer", rounds + 1))
        except BackendError as e:
            raise ExecutionError(str(e), partial_transcript=transcript) from e
        return output, prompt_tokens(prompt, counter)

    result = aggregate(transcript.rounds[-1], strategy, order, terminal_agent, summarize)
    if strategy == "summarizer":
        transcript.record(Invocation(node=SUMMARIZER_NODE, round=rounds + 1, prompt_tokens=result.prompt_tokens))
    transcript.final = result.output
    logger.info(f"Executed {graph.num_nodes} agents x {rounds} rounds, {transcript.total_prompt_tokens} prompt tokens")
    return transcript


def token_cost(transcript: Transcript) -> int:
    return sum(invocation.prompt_tokens for invocation in transcript.invocations)
