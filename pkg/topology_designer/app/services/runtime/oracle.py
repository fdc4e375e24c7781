"""Success oracle over transcripts and its adapter to the curriculum interface."""
import re
from typing import Literal, Optional

from topology_designer.app.core.errors import ConfigurationError
from topology_designer.app.core.state import CollabGraph, TaskQuery
from topology_designer.app.services.curriculum import TaskSpec

from .backends import AgentBackend, AgentCall
from .protocol import Transcript, execute

OracleMode = Literal["answer", "structural", "judge"]
JUDGE_NODE = -1


def normalize_answer(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().casefold()


def _answer_matches(output: str, expected: str) -> bool:
    target = normalize_answer(expected)
    lines = [line for line in output.splitlines() if line.strip()]
    candidates = {normalize_answer(output)}
    if lines:
        candidates.add(normalize_answer(lines[-1]))
    return target in candidates


def success_oracle(
    query: TaskQuery,
    transcript: Transcript,
    task: TaskSpec,
    mode: OracleMode = "answer",
    judge: Optional[AgentBackend] = None,
) -> int:
    """1 iff the run succeeded; a failing judge raises instead of voting 0."""
    if mode == "structural":
        return int(task.structurally_satisfied(transcript.graph))
    output = transcript.final or ""
    if mode == "judge":
        if judge is None:
            raise ConfigurationError("judge mode needs a judge backend")
        system = "Role: judge. Reply YES if the answer solves the task, otherwise NO."
        user = f"Task: {query.text}\n\nExpected: {task.expected_answer or '(unspecified)'}\n\nAnswer: {output}"
        verdict = judge.complete(system, user, AgentCall(JUDGE_NODE, "judge", 1))
        return int(normalize_answer(verdict).startswith("yes"))
    if task.expected_answer is None:
        raise ConfigurationError(f"task {task.id!r} has no expected answer to match")
    return int(_answer_matches(output, task.expected_answer))


class RuntimeOracle:
    """S(Q, G) by executing G and judging the transcript."""

    mode = "runtime-backed"

    def __init__(
        self,
        backend: AgentBackend,
        rounds: int = 3,
        strategy: str = "summarizer",
        oracle_mode: OracleMode = "answer",
        judge: Optional[AgentBackend] = None,
    ):
        self.backend = backend
        self.rounds = rounds
        self.strategy = strategy
        self.oracle_mode = oracle_mode
        self.judge = judge

    def __call__(self, task: TaskSpec, graph: CollabGraph) -> bool:
        if graph.num_nodes < 1:
            return False
        query = task.task_query
        transcript = execute(graph, query, self.rounds, self.backend, self.strategy)
        return bool(success_oracle(query, transcript, task, self.oracle_mode, self.judge))
