"""Task suite and the rule-based success oracle."""
from collections import Counter
from typing import Literal, Optional, Protocol, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator

from topology_designer.app.core.errors import InputError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.state import CollabGraph, TaskQuery
from topology_designer.app.services.utils import read_json

from .ordering import has_path


class PathBetweenRoles(BaseModel):
    kind: Literal["path-between-roles"] = "path-between-roles"
    src: str
    dst: str

    def holds(self, graph: CollabGraph) -> bool:
        sources = [k for k, role in enumerate(graph.nodes, start=1) if role == self.src]
        targets = [k for k, role in enumerate(graph.nodes, start=1) if role == self.dst]
        return any(a != b and has_path(graph, a, b) for a in sources for b in targets)


class HubRolePresent(BaseModel):
    """Some node with this role sends to every other node."""

    kind: Literal["hub-role-present"] = "hub-role-present"
    role: str

    def holds(self, graph: CollabGraph) -> bool:
        n = graph.num_nodes
        return n >= 2 and any(
            role == self.role and len(graph.out_neighbors(k)) == n - 1 for k, role in enumerate(graph.nodes, start=1)
        )


class NodeCount(BaseModel):
    kind: Literal["node-count"] = "node-count"
    min: Optional[int] = Field(None, ge=0)
    max: Optional[int] = Field(None, ge=0)

    def holds(self, graph: CollabGraph) -> bool:
        n = graph.num_nodes
        return (self.min is None or n >= self.min) and (self.max is None or n <= self.max)


class Always(BaseModel):
    kind: Literal["always"] = "always"

    def holds(self, graph: CollabGraph) -> bool:
        return True


class Never(BaseModel):
    kind: Literal["never"] = "never"

    def holds(self, graph: CollabGraph) -> bool:
        return False


Predicate = Union[PathBetweenRoles, HubRolePresent, NodeCount, Always, Never]


class TaskSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="ignore")

    id: str
    query: str
    required_roles: tuple[str, ...] = ()
    predicate: Predicate = Field(default_factory=Always, discriminator="kind")
    expected_answer: Optional[str] = None

    @model_validator(mode="after")
    def _has_query(self):
        if not self.query.strip():
            raise ValueError(f"task {self.id!r} has an empty query")
        return self

    @property
    def task_query(self) -> TaskQuery:
        return TaskQuery(text=self.query)

    def structurally_satisfied(self, graph: CollabGraph) -> bool:
        missing = Counter(self.required_roles) - Counter(graph.nodes)
        return not missing and self.predicate.holds(graph)


class SuccessOracle(Protocol):
    def __call__(self, task: TaskSpec, graph: CollabGraph) -> bool: ...


class RuleBasedOracle:
    """S(Q, G): required role multiset present and the structural predicate holds."""

    mode = "rule-based-synthetic"

    def __call__(self, task: TaskSpec, graph: CollabGraph) -> bool:
        if graph.num_nodes < 1:
            return False
        return task.structurally_satisfied(graph)


_suite_adapter = TypeAdapter(list[TaskSpec])


def load_task_suite(path: str) -> list[TaskSpec]:
    raw = read_json(path)
    if not isinstance(raw, list):
        raise InputError(f"{path}: task suite must be a JSON array")
    tasks = _suite_adapter.validate_python(raw)
    if not tasks:
        raise InputError(f"{path}: task suite is empty")
    ids = [task.id for task in tasks]
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate task ids")
    logger.info(f"Loaded {len(tasks)} tasks from {path}")
    return tasks
