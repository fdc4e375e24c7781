"""Domain values shared across the generator, curriculum and runtime."""
from typing import Iterable, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import ValidationError

Edge = tuple[int, int]
Source = Literal["exp", "simple", "pruned", "replay"]


class TaskQuery(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    precomputed_embedding: Optional[tuple[float, ...]] = None

    @field_validator("text")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("task query text must be non-empty")
        return value


class CollabGraph(BaseModel):
    """Role-labelled agents in generation order with directed links (j, i).

    Node ids are 1-based positions in ``nodes``. Graphs produced by the
    generator only contain edges with j < i; graphs read from files may carry
    any edge and are checked by ``validate_dag`` before execution.
    """

    model_config = ConfigDict(frozen=True)

    nodes: tuple[str, ...] = ()
    edges: tuple[Edge, ...] = ()
    query: Optional[str] = None
    source: Optional[str] = None

    @field_validator("edges", mode="before")
    @classmethod
    def _sorted_unique(cls, value):
        return tuple(sorted({(int(j), int(i)) for j, i in value}))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def role(self, node: int) -> str:
        return self.nodes[node - 1]

    def has_edge(self, j: int, i: int) -> bool:
        return (j, i) in set(self.edges)

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for j, k in self.edges if k == i)

    def out_neighbors(self, j: int) -> list[int]:
        return sorted(k for s, k in self.edges if s == j)

    def endpoints_in_range(self) -> bool:
        n = self.num_nodes
        return all(1 <= j <= n and 1 <= i <= n for j, i in self.edges)

    def is_generation_ordered(self) -> bool:
        return self.endpoints_in_range() and all(j < i for j, i in self.edges)

    def _with(self, **changes) -> "CollabGraph":
        fields = {"nodes": self.nodes, "edges": self.edges, "query": self.query, "source": self.source}
        fields.update(changes)
        return CollabGraph(**fields)

    def prefix(self, count: int) -> "CollabGraph":
        """Subgraph induced by the first ``count`` nodes."""
        return self._with(
            nodes=self.nodes[:count],
            edges=tuple(e for e in self.edges if e[0] <= count and e[1] <= count),
        )

    def without_edge(self, edge: Edge) -> "CollabGraph":
        return self._with(edges=tuple(e for e in self.edges if e != tuple(edge)))

    def without_node(self, node: int) -> "CollabGraph":
        """Drop a node and its incident edges; later ids shift down by one."""

        def shift(k: int) -> int:
            return k - 1 if k > node else k

        nodes = self.nodes[: node - 1] + self.nodes[node:]
        edges = tuple((shift(j), shift(i)) for j, i in self.edges if node not in (j, i))
        return self._with(nodes=nodes, edges=edges)

    def relabel(self, order: Sequence[int]) -> "CollabGraph":
        """Renumber nodes so that ``order[k]`` becomes node k+1."""
        if sorted(order) != list(range(1, self.num_nodes + 1)):
            raise ValidationError(f"order {list(order)} is not a permutation of 1..{self.num_nodes}")
        position = {old: new for new, old in enumerate(order, start=1)}
        return self._with(
            nodes=tuple(self.nodes[old - 1] for old in order),
            edges=tuple((position[j], position[i]) for j, i in self.edges),
        )

    def with_meta(self, query: Optional[str] = None, source: Optional[str] = None) -> "CollabGraph":
        return self._with(query=query, source=source)

    def structure(self) -> tuple[tuple[str, ...], tuple[Edge, ...]]:
        """Roles and edges only; meta excluded."""
        return self.nodes, self.edges


class TrainingExample(BaseModel):
    model_config = ConfigDict(frozen=True)

    query: TaskQuery
    graph: CollabGraph
    source: Source
    success: bool = True
    task_id: Optional[str] = None

    @model_validator(mode="after")
    def _stored_examples_succeed(self):
        if self.graph.num_nodes < 1:
            raise ValueError("training graphs need at least one node")
        return self

    def tagged(self, source: Source) -> "TrainingExample":
        graph = self.graph.with_meta(query=self.graph.query, source=source)
        return self.model_copy(update={"source": source, "graph": graph})


def make_graph(
    roles: Iterable[str],
    edges: Iterable[Edge] = (),
    query: Optional[str] = None,
    source: Optional[str] = None,
) -> CollabGraph:
    return CollabGraph(nodes=tuple(roles), edges=tuple(edges), query=query, source=source)
