"""Configuration blueprints and the deterministic graph builder."""
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from topology_designer.app.core.errors import ValidationError
from topology_designer.app.core.state import CollabGraph, make_graph

Topology = Literal["chain", "star", "tree", "complete", "random"]


class ConfigBlueprint(BaseModel):
    model_config = ConfigDict(frozen=True)

    topology: Topology
    agent_num: int = Field(ge=1)
    roles: Optional[tuple[str, ...]] = Field(None, description="Explicit roles; None samples from the pool.")
    edge_prob: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.topology == "star" and self.agent_num < 2:
            raise ValueError("a star needs at least 2 agents")
        if self.roles is not None and len(self.roles) != self.agent_num:
            raise ValueError(f"{len(self.roles)} roles given for agent_num={self.agent_num}")
        return self

    @property
    def label(self) -> str:
        suffix = f"-p{self.edge_prob:g}" if self.topology == "random" else ""
        return f"{self.topology}{suffix}-{self.agent_num}"


def _structure(topology: str, n: int, edge_prob: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    if topology == "chain":
        return [(k, k + 1) for k in range(1, n)]
    if topology == "star":
        return [(1, k) for k in range(2, n + 1)]
    if topology == "tree":
        return [(int(rng.integers(1, k)), k) for k in range(2, n + 1)]
    if topology == "complete":
        return [(j, i) for i in range(2, n + 1) for j in range(1, i)]
    # random: each pair drawn in (i, j) order so the stream is reproducible
    return [(j, i) for i in range(2, n + 1) for j in range(1, i) if rng.random() < edge_prob]


def build_graph(blueprint: ConfigBlueprint, seed: int, pool: Sequence[str] = ()) -> CollabGraph:
    rng = np.random.default_rng(seed)
    if blueprint.roles is not None:
        roles = list(blueprint.roles)
    else:
        if not pool:
            raise ValidationError(f"blueprint {blueprint.label} samples roles but the role pool is empty")
        roles = [pool[int(k)] for k in rng.integers(0, len(pool), size=blueprint.agent_num)]
    edges = _structure(blueprint.topology, blueprint.agent_num, blueprint.edge_prob, rng)
    return make_graph(roles, edges, source=blueprint.label)


def default_complex_configs() -> list[ConfigBlueprint]:
    return [
        ConfigBlueprint(topology=topology, agent_num=n)
        for topology in ("complete", "random", "star")
        for n in (4, 5, 6)
    ]


def default_simple_configs() -> list[ConfigBlueprint]:
    return [ConfigBlueprint(topology=topology, agent_num=n) for topology in ("chain", "tree", "star") for n in (2, 3)]


def topology_family(graph: CollabGraph) -> str:
    """Structural family of a generated graph: chain, star, complete, tree or other."""
    n, edges = graph.num_nodes, set(graph.edges)
    if n <= 1:
        return "single"
    if edges == {(k, k + 1) for k in range(1, n)}:
        return "chain"
    if edges == {(1, k) for k in range(2, n + 1)}:
        return "star"
    if edges == {(j, i) for i in range(2, n + 1) for j in range(1, i)}:
        return "complete"
    parents = [sum(1 for j, i in edges if i == k) for k in range(2, n + 1)]
    if all(count == 1 for count in parents):
        return "tree"
    return "other"
