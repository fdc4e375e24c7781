"""Graph file (JSON) and DOT export."""
import json
from typing import Any

from topology_designer.app.core.errors import InputError
from topology_designer.app.core.state import CollabGraph
from topology_designer.app.services.utils import atomic_write_text, read_json


def graph_to_json(graph: CollabGraph) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "nodes": [{"id": k, "role": role} for k, role in enumerate(graph.nodes, start=1)],
        "edges": [[j, i] for j, i in graph.edges],
    }
    meta = {key: value for key, value in (("query", graph.query), ("source", graph.source)) if value is not None}
    if meta:
        payload["meta"] = meta
    return payload


def graph_from_json(payload: Any) -> CollabGraph:
    if not isinstance(payload, dict) or "nodes" not in payload:
        raise InputError("graph JSON needs a 'nodes' array")
    try:
        nodes = sorted(payload["nodes"], key=lambda node: int(node["id"]))
        ids = [int(node["id"]) for node in nodes]
        if ids != list(range(1, len(nodes) + 1)):
            raise InputError(f"node ids must be 1..{len(nodes)}, got {ids}")
        edges = [(int(j), int(i)) for j, i in payload.get("edges", [])]
        meta = payload.get("meta") or {}
        graph = CollabGraph(
            nodes=tuple(str(node["role"]) for node in nodes),
            edges=tuple(edges),
            query=meta.get("query"),
            source=meta.get("source"),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, InputError):
            raise
        raise InputError(f"malformed graph JSON: {e}") from e
    if not graph.endpoints_in_range():
        raise InputError(f"graph has edge endpoints outside 1..{graph.num_nodes}")
    return graph


def dumps_graph(graph: CollabGraph) -> str:
    return json.dumps(graph_to_json(graph), indent=2, ensure_ascii=False) + "\n"


def write_graph(path: str, graph: CollabGraph) -> None:
    atomic_write_text(path, dumps_graph(graph))


def read_graph(path: str) -> CollabGraph:
    return graph_from_json(read_json(path))


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: CollabGraph, name: str = "topology") -> str:
    """Nodes ascending, edges lexicographic; output is byte-stable."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    for k, role in enumerate(graph.nodes, start=1):
        lines.append(f"  {k} [label={_quote(f'{k}: {role}')}];")
    for j, i in graph.edges:
        lines.append(f"  {j} -> {i};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(path: str, graph: CollabGraph) -> None:
    atomic_write_text(path, to_dot(graph))
