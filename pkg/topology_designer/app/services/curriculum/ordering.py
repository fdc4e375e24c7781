"""Deterministic topological order and cycle reporting."""
import heapq
from typing import Optional

from topology_designer.app.core.errors import CycleError, ValidationError
from topology_designer.app.core.state import CollabGraph


def _adjacency(graph: CollabGraph) -> dict[int, list[int]]:
    if not graph.endpoints_in_range():
        raise ValidationError(f"edge endpoints must lie in 1..{graph.num_nodes}")
    succ: dict[int, list[int]] = {k: [] for k in range(1, graph.num_nodes + 1)}
    for j, i in graph.edges:
        succ[j].append(i)
    return succ


def find_cycle(graph: CollabGraph) -> Optional[list[int]]:
    """One directed cycle as a closed node walk, e.g. [1, 2, 1]; None for a DAG."""
    succ = _adjacency(graph)
    state = {k: 0 for k in succ}  # 0 new, 1 on stack, 2 done
    for root in succ:
        if state[root]:
            continue
        stack = [(root, iter(sorted(succ[root])))]
        path = [root]
        state[root] = 1
        while stack:
            node, children = stack[-1]
            child = next(children, None)
            if child is None:
                state[node] = 2
                stack.pop()
                path.pop()
            elif state[child] == 1:
                return path[path.index(child):] + [child]
            elif state[child] == 0:
                state[child] = 1
                path.append(child)
                stack.append((child, iter(sorted(succ[child]))))
    return None


def canonical_order(graph: CollabGraph) -> list[int]:
    """Kahn's procedure, always releasing the smallest ready node id first."""
    succ = _adjacency(graph)
    indegree = {k: 0 for k in succ}
    for _, i in graph.edges:
        indegree[i] += 1
    ready = [k for k, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in succ[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    if len(order) != graph.num_nodes:
        raise CycleError(find_cycle(graph) or [])
    return order


def in_canonical_order(graph: CollabGraph) -> CollabGraph:
    order = canonical_order(graph)
    if order == list(range(1, graph.num_nodes + 1)):
        return graph
    return graph.relabel(order)


def has_path(graph: CollabGraph, source: int, target: int) -> bool:
    """Directed path of length >= 1 from source to target."""
    succ = _adjacency(graph)
    seen, frontier = set(), list(succ[source])
    while frontier:
        node = frontier.pop()
        if node == target:
            return True
        if node not in seen:
            seen.add(node)
            frontier.extend(succ[node])
    return False
