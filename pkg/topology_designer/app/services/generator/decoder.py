"""Autoregressive decoding, likelihood replay and the step-level operations."""
from typing import Optional, Sequence

import numpy as np

from topology_designer.app.core.errors import (
    CapacityError,
    ConfigurationError,
    DimensionError,
    EmptyTopologyError,
    LookupFailure,
    ValidationError,
)
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import DecodePolicy
from topology_designer.app.core.state import CollabGraph, TaskQuery, make_graph
from topology_designer.app.services.embeddings import EmbeddingProvider, RoleRegistry, query_embedding
from topology_designer.app.services.ndkernel import Tape, Var, functional

from .model import EDGE_ABSENT, EDGE_PRESENT, EDGE_START, EdgeDecision, GenerationStep, GenerationTrace, GeneratorState, TopologyGenerator
from .network import Forward, edge_feature


def _inference(model: TopologyGenerator) -> Forward:
    return Forward(model, Tape(record=False, dtype=model.dtype))


def _check_index(registry: RoleRegistry, index: int) -> None:
    if not 0 <= index < len(registry):
        raise LookupFailure(f"role index {index} is out of range for {len(registry)} roles")


def history_embed(role_indices: Sequence[int], registry: RoleRegistry, model: TopologyGenerator) -> np.ndarray:
    fwd = _inference(model)
    h = fwd.history_start()
    for index in role_indices:
        _check_index(registry, index)
        h = fwd.history_step(h, registry.row(index))
    return h.value


def fuse_context(
    f_hist: np.ndarray, f_q: np.ndarray, use_task: bool = True, use_history: bool = True
) -> tuple[np.ndarray, float]:
    f_hist = np.asarray(f_hist)
    f_q = np.asarray(f_q)
    if f_hist.shape != f_q.shape:
        raise DimensionError(f"f_hist {f_hist.shape} and f_Q {f_q.shape} differ in length")
    if not use_task:
        return f_hist, 0.0
    if not use_history:
        return f_q, 1.0
    gate = functional.sigmoid(float(np.dot(f_hist, f_q)) / np.sqrt(f_q.shape[0]))
    return (1.0 - gate) * f_hist + gate * f_q, gate


def node_step(f_cont: np.ndarray, f_edge: np.ndarray, state: GeneratorState, model: TopologyGenerator) -> GeneratorState:
    fwd = _inference(model)
    h = fwd.node_step(fwd.const(f_cont), f_edge, fwd.const(state.h_node))
    return GeneratorState(h_node=h.value, history=state.history)


def score_roles(state: GeneratorState, registry: RoleRegistry, model: TopologyGenerator) -> tuple[np.ndarray, np.ndarray]:
    """Role scores with END last, and their softmax."""
    fwd = _inference(model)
    scores = fwd.role_scores(fwd.const(state.h_node), fwd.role_rows(registry)).value
    return scores, functional.softmax(scores)


def _decide_edge(logit: float, policy: DecodePolicy, rng: np.random.Generator) -> bool:
    if policy.mode == "greedy":
        return functional.sigmoid(logit) >= policy.threshold
    return bool(rng.random() < functional.sigmoid(logit / policy.temperature))


def _decide_role(scores: np.ndarray, policy: DecodePolicy, rng: np.random.Generator) -> int:
    if policy.mode == "greedy":
        return int(np.argmax(scores))
    probs = functional.softmax(np.asarray(scores, dtype=np.float64) / policy.temperature)
    return int(rng.choice(len(probs), p=probs))


def _run_edges(
    fwd: Forward,
    h_node: Var,
    i: int,
    policy: Optional[DecodePolicy] = None,
    rng: Optional[np.random.Generator] = None,
    forced: Optional[CollabGraph] = None,
) -> list[tuple[int, bool, Var]]:
    """Edge sub-steps j = i-1 down to 1, decoded by policy or forced from a graph."""
    decisions = []
    h_edge = fwd.edge_start(h_node)
    category = EDGE_START
    for j in range(i - 1, 0, -1):
        h_edge = fwd.edge_advance(h_edge, category)
        logit = fwd.edge_logit(h_edge)
        if forced is not None:
            present = forced.has_edge(j, i)
        else:
            present = _decide_edge(float(logit.value), policy, rng)
        decisions.append((j, present, fwd.edge_log_prob(logit, present)))
        category = EDGE_PRESENT if present else EDGE_ABSENT
    return decisions


def edge_sequence(
    state: GeneratorState,
    i: int,
    prefix: CollabGraph,
    model: TopologyGenerator,
    policy: DecodePolicy,
    rng: Optional[np.random.Generator] = None,
) -> tuple[list[tuple[int, bool]], list[float]]:
    """Incoming-edge decisions for node i, ordered j = i-1 down to 1.

    ``prefix`` is the graph over nodes 1..i-1 already decided; edges are
    conditioned only through ``state``.
    """
    if prefix.num_nodes < i - 1:
        raise ValidationError(f"prefix has {prefix.num_nodes} nodes, step {i} needs {i - 1}")
    fwd = _inference(model)
    rng = rng if rng is not None else np.random.default_rng(policy.seed)
    decisions = _run_edges(fwd, fwd.const(state.h_node), i, policy, rng)
    return [(j, present) for j, present, _ in decisions], [float(lp.value) for _, _, lp in decisions]


def _effective_cap(model: TopologyGenerator, n_max: Optional[int]) -> int:
    cap = model.n_max if n_max is None else n_max
    if cap < 1:
        raise CapacityError(f"node cap must be >= 1, got {cap}")
    if cap > model.n_max:
        raise CapacityError(f"node cap {cap} exceeds the model's edge-feature capacity {model.n_max}")
    return cap


def generate(
    model: TopologyGenerator,
    query: TaskQuery,
    registry: RoleRegistry,
    policy: DecodePolicy,
    provider: EmbeddingProvider,
) -> tuple[CollabGraph, GenerationTrace]:
    if len(registry) == 0:
        raise ConfigurationError("role registry is empty; nothing but END can be generated")
    cap = _effective_cap(model, policy.n_max)
    rng = np.random.default_rng(policy.seed)
    fwd = _inference(model)
    f_q = fwd.task(query_embedding(query, provider))
    rows = fwd.role_rows(registry)
    h_hist = fwd.history_start()
    h_node = fwd.node_start()
    roles: list[str] = []
    edges: list[tuple[int, int]] = []
    trace = GenerationTrace(n_max=cap)

    for i in range(1, cap + 1):
        prefix = make_graph(roles, edges)
        f_cont, _ = fwd.fuse(h_hist, f_q)
        h_node = fwd.node_step(f_cont, edge_feature(prefix, i, model.n_max), h_node)
        scores = fwd.role_scores(h_node, rows)
        index = _decide_role(scores.value, policy, rng)
        node_lp = float(fwd.node_log_prob(scores, index).value)
        if index == registry.end_index:
            trace.add(GenerationStep(role_index=index, role=registry.name_of(index), node_log_prob=node_lp))
            trace.ended = True
            if i == 1:
                raise EmptyTopologyError()
            break
        decisions = _run_edges(fwd, h_node, i, policy, rng)
        trace.add(
            GenerationStep(
                role_index=index,
                role=registry.name_of(index),
                node_log_prob=node_lp,
                edges=[EdgeDecision(source=j, present=present, log_prob=float(lp.value)) for j, present, lp in decisions],
            )
        )
        roles.append(registry.name_of(index))
        edges.extend((j, i) for j, present, _ in decisions if present)
        h_hist = fwd.history_step(h_hist, registry.row(index))

    graph = make_graph(roles, edges, query=query.text, source="generated")
    logger.debug(f"Generated {graph.num_nodes} nodes, {graph.num_edges} edges, log-prob {trace.total_log_prob:.4f}")
    return graph, trace


def generate_with_retries(
    model: TopologyGenerator,
    query: TaskQuery,
    registry: RoleRegistry,
    policy: DecodePolicy,
    provider: EmbeddingProvider,
    retries: Optional[int] = None,
) -> tuple[CollabGraph, GenerationTrace]:
    """Reseed after an empty topology; greedy decoding cannot change, so it never retries."""
    attempts = 1 + (policy.retries if retries is None else retries)
    if policy.mode == "greedy":
        attempts = 1
    for attempt in range(attempts):
        try:
            return generate(model, query, registry, policy.model_copy(update={"seed": policy.seed + attempt}), provider)
        except EmptyTopologyError:
            logger.warning(f"END selected at step 1 (attempt {attempt + 1}/{attempts})")
    raise EmptyTopologyError(f"END selected at step 1 on all {attempts} attempts")


def teacher_forced_terms(
    fwd: Forward, raw_query: np.ndarray, registry: RoleRegistry, graph: CollabGraph, cap: int
) -> tuple[list[Var], list[Var]]:
    """Node and edge log-prob terms of a generation-ordered graph, END step included when N < cap."""
    n = graph.num_nodes
    if n > cap:
        raise CapacityError(f"graph has {n} nodes, cap is {cap}")
    if not graph.is_generation_ordered():
        raise ValidationError("graph edges must satisfy j < i in generation order")
    indices = [registry.index(role) for role in graph.nodes]
    targets = indices + ([registry.end_index] if n < cap else [])

    f_q = fwd.task(raw_query)
    rows = fwd.role_rows(registry)
    h_hist = fwd.history_start()
    h_node = fwd.node_start()
    node_terms: list[Var] = []
    edge_terms: list[Var] = []
    for i, target in enumerate(targets, start=1):
        f_cont, _ = fwd.fuse(h_hist, f_q)
        h_node = fwd.node_step(f_cont, edge_feature(graph.prefix(i - 1), i, fwd.model.n_max), h_node)
        node_terms.append(fwd.node_log_prob(fwd.role_scores(h_node, rows), target))
        if target == registry.end_index:
            break
        edge_terms.extend(lp for _, _, lp in _run_edges(fwd, h_node, i, forced=graph))
        h_hist = fwd.history_step(h_hist, registry.row(target))
    return node_terms, edge_terms


def _apply_order(graph: CollabGraph, order: Optional[Sequence[int]]) -> CollabGraph:
    if order is None:
        return graph
    order = list(order)
    position = {node: k for k, node in enumerate(order)}
    if sorted(order) != list(range(1, graph.num_nodes + 1)):
        raise ValidationError(f"order {order} is not a permutation of the graph's nodes")
    for j, i in graph.edges:
        if position[j] >= position[i]:
            raise ValidationError(f"order {order} is not topological: edge ({j}, {i})")
    return graph.relabel(order)


def guided_log_prob(
    model: TopologyGenerator,
    query: TaskQuery,
    registry: RoleRegistry,
    graph: CollabGraph,
    provider: EmbeddingProvider,
    order: Optional[Sequence[int]] = None,
    n_max: Optional[int] = None,
) -> float:
    """log P(G | Q) under teacher forcing, summed in decoding order."""
    ordered = _apply_order(graph, order)
    fwd = _inference(model)
    cap = _effective_cap(model, n_max)
    node_terms, edge_terms = teacher_forced_terms(fwd, query_embedding(query, provider), registry, ordered, cap)
    # same accumulation order as GenerationTrace.add
    total = 0.0
    edges = iter(edge_terms)
    for i, node_term in enumerate(node_terms, start=1):
        total += float(node_term.value)
        if i <= ordered.num_nodes:
            for _ in range(i - 1):
                total += float(next(edges).value)
    return total
