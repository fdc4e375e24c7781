"""Teacher-forced loss of one training example."""
from typing import NamedTuple, Optional

import numpy as np

from topology_designer.app.core.state import TrainingExample
from topology_designer.app.services.curriculum import in_canonical_order
from topology_designer.app.services.embeddings import EmbeddingProvider, RoleRegistry, query_embedding
from topology_designer.app.services.generator import Forward, TopologyGenerator, teacher_forced_terms
from topology_designer.app.services.ndkernel import Tape, Var, ops


class LossTerms(NamedTuple):
    total: float
    node: float
    edge: float


def _negated_sum(terms: list[Var], weight: float) -> Optional[Var]:
    if not terms:
        return None
    return ops.affine(ops.sum_list(terms), -weight)


def loss_on_tape(
    tape: Tape,
    model: TopologyGenerator,
    example: TrainingExample,
    registry: RoleRegistry,
    alpha: float,
    raw_query: np.ndarray,
) -> tuple[Var, LossTerms]:
    """L_total = alpha * L_node + (1 - alpha) * L_edge, recorded on ``tape``."""
    fwd = Forward(model, tape)
    graph = in_canonical_order(example.graph)
    node_terms, edge_terms = teacher_forced_terms(fwd, raw_query, registry, graph, model.n_max)
    l_node = -sum(float(t.value) for t in node_terms)
    l_edge = -sum(float(t.value) for t in edge_terms)
    parts = [p for p in (_negated_sum(node_terms, alpha), _negated_sum(edge_terms, 1.0 - alpha)) if p is not None]
    total = parts[0] if len(parts) == 1 else ops.add(*parts)
    return total, LossTerms(float(total.value), l_node, l_edge)


def example_loss(
    model: TopologyGenerator,
    example: TrainingExample,
    registry: RoleRegistry,
    alpha: float,
    provider: EmbeddingProvider,
) -> LossTerms:
    tape = Tape(record=False, dtype=model.dtype)
    _, terms = loss_on_tape(tape, model, example, registry, alpha, query_embedding(example.query, provider))
    return terms
