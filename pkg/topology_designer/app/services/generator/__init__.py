from .decoder import (
    edge_sequence,
    fuse_context,
    generate,
    generate_with_retries,
    guided_log_prob,
    history_embed,
    node_step,
    score_roles,
    teacher_forced_terms,
)
from .graph_io import dumps_graph, graph_from_json, graph_to_json, read_graph, to_dot, write_dot, write_graph
from .model import (
    EdgeDecision,
    GenerationStep,
    GenerationTrace,
    GeneratorState,
    TopologyGenerator,
    init_params,
    param_layout,
)
from .network import Forward, edge_feature

__all__ = [
    "EdgeDecision",
    "Forward",
    "GenerationStep",
    "GenerationTrace",
    "GeneratorState",
    "TopologyGenerator",
    "dumps_graph",
    "edge_feature",
    "edge_sequence",
    "fuse_context",
    "generate",
    "generate_with_retries",
    "graph_from_json",
    "graph_to_json",
    "guided_log_prob",
    "history_embed",
    "init_params",
    "node_step",
    "param_layout",
    "read_graph",
    "score_roles",
    "teacher_forced_terms",
    "to_dot",
    "write_dot",
    "write_graph",
]
