"""Tape-level forward blocks of the node and edge generators.

``Forward`` binds a model to one tape. Inference passes a non-recording
tape; training and likelihood replay share exactly the same code path, so
replayed log-probabilities match decoded ones bit for bit.
"""
import numpy as np

from topology_designer.app.core.errors import CapacityError
from topology_designer.app.core.state import CollabGraph
from topology_designer.app.services.embeddings import RoleRegistry, encode_task_on_tape
from topology_designer.app.services.ndkernel import Tape, Var
from topology_designer.app.services.ndkernel import ops

from .model import NUM_EDGE_CATEGORIES, TopologyGenerator


def edge_feature(prefix: CollabGraph, i: int, n_max: int) -> np.ndarray:
    """Incoming adjacency of node i-1 over sources 1..n_max-1."""
    if i < 1:
        raise CapacityError(f"step index must be >= 1, got {i}")
    if i - 1 > n_max:
        raise CapacityError(f"node {i - 1} exceeds the node cap {n_max}")
    feature = np.zeros(max(n_max - 1, 0), dtype=np.float32)
    if i <= 2:
        return feature
    for j, k in prefix.edges:
        if k == i - 1 and j < i - 1:
            feature[j - 1] = 1.0
    return feature


class Forward:
    def __init__(self, model: TopologyGenerator, tape: Tape):
        self.model = model
        self.tape = tape
        self.d = model.config.d

    def p(self, name: str) -> Var:
        return self.tape.param(name, self.model.params[name])

    def const(self, value) -> Var:
        return self.tape.constant(value)

    def mlp(self, prefix: str, x: Var) -> Var:
        return ops.mlp(x, self.p(f"{prefix}.w1"), self.p(f"{prefix}.b1"), self.p(f"{prefix}.w2"), self.p(f"{prefix}.b2"))

    def gru(self, prefix: str, x: Var, h: Var) -> Var:
        return ops.gru_cell(
            x, h, self.p(f"{prefix}.w_ih"), self.p(f"{prefix}.w_hh"), self.p(f"{prefix}.b_ih"), self.p(f"{prefix}.b_hh")
        )

    # node generator

    def task(self, raw: np.ndarray) -> Var:
        return encode_task_on_tape(self.tape, raw, self.model.params)

    def history_start(self) -> Var:
        return self.p("hist_h0")

    def history_step(self, h_hist: Var, role_row: np.ndarray) -> Var:
        if not self.model.config.use_history_embedding:
            return h_hist
        return self.gru("gru_prev", self.const(role_row), h_hist)

    def fuse(self, f_hist: Var, f_q: Var) -> tuple[Var, Var]:
        config = self.model.config
        if not config.use_task_embedding:
            return f_hist, self.const(0.0)
        if not config.use_history_embedding:
            return f_q, self.const(1.0)
        gate = ops.sigmoid(ops.affine(ops.dot(f_hist, f_q), 1.0 / np.sqrt(self.d)))
        f_cont = ops.add(ops.mul(f_hist, ops.one_minus(gate)), ops.mul(f_q, gate))
        return f_cont, gate

    def node_start(self) -> Var:
        return self.const(np.zeros(self.model.config.d_h))

    def node_step(self, f_cont: Var, f_edge: np.ndarray, h_node: Var) -> Var:
        x = self.mlp("mlp_node", ops.concat([f_cont, self.const(f_edge)]))
        return self.gru("gru_node", x, h_node)

    def role_rows(self, registry: RoleRegistry) -> list[Var]:
        """Projected role rows followed by the projected END row."""
        rows = [self.mlp("mlp_role", self.const(role.base_embedding)) for role in registry.roles]
        rows.append(self.mlp("mlp_role", self.p("end_embedding")))
        return rows

    def role_scores(self, h_node: Var, rows: list[Var]) -> Var:
        return ops.dot_rows(rows, self.mlp("mlp_pred_n", h_node))

    # edge generator

    def edge_start(self, h_node: Var) -> Var:
        return self.mlp("mlp_node2edge", h_node)

    def edge_advance(self, h_edge: Var, category: int) -> Var:
        one_hot = np.zeros(NUM_EDGE_CATEGORIES)
        one_hot[category] = 1.0
        return self.gru("gru_edge", self.mlp("mlp_edge", self.const(one_hot)), h_edge)

    def edge_logit(self, h_edge: Var) -> Var:
        return ops.pick(self.mlp("mlp_pred_e", h_edge), 0)

    @staticmethod
    def edge_log_prob(logit: Var, present: bool) -> Var:
        return ops.log_sigmoid(logit if present else ops.affine(logit, -1.0))

    @staticmethod
    def node_log_prob(scores: Var, index: int) -> Var:
        return ops.pick(ops.log_softmax(scores), index)
