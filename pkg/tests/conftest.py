import numpy as np
import pytest

from topology_designer.app.core.settings import ModelConfig
from topology_designer.app.core.state import TaskQuery, TrainingExample, make_graph
from topology_designer.app.services.embeddings import HashedEmbeddingProvider, register_roles
from topology_designer.app.services.generator import TopologyGenerator, param_layout
from topology_designer.app.services.ndkernel import ParamStore

ROLES = [
    ("planner", "Breaks the task into steps."),
    ("solver", "Solves the sub-problems."),
    ("checker", "Verifies the answer."),
]


def small_config(**overrides) -> ModelConfig:
    fields = dict(d=16, d_raw=16, d_h=16, n_max=6, dtype="float64", seed=0)
    fields.update(overrides)
    return ModelConfig(**fields)


def zero_params(config: ModelConfig) -> ParamStore:
    return ParamStore({name: np.zeros(shape, dtype=config.dtype) for name, (shape, _) in param_layout(config).items()})


def uniform_model(config: ModelConfig, registry) -> TopologyGenerator:
    """Random weights, but constant role scores and edge logits: every decision is uniform."""
    model = TopologyGenerator(config, registry=registry)
    for name in ("mlp_pred_n.w2", "mlp_pred_n.b2", "mlp_pred_e.w2", "mlp_pred_e.b2"):
        model.params.set(name, np.zeros_like(model.params[name]))
    return model


def example(query: str, roles, edges=(), source="exp", task_id=None) -> TrainingExample:
    return TrainingExample(
        query=TaskQuery(text=query), graph=make_graph(roles, edges, query=query), source=source, task_id=task_id
    )


@pytest.fixture
def provider():
    return HashedEmbeddingProvider(16)


@pytest.fixture
def registry(provider):
    return register_roles(ROLES, provider, seed=0)


@pytest.fixture
def config():
    return small_config()


@pytest.fixture
def model(config, registry):
    return TopologyGenerator(config, registry=registry)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def steered_model(config: ModelConfig, end_row: np.ndarray, node_bias: np.ndarray) -> TopologyGenerator:
    """Zero weights except identity role projections, so role scores are tanh(1) * <e_role, node_bias>.

    Needs d == d_raw. Edge logits are 0, so greedy decoding keeps every edge.
    """
    params = zero_params(config)
    eye = np.eye(config.d, config.d_raw)
    params.set("mlp_role.w1", eye)
    params.set("mlp_role.w2", np.eye(config.d))
    params.set("end_embedding", end_row)
    params.set("mlp_pred_n.b2", node_bias)
    return TopologyGenerator(config, params=params)
