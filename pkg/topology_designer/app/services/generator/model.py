"""Generator parameters, decoding state and the generation trace."""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from topology_designer.app.core.errors import ConfigurationError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import ModelConfig
from topology_designer.app.services.embeddings import RoleRegistry, end_token_embedding
from topology_designer.app.services.ndkernel import ParamStore, init_uniform

NUM_EDGE_CATEGORIES = 3
EDGE_START, EDGE_ABSENT, EDGE_PRESENT = range(NUM_EDGE_CATEGORIES)


def _mlp_shapes(prefix: str, d_in: int, d_hidden: int, d_out: int) -> dict[str, tuple[tuple[int, ...], int]]:
    return {
        f"{prefix}.w1": ((d_hidden, d_in), d_in),
        f"{prefix}.b1": ((d_hidden,), d_in),
        f"{prefix}.w2": ((d_out, d_hidden), d_hidden),
        f"{prefix}.b2": ((d_out,), d_hidden),
    }


def _gru_shapes(prefix: str, d_in: int, hidden: int) -> dict[str, tuple[tuple[int, ...], int]]:
    return {
        f"{prefix}.w_ih": ((3 * hidden, d_in), hidden),
        f"{prefix}.w_hh": ((3 * hidden, hidden), hidden),
        f"{prefix}.b_ih": ((3 * hidden,), hidden),
        f"{prefix}.b_hh": ((3 * hidden,), hidden),
    }


def param_layout(config: ModelConfig) -> dict[str, tuple[tuple[int, ...], int]]:
    """Parameter name -> (shape, fan_in), in checkpoint order."""
    d, d_raw, d_h = config.d, config.d_raw, config.d_h
    layout: dict[str, tuple[tuple[int, ...], int]] = {
        "task_ln.gain": ((d_raw,), d_raw),
        "task_ln.bias": ((d_raw,), d_raw),
    }
    layout.update(_mlp_shapes("task_ffn", d_raw, d, d))
    layout["hist_h0"] = ((d,), d)
    layout.update(_gru_shapes("gru_prev", d_raw, d))
    layout.update(_mlp_shapes("mlp_node", d + config.n_max - 1, d_h, d_h))
    layout.update(_gru_shapes("gru_node", d_h, d_h))
    layout.update(_mlp_shapes("mlp_pred_n", d_h, d_h, d))
    layout.update(_mlp_shapes("mlp_role", d_raw, d, d))
    layout["end_embedding"] = ((d_raw,), d_raw)
    layout.update(_mlp_shapes("mlp_node2edge", d_h, d_h, d_h))
    layout.update(_mlp_shapes("mlp_edge", NUM_EDGE_CATEGORIES, d_h, d_h))
    layout.update(_gru_shapes("gru_edge", d_h, d_h))
    layout.update(_mlp_shapes("mlp_pred_e", d_h, d_h, 1))
    return layout


def init_params(config: ModelConfig, registry: Optional[RoleRegistry] = None) -> ParamStore:
    """Seeded uniform init; LayerNorm gain 1, bias 0; zero initial history vector."""
    if registry is not None and registry.d_raw != config.d_raw:
        raise ConfigurationError(f"registry d_raw {registry.d_raw} does not match model d_raw {config.d_raw}")
    rng = np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)
    params: dict[str, np.ndarray] = {}
    for name, (shape, fan_in) in param_layout(config).items():
        if name == "task_ln.gain":
            params[name] = np.ones(shape, dtype=dtype)
        elif name in ("task_ln.bias", "hist_h0"):
            params[name] = np.zeros(shape, dtype=dtype)
        elif name == "end_embedding":
            end_row = registry.end_embedding if registry is not None else end_token_embedding(config.d_raw, config.seed)
            params[name] = np.array(end_row, dtype=dtype)
        else:
            params[name] = init_uniform(rng, shape, fan_in, dtype)
    return ParamStore(params)


class TopologyGenerator:
    """Model configuration plus its named parameters."""

    def __init__(self, config: ModelConfig, params: Optional[ParamStore] = None, registry: Optional[RoleRegistry] = None):
        self.config = config
        self.params = params if params is not None else init_params(config, registry)
        expected = {name: shape for name, (shape, _) in param_layout(config).items()}
        if self.params.shapes() != expected:
            raise ConfigurationError("parameter shapes do not match the model configuration")
        logger.debug(f"Generator ready: {len(self.params)} tensors, {self.params.num_values()} values")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.config.dtype)

    @property
    def n_max(self) -> int:
        return self.config.n_max

    def snapshot(self) -> "TopologyGenerator":
        return TopologyGenerator(self.config, self.params.snapshot())


@dataclass(frozen=True)
class GeneratorState:
    h_node: np.ndarray
    history: tuple[int, ...] = ()

    @property
    def step(self) -> int:
        return len(self.history) + 1


class EdgeDecision(BaseModel):
    source: int
    present: bool
    log_prob: float = Field(le=0.0)


class GenerationStep(BaseModel):
    role_index: int
    role: str
    node_log_prob: float = Field(le=0.0)
    edges: list[EdgeDecision] = []

    @property
    def log_prob(self) -> float:
        return self.node_log_prob + sum(e.log_prob for e in self.edges)


class GenerationTrace(BaseModel):
    steps: list[GenerationStep] = []
    total_log_prob: float = 0.0
    ended: bool = False
    n_max: int = 10

    def add(self, step: GenerationStep) -> None:
        self.steps.append(step)
        self.total_log_prob += step.node_log_prob
        for decision in step.edges:
            self.total_log_prob += decision.log_prob
