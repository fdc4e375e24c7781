from .functional import GRUWeights, gru_cell, layer_norm, linear, sigmoid, softmax
from .optimizer import ParamStore, adam_step, clip_grad_norm, global_norm, init_uniform
from .tape import Tape, Var, backward

__all__ = [
    "GRUWeights",
    "ParamStore",
    "Tape",
    "Var",
    "adam_step",
    "backward",
    "clip_grad_norm",
    "global_norm",
    "gru_cell",
    "init_uniform",
    "layer_norm",
    "linear",
    "sigmoid",
    "softmax",
]
