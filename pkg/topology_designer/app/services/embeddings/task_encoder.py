"""Task encoder: FFN(LN(sentence embedding)) producing f_Q of length d."""
from typing import Mapping

import numpy as np

from topology_designer.app.core.state import TaskQuery
from topology_designer.app.services.ndkernel import Tape, Var
from topology_designer.app.services.ndkernel import ops

from .embedding_generator import EmbeddingProvider, query_embedding

TASK_PARAM_NAMES = ("task_ln.gain", "task_ln.bias", "task_ffn.w1", "task_ffn.b1", "task_ffn.w2", "task_ffn.b2")


def encode_task_on_tape(tape: Tape, raw: np.ndarray, params: Mapping[str, np.ndarray]) -> Var:
    p = {name: tape.param(name, params[name]) for name in TASK_PARAM_NAMES}
    normed = ops.layer_norm(tape.constant(raw), p["task_ln.gain"], p["task_ln.bias"])
    return ops.mlp(normed, p["task_ffn.w1"], p["task_ffn.b1"], p["task_ffn.w2"], p["task_ffn.b2"])


def encode_task(query: TaskQuery, provider: EmbeddingProvider, params: Mapping[str, np.ndarray]) -> np.ndarray:
    dtype = params["task_ffn.w1"].dtype
    tape = Tape(record=False, dtype=dtype)
    return encode_task_on_tape(tape, query_embedding(query, provider), params).value
