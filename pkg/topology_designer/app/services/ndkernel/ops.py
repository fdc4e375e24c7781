"""Differentiable primitives recorded on a :class:`Tape`.

All ops keep the dtype of their inputs. Composite blocks (``mlp``,
``gru_cell``) are built from the primitives, so their gradients come for free.
"""
from typing import Sequence

import numpy as np

from topology_designer.app.core.errors import DimensionError, GraphError

from .tape import Tape, Var

LAYER_NORM_EPS = 1e-5


def _tape_of(*variables: Var) -> Tape:
    tape = variables[0].tape
    for var in variables[1:]:
        if var.tape is not tape:
            raise GraphError(f"{var!r} belongs to a different tape")
    return tape


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)


def stable_sigmoid(s):
    """Logistic function without overflow for large |s|."""
    s = np.asarray(s)
    if s.dtype.kind != "f":
        s = s.astype(np.float64)
    z = np.exp(-np.abs(s))
    return np.where(s >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(s.dtype)


def linear(x: Var, weight: Var, bias: Var) -> Var:
    tape = _tape_of(x, weight, bias)
    w = weight.value
    if w.ndim != 2 or x.value.shape != (w.shape[1],) or bias.value.shape != (w.shape[0],):
        raise DimensionError(f"linear got x{x.value.shape}, W{w.shape}, b{bias.value.shape}")
    x_val = x.value

    def back(g):
        return w.T @ g, np.outer(g, x_val), g

    return tape.push(w @ x_val + bias.value, (x, weight, bias), back)


def add(a: Var, b: Var) -> Var:
    tape = _tape_of(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"add shape mismatch {a.shape} vs {b.shape}")
    return tape.push(a.value + b.value, (a, b), lambda g: (g, g))


def mul(a: Var, b: Var) -> Var:
    """Elementwise product; ``b`` may be a scalar gate."""
    tape = _tape_of(a, b)
    if a.shape != b.shape and b.value.size != 1:
        raise DimensionError(f"mul shape mismatch {a.shape} vs {b.shape}")
    a_val, b_val = a.value, b.value

    def back(g):
        return g * b_val, _unbroadcast(g * a_val, b_val.shape)

    return tape.push(a_val * b_val, (a, b), back)


def affine(a: Var, scale: float, shift: float = 0.0) -> Var:
    """``scale * a + shift`` with constant coefficients."""
    return a.tape.push(scale * a.value + shift, (a,), lambda g: (scale * g,))


def one_minus(a: Var) -> Var:
    return affine(a, -1.0, 1.0)


def sigmoid(a: Var) -> Var:
    out = stable_sigmoid(a.value).astype(a.value.dtype)
    return a.tape.push(out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a: Var) -> Var:
    out = np.tanh(a.value)
    return a.tape.push(out, (a,), lambda g: (g * (1.0 - out * out),))


def concat(parts: Sequence[Var]) -> Var:
    tape = _tape_of(*parts)
    sizes = [p.value.shape[0] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return [g[bounds[k]: bounds[k + 1]] for k in range(len(parts))]

    return tape.push(np.concatenate([p.value for p in parts]), parts, back)


def slice_(a: Var, start: int, stop: int) -> Var:
    size = a.value.shape[0]

    def back(g):
        full = np.zeros(size, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return a.tape.push(a.value[start:stop], (a,), back)


def dot(a: Var, b: Var) -> Var:
    tape = _tape_of(a, b)
    if a.shape != b.shape:
        raise DimensionError(f"dot shape mismatch {a.shape} vs {b.shape}")
    a_val, b_val = a.value, b.value
    return tape.push(np.asarray(np.dot(a_val, b_val)), (a, b), lambda g: (g * b_val, g * a_val))


def dot_rows(rows: Sequence[Var], v: Var) -> Var:
    """Scores ``[rows[k] . v]``, each computed independently of the others.

    Row-at-a-time evaluation keeps every score bitwise stable when rows are
    appended.
    """
    tape = _tape_of(v, *rows)
    v_val = v.value
    for row in rows:
        if row.shape != v.shape:
            raise DimensionError(f"dot_rows shape mismatch {row.shape} vs {v.shape}")
    row_vals = [row.value for row in rows]
    out = np.array([np.dot(r, v_val) for r in row_vals], dtype=v_val.dtype)

    def back(g):
        grad_v = np.zeros_like(v_val)
        for k, r in enumerate(row_vals):
            grad_v += g[k] * r
        return [grad_v] + [g[k] * v_val for k in range(len(row_vals))]

    return tape.push(out, (v, *rows), back)


def layer_norm(x: Var, gain: Var, bias: Var, eps: float = LAYER_NORM_EPS) -> Var:
    tape = _tape_of(x, gain, bias)
    n = x.value.shape[0]
    if n < 2 or gain.shape != x.shape or bias.shape != x.shape:
        raise DimensionError(f"layer_norm needs d >= 2 and matching gain/bias, got {x.shape}")
    centered = x.value - x.value.mean()
    inv_std = 1.0 / np.sqrt((centered * centered).mean() + eps)
    x_hat = centered * inv_std
    gain_val = gain.value

    def back(g):
        g_hat = g * gain_val
        grad_x = inv_std / n * (n * g_hat - g_hat.sum() - x_hat * (g_hat * x_hat).sum())
        return grad_x, g * x_hat, g

    return tape.push(gain_val * x_hat + bias.value, (x, gain, bias), back)


def log_softmax(scores: Var) -> Var:
    s = scores.value
    shifted = s - s.max()
    out = shifted - np.log(np.exp(shifted).sum())
    probs = np.exp(out)
    return scores.tape.push(out, (scores,), lambda g: (g - probs * g.sum(),))


def log_sigmoid(s: Var) -> Var:
    """log(sigmoid(s)) computed as -softplus(-s)."""
    val = s.value
    out = -(np.maximum(-val, 0.0) + np.log1p(np.exp(-np.abs(val))))
    grad_scale = stable_sigmoid(-val).astype(val.dtype)
    return s.tape.push(out, (s,), lambda g: (g * grad_scale,))


def pick(a: Var, index: int) -> Var:
    size = a.value.shape[0]

    def back(g):
        full = np.zeros(size, dtype=a.value.dtype)
        full[index] = g
        return (full,)

    return a.tape.push(np.asarray(a.value[index]), (a,), back)


def sum_list(terms: Sequence[Var]) -> Var:
    tape = _tape_of(*terms)
    total = np.asarray(sum(t.value.sum() for t in terms), dtype=terms[0].value.dtype)
    return tape.push(total, terms, lambda g: [np.broadcast_to(g, t.shape) for t in terms])


def mlp(x: Var, w1: Var, b1: Var, w2: Var, b2: Var) -> Var:
    return linear(tanh(linear(x, w1, b1)), w2, b2)


def gru_cell(x: Var, h_prev: Var, w_ih: Var, w_hh: Var, b_ih: Var, b_hh: Var) -> Var:
    """h' = (1 - u) * h + u * c with reset gate r, update gate u, tanh candidate c.

    Gate rows of the fused weights are ordered [reset, update, candidate].
    """
    hidden = h_prev.value.shape[0]
    if w_hh.value.shape != (3 * hidden, hidden):
        raise DimensionError(f"GRU hidden weights {w_hh.value.shape} do not match hidden size {hidden}")
    gi = linear(x, w_ih, b_ih)
    gh = linear(h_prev, w_hh, b_hh)
    reset = sigmoid(add(slice_(gi, 0, hidden), slice_(gh, 0, hidden)))
    update = sigmoid(add(slice_(gi, hidden, 2 * hidden), slice_(gh, hidden, 2 * hidden)))
    candidate = tanh(add(slice_(gi, 2 * hidden, 3 * hidden), mul(reset, slice_(gh, 2 * hidden, 3 * hidden))))
    return add(mul(one_minus(update), h_prev), mul(update, candidate))
