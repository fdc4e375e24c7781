"""Named parameter container and the Adam update."""
from typing import Iterator, Mapping, Optional

import numpy as np

from topology_designer.app.core.errors import DimensionError, LookupFailure

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ParamStore:
    """Parameters by name plus Adam moment state and a step counter."""

    def __init__(self, params: Mapping[str, np.ndarray]):
        self.params: dict[str, np.ndarray] = dict(params)
        self.m = {name: np.zeros_like(value) for name, value in self.params.items()}
        self.v = {name: np.zeros_like(value) for name, value in self.params.items()}
        self.step = 0

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.params[name]
        except KeyError:
            raise LookupFailure(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: value.shape for name, value in self.params.items()}

    def num_values(self) -> int:
        return int(sum(value.size for value in self.params.values()))

    def set(self, name: str, value: np.ndarray) -> None:
        current = self[name]
        if current.shape != np.shape(value):
            raise DimensionError(f"parameter {name!r} has shape {current.shape}, got {np.shape(value)}")
        self.params[name] = np.array(value, dtype=current.dtype)

    def snapshot(self) -> "ParamStore":
        """Deep copy, safe to read while the original keeps training."""
        clone = ParamStore({name: value.copy() for name, value in self.params.items()})
        clone.m = {name: value.copy() for name, value in self.m.items()}
        clone.v = {name: value.copy() for name, value in self.v.items()}
        clone.step = self.step
        return clone


def adam_step(store: ParamStore, grads: Mapping[str, np.ndarray], lr: float) -> ParamStore:
    """One bias-corrected Adam update; parameters are replaced, never mutated."""
    store.step += 1
    correction1 = 1.0 - ADAM_BETA1**store.step
    correction2 = 1.0 - ADAM_BETA2**store.step
    for name, param in store.params.items():
        if name not in grads:
            raise LookupFailure(f"missing gradient for parameter {name!r}")
        grad = grads[name]
        if grad.shape != param.shape:
            raise DimensionError(f"gradient for {name!r} has shape {grad.shape}, expected {param.shape}")
        m = ADAM_BETA1 * store.m[name] + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * store.v[name] + (1.0 - ADAM_BETA2) * grad * grad
        store.m[name] = m.astype(param.dtype)
        store.v[name] = v.astype(param.dtype)
        update = (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)
        store.params[name] = (param - lr * update).astype(param.dtype)
    return store


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: Optional[float]) -> dict[str, np.ndarray]:
    if max_norm is None:
        return dict(grads)
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads)
    factor = max_norm / norm
    return {name: (g * factor).astype(g.dtype) for name, g in grads.items()}


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
