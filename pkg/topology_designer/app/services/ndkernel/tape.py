"""Reverse-mode tape.

Every forward op appends one record (output, parents, backward closure).
``backward`` walks the records in exact reverse order, so a tape is
single-threaded; separate model instances use separate tapes.
"""
from typing import Callable, Optional, Sequence

import numpy as np

from topology_designer.app.core.errors import GraphError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Var:
    __slots__ = ("value", "grad", "tape", "name")

    def __init__(self, value: np.ndarray, tape: "Tape", name: Optional[str] = None):
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __len__(self) -> int:
        return len(self.value)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Var{label}(shape={self.value.shape}, dtype={self.value.dtype})"


class Tape:
    def __init__(self, record: bool = True, dtype=np.float32):
        self.record = record
        self.dtype = np.dtype(dtype)
        self._records: list[tuple[Var, tuple[Var, ...], BackwardFn]] = []
        self._params: dict[str, Var] = {}

    def __len__(self) -> int:
        return len(self._records)

    def owns(self, var: Var) -> bool:
        return var.tape is self

    def constant(self, value) -> Var:
        return Var(np.asarray(value, dtype=self.dtype), self)

    def param(self, name: str, value: np.ndarray) -> Var:
        """Leaf for a named parameter; one leaf per name per tape."""
        var = self._params.get(name)
        if var is None:
            var = Var(value, self, name=name)
            self._params[name] = var
        return var

    @property
    def params(self) -> dict[str, Var]:
        return dict(self._params)

    def push(self, value: np.ndarray, parents: Sequence[Var], backward_fn: BackwardFn) -> Var:
        for parent in parents:
            if not self.owns(parent):
                raise GraphError(f"{parent!r} was not recorded on this tape")
        out = Var(value, self)
        if self.record:
            self._records.append((out, tuple(parents), backward_fn))
        return out


def _accumulate(var: Var, grad: np.ndarray) -> None:
    if var.grad is None:
        var.grad = np.array(grad, dtype=var.value.dtype, copy=True).reshape(var.value.shape)
    else:
        var.grad += grad.reshape(var.value.shape)


def backward(tape: Tape, loss: Var) -> dict[str, np.ndarray]:
    """Propagate d(loss) to every parameter leaf and return name -> gradient."""
    if not tape.record:
        raise GraphError("tape was created with record=False")
    if not tape.owns(loss):
        raise GraphError(f"{loss!r} was not produced on this tape")
    if loss.value.size != 1:
        raise GraphError(f"loss must be a scalar, got shape {loss.value.shape}")

    _accumulate(loss, np.ones_like(loss.value))
    for out, parents, backward_fn in reversed(tape._records):
        if out.grad is None:
            continue
        for parent, grad in zip(parents, backward_fn(out.grad)):
            if grad is not None:
                _accumulate(parent, grad)

    return {
        name: (var.grad if var.grad is not None else np.zeros_like(var.value))
        for name, var in tape.params.items()
    }
