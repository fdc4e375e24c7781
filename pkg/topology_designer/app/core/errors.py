"""Exception hierarchy shared by every service.

Each class carries the process exit code the command line reports for it.
"""
from typing import Any, Optional, Sequence


class TopologyDesignerError(Exception):
    exit_code: int = 1


class InputError(TopologyDesignerError, ValueError):
    """Bad user input, malformed files or violated preconditions."""

    exit_code = 2


class DimensionError(InputError):
    pass


class ValidationError(InputError):
    pass


class CapacityError(InputError):
    pass


class ConflictError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class CycleError(ValidationError):
    def __init__(self, cycle: Sequence[int]):
        self.cycle = list(cycle)
        path = " -> ".join(str(n) for n in self.cycle)
        super().__init__(f"collaboration graph has a directed cycle: {path}")


class LookupFailure(TopologyDesignerError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class GraphError(TopologyDesignerError):
    """A value that was not recorded on the tape reached backward()."""

    exit_code = 2


class NonFiniteLossError(TopologyDesignerError):
    exit_code = 3

    def __init__(self, example_id: Any, value: float):
        self.example_id = example_id
        self.value = value
        super().__init__(f"non-finite loss {value!r} on training example {example_id}")


class EmptyTopologyError(TopologyDesignerError):
    exit_code = 4

    def __init__(self, message: str = "END was selected at step 1; no agents were generated"):
        super().__init__(message)


class BackendError(TopologyDesignerError):
    exit_code = 5


class ExecutionError(BackendError):
    """Backend failure mid-run; the transcript recorded so far is preserved."""

    def __init__(self, message: str, partial_transcript: Optional[Any] = None):
        super().__init__(message)
        self.partial_transcript = partial_transcript
