"""Dataset files: JSON Lines, one training example per line."""
from typing import Iterable

from topology_designer.app.core.errors import InputError
from topology_designer.app.core.state import TaskQuery, TrainingExample
from topology_designer.app.services.generator import graph_from_json, graph_to_json
from topology_designer.app.services.utils import read_jsonl, write_jsonl


def example_to_record(example: TrainingExample) -> dict:
    record = {"query": example.query.text, "graph": graph_to_json(example.graph), "source": example.source}
    if example.task_id is not None:
        record["task_id"] = example.task_id
    return record


def record_to_example(record: dict) -> TrainingExample:
    try:
        return TrainingExample(
            query=TaskQuery(text=record["query"]),
            graph=graph_from_json(record["graph"]),
            source=record["source"],
            task_id=record.get("task_id"),
        )
    except KeyError as e:
        raise InputError(f"dataset record is missing field {e}") from e


def write_dataset(path: str, examples: Iterable[TrainingExample]) -> int:
    return write_jsonl(path, (example_to_record(example) for example in examples))


def read_dataset(path: str) -> list[TrainingExample]:
    return [record_to_example(record) for record in read_jsonl(path)]
