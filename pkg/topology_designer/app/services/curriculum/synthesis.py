"""Two-phase corpus synthesis: exploration, pruning and the efficiency mix."""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
from more_itertools import chunked
from tqdm import tqdm

from topology_designer.app.core.errors import InputError
from topology_designer.app.core.logger import logger
from topology_designer.app.core.settings import DecodePolicy, PruneMode
from topology_designer.app.core.state import CollabGraph, Source, TrainingExample
from topology_designer.app.services.utils import derive_seed

from .blueprints import ConfigBlueprint, build_graph
from .oracle import SuccessOracle, TaskSpec


def _instance(
    task: TaskSpec, blueprint: ConfigBlueprint, sample: int, oracle: SuccessOracle, seed: int, pool: Sequence[str], source: Source
) -> Optional[TrainingExample]:
    graph = build_graph(blueprint, derive_seed(seed, f"{task.id}/{blueprint.label}/{sample}"), pool)
    try:
        success = oracle(task, graph)
    except Exception as e:
        logger.warning(f"Oracle failed on task {task.id} with {blueprint.label}; skipping: {e}")
        return None
    if not success:
        return None
    return TrainingExample(
        query=task.task_query, graph=graph.with_meta(query=task.query, source=source), source=source, task_id=task.id
    )


def _synthesize(
    tasks: Sequence[TaskSpec],
    configs: Sequence[ConfigBlueprint],
    oracle: SuccessOracle,
    seed: int,
    pool: Sequence[str],
    source: Source,
    samples_per_config: int,
    workers: int,
    show_progress: bool,
) -> list[TrainingExample]:
    product = list(itertools.product(tasks, configs, range(samples_per_config)))
    results: list[Optional[TrainingExample]] = []
    with ThreadPoolExecutor(max_workers=workers) as executor, tqdm(
        total=len(product), desc=f"Synthesizing {source}", disable=not show_progress
    ) as progress:
        for batch in chunked(product, max(workers, 1) * 16):
            # map() keeps product order regardless of completion order
            results.extend(executor.map(lambda item: _instance(*item, oracle, seed, pool, source), batch))
            progress.update(len(batch))
    dataset = [example for example in results if example is not None]
    if not dataset:
        logger.warning(f"⚠️ No successful {source} instances out of {len(product)}")
    else:
        logger.info(f"Kept {len(dataset)}/{len(product)} {source} instances")
    return dataset


def synth_exploration(
    tasks: Sequence[TaskSpec],
    complex_configs: Sequence[ConfigBlueprint],
    oracle: SuccessOracle,
    seed: int,
    pool: Sequence[str] = (),
    samples_per_config: int = 1,
    workers: int = 1,
    show_progress: bool = False,
) -> list[TrainingExample]:
    """D_exp: every successful (task, complex config) instance."""
    return _synthesize(tasks, complex_configs, oracle, seed, pool, "exp", samples_per_config, workers, show_progress)


def synth_simple(
    tasks: Sequence[TaskSpec],
    simple_configs: Sequence[ConfigBlueprint],
    oracle: SuccessOracle,
    seed: int,
    pool: Sequence[str] = (),
    samples_per_config: int = 1,
    workers: int = 1,
    show_progress: bool = False,
) -> list[TrainingExample]:
    return _synthesize(tasks, simple_configs, oracle, seed, pool, "simple", samples_per_config, workers, show_progress)


def single_removals(graph: CollabGraph) -> list[CollabGraph]:
    """Edge removals in lexicographic order, then node removals by ascending id."""
    variants = [graph.without_edge(edge) for edge in graph.edges]
    if graph.num_nodes > 1:
        variants.extend(graph.without_node(node) for node in range(1, graph.num_nodes + 1))
    return variants


def _as_pruned(example: TrainingExample, graph: CollabGraph) -> TrainingExample:
    return TrainingExample(
        query=example.query,
        graph=graph.with_meta(query=example.query.text, source="pruned"),
        source="pruned",
        task_id=example.task_id,
    )


def prune_variants(example: TrainingExample, oracle: SuccessOracle, task: TaskSpec) -> list[TrainingExample]:
    return [_as_pruned(example, graph) for graph in single_removals(example.graph) if oracle(task, graph)]


def prune_minimal(example: TrainingExample, oracle: SuccessOracle, task: TaskSpec) -> list[TrainingExample]:
    """Take the first surviving single removal until none survives.

    Returns the end of that walk, or [] when no single removal of the input succeeds.
    """
    graph, steps = example.graph, 0
    while True:
        survivor = next((g for g in single_removals(graph) if oracle(task, g)), None)
        if survivor is None:
            break
        graph, steps = survivor, steps + 1
    return [_as_pruned(example, graph)] if steps else []


def prune_dataset(
    examples: Sequence[TrainingExample],
    oracle: SuccessOracle,
    tasks: Sequence[TaskSpec],
    mode: PruneMode = "single",
) -> list[TrainingExample]:
    prune = prune_minimal if mode == "greedy" else prune_variants
    by_id = {task.id: task for task in tasks}
    pruned = []
    for example in examples:
        task = by_id.get(example.task_id)
        if task is None:
            logger.warning(f"No task spec for example with task id {example.task_id!r}; not pruned")
            continue
        pruned.extend(prune(example, oracle, task))
    logger.info(f"Pruning ({mode}) produced {len(pruned)} variants from {len(examples)} examples")
    return pruned


def prune_generated(
    model,
    tasks: Sequence[TaskSpec],
    registry,
    oracle: SuccessOracle,
    policy: DecodePolicy,
    provider,
    mode: PruneMode = "single",
) -> list[TrainingExample]:
    """Prune graphs decoded by a (phase-1) model instead of stored exploration graphs."""
    from topology_designer.app.services.generator import generate_with_retries

    examples = []
    for task in tasks:
        graph, _ = generate_with_retries(model, task.task_query, registry, policy, provider)
        if oracle(task, graph):
            examples.append(TrainingExample(query=task.task_query, graph=graph, source="exp", task_id=task.id))
    return prune_dataset(examples, oracle, tasks, mode)


def assemble_efficiency(
    simple: Sequence[TrainingExample],
    pruned: Sequence[TrainingExample],
    exp: Sequence[TrainingExample],
    replay_fraction: float,
    seed: int,
) -> list[TrainingExample]:
    """D_eff = D_simple + D_pruned + a seeded replay sample of ceil(f * |D_exp|) items."""
    if not 0.0 <= replay_fraction <= 1.0:
        raise InputError(f"replay fraction must lie in [0, 1], got {replay_fraction}")
    count = math.ceil(round(replay_fraction * len(exp), 9))
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(exp), size=count, replace=False).tolist()) if count else []
    replay = [exp[k].tagged("replay") for k in picked]
    logger.info(f"Efficiency set: {len(simple)} simple, {len(pruned)} pruned, {len(replay)} replay")
    return [*(ex.tagged("simple") for ex in simple), *(ex.tagged("pruned") for ex in pruned), *replay]
