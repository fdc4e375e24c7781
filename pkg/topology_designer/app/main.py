# main.py
"""Command-line surface: synth-data, train, generate, run, eval, export-dot, extend-roles."""
import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
import pydantic
import yaml

from topology_designer.app.core.errors import ExecutionError, InputError, TopologyDesignerError
from topology_designer.app.core.logger import configure_logging, logger
from topology_designer.app.core.settings import RunConfig, load_run_config
from topology_designer.app.core.state import TaskQuery
from topology_designer.app.services.curriculum import (
    ConfigBlueprint,
    RuleBasedOracle,
    TaskSpec,
    assemble_efficiency,
    build_graph,
    default_complex_configs,
    default_simple_configs,
    load_task_suite,
    prune_dataset,
    prune_generated,
    read_dataset,
    synth_exploration,
    synth_simple,
    write_dataset,
)
from topology_designer.app.services.embeddings import (
    EmbeddingProvider,
    RoleRegistry,
    extend_registry,
    get_embedding_provider,
    load_role_pool,
    register_roles,
    role_pool_to_json,
)
from topology_designer.app.services.generator import (
    TopologyGenerator,
    generate_with_retries,
    read_graph,
    to_dot,
    write_dot,
    write_graph,
)
from topology_designer.app.services.runtime import (
    RuntimeOracle,
    Transcript,
    execute,
    get_backend,
    success_oracle,
    write_transcript,
)
from topology_designer.app.services.training import (
    load_checkpoint,
    save_checkpoint,
    train_phase,
    write_report,
)
from topology_designer.app.services.utils import atomic_write_text, derive_seed, write_json

TOPOLOGIES = ("chain", "star", "tree", "complete", "random")


def with_component_seeds(cfg: RunConfig) -> RunConfig:
    """Split the root seed into per-component seeds by fixed labels."""
    root = cfg.seed
    return cfg.model_copy(
        update={
            "model": cfg.model.model_copy(update={"seed": derive_seed(root, "model")}),
            "train": cfg.train.model_copy(update={"seed": derive_seed(root, "train")}),
            "decode": cfg.decode.model_copy(update={"seed": derive_seed(root, "decode")}),
        }
    )


def load_registry(cfg: RunConfig) -> tuple[RoleRegistry, EmbeddingProvider]:
    provider = get_embedding_provider(cfg.embedding, cfg.model.d_raw)
    registry = register_roles(load_role_pool(cfg.paths.role_pool), provider, seed=derive_seed(cfg.seed, "registry"))
    return registry, provider


def role_descriptions(cfg: RunConfig) -> dict[str, str]:
    if not Path(cfg.paths.role_pool).exists():
        return {}
    return {spec.name: spec.description for spec in load_role_pool(cfg.paths.role_pool)}


def checkpoint_path(cfg: RunConfig, phase: str) -> str:
    name = "phase1.json" if phase == "cold_start" else "phase2.json"
    return str(Path(cfg.paths.checkpoint_dir) / name)


def latest_checkpoint(cfg: RunConfig, explicit: Optional[str]) -> str:
    if explicit:
        return explicit
    phases = ("cold_start",) if cfg.train.skip_fine_tune else ("fine_tune", "cold_start")
    for phase in phases:
        candidate = checkpoint_path(cfg, phase)
        if Path(candidate).exists():
            return candidate
    raise InputError(f"no checkpoint found in {cfg.paths.checkpoint_dir}; run train first")


def _task_lookup(tasks: Sequence[TaskSpec], task_id: str) -> TaskSpec:
    for task in tasks:
        if task.id == task_id:
            return task
    raise InputError(f"task {task_id!r} is not in the task suite")


def _verdict(task: TaskSpec, transcript: Transcript) -> int:
    mode = "answer" if task.expected_answer is not None else "structural"
    return success_oracle(task.task_query, transcript, task, mode)


def _close(backend) -> None:
    close = getattr(backend, "close", None)
    if close is not None:
        close()


# commands


def cmd_synth(args, cfg: RunConfig) -> int:
    registry, provider = load_registry(cfg)
    tasks = load_task_suite(cfg.paths.task_suite)
    pool = registry.names
    if args.oracle == "runtime":
        oracle = RuntimeOracle(get_backend(cfg.backend, derive_seed(cfg.seed, "backend")), cfg.rounds, cfg.strategy)
    else:
        oracle = RuleBasedOracle()
    exp = synth_exploration(
        tasks, default_complex_configs(), oracle, derive_seed(cfg.seed, "synth/exp"), pool, workers=cfg.workers
    )
    if args.prune_generated:
        model = load_checkpoint(latest_checkpoint(cfg, args.checkpoint), registry)
        pruned = prune_generated(model, tasks, registry, oracle, cfg.decode, provider, cfg.prune_mode)
    else:
        pruned = prune_dataset(exp, oracle, tasks, cfg.prune_mode)
    simple = synth_simple(
        tasks, default_simple_configs(), oracle, derive_seed(cfg.seed, "synth/simple"), pool, workers=cfg.workers
    )
    eff = assemble_efficiency(simple, pruned, exp, cfg.replay_fraction, derive_seed(cfg.seed, "synth/replay"))
    data_dir = Path(cfg.paths.data_dir)
    write_dataset(str(data_dir / "d_exp.jsonl"), exp)
    write_dataset(str(data_dir / "d_eff.jsonl"), eff)
    counts = pd.Series([ex.source for ex in [*exp, *eff]], dtype="object").value_counts().sort_index()
    for source, count in counts.items():
        print(f"{source}: {count}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    phase = args.phase.replace("-", "_")
    if phase == "fine_tune" and cfg.train.skip_fine_tune:
        logger.warning("⚠️ train.skip_fine_tune is set; fine-tuning skipped")
        print("fine-tune skipped")
        return 0
    registry, provider = load_registry(cfg)
    default_dataset = "d_exp.jsonl" if phase == "cold_start" else "d_eff.jsonl"
    dataset = read_dataset(args.dataset or str(Path(cfg.paths.data_dir) / default_dataset))
    if phase == "cold_start":
        model = TopologyGenerator(cfg.model, registry=registry)
    else:
        init = args.init_checkpoint or checkpoint_path(cfg, "cold_start")
        if not Path(init).exists():
            raise InputError(f"fine-tune needs a phase-1 checkpoint, not found: {init}")
        model = load_checkpoint(init, registry)
    trained, report = train_phase(model, dataset, cfg.train, phase, registry, provider)
    output = args.output or checkpoint_path(cfg, phase)
    save_checkpoint(output, trained, registry)
    report.checkpoint_path = output
    write_report(str(Path(output).with_name(Path(output).stem + "_report.json")), report)
    print(f"final mean loss: {report.final_loss:.6f}")
    print(f"checkpoint: {output}")
    return 0


def cmd_generate(args, cfg: RunConfig) -> int:
    registry, provider = load_registry(cfg)
    model = load_checkpoint(latest_checkpoint(cfg, args.checkpoint), registry)
    updates = {"n_max": args.n_max if args.n_max is not None else min(cfg.decode.n_max, model.n_max)}
    if args.mode:
        updates["mode"] = args.mode
    policy = cfg.decode.model_copy(update=updates)
    graph, trace = generate_with_retries(model, TaskQuery(text=args.query), registry, policy, provider)
    output = args.output or str(Path(cfg.paths.output_dir) / "graph.json")
    write_graph(output, graph)
    if args.export_dot:
        write_dot(args.export_dot, graph)
    print(f"nodes: {graph.num_nodes}")
    print(f"edges: {graph.num_edges}")
    print(f"log-prob: {trace.total_log_prob:.6f}")
    return 0


def cmd_run(args, cfg: RunConfig) -> int:
    graph = read_graph(args.graph)
    strategy = (args.strategy or cfg.strategy).replace("_", "-")
    query_text = args.query or graph.query
    if not query_text:
        raise InputError("no query given and the graph file carries none")
    output = args.output or str(Path(cfg.paths.output_dir) / "transcript.json")
    backend = get_backend(cfg.backend, derive_seed(cfg.seed, "backend"))
    try:
        transcript = execute(
            graph,
            TaskQuery(text=query_text),
            args.rounds if args.rounds is not None else cfg.rounds,
            backend,
            strategy,
            terminal_agent=args.terminal_agent if args.terminal_agent is not None else cfg.terminal_agent,
            descriptions=role_descriptions(cfg),
            concurrent=cfg.workers > 1,
            max_in_flight=cfg.backend.max_in_flight,
        )
    except ExecutionError as e:
        if e.partial_transcript is not None:
            write_transcript(output, e.partial_transcript)
            logger.warning(f"⚠️ Partial transcript written to {output}")
        raise
    finally:
        _close(backend)
    write_transcript(output, transcript)
    print(f"final: {transcript.final}")
    if args.task_id:
        task = _task_lookup(load_task_suite(cfg.paths.task_suite), args.task_id)
        print(f"success: {_verdict(task, transcript)}")
    print(f"total prompt tokens: {transcript.total_prompt_tokens}")
    return 0


def _eval_task(args, cfg: RunConfig, task: TaskSpec, model, registry, provider, backend, descriptions) -> dict:
    if args.topology:
        blueprint = ConfigBlueprint(topology=args.topology, agent_num=args.agents)
        graph = build_graph(blueprint, derive_seed(cfg.seed, f"eval/{task.id}"), registry.names)
    else:
        policy = cfg.decode.model_copy(update={"n_max": min(cfg.decode.n_max, model.n_max)})
        graph, _ = generate_with_retries(model, task.task_query, registry, policy, provider)
    transcript = execute(
        graph, task.task_query, cfg.rounds, backend, cfg.strategy,
        terminal_agent=cfg.terminal_agent, descriptions=descriptions,
    )
    return {
        "task_id": task.id,
        "success": _verdict(task, transcript),
        "nodes": graph.num_nodes,
        "edges": graph.num_edges,
        "prompt_tokens": transcript.total_prompt_tokens,
    }


def cmd_eval(args, cfg: RunConfig) -> int:
    tasks = load_task_suite(cfg.paths.task_suite)
    registry, provider = load_registry(cfg)
    checkpoint = None if args.topology else latest_checkpoint(cfg, args.checkpoint)
    model = load_checkpoint(checkpoint, registry) if checkpoint else None
    descriptions = role_descriptions(cfg)
    backend = get_backend(cfg.backend, derive_seed(cfg.seed, "backend"))
    try:
        rows = [_eval_task(args, cfg, task, model, registry, provider, backend, descriptions) for task in tasks]
    finally:
        _close(backend)
    frame = pd.DataFrame(rows)
    report = {
        "method": args.topology or "generator",
        "checkpoint": checkpoint,
        "per_task": frame.to_dict(orient="records"),
        "success_rate": float(frame["success"].mean()),
        "mean_nodes": float(frame["nodes"].mean()),
        "mean_edges": float(frame["edges"].mean()),
        "mean_prompt_tokens": float(frame["prompt_tokens"].mean()),
    }
    output = args.output or str(Path(cfg.paths.output_dir) / "eval_report.json")
    write_json(output, report)
    print(f"success rate: {report['success_rate']:.3f}")
    print(f"mean edges: {report['mean_edges']:.3f}")
    print(f"mean prompt tokens: {report['mean_prompt_tokens']:.1f}")
    return 0


def cmd_export_dot(args, cfg: RunConfig) -> int:
    graph = read_graph(args.graph)
    if args.output:
        write_dot(args.output, graph)
    else:
        sys.stdout.write(to_dot(graph))
    return 0


def cmd_extend_roles(args, cfg: RunConfig) -> int:
    pool_path = args.pool or cfg.paths.role_pool
    current = load_role_pool(pool_path)
    new_roles = load_role_pool(args.new)
    provider = get_embedding_provider(cfg.embedding, cfg.model.d_raw)
    registry = register_roles(current, provider, seed=derive_seed(cfg.seed, "registry"))
    extended = extend_registry(registry, new_roles, provider)
    atomic_write_text(args.output or pool_path, role_pool_to_json([*current, *new_roles]))
    print(f"roles: {len(registry)} -> {len(extended)}")
    return 0


COMMANDS = {
    "synth-data": cmd_synth,
    "train": cmd_train,
    "generate": cmd_generate,
    "run": cmd_run,
    "eval": cmd_eval,
    "export-dot": cmd_export_dot,
    "extend-roles": cmd_extend_roles,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML run configuration")
    common.add_argument("--seed", type=int, help="Root seed (overrides the config file)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (overrides LOG_LEVEL)")

    parser = argparse.ArgumentParser(
        prog="topology-designer", description="Generate, train and execute multi-agent collaboration topologies"
    )
    subparsers = parser.add_subparsers(dest="command")

    synth = subparsers.add_parser("synth-data", parents=[common], help="Synthesize the two training corpora")
    synth.add_argument("--oracle", choices=["rule", "runtime"], default="rule")
    synth.add_argument("--prune-generated", action="store_true", help="Prune graphs decoded by a checkpoint")
    synth.add_argument("--checkpoint")

    train = subparsers.add_parser("train", parents=[common], help="Run one training phase")
    train.add_argument("--phase", choices=["cold-start", "fine-tune"], required=True)
    train.add_argument("--dataset")
    train.add_argument("--init-checkpoint", help="Phase-1 checkpoint for fine-tuning")
    train.add_argument("--output", help="Checkpoint manifest path")

    gen = subparsers.add_parser("generate", parents=[common], help="Generate a topology for a query")
    gen.add_argument("--query", required=True)
    gen.add_argument("--checkpoint")
    gen.add_argument("--skip-fine-tune", action="store_true", help="Use the cold-start checkpoint")
    gen.add_argument("--n-max", type=int)
    gen.add_argument("--mode", choices=["greedy", "sample"])
    gen.add_argument("--output")
    gen.add_argument("--export-dot")

    run = subparsers.add_parser("run", parents=[common], help="Execute a graph file")
    run.add_argument("--graph", required=True)
    run.add_argument("--query")
    run.add_argument("--rounds", type=int)
    run.add_argument("--strategy", choices=["majority-vote", "terminal-agent", "last-in-order", "summarizer"])
    run.add_argument("--terminal-agent", type=int)
    run.add_argument("--task-id")
    run.add_argument("--output")

    ev = subparsers.add_parser("eval", parents=[common], help="Evaluate the generator or a fixed topology")
    ev.add_argument("--checkpoint")
    ev.add_argument("--skip-fine-tune", action="store_true", help="Evaluate the cold-start checkpoint")
    ev.add_argument("--topology", choices=TOPOLOGIES, help="Evaluate a fixed-topology baseline instead")
    ev.add_argument("--agents", type=int, default=4)
    ev.add_argument("--output")

    dot = subparsers.add_parser("export-dot", parents=[common], help="Convert a graph file to DOT")
    dot.add_argument("--graph", required=True)
    dot.add_argument("--output")

    ext = subparsers.add_parser("extend-roles", parents=[common], help="Append roles to a role pool")
    ext.add_argument("--new", required=True, help="Role-pool file with the roles to append")
    ext.add_argument("--pool")
    ext.add_argument("--output")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0

    try:
        if args.log_level:
            configure_logging(args.log_level)
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
        if getattr(args, "skip_fine_tune", False):
            cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"skip_fine_tune": True})})
        return COMMANDS[args.command](args, with_component_seeds(cfg))
    except KeyboardInterrupt:
        print("\nInterrupted by user")
        return 130
    except TopologyDesignerError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except (pydantic.ValidationError, yaml.YAMLError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
