import itertools
import math
from pathlib import Path

import pytest

from topology_designer.app.core.errors import CycleError, InputError, ValidationError
from topology_designer.app.core.settings import DecodePolicy
from topology_designer.app.core.state import make_graph
from topology_designer.app.services.curriculum import (
    Always,
    ConfigBlueprint,
    HubRolePresent,
    Never,
    NodeCount,
    PathBetweenRoles,
    RuleBasedOracle,
    TaskSpec,
    assemble_efficiency,
    build_graph,
    canonical_order,
    default_complex_configs,
    default_simple_configs,
    find_cycle,
    has_path,
    in_canonical_order,
    load_task_suite,
    prune_dataset,
    prune_generated,
    prune_minimal,
    prune_variants,
    read_dataset,
    single_removals,
    synth_exploration,
    synth_simple,
    topology_family,
    write_dataset,
)

from .conftest import example

DATA_DIR = Path(__file__).resolve().parent.parent / "topology_designer" / "data"
POOL = ("a", "b", "c")


def path_task(**overrides) -> TaskSpec:
    fields = dict(
        id="path-a-c",
        query="Route the analysis from a to c",
        required_roles=("a", "c"),
        predicate=PathBetweenRoles(src="a", dst="c"),
    )
    fields.update(overrides)
    return TaskSpec(**fields)


def reachable(nodes, edges, src, dst):
    """Plain DFS used as an independent reference."""
    stack, seen = [src], set()
    while stack:
        node = stack.pop()
        for j, i in edges:
            if j == node and i not in seen:
                if i == dst:
                    return True
                seen.add(i)
                stack.append(i)
    return False


def brute_force_survivors(nodes, edges, required, src_role, dst_role):
    def passes(ns, es):
        if any(ns.count(r) < required.count(r) for r in set(required)):
            return False
        ids = range(1, len(ns) + 1)
        return any(
            ns[a - 1] == src_role and ns[b - 1] == dst_role and a != b and reachable(ns, es, a, b)
            for a in ids
            for b in ids
        )

    survivors = []
    for kept in itertools.combinations(sorted(edges), max(len(edges) - 1, 0)) if edges else ():
        if passes(list(nodes), list(kept)):
            survivors.append((tuple(nodes), tuple(sorted(kept))))
    for drop in range(1, len(nodes) + 1):
        rest = [n for k, n in enumerate(nodes, start=1) if k != drop]
        renum = {old: new for new, old in enumerate([k for k in range(1, len(nodes) + 1) if k != drop], start=1)}
        kept = sorted((renum[j], renum[i]) for j, i in edges if drop not in (j, i))
        if passes(rest, kept):
            survivors.append((tuple(rest), tuple(kept)))
    return survivors


class TestOrdering:
    def test_identity_for_generation_ordered_graph(self):
        graph = make_graph(["a", "b", "c"], [(1, 2), (2, 3)])
        assert canonical_order(graph) == [1, 2, 3]
        assert in_canonical_order(graph) is graph

    def test_smallest_ready_node_first(self):
        graph = make_graph(["x", "y", "z"], [(3, 1), (2, 1)])
        assert canonical_order(graph) == [2, 3, 1]
        relabelled = in_canonical_order(graph)
        assert relabelled.nodes == ("y", "z", "x")
        assert relabelled.edges == ((1, 3), (2, 3))

    def test_cycle_is_reported(self):
        graph = make_graph(["a", "b", "c"], [(1, 2), (2, 3), (3, 2)])
        assert find_cycle(graph) == [2, 3, 2]
        with pytest.raises(CycleError) as info:
            canonical_order(graph)
        assert info.value.cycle == [2, 3, 2]

    def test_self_loop(self):
        assert find_cycle(make_graph(["a"], [(1, 1)])) == [1, 1]

    def test_dag_has_no_cycle(self):
        assert find_cycle(make_graph(["a", "b", "c"], [(1, 3), (2, 3)])) is None

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            canonical_order(make_graph(["a"], [(1, 2)]))

    def test_has_path(self):
        graph = make_graph(["a", "b", "c", "d"], [(1, 2), (2, 3)])
        assert has_path(graph, 1, 3)
        assert not has_path(graph, 3, 1)
        assert not has_path(graph, 1, 4)
        assert not has_path(graph, 1, 1)


class TestBlueprints:
    def test_fixed_structures(self):
        assert build_graph(ConfigBlueprint(topology="chain", agent_num=3, roles=POOL), 0).edges == ((1, 2), (2, 3))
        assert build_graph(ConfigBlueprint(topology="star", agent_num=3, roles=POOL), 0).edges == ((1, 2), (1, 3))
        complete = build_graph(ConfigBlueprint(topology="complete", agent_num=4), 0, POOL)
        assert complete.num_edges == 6

    def test_random_extremes(self):
        empty = build_graph(ConfigBlueprint(topology="random", agent_num=5, edge_prob=0.0), 1, POOL)
        full = build_graph(ConfigBlueprint(topology="random", agent_num=5, edge_prob=1.0), 1, POOL)
        assert empty.num_edges == 0
        assert full.num_edges == 10

    def test_tree_has_one_parent_per_node(self):
        for seed in range(20):
            graph = build_graph(ConfigBlueprint(topology="tree", agent_num=6), seed, POOL)
            for node in range(2, 7):
                assert len(graph.in_neighbors(node)) == 1
                assert graph.in_neighbors(node)[0] < node

    def test_seeded(self):
        blueprint = ConfigBlueprint(topology="random", agent_num=6)
        assert build_graph(blueprint, 42, POOL) == build_graph(blueprint, 42, POOL)
        assert build_graph(blueprint, 42, POOL).source == "random-p0.5-6"

    def test_invalid_blueprints(self):
        with pytest.raises(ValueError):
            ConfigBlueprint(topology="star", agent_num=1)
        with pytest.raises(ValueError):
            ConfigBlueprint(topology="chain", agent_num=2, roles=("a",))
        with pytest.raises(ValidationError):
            build_graph(ConfigBlueprint(topology="chain", agent_num=2), 0, ())

    def test_defaults(self):
        assert {bp.topology for bp in default_complex_configs()} == {"complete", "random", "star"}
        assert max(bp.agent_num for bp in default_simple_configs()) <= 3

    @pytest.mark.parametrize(
        "edges, family",
        [
            ([(1, 2), (2, 3), (3, 4)], "chain"),
            ([(1, 2), (1, 3), (1, 4)], "star"),
            ([(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)], "complete"),
            ([(1, 2), (2, 3), (2, 4)], "tree"),
            ([(1, 3), (2, 3)], "other"),
        ],
    )
    def test_topology_family(self, edges, family):
        assert topology_family(make_graph(["a"] * 4 if family != "other" else ["a"] * 3, edges)) == family


class TestOracle:
    def test_predicates(self):
        star = make_graph(["hub", "x", "y"], [(1, 2), (1, 3)])
        assert HubRolePresent(role="hub").holds(star)
        assert not HubRolePresent(role="x").holds(star)
        assert not HubRolePresent(role="hub").holds(make_graph(["hub"]))
        assert NodeCount(min=2, max=3).holds(star)
        assert not NodeCount(max=2).holds(star)
        assert PathBetweenRoles(src="hub", dst="y").holds(star)
        assert not PathBetweenRoles(src="x", dst="y").holds(star)
        assert Always().holds(star) and not Never().holds(star)

    def test_rule_based_oracle_needs_role_multiset(self):
        task = path_task(required_roles=("a", "a", "c"))
        oracle = RuleBasedOracle()
        assert not oracle(task, make_graph(["a", "c"], [(1, 2)]))
        assert oracle(task, make_graph(["a", "a", "c"], [(1, 3)]))
        assert not oracle(task, make_graph([]))

    def test_bundled_suite(self):
        tasks = load_task_suite(str(DATA_DIR / "task_suite.json"))
        assert len(tasks) == 8
        by_id = {task.id: task for task in tasks}
        assert by_id["medical-qa"].expected_answer == "pancreas"
        assert isinstance(by_id["math-plan"].predicate, HubRolePresent)

    @pytest.mark.parametrize("payload", ["[]", '{"id": "x"}', '[{"id": "x", "query": "q"}, {"id": "x", "query": "r"}]'])
    def test_bad_suites(self, tmp_path, payload):
        path = tmp_path / "suite.json"
        path.write_text(payload)
        with pytest.raises(InputError):
            load_task_suite(str(path))


class TestPruning:
    def test_removal_order(self):
        graph = make_graph(["a", "b"], [(1, 2)])
        variants = single_removals(graph)
        assert [v.structure() for v in variants] == [
            (("a", "b"), ()),
            (("b",), ()),
            (("a",), ()),
        ]
        assert single_removals(make_graph(["a"])) == []

    def test_matches_brute_force_on_complete_graph(self):
        edges = [(1, 2), (1, 3), (2, 3)]
        task = path_task()
        source = example(task.query, POOL, edges, task_id=task.id)
        kept = prune_variants(source, RuleBasedOracle(), task)
        expected = brute_force_survivors(list(POOL), edges, ["a", "c"], "a", "c")
        assert sorted(v.graph.structure() for v in kept) == sorted(expected)
        assert len(kept) == 4
        assert all(v.source == "pruned" and v.graph.source == "pruned" for v in kept)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_on_random_graphs(self, seed):
        graph = build_graph(ConfigBlueprint(topology="random", agent_num=5, edge_prob=0.6), seed, POOL)
        task = path_task(required_roles=("a",))
        source = example(task.query, graph.nodes, graph.edges, task_id=task.id)
        kept = prune_variants(source, RuleBasedOracle(), task)
        expected = brute_force_survivors(list(graph.nodes), list(graph.edges), ["a"], "a", "c")
        assert sorted(v.graph.structure() for v in kept) == sorted(expected)

    def test_prune_dataset_skips_unknown_tasks(self):
        task = path_task()
        examples = [example(task.query, POOL, [(1, 2), (2, 3)], task_id=task.id), example("other", POOL, task_id="nope")]
        pruned = prune_dataset(examples, RuleBasedOracle(), [task])
        # removing either edge breaks the only a -> c path; dropping b disconnects too
        assert pruned == []

    def test_prune_generated(self, model, registry, provider):
        task = TaskSpec(id="any", query="Do anything at all")
        policy = DecodePolicy(mode="sample", seed=5, n_max=4, retries=30)
        pruned = prune_generated(model, [task], registry, RuleBasedOracle(), policy, provider)
        assert all(ex.source == "pruned" and ex.task_id == "any" for ex in pruned)

    def test_greedy_descends_to_the_direct_edge(self):
        task = path_task()
        source = example(task.query, POOL, [(1, 2), (1, 3), (2, 3)], task_id=task.id)
        (minimal,) = prune_minimal(source, RuleBasedOracle(), task)
        assert minimal.graph.structure() == (("a", "c"), ((1, 2),))
        assert minimal.source == "pruned" and minimal.task_id == task.id
        assert minimal.graph.query == task.query

    def test_greedy_leaves_minimal_graphs_alone(self):
        task = path_task()
        source = example(task.query, POOL, [(1, 2), (2, 3)], task_id=task.id)
        assert prune_minimal(source, RuleBasedOracle(), task) == []

    @pytest.mark.parametrize("seed", range(5))
    def test_greedy_result_is_successful_and_minimal(self, seed):
        graph = build_graph(ConfigBlueprint(topology="complete", agent_num=5), seed, POOL)
        task = path_task(required_roles=("a",))
        source = example(task.query, graph.nodes, graph.edges, task_id=task.id)
        oracle = RuleBasedOracle()
        for minimal in prune_minimal(source, oracle, task):
            assert oracle(task, minimal.graph)
            assert not any(oracle(task, g) for g in single_removals(minimal.graph))
            assert minimal.graph.num_edges < graph.num_edges

    def test_prune_dataset_modes(self):
        task = path_task()
        examples = [example(task.query, POOL, [(1, 2), (1, 3), (2, 3)], task_id=task.id)]
        single = prune_dataset(examples, RuleBasedOracle(), [task])
        assert single == prune_variants(examples[0], RuleBasedOracle(), task)
        greedy = prune_dataset(examples, RuleBasedOracle(), [task], mode="greedy")
        assert [ex.graph.structure() for ex in greedy] == [(("a", "c"), ((1, 2),))]


class TestSynthesis:
    TASKS = [
        path_task(),
        TaskSpec(id="hub", query="Coordinate from a hub", required_roles=("b",), predicate=HubRolePresent(role="b")),
        TaskSpec(id="small", query="Keep it small", predicate=NodeCount(max=2)),
    ]

    def test_every_stored_example_repasses_its_oracle(self):
        oracle = RuleBasedOracle()
        by_id = {task.id: task for task in self.TASKS}
        exp = synth_exploration(self.TASKS, default_complex_configs(), oracle, 11, POOL, samples_per_config=3)
        simple = synth_simple(self.TASKS, default_simple_configs(), oracle, 12, POOL, samples_per_config=3)
        pruned = prune_dataset(exp, oracle, self.TASKS)
        assert exp and simple
        for ex in [*exp, *simple, *pruned]:
            assert oracle(by_id[ex.task_id], ex.graph)
            assert ex.graph.query == ex.query.text
        assert {ex.source for ex in exp} == {"exp"}
        assert {ex.source for ex in simple} == {"simple"}

    def test_worker_count_does_not_change_output(self):
        oracle = RuleBasedOracle()
        single = synth_exploration(self.TASKS, default_complex_configs(), oracle, 3, POOL, samples_per_config=2)
        pooled = synth_exploration(self.TASKS, default_complex_configs(), oracle, 3, POOL, samples_per_config=2, workers=4)
        assert single == pooled

    def test_failing_oracle_calls_are_skipped(self):
        calls = []

        def flaky(task, graph):
            calls.append(task.id)
            if len(calls) % 2:
                raise RuntimeError("backend down")
            return True

        configs = [ConfigBlueprint(topology="chain", agent_num=2)]
        kept = synth_simple([TaskSpec(id="t", query="q")], configs, flaky, 0, POOL, samples_per_config=4)
        assert len(calls) == 4
        assert len(kept) == 2

    def test_no_successes_gives_empty_corpus(self):
        task = TaskSpec(id="never", query="impossible", predicate=Never())
        assert synth_exploration([task], default_complex_configs(), RuleBasedOracle(), 0, POOL) == []


class TestEfficiencyMix:
    def _corpora(self):
        exp = [example(f"q{k}", POOL, [(1, 2), (1, 3), (2, 3)], task_id=f"t{k}") for k in range(7)]
        simple = [example("s", ["a", "b"], [(1, 2)], source="simple")]
        pruned = [example("p", ["a", "c"], [(1, 2)], source="pruned")]
        return simple, pruned, exp

    @pytest.mark.parametrize("fraction", [0.0, 0.1, 0.25, 0.5, 1.0])
    def test_replay_count(self, fraction):
        simple, pruned, exp = self._corpora()
        mixed = assemble_efficiency(simple, pruned, exp, fraction, 9)
        replay = [ex for ex in mixed if ex.source == "replay"]
        assert len(replay) == math.ceil(fraction * len(exp))
        assert [ex.source for ex in mixed[:2]] == ["simple", "pruned"]
        assert all(ex.graph.source == "replay" for ex in replay)
        assert {ex.task_id for ex in replay} <= {ex.task_id for ex in exp}

    def test_seeded_and_ordered(self):
        simple, pruned, exp = self._corpora()
        first = assemble_efficiency(simple, pruned, exp, 0.5, 4)
        assert first == assemble_efficiency(simple, pruned, exp, 0.5, 4)
        ids = [int(ex.task_id[1:]) for ex in first if ex.source == "replay"]
        assert ids == sorted(ids)

    def test_fraction_out_of_range(self):
        simple, pruned, exp = self._corpora()
        with pytest.raises(InputError):
            assemble_efficiency(simple, pruned, exp, 1.5, 0)


def test_dataset_file(tmp_path):
    oracle = RuleBasedOracle()
    exp = synth_exploration([path_task()], default_complex_configs(), oracle, 2, POOL, samples_per_config=2)
    path = tmp_path / "data" / "d_exp.jsonl"
    assert write_dataset(str(path), exp) == len(exp)
    assert read_dataset(str(path)) == exp
    assert len(path.read_text().splitlines()) == len(exp)
