import math

import numpy as np
import pytest

from topology_designer.app.core.errors import (
    CapacityError,
    ConfigurationError,
    DimensionError,
    EmptyTopologyError,
    InputError,
    LookupFailure,
    ValidationError,
)
from topology_designer.app.core.settings import DecodePolicy
from topology_designer.app.core.state import TaskQuery, make_graph
from topology_designer.app.services.embeddings import HashedEmbeddingProvider, RoleSpec, extend_registry, register_roles
from topology_designer.app.services.generator import (
    GeneratorState,
    TopologyGenerator,
    edge_feature,
    edge_sequence,
    fuse_context,
    generate,
    generate_with_retries,
    graph_from_json,
    guided_log_prob,
    history_embed,
    init_params,
    node_step,
    read_graph,
    score_roles,
    to_dot,
    write_graph,
)
from topology_designer.app.services.ndkernel import ParamStore

from .conftest import small_config, steered_model, uniform_model

QUERY = TaskQuery(text="Compute the integral and check the result")
LOG_HALF = math.log(0.5)


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def reference_gru(x, h, w_ih, w_hh, b_ih, b_hh):
    n = h.shape[0]
    gi, gh = w_ih @ x + b_ih, w_hh @ h + b_hh
    reset = _sigmoid(gi[:n] + gh[:n])
    update = _sigmoid(gi[n: 2 * n] + gh[n: 2 * n])
    candidate = np.tanh(gi[2 * n:] + reset * gh[2 * n:])
    return (1.0 - update) * h + update * candidate


class TestStepOperations:
    def test_edge_feature(self):
        prefix = make_graph(["a", "b", "c"], [(1, 3), (2, 3), (1, 2)])
        np.testing.assert_array_equal(edge_feature(prefix, 4, 6), [1, 1, 0, 0, 0])
        np.testing.assert_array_equal(edge_feature(prefix, 3, 6), [1, 0, 0, 0, 0])
        np.testing.assert_array_equal(edge_feature(prefix, 1, 6), np.zeros(5))
        np.testing.assert_array_equal(edge_feature(prefix, 2, 6), np.zeros(5))

    def test_edge_feature_bounds(self):
        with pytest.raises(CapacityError):
            edge_feature(make_graph([]), 0, 6)
        with pytest.raises(CapacityError):
            edge_feature(make_graph(["a"] * 7), 8, 6)

    def test_history_of_empty_prefix_is_initial_vector(self, model, registry):
        np.testing.assert_array_equal(history_embed([], registry, model), model.params["hist_h0"])
        assert history_embed([0, 2], registry, model).shape == (16,)
        with pytest.raises(LookupFailure):
            history_embed([3], registry, model)

    def test_fuse_context_orthogonal(self):
        fused, gate = fuse_context(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert gate == 0.5
        np.testing.assert_array_equal(fused, [0.5, 0.5])

    def test_fuse_context_identical_inputs(self, rng):
        x = rng.normal(size=8)
        fused, gate = fuse_context(x, x)
        assert 0.0 < gate < 1.0
        np.testing.assert_allclose(fused, x, atol=1e-12)

    def test_fuse_context_length_mismatch(self):
        with pytest.raises(DimensionError):
            fuse_context(np.ones(3), np.ones(4))

    def test_history_of_one_role_is_one_gru_step(self, model, registry, rng):
        model.params.set("hist_h0", rng.normal(size=16))
        p = model.params
        expected = reference_gru(registry.row(1), p["hist_h0"], *(p[f"gru_prev.{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")))
        np.testing.assert_allclose(history_embed([1], registry, model), expected, atol=1e-12)

    def test_history_depends_on_order(self, model, registry):
        forward = history_embed([0, 2], registry, model)
        backward = history_embed([2, 0], registry, model)
        assert not np.allclose(forward, backward)

    def test_fuse_context_closed_form(self):
        f_hist = np.array([2.0, 0.0, 0.0, 0.0])
        f_q = np.array([math.log(3.0), 1.0, 0.0, 0.0])
        fused, gate = fuse_context(f_hist, f_q)
        assert gate == pytest.approx(0.75)
        np.testing.assert_allclose(fused, 0.25 * f_hist + 0.75 * f_q, atol=1e-12)

    def test_fuse_context_without_one_input(self, rng):
        f_hist, f_q = rng.normal(size=6), rng.normal(size=6)
        fused, gate = fuse_context(f_hist, f_q, use_task=False)
        assert gate == 0.0
        np.testing.assert_array_equal(fused, f_hist)
        fused, gate = fuse_context(f_hist, f_q, use_history=False)
        assert gate == 1.0
        np.testing.assert_array_equal(fused, f_q)

    def test_node_step_is_mlp_then_gru(self, model, rng):
        p = model.params
        f_cont, f_edge, h = rng.normal(size=16), np.array([1.0, 0.0, 1.0, 0.0, 0.0]), rng.normal(size=16)
        x = np.concatenate([f_cont, f_edge])
        x = p["mlp_node.w2"] @ np.tanh(p["mlp_node.w1"] @ x + p["mlp_node.b1"]) + p["mlp_node.b2"]
        expected = reference_gru(x, h, *(p[f"gru_node.{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")))
        out = node_step(f_cont, f_edge, GeneratorState(h_node=h), model)
        np.testing.assert_allclose(out.h_node, expected, atol=1e-12)

    def test_node_step_keeps_history(self, model):
        state = GeneratorState(h_node=np.zeros(16), history=(0, 1))
        out = node_step(np.ones(16), np.zeros(5), state, model)
        assert out.history == (0, 1)
        assert out.step == 3
        assert out.h_node.shape == (16,)

    def test_score_roles(self, model, registry, rng):
        scores, probs = score_roles(GeneratorState(h_node=rng.normal(size=16)), registry, model)
        assert scores.shape == (4,)
        assert probs.sum() == pytest.approx(1.0)

    def test_edge_sequence_order_and_log_probs(self, config, registry):
        model = uniform_model(config, registry)
        prefix = make_graph(["planner", "solver", "checker"])
        decisions, log_probs = edge_sequence(GeneratorState(h_node=np.zeros(16)), 4, prefix, model, DecodePolicy())
        assert decisions == [(3, True), (2, True), (1, True)]
        assert log_probs == pytest.approx([LOG_HALF] * 3)

    def test_edge_sequence_needs_prefix(self, model):
        with pytest.raises(ValidationError):
            edge_sequence(GeneratorState(h_node=np.zeros(16)), 4, make_graph(["a"]), model, DecodePolicy())


class TestContextAblations:
    def test_without_history_the_context_is_the_query(self, registry, provider):
        model = TopologyGenerator(small_config(use_history_embedding=False), registry=registry)
        np.testing.assert_array_equal(history_embed([0, 2], registry, model), model.params["hist_h0"])
        policy = DecodePolicy(mode="sample", seed=4, n_max=4, retries=30)
        graph, trace = generate_with_retries(model, QUERY, registry, policy, provider)
        assert guided_log_prob(model, QUERY, registry, graph, provider, n_max=4) == trace.total_log_prob

    def test_without_task_embedding_the_query_is_ignored(self, registry, provider):
        model = TopologyGenerator(small_config(use_task_embedding=False), registry=registry)
        graph = make_graph(["planner", "solver"], [(1, 2)])
        first = guided_log_prob(model, QUERY, registry, graph, provider)
        second = guided_log_prob(model, TaskQuery(text="Write a haiku about rain"), registry, graph, provider)
        assert first == second

    def test_full_context_depends_on_the_query(self, registry, provider):
        model = TopologyGenerator(small_config(), registry=registry)
        graph = make_graph(["planner", "solver"], [(1, 2)])
        first = guided_log_prob(model, QUERY, registry, graph, provider)
        second = guided_log_prob(model, TaskQuery(text="Write a haiku about rain"), registry, graph, provider)
        assert first != second


class TestModel:
    def test_init_is_seeded(self, config, registry):
        first, second = init_params(config, registry), init_params(config, registry)
        assert all(first[name].tobytes() == second[name].tobytes() for name in first)
        np.testing.assert_array_equal(first["task_ln.gain"], np.ones(16))
        np.testing.assert_array_equal(first["end_embedding"], registry.end_embedding)

    def test_shape_mismatch(self, config):
        with pytest.raises(ConfigurationError):
            TopologyGenerator(config, params=ParamStore({"w": np.zeros(2)}))

    def test_registry_dimension_mismatch(self, config):
        other = register_roles([("a", "b")], HashedEmbeddingProvider(8))
        with pytest.raises(ConfigurationError):
            init_params(config, other)


class TestGenerate:
    def test_greedy_is_deterministic(self, model, registry, provider):
        policy = DecodePolicy(mode="greedy", n_max=6)
        try:
            first = generate(model, QUERY, registry, policy, provider)
        except EmptyTopologyError:
            pytest.skip("random init picks END first")
        second = generate(model, QUERY, registry, policy, provider)
        assert first[0] == second[0]
        assert first[1] == second[1]

    def test_sampling_is_seeded(self, model, registry, provider):
        policy = DecodePolicy(mode="sample", seed=7, n_max=6, retries=30)
        first = generate_with_retries(model, QUERY, registry, policy, provider)
        second = generate_with_retries(model, QUERY, registry, policy, provider)
        assert first[0] == second[0]
        assert first[1].total_log_prob == second[1].total_log_prob

    def test_generated_graph_invariants(self, model, registry, provider):
        for seed in range(10):
            policy = DecodePolicy(mode="sample", seed=seed, n_max=5, retries=30)
            graph, trace = generate_with_retries(model, QUERY, registry, policy, provider)
            assert 1 <= graph.num_nodes <= 5
            assert all(j < i for j, i in graph.edges)
            assert set(graph.nodes) <= set(registry.names)
            assert graph.query == QUERY.text
            assert trace.ended == (graph.num_nodes < 5)
            assert [step.role for step in trace.steps[: graph.num_nodes]] == list(graph.nodes)
            assert [len(step.edges) for step in trace.steps[: graph.num_nodes]] == list(range(graph.num_nodes))

    def test_trace_matches_replay_bitwise(self, model, registry, provider):
        for seed in range(8):
            policy = DecodePolicy(mode="sample", seed=seed, n_max=6, temperature=1.5, retries=30)
            graph, trace = generate_with_retries(model, QUERY, registry, policy, provider)
            assert guided_log_prob(model, QUERY, registry, graph, provider, n_max=6) == trace.total_log_prob

    def test_temperature_does_not_change_recorded_probabilities(self, config, registry, provider):
        model = uniform_model(config, registry)
        policy = DecodePolicy(mode="sample", seed=3, temperature=5.0, n_max=6, retries=30)
        _, trace = generate_with_retries(model, QUERY, registry, policy, provider)
        for step in trace.steps:
            assert step.node_log_prob == pytest.approx(-math.log(4))
            assert all(e.log_prob == pytest.approx(LOG_HALF) for e in step.edges)

    def test_cap_above_model_capacity(self, model, registry, provider):
        with pytest.raises(CapacityError):
            generate(model, QUERY, registry, DecodePolicy(n_max=7), provider)

    def test_empty_registry(self, config, provider):
        empty = register_roles([], provider)
        with pytest.raises(ConfigurationError):
            generate(TopologyGenerator(config, registry=empty), QUERY, empty, DecodePolicy(n_max=6), provider)

    def test_end_at_first_step(self, provider):
        config = small_config(n_max=3)
        basis = np.eye(16)
        registry = register_roles([RoleSpec(name="a", embedding=tuple(basis[0]))], provider)
        model = steered_model(config, end_row=basis[7], node_bias=basis[7])
        with pytest.raises(EmptyTopologyError):
            generate(model, QUERY, registry, DecodePolicy(n_max=3), provider)
        with pytest.raises(EmptyTopologyError):
            generate_with_retries(model, QUERY, registry, DecodePolicy(mode="sample", n_max=3, temperature=0.01, retries=2), provider)


class TestGuidedLogProb:
    def test_closed_form_under_uniform_model(self, config, registry, provider):
        model = uniform_model(config, registry)
        graph = make_graph(["planner", "solver", "checker"], [(1, 2), (1, 3)])
        # three roles plus END; N < cap adds the END term
        expected = 4 * -math.log(4) + 3 * LOG_HALF
        assert guided_log_prob(model, QUERY, registry, graph, provider) == pytest.approx(expected, abs=1e-9)
        at_cap = 3 * -math.log(4) + 3 * LOG_HALF
        assert guided_log_prob(model, QUERY, registry, graph, provider, n_max=3) == pytest.approx(at_cap, abs=1e-9)

    def test_order_relabels_before_scoring(self, model, registry, provider):
        canonical = make_graph(["planner", "solver", "checker"], [(1, 2), (2, 3)])
        shuffled = make_graph(["checker", "planner", "solver"], [(2, 3), (3, 1)])
        expected = guided_log_prob(model, QUERY, registry, canonical, provider)
        assert guided_log_prob(model, QUERY, registry, shuffled, provider, order=[2, 3, 1]) == expected
        with pytest.raises(ValidationError):
            guided_log_prob(model, QUERY, registry, shuffled, provider, order=[1, 2, 3])
        with pytest.raises(ValidationError):
            guided_log_prob(model, QUERY, registry, shuffled, provider)

    def test_graph_over_cap(self, model, registry, provider):
        with pytest.raises(CapacityError):
            guided_log_prob(model, QUERY, registry, make_graph(["planner"] * 7), provider)

    def test_unknown_role(self, model, registry, provider):
        with pytest.raises(LookupFailure):
            guided_log_prob(model, QUERY, registry, make_graph(["pilot"]), provider)


class TestRoleExtension:
    def test_new_role_becomes_selectable(self, provider):
        config = small_config(n_max=3)
        basis = np.eye(16)
        old = register_roles([RoleSpec(name=f"old{k}", embedding=tuple(basis[k])) for k in range(3)], provider)
        new = extend_registry(old, [RoleSpec(name=f"new{k}", embedding=tuple(basis[3 + k])) for k in range(3)], provider)
        model = steered_model(config, end_row=basis[7], node_bias=2.0 * basis[4] + basis[7])

        with pytest.raises(EmptyTopologyError):
            generate(model, QUERY, old, DecodePolicy(n_max=3), provider)
        graph, trace = generate(model, QUERY, new, DecodePolicy(n_max=3), provider)
        assert graph.nodes == ("new1", "new1", "new1")
        assert graph.edges == ((1, 2), (1, 3), (2, 3))
        assert not trace.ended

    def test_existing_scores_are_bitwise_stable(self, model, registry, provider, rng):
        extended = extend_registry(registry, [("doctor", "Medical expert."), ("lawyer", "Legal expert.")], provider)
        state = GeneratorState(h_node=rng.normal(size=16))
        before, _ = score_roles(state, registry, model)
        after, _ = score_roles(state, extended, model)
        assert after.shape == (6,)
        assert before[:3].tobytes() == after[:3].tobytes()
        assert before[-1] == after[-1]


class TestGraphFiles:
    def test_dot_export(self):
        graph = make_graph(["planner", "solver"], [(1, 2)], query="q")
        assert to_dot(graph) == (
            "digraph topology {\n"
            "  rankdir=LR;\n"
            '  1 [label="1: planner"];\n'
            '  2 [label="2: solver"];\n'
            "  1 -> 2;\n"
            "}\n"
        )

    def test_write_and_read(self, tmp_path):
        graph = make_graph(["planner", "solver", "checker"], [(1, 3), (2, 3)], query="q", source="generated")
        path = tmp_path / "out" / "graph.json"
        write_graph(str(path), graph)
        assert read_graph(str(path)) == graph

    @pytest.mark.parametrize(
        "payload",
        [
            {"edges": []},
            {"nodes": [{"id": 2, "role": "a"}]},
            {"nodes": [{"id": 1, "role": "a"}], "edges": [[1, 2]]},
            {"nodes": [{"id": 1}]},
            [1, 2],
        ],
    )
    def test_malformed_graph_json(self, payload):
        with pytest.raises(InputError):
            graph_from_json(payload)
