import json

import pytest

from dreamcraft.agent import (
    AgentConfig,
    AgentState,
    ExplorationComplete,
    dream,
    run,
    run_with_state,
    state_from_json,
    state_to_json,
    wake,
)
from dreamcraft.awm import NodeBelief
from dreamcraft.hypotheses import empty_hypothesis, ground_truth_awm
from dreamcraft.policy import LearnerConfig
from dreamcraft.tech_tree import ItemDef, RecipeEntry, make_tree


def certain_config(**kw) -> AgentConfig:
    kw.setdefault("learner", LearnerConfig(p0=1.0, p_max=1.0))
    kw.setdefault("retry_cap", 1000)
    return AgentConfig(**kw)


def oracle_iterations_to_goal(tree, goal):
    """Independent exhaustive walker: verify one ready node on the goal's
    dependency closure per step, straight from the item definitions."""
    parents = {}
    todo = [goal]
    while todo:
        item = todo.pop()
        if item in parents:
            continue
        parents[item] = {p for p, _, _ in tree.ground_truth_parents(item)}
        todo.extend(parents[item])
    verified = set()
    steps = 0
    while goal not in verified:
        ready = next(i for i in sorted(parents) if i not in verified and parents[i] <= verified)
        verified.add(ready)
        steps += 1
    return steps


def test_goal_run_matches_oracle_on_fixture(tree):
    awm = ground_truth_awm(tree)
    config = certain_config(mode="goal", goal="stone_pickaxe", seed=4, max_iterations=60)
    records = run(config, tree, awm)
    assert len(records) == 7 == oracle_iterations_to_goal(tree, "stone_pickaxe")
    assert records[-1].newly_verified == "stone_pickaxe"
    assert [r.verified_count for r in records] == list(range(1, 8))


def test_goal_run_matches_oracle_for_every_fixture_goal(tree):
    for goal in tree.names():
        config = certain_config(mode="goal", goal=goal, seed=1, max_iterations=80)
        records = run(config, tree, ground_truth_awm(tree))
        assert len(records) == oracle_iterations_to_goal(tree, goal), goal


def small_trees():
    """Handcrafted worlds of at most 8 items covering chains, diamonds, tools,
    and workbench gates."""
    chain = make_tree(
        [
            ItemDef("a", True),
            ItemDef("b", False, recipe=(RecipeEntry("a", 2),)),
            ItemDef("c", False, recipe=(RecipeEntry("b", 3),), craft_yield=2),
            ItemDef("d", False, recipe=(RecipeEntry("c", 1),)),
        ]
    )
    diamond = make_tree(
        [
            ItemDef("ore", True),
            ItemDef("wood", True),
            ItemDef("left", False, recipe=(RecipeEntry("ore", 1),)),
            ItemDef("right", False, recipe=(RecipeEntry("wood", 2),)),
            ItemDef("top", False, recipe=(RecipeEntry("left", 1), RecipeEntry("right", 1))),
        ]
    )
    gated = make_tree(
        [
            ItemDef("wood", True),
            ItemDef("pick", False, recipe=(RecipeEntry("wood", 3),)),
            ItemDef("rock", True, required_tool="pick"),
            ItemDef("crafting_table", False, recipe=(RecipeEntry("wood", 4),)),
            ItemDef(
                "statue", False, requires_crafting_table=True, recipe=(RecipeEntry("rock", 2),)
            ),
        ]
    )
    single = make_tree([ItemDef("pebble", True)])
    return [chain, diamond, gated, single]


def test_oracle_equivalence_on_small_trees():
    for tree in small_trees():
        for goal in tree.names():
            config = certain_config(mode="goal", goal=goal, seed=0, max_iterations=100)
            records = run(config, tree, ground_truth_awm(tree))
            assert len(records) == oracle_iterations_to_goal(tree, goal), (tree.names(), goal)


def test_run_deterministic(tree):
    config = AgentConfig(mode="goal", goal="glass", seed=123, max_iterations=300)
    first = run(config, tree, ground_truth_awm(tree))
    second = run(config, tree, ground_truth_awm(tree))
    assert first == second


def test_run_zero_iterations(tree):
    config = AgentConfig(max_iterations=0)
    assert run(config, tree, ground_truth_awm(tree)) == []


def test_run_rejects_missing_nodes(tree):
    with pytest.raises(ValueError):
        run(AgentConfig(), tree, empty_hypothesis({"log"}))


def test_config_validation():
    with pytest.raises(ValueError):
        AgentConfig(mode="goal")  # goal missing
    with pytest.raises(ValueError):
        AgentConfig(goal="log")  # open-ended with a goal
    with pytest.raises(ValueError):
        AgentConfig(mode="wander")


def test_dream_prunes_to_goal_path(tree):
    awm = ground_truth_awm(tree)
    config = certain_config(mode="goal", goal="stone_pickaxe", seed=0, max_iterations=10)
    state = AgentState.create(tree, awm, config)
    sampled = dream(state, config)
    assert sampled.branch.target == "log"
    assert not sampled.fallback


def test_dream_fallback_after_c0(tree):
    awm = ground_truth_awm(tree)
    config = certain_config(mode="goal", goal="stone_pickaxe", c0=2, seed=0, max_iterations=10)
    state = AgentState.create(tree, awm, config)
    state.counts["log"] = 3  # pruned frontier is exactly {log}
    sampled = dream(state, config)
    assert sampled.fallback
    assert sampled.branch.target in awm.frontier() | awm.verified


def test_dream_completion_signal(tree):
    awm = ground_truth_awm(tree)
    awm.verified = set(awm.nodes)
    config = AgentConfig()
    with pytest.raises(ExplorationComplete):
        dream(AgentState.create(tree, awm, config), config)


def test_dream_degenerate_graph_raises(tree):
    # A node gated behind a parent that is not even in the graph can never be
    # a frontier node; with nothing verified there is nowhere to sample from.
    from dreamcraft.awm import Awm, AwmEdge

    awm = Awm(nodes={"b"}, edges={AwmEdge("ghost", "b", "ingredient", 1)})
    config = AgentConfig()
    state = AgentState.create(tree, awm, config)
    with pytest.raises(RuntimeError, match="degenerate"):
        dream(state, config)


def test_wake_single_collect_verifies_parentless(tree):
    awm = ground_truth_awm(tree)
    config = certain_config(mode="open_ended", seed=0, max_iterations=10)
    state = AgentState.create(tree, awm, config)
    record = wake(state, config, awm.expand_requirements("log"))
    assert record.success and record.newly_verified == "log"
    assert awm.parents_of("log") == []
    assert state.counts["log"] == 1


def test_wake_prefix_failure_charges_steps_and_counts_target(tree):
    awm = ground_truth_awm(tree)
    config = AgentConfig(
        mode="open_ended",
        seed=0,
        max_iterations=10,
        learner=LearnerConfig(p0=0.0, p_max=0.0),
        retry_cap=3,
    )
    state = AgentState.create(tree, awm, config)
    record = wake(state, config, awm.expand_requirements("planks"))
    assert not record.success
    assert record.newly_verified is None
    assert state.awm.verified == set()
    assert record.env_steps == 3000  # three hopeless collect attempts
    assert state.counts["planks"] == 1  # target counted despite never being reached
    assert state.counts["log"] == 1


def test_glass_error_corrected_via_fallback(tree):
    # The flagship correction: glass believed collectable and parentless.
    awm = ground_truth_awm(tree)
    awm.edges = {e for e in awm.edges if e.child != "glass"}
    awm.beliefs["glass"] = NodeBelief(collectable=True)
    config = certain_config(mode="open_ended", c0=4, seed=8, max_iterations=400)
    records, state = run_with_state(config, tree, awm)
    assert "glass" in state.awm.verified
    assert {(e.parent, e.kind) for e in state.awm.parents_of("glass")} == {
        ("sand", "ingredient"),
        ("furnace", "workbench"),
    }
    glass_iters = [r for r in records if r.target == "glass" and not r.fallback]
    assert len(glass_iters) >= config.c0  # it kept failing until the cap widened sampling


def test_at_most_one_verification_per_iteration(tree):
    config = AgentConfig(mode="open_ended", seed=5, c0=3, max_iterations=500)
    records = run(config, tree, empty_hypothesis(set(tree.items)))
    for before, after in zip(records, records[1:]):
        assert after.verified_count - before.verified_count in (0, 1)
    assert all((r.newly_verified is not None) <= r.success for r in records)


def test_guided_policies_stay_on_goal_path(tree):
    awm = ground_truth_awm(tree)
    config = AgentConfig(mode="goal", goal="stone_pickaxe", seed=2, max_iterations=300)
    records, state = run_with_state(config, tree, awm)
    assert not any(r.fallback for r in records)
    assert set(state.bank.policies) == {"log", "cobblestone"}


def test_policy_scope_before_first_fallback(tree):
    # Break the believed graph so the run must eventually widen; until then,
    # every learned policy lies on the believed goal path.
    def broken():
        awm = ground_truth_awm(tree)
        awm.edges = {e for e in awm.edges if e.child != "cobblestone"}
        awm.beliefs["cobblestone"].required_tool = None
        return awm

    config = AgentConfig(mode="goal", goal="stone_pickaxe", c0=4, seed=6, max_iterations=400)
    records, _ = run_with_state(config, tree, broken())
    fallback_iters = [r.iteration for r in records if r.fallback]
    assert fallback_iters, "scenario should force a fallback"
    cutoff = fallback_iters[0] - 1

    truncated = AgentConfig(
        mode="goal", goal="stone_pickaxe", c0=4, seed=6, max_iterations=cutoff
    )
    _, state = run_with_state(truncated, tree, broken())
    goal_path = broken().ancestors("stone_pickaxe") | {"stone_pickaxe"}
    assert set(state.bank.policies) <= goal_path


def test_verified_edges_always_ground_truth(tree):
    config = AgentConfig(mode="open_ended", seed=7, c0=4, max_iterations=600)
    _, state = run_with_state(config, tree, empty_hypothesis(set(tree.items)))
    assert len(state.awm.verified) == 16
    for item in state.awm.verified:
        got = {(e.parent, e.kind, e.quantity) for e in state.awm.parents_of(item)}
        assert got == tree.ground_truth_parents(item), item


def test_step_accounting_conserved(tree):
    config = AgentConfig(mode="open_ended", seed=9, c0=4, max_iterations=200)
    records, state = run_with_state(config, tree, empty_hypothesis(set(tree.items)))
    assert state.total_env_steps == sum(r.env_steps for r in records)
    assert state.total_env_steps == sum(p.steps_spent for p in state.bank.policies.values())
    cumulative = [r.cumulative_env_steps for r in records]
    assert cumulative == sorted(cumulative)


def test_frontier_column_bounds(tree):
    config = AgentConfig(mode="open_ended", seed=1, max_iterations=200)
    records = run(config, tree, ground_truth_awm(tree))
    for r in records:
        assert r.frontier_size <= r.graph_size
        assert r.verified_count <= r.graph_size


def test_checkpoint_round_trip(tree):
    config = AgentConfig(mode="goal", goal="wooden_pickaxe", seed=3, max_iterations=200)
    _, state = run_with_state(config, tree, ground_truth_awm(tree))
    blob = state_to_json(state)
    restored = state_from_json(blob, tree, config)
    assert restored.awm.verified == state.awm.verified
    assert restored.awm.edges == state.awm.edges
    assert restored.counts == state.counts
    assert restored.total_env_steps == state.total_env_steps
    assert {k: v.attempts for k, v in restored.bank.policies.items()} == {
        k: v.attempts for k, v in state.bank.policies.items()
    }
    assert json.loads(blob)  # valid JSON document
