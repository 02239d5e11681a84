from random import Random

import networkx as nx
import pytest

from dreamcraft.awm import Awm, AwmEdge, NodeBelief, remove_cycles, sample_branch
from dreamcraft.tech_tree import Inventory, attempt_collect, attempt_craft


def truth_frontier(tree, verified):
    """Independent frontier oracle computed straight from the item definitions."""
    out = set()
    for item in tree.items:
        if item in verified:
            continue
        parents = {p for p, _, _ in tree.ground_truth_parents(item)}
        if parents <= verified:
            out.add(item)
    return out


def truth_graph(tree):
    g = nx.DiGraph()
    g.add_nodes_from(tree.items)
    for item in tree.items:
        for parent, _, _ in tree.ground_truth_parents(item):
            g.add_edge(parent, item)
    return g


def verify_from_tree(awm, tree, item):
    d = tree.definition(item)
    awm.verify_node(
        item,
        tree.ground_truth_parents(item),
        craft_yield=d.craft_yield if not d.collectable else 1,
    )


def test_frontier_matches_oracle(tree, perfect_awm):
    assert perfect_awm.frontier() == truth_frontier(tree, set())
    assert perfect_awm.frontier() == {"log", "sand", "dirt", "flower", "seeds"}

    verify_from_tree(perfect_awm, tree, "log")
    expected = {"sand", "dirt", "flower", "seeds", "planks"}
    assert perfect_awm.frontier() == expected
    assert perfect_awm.frontier() == truth_frontier(tree, {"log"})


def test_frontier_empty_when_all_verified(tree, perfect_awm):
    for item in ["log", "sand", "dirt", "flower", "seeds", "planks", "stick",
                 "crafting_table", "wooden_pickaxe", "cobblestone", "boat", "door",
                 "ladder", "stone_pickaxe", "furnace", "glass"]:
        verify_from_tree(perfect_awm, tree, item)
    assert perfect_awm.frontier() == set()


def test_prune_to_goal_matches_networkx(tree, perfect_awm):
    frontier = perfect_awm.frontier()
    pruned = perfect_awm.prune_to_goal(frontier, "stone_pickaxe")
    oracle = frontier & (nx.ancestors(truth_graph(tree), "stone_pickaxe") | {"stone_pickaxe"})
    assert pruned == oracle == {"log"}


def test_prune_to_goal_excludes_dead_ends(tree, perfect_awm):
    verify_from_tree(perfect_awm, tree, "log")
    verify_from_tree(perfect_awm, tree, "planks")
    frontier = perfect_awm.frontier()
    assert "boat" in frontier  # dead end reachable from planks
    assert perfect_awm.prune_to_goal(frontier, "wooden_pickaxe") == {"stick", "crafting_table"}


def test_prune_without_path_returns_frontier_unchanged():
    awm = Awm(nodes={"a", "b", "goal"}, edges={AwmEdge("b", "goal", "ingredient", 1)})
    frontier = awm.frontier()  # a and b are parentless, goal is not frontier? b is.
    pruned = awm.prune_to_goal({"a"}, "goal")
    assert pruned == {"a"}  # 'a' has no path to goal, so the set comes back unchanged
    assert frontier == {"a", "b"}


def test_expand_requirements_wooden_pickaxe(perfect_awm):
    branch = perfect_awm.expand_requirements("wooden_pickaxe")
    assert [(s.item, s.action, s.repetitions) for s in branch.steps] == [
        ("log", "collect", 3),
        ("planks", "craft", 3),
        ("crafting_table", "craft", 1),
        ("stick", "craft", 1),
        ("wooden_pickaxe", "craft", 1),
    ]


def test_expand_requirements_single_collectable(perfect_awm):
    branch = perfect_awm.expand_requirements("log")
    assert [(s.item, s.action, s.repetitions) for s in branch.steps] == [("log", "collect", 1)]


def simulate_branch(tree, branch, consume_targets=True):
    """Feasibility oracle: run the branch against the world with p=1 policies."""
    inv = Inventory()
    rng = Random(0)
    for step in branch.steps:
        for _ in range(step.repetitions):
            if step.action == "collect":
                out = attempt_collect(tree, step.item, inv, 1.0, rng)
            else:
                out = attempt_craft(tree, step.item, inv)
            if not out.success:
                return False, inv
    return True, inv


def test_expand_requirements_feasible_on_fixture(tree, perfect_awm):
    for target in tree.names():
        ok, _ = simulate_branch(tree, perfect_awm.expand_requirements(target))
        assert ok, target


def test_expand_with_overstated_quantity_still_feasible(tree, perfect_awm):
    # Believe wooden_pickaxe needs one more plank than it really does.
    edges = {e for e in perfect_awm.edges
             if not (e.parent == "planks" and e.child == "wooden_pickaxe")}
    edges.add(AwmEdge("planks", "wooden_pickaxe", "ingredient", 4))
    awm = Awm(nodes=set(perfect_awm.nodes), edges=edges,
              beliefs={k: v for k, v in perfect_awm.beliefs.items()})
    ok, inv = simulate_branch(tree, awm.expand_requirements("wooden_pickaxe"))
    assert ok
    assert inv.count("planks") >= 1  # surplus left over


def test_sample_branch_verified_yields(tree, perfect_awm):
    verify_from_tree(perfect_awm, tree, "log")
    verify_from_tree(perfect_awm, tree, "planks")
    branch = sample_branch(perfect_awm, {"stick"}, Random(0))
    assert [(s.item, s.action, s.repetitions) for s in branch.steps] == [
        ("log", "collect", 1),
        ("planks", "craft", 1),
        ("stick", "craft", 1),
    ]


def test_verified_yield_learned_from_scratch(tree):
    # A hypothesis with no yield knowledge plans with yield 1 until planks is
    # verified, after which the observed yield tightens the plan.
    awm = Awm(
        nodes={"log", "planks", "stick"},
        edges={
            AwmEdge("log", "planks", "ingredient", 1),
            AwmEdge("planks", "stick", "ingredient", 2),
        },
        beliefs={
            "log": NodeBelief(collectable=True),
            "planks": NodeBelief(collectable=False),
            "stick": NodeBelief(collectable=False),
        },
    )
    before = awm.expand_requirements("stick")
    assert [(s.item, s.repetitions) for s in before.steps] == [("log", 2), ("planks", 2), ("stick", 1)]
    verify_from_tree(awm, tree, "log")
    verify_from_tree(awm, tree, "planks")
    after = awm.expand_requirements("stick")
    assert [(s.item, s.repetitions) for s in after.steps] == [("log", 1), ("planks", 1), ("stick", 1)]


def test_sample_branch_deterministic(perfect_awm):
    picks = {sample_branch(perfect_awm, {"log", "sand"}, Random(7)).target for _ in range(5)}
    assert len(picks) == 1


def test_sample_branch_rejects_empty(perfect_awm):
    with pytest.raises(ValueError):
        sample_branch(perfect_awm, set(), Random(0))


def test_verify_node_corrects_glass_error(tree):
    awm = Awm(nodes=set(tree.items), beliefs={"glass": NodeBelief(collectable=True)})
    observed = {("sand", "ingredient", 1), ("furnace", "workbench", 1)}
    awm.verify_node("glass", observed, craft_yield=1)
    assert "glass" in awm.verified
    assert {(e.parent, e.kind, e.quantity) for e in awm.parents_of("glass")} == observed
    assert awm.beliefs["glass"].collectable is False
    assert awm.beliefs["glass"].workbench == "furnace"


def test_verify_node_exact_hypothesis_keeps_edges(tree, perfect_awm):
    before = {e for e in perfect_awm.edges if e.child == "planks"}
    verify_from_tree(perfect_awm, tree, "planks")
    assert {e for e in perfect_awm.edges if e.child == "planks"} == before
    assert "planks" in perfect_awm.verified


def test_verify_node_is_idempotent(tree, perfect_awm):
    verify_from_tree(perfect_awm, tree, "log")
    snapshot = perfect_awm.to_json()
    with pytest.warns(UserWarning):
        perfect_awm.verify_node("log", {("sand", "ingredient", 9)})
    assert perfect_awm.to_json() == snapshot


def test_verify_grows_v_by_one(tree, perfect_awm):
    assert len(perfect_awm.verified) == 0
    verify_from_tree(perfect_awm, tree, "log")
    assert len(perfect_awm.verified) == 1


def test_path_to(tree, perfect_awm):
    assert perfect_awm.path_to("stone_pickaxe") is None  # nothing verified yet
    order = ["log", "planks", "stick", "crafting_table", "wooden_pickaxe", "cobblestone"]
    for item in order:
        verify_from_tree(perfect_awm, tree, item)
    assert perfect_awm.path_to("stone_pickaxe") is None  # goal itself unverified
    verify_from_tree(perfect_awm, tree, "stone_pickaxe")
    branch = perfect_awm.path_to("stone_pickaxe")
    assert branch is not None and branch.target == "stone_pickaxe"
    ok, _ = simulate_branch(tree, branch)
    assert ok
    assert len(perfect_awm.path_to("log").steps) == 1


def test_remove_cycles_workbench_rule():
    # The classic mutual dependency: the table's recipe needs planks while
    # planks is predicted to need the table.
    awm = Awm(
        nodes={"planks", "crafting_table", "log"},
        edges={
            AwmEdge("log", "planks", "ingredient", 1),
            AwmEdge("planks", "crafting_table", "ingredient", 4),
            AwmEdge("crafting_table", "planks", "workbench", 1),
        },
        beliefs={"planks": NodeBelief(collectable=False, workbench="crafting_table")},
    )
    fixed = remove_cycles(awm)
    assert AwmEdge("crafting_table", "planks", "workbench", 1) not in fixed.edges
    assert AwmEdge("planks", "crafting_table", "ingredient", 4) in fixed.edges
    assert fixed.beliefs["planks"].workbench is None
    assert fixed.is_acyclic()


def test_remove_cycles_mutual_pair_loses_both():
    awm = Awm(
        nodes={"spider_eye", "fermented_spider_eye"},
        edges={
            AwmEdge("spider_eye", "fermented_spider_eye", "ingredient", 1),
            AwmEdge("fermented_spider_eye", "spider_eye", "ingredient", 1),
        },
    )
    fixed = remove_cycles(awm)
    assert fixed.edges == set()


def test_remove_cycles_acyclic_fixed_point(perfect_awm):
    fixed = remove_cycles(perfect_awm)
    assert fixed.edges == perfect_awm.edges
    assert fixed.nodes == perfect_awm.nodes


def test_remove_cycles_breaks_longer_cycles():
    awm = Awm(
        nodes={"a", "b", "c"},
        edges={
            AwmEdge("a", "b", "ingredient", 1),
            AwmEdge("b", "c", "ingredient", 1),
            AwmEdge("c", "a", "ingredient", 1),
        },
    )
    fixed = remove_cycles(awm)
    assert fixed.is_acyclic()
    # lexicographically-last edge of the cycle goes
    assert AwmEdge("c", "a", "ingredient", 1) not in fixed.edges
    assert len(fixed.edges) == 2


def test_expand_reports_cycles_defensively():
    from dreamcraft.awm import CycleError

    awm = Awm(
        nodes={"a", "b"},
        edges={AwmEdge("a", "b", "ingredient", 1), AwmEdge("b", "a", "ingredient", 1)},
    )
    with pytest.raises(CycleError):
        awm.expand_requirements("a")


def test_awm_json_round_trip(tree, perfect_awm):
    verify_from_tree(perfect_awm, tree, "log")
    clone = Awm.from_json(perfect_awm.to_json())
    assert clone.nodes == perfect_awm.nodes
    assert clone.edges == perfect_awm.edges
    assert clone.verified == perfect_awm.verified
    assert clone.beliefs["planks"].craft_yield == 4
