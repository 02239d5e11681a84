"""The exploration loop: alternate a dream phase (sample the next frontier
branch, pruned toward the goal when one is set) and a wake phase (execute
subgoals, verify or correct the belief graph from what actually happened).

Runs are fully deterministic given (seed, tree, initial belief graph).
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from random import Random
from typing import NamedTuple

from .awm import Awm, Branch, sample_branch
from .policy import LearnerConfig, PolicyBank, acquire, ensure_policy, execute_subgoal
from .tech_tree import Inventory, StepBudget, TechTree

OPEN_ENDED = "open_ended"
GOAL = "goal"


class ExplorationComplete(Exception):
    """Every reachable node is verified; nothing left to dream about."""


@dataclass(frozen=True)
class AgentConfig:
    mode: str = OPEN_ENDED
    goal: str | None = None
    c0: int = 10
    max_iterations: int = 200
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    budget: StepBudget = field(default_factory=StepBudget)
    retry_cap: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (OPEN_ENDED, GOAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.goal is not None) != (self.mode == GOAL):
            raise ValueError("goal must be set exactly when mode is 'goal'")
        if self.c0 < 1:
            raise ValueError("c0 must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


@dataclass
class AgentState:
    tree: TechTree
    awm: Awm
    counts: Counter = field(default_factory=Counter)
    bank: PolicyBank = field(default_factory=PolicyBank)
    inventory: Inventory = field(default_factory=Inventory)
    rng: Random = field(default_factory=Random)
    total_env_steps: int = 0
    iteration_index: int = 0

    @classmethod
    def create(cls, tree: TechTree, awm: Awm, config: AgentConfig) -> "AgentState":
        return cls(
            tree=tree,
            awm=awm,
            bank=PolicyBank(learner=config.learner),
            rng=Random(config.seed),
        )


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    target: str
    branch_length: int
    fallback: bool
    success: bool
    newly_verified: str | None
    env_steps: int
    cumulative_env_steps: int
    verified_count: int
    frontier_size: int
    graph_size: int


class DreamSample(NamedTuple):
    branch: Branch
    fallback: bool


def dream(state: AgentState, config: AgentConfig) -> DreamSample:
    """Pick the next branch: a fresh (pruned) frontier node while any remains
    under the c0 visit cap, otherwise widen to the whole frontier plus the
    verified set for undirected exploration."""
    awm = state.awm
    if not awm.unverified():
        raise ExplorationComplete
    frontier = awm.frontier()
    selectable = frontier
    if config.mode == GOAL:
        selectable = awm.prune_to_goal(frontier, config.goal)
    eligible = {n for n in selectable if state.counts[n] <= config.c0}
    if eligible:
        return DreamSample(sample_branch(awm, eligible, state.rng), False)
    pool = frontier | awm.verified
    if not pool:
        raise RuntimeError("degenerate belief graph: no frontier and nothing verified")
    return DreamSample(sample_branch(awm, pool, state.rng), True)


def _planned_addition(state: AgentState, item: str, action: str, repetitions: int) -> int:
    if action == "craft":
        return repetitions * max(1, state.awm.belief(item).craft_yield)
    return repetitions


def _verify_from_world(state: AgentState, item: str) -> None:
    """Record the parents actually consumed at the first success, which in this
    simulator equal the ground-truth parents, and the observed yield."""
    tree = state.tree
    observed = tree.ground_truth_parents(item)
    craft_yield = 1 if tree.is_collectable(item) else tree.definition(item).craft_yield
    state.awm.verify_node(item, observed, craft_yield=craft_yield)


def _exploration_sweep(state: AgentState, config: AgentConfig) -> str | None:
    """One undirected exploration pass: try each unverified item once, in
    lexicographic order, stopping at the first success.

    The believed action goes first; after a failed collect a free craft attempt
    with whatever is in the inventory follows, which is how mislabeled
    craft-only items eventually get discovered and corrected.
    """
    awm = state.awm
    for item in sorted(awm.unverified()):
        state.counts[item] += 1
        if awm.believed_collectable(item):
            out = execute_subgoal(
                state.bank, state.tree, item, "collect", state.inventory, state.rng, config.budget
            )
            state.total_env_steps += out.steps
            if out.success:
                _verify_from_world(state, item)
                return item
        out = execute_subgoal(
            state.bank, state.tree, item, "craft", state.inventory, state.rng, config.budget
        )
        state.total_env_steps += out.steps
        if out.success:
            _verify_from_world(state, item)
            return item
    return None


def wake(state: AgentState, config: AgentConfig, branch: Branch, fallback: bool = False) -> IterationRecord:
    """Execute the branch, verify the target on success, and bookkeep.

    Directed iterations start from an empty inventory (a fresh episode);
    fallback iterations keep accumulating so undirected exploration can
    stumble onto multi-ingredient recipes.
    """
    state.iteration_index += 1
    if not fallback:
        state.inventory.clear()

    steps_before = state.total_env_steps
    failed = False
    target_counted = False
    for step in branch.steps:
        wanted = state.inventory.count(step.item) + _planned_addition(
            state, step.item, step.action, step.repetitions
        )
        out = acquire(
            state.bank,
            state.tree,
            step.item,
            step.action,
            wanted,
            state.inventory,
            state.rng,
            retry_cap=config.retry_cap,
            budget=config.budget,
        )
        state.counts[step.item] += 1
        if step.item == branch.target:
            target_counted = True
        state.total_env_steps += out.steps
        if not out.success:
            failed = True
            break
    if failed and not target_counted:
        state.counts[branch.target] += 1  # a sampled attempt even when unreached

    newly: str | None = None
    if not failed:
        if branch.target not in state.awm.verified:
            _verify_from_world(state, branch.target)
            newly = branch.target
        else:
            newly = _exploration_sweep(state, config)

    return IterationRecord(
        iteration=state.iteration_index,
        target=branch.target,
        branch_length=len(branch),
        fallback=fallback,
        success=not failed,
        newly_verified=newly,
        env_steps=state.total_env_steps - steps_before,
        cumulative_env_steps=state.total_env_steps,
        verified_count=len(state.awm.verified),
        frontier_size=len(state.awm.frontier()),
        graph_size=len(state.awm.nodes),
    )


def _finished(state: AgentState, config: AgentConfig) -> bool:
    if config.mode == GOAL:
        return config.goal in state.awm.verified
    # Open-ended: every node the world actually contains is verified;
    # hypothesis-only fictional nodes can never be.
    discoverable = {n for n in state.awm.nodes if n in state.tree}
    return discoverable <= state.awm.verified


def run_with_state(
    config: AgentConfig, tree: TechTree, initial_awm: Awm
) -> tuple[list[IterationRecord], AgentState]:
    """Alternate dream and wake until the goal is verified (goal mode), the
    discoverable graph is fully verified (open-ended), or iterations run out.
    Returns the iteration records and the final agent state."""
    missing = set(tree.items) - initial_awm.nodes
    if missing:
        raise ValueError(f"belief graph is missing tree items: {sorted(missing)}")
    state = AgentState.create(tree, initial_awm.copy(), config)
    records: list[IterationRecord] = []
    while state.iteration_index < config.max_iterations and not _finished(state, config):
        try:
            sampled = dream(state, config)
        except ExplorationComplete:
            break
        records.append(wake(state, config, sampled.branch, fallback=sampled.fallback))
    return records, state


def run(config: AgentConfig, tree: TechTree, initial_awm: Awm) -> list[IterationRecord]:
    return run_with_state(config, tree, initial_awm)[0]


def state_to_json(state: AgentState) -> str:
    """Checkpoint the mutable agent state (belief graph, visit counts, policy
    progress). The tree and RNG stream are re-supplied on resume."""
    doc = {
        "awm": state.awm.to_json_dict(),
        "counts": {k: v for k, v in sorted(state.counts.items()) if v},
        "policies": {
            item: {"attempts": p.attempts, "steps_spent": p.steps_spent}
            for item, p in sorted(state.bank.policies.items())
        },
        "total_env_steps": state.total_env_steps,
        "iteration_index": state.iteration_index,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def state_from_json(text: str, tree: TechTree, config: AgentConfig) -> AgentState:
    doc = json.loads(text)
    state = AgentState.create(tree, Awm.from_json_dict(doc["awm"]), config)
    state.counts = Counter(doc.get("counts", {}))
    for item, body in doc.get("policies", {}).items():
        policy = ensure_policy(state.bank, item)
        policy.attempts = int(body.get("attempts", 0))
        policy.steps_spent = int(body.get("steps_spent", 0))
    state.total_env_steps = int(doc.get("total_env_steps", 0))
    state.iteration_index = int(doc.get("iteration_index", 0))
    return state
