"""The abstract world model (AWM): a typed directed belief graph over item
subgoals.

Nodes are items; edges point from a prerequisite (parent) to the item that
needs it (child) and are typed ingredient/tool/workbench. Each node is either
hypothesized or verified. Frontier computation, goal-path pruning, branch
expansion, and verification-time correction live here.
"""
from __future__ import annotations

import heapq
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from random import Random
from typing import Literal

from .tech_tree import CRAFTING_TABLE, FURNACE, INGREDIENT, TOOL, WORKBENCH, ParentSpec

SubgoalAction = Literal["collect", "craft"]

COLLECT: SubgoalAction = "collect"
CRAFT: SubgoalAction = "craft"


class AwmError(ValueError):
    pass


class CycleError(AwmError):
    pass


class UnknownNodeError(AwmError):
    pass


@dataclass(frozen=True, order=True)
class AwmEdge:
    parent: str
    child: str
    kind: str
    quantity: int = 1

    def __post_init__(self):
        if self.parent == self.child:
            raise AwmError(f"self edge on {self.parent}")
        if self.quantity < 1:
            raise AwmError("edge quantity must be positive")


@dataclass
class NodeBelief:
    """What the agent currently believes about one item.

    collectable=None means unknown (tabula rasa); craft_yield is 1 until a
    craft for the item has actually been observed.
    """

    collectable: bool | None = None
    required_tool: str | None = None
    workbench: str | None = None
    craft_yield: int = 1


@dataclass(frozen=True)
class BranchStep:
    item: str
    action: SubgoalAction
    repetitions: int


@dataclass(frozen=True)
class Branch:
    """Ordered, quantity-expanded subgoal sequence ending at the target."""

    steps: tuple[BranchStep, ...]
    target: str

    def __post_init__(self):
        if not self.steps or self.steps[-1].item != self.target:
            raise AwmError("branch must end at its target")

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class Awm:
    nodes: set[str] = field(default_factory=set)
    edges: set[AwmEdge] = field(default_factory=set)
    verified: set[str] = field(default_factory=set)
    beliefs: dict[str, NodeBelief] = field(default_factory=dict)

    # -- basic queries ------------------------------------------------------

    def belief(self, item: str) -> NodeBelief:
        return self.beliefs.setdefault(item, NodeBelief())

    def parents_of(self, item: str) -> list[AwmEdge]:
        return sorted(e for e in self.edges if e.child == item)

    def children_of(self, item: str) -> list[AwmEdge]:
        return sorted(e for e in self.edges if e.parent == item)

    def ingredient_parents(self, item: str) -> dict[str, int]:
        return {e.parent: e.quantity for e in self.edges if e.child == item and e.kind == INGREDIENT}

    def believed_collectable(self, item: str) -> bool:
        """Collect is the believed action when the node is labeled collectable,
        or when nothing is known and it has no hypothesized recipe."""
        b = self.beliefs.get(item)
        if b is not None and b.collectable is not None:
            return b.collectable
        return not any(e.child == item and e.kind == INGREDIENT for e in self.edges)

    def unverified(self) -> set[str]:
        return self.nodes - self.verified

    def is_acyclic(self) -> bool:
        try:
            self._topo_order(self.nodes)
            return True
        except CycleError:
            return False

    def copy(self) -> "Awm":
        return Awm(
            nodes=set(self.nodes),
            edges=set(self.edges),
            verified=set(self.verified),
            beliefs={k: replace(v) for k, v in self.beliefs.items()},
        )

    # -- frontier and pruning ------------------------------------------------

    def frontier(self) -> set[str]:
        """Unverified nodes whose hypothesized parents (all kinds) are all
        verified; parentless unverified nodes qualify."""
        out = set()
        for node in self.nodes - self.verified:
            if all(e.parent in self.verified for e in self.edges if e.child == node):
                out.add(node)
        return out

    def ancestors(self, item: str) -> set[str]:
        if item not in self.nodes:
            raise UnknownNodeError(f"unknown node '{item}'")
        seen: set[str] = set()
        stack = [item]
        while stack:
            node = stack.pop()
            for e in self.edges:
                if e.child == node and e.parent not in seen:
                    seen.add(e.parent)
                    stack.append(e.parent)
        return seen

    def prune_to_goal(self, frontier: set[str], goal: str) -> set[str]:
        """Keep only frontier nodes on the hypothesized path to the goal; if no
        frontier node lies on such a path, return the frontier unchanged."""
        on_path = self.ancestors(goal) | {goal}
        pruned = frontier & on_path
        return pruned if pruned else set(frontier)

    # -- branch expansion -----------------------------------------------------

    def _topo_order(self, subset: set[str]) -> list[str]:
        """Deterministic topological order of `subset` (prerequisites first),
        lexicographic tie-break. Parallel edges of different kinds between the
        same pair count once."""
        pairs = {
            (e.parent, e.child)
            for e in self.edges
            if e.parent in subset and e.child in subset
        }
        indeg = {n: 0 for n in subset}
        children: dict[str, list[str]] = {n: [] for n in subset}
        for parent, child in pairs:
            indeg[child] += 1
            children[parent].append(child)
        ready = [n for n in subset if indeg[n] == 0]
        heapq.heapify(ready)
        order: list[str] = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for child in sorted(children[node]):
                indeg[child] -= 1
                if indeg[child] == 0:
                    heapq.heappush(ready, child)
        if len(order) != len(subset):
            stuck = sorted(n for n in subset if indeg[n] > 0)
            raise CycleError(f"cycle among {stuck}")
        return order

    def expand_requirements(self, target: str) -> Branch:
        """Expand the hypothesized prerequisite closure of `target` into an
        ordered branch with per-subgoal repetitions.

        Quantities are computed bottom-up with ceiling division by believed
        yields; tool/workbench uses add one non-consumed copy.
        """
        if target not in self.nodes:
            raise UnknownNodeError(f"unknown node '{target}'")
        closure = self.ancestors(target) | {target}
        order = self._topo_order(closure)

        consumed: dict[str, int] = {n: 0 for n in closure}
        tool_use: dict[str, bool] = {n: False for n in closure}
        consumed[target] = 1
        reps: dict[str, int] = {}
        for node in reversed(order):
            need = consumed[node] + (1 if tool_use[node] else 0)
            if self.believed_collectable(node):
                reps[node] = need
            else:
                per_craft = max(1, self.belief(node).craft_yield)
                reps[node] = max(1, math.ceil(need / per_craft))
            for e in self.edges:
                if e.child != node or e.parent not in closure:
                    continue
                if e.kind == INGREDIENT:
                    consumed[e.parent] += reps[node] * e.quantity
                else:
                    tool_use[e.parent] = True

        steps = tuple(
            BranchStep(
                item=node,
                action=COLLECT if self.believed_collectable(node) else CRAFT,
                repetitions=reps[node],
            )
            for node in order
        )
        return Branch(steps=steps, target=target)

    def path_to(self, goal: str) -> Branch | None:
        """Executable branch to a goal whose whole ancestor closure is
        verified; None when any of it is still hypothesis."""
        if goal not in self.nodes:
            raise UnknownNodeError(f"unknown node '{goal}'")
        if goal not in self.verified:
            return None
        if not self.ancestors(goal) <= self.verified:
            return None
        return self.expand_requirements(goal)

    # -- verification ---------------------------------------------------------

    def verify_node(self, item: str, observed: set[ParentSpec], craft_yield: int = 1) -> "Awm":
        """Replace the item's hypothesized incoming edges with the observed
        ground-truth parents and mark it verified. Verified edges are never
        changed again; re-verification warns and leaves the graph untouched."""
        if item not in self.nodes:
            raise UnknownNodeError(f"unknown node '{item}'")
        if item in self.verified:
            warnings.warn(f"node '{item}' is already verified; ignoring", stacklevel=2)
            return self
        self.edges = {e for e in self.edges if e.child != item}
        for parent, kind, quantity in observed:
            self.nodes.add(parent)
            self.edges.add(AwmEdge(parent=parent, child=item, kind=kind, quantity=quantity))
        self.verified.add(item)

        b = self.belief(item)
        b.collectable = not any(kind == INGREDIENT for _, kind, _ in observed)
        tools = sorted(p for p, kind, _ in observed if kind == TOOL)
        b.required_tool = tools[0] if tools else None
        benches = sorted(p for p, kind, _ in observed if kind == WORKBENCH)
        b.workbench = benches[0] if benches else None
        b.craft_yield = craft_yield if not b.collectable else 1
        return self

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": [
                {"parent": e.parent, "child": e.child, "kind": e.kind, "quantity": e.quantity}
                for e in sorted(self.edges)
            ],
            "verified": sorted(self.verified),
            "beliefs": {
                n: {
                    "collectable": b.collectable,
                    "required_tool": b.required_tool,
                    "workbench": b.workbench,
                    "craft_yield": b.craft_yield,
                }
                for n, b in sorted(self.beliefs.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Awm":
        awm = cls(
            nodes=set(doc.get("nodes", [])),
            edges={
                AwmEdge(e["parent"], e["child"], e["kind"], int(e.get("quantity", 1)))
                for e in doc.get("edges", [])
            },
            verified=set(doc.get("verified", [])),
        )
        for n, b in doc.get("beliefs", {}).items():
            awm.beliefs[n] = NodeBelief(
                collectable=b.get("collectable"),
                required_tool=b.get("required_tool"),
                workbench=b.get("workbench"),
                craft_yield=int(b.get("craft_yield", 1)),
            )
        return awm

    @classmethod
    def from_json(cls, text: str) -> "Awm":
        return cls.from_json_dict(json.loads(text))


def sample_branch(awm: Awm, candidates: set[str], rng: Random) -> Branch:
    """Pick a target uniformly from the candidates (one draw over the sorted
    set) and expand its prerequisite closure."""
    if not candidates:
        raise AwmError("empty candidate set")
    ordered = sorted(candidates)
    target = ordered[rng.randrange(len(ordered))]
    return awm.expand_requirements(target)


def _workbench_or_tool_nodes(awm: Awm) -> set[str]:
    special = {CRAFTING_TABLE, FURNACE} & awm.nodes
    special |= {e.parent for e in awm.edges if e.kind == TOOL}
    return special


def _find_cycle(awm: Awm) -> list[AwmEdge] | None:
    # DFS returning the edge list of one cycle, or None; graphs here are small.
    color: dict[str, int] = {n: 0 for n in awm.nodes}
    out: dict[str, list[AwmEdge]] = {n: [] for n in awm.nodes}
    for e in sorted(awm.edges):
        out[e.parent].append(e)
    path: list[AwmEdge] = []

    def dfs(node: str) -> list[AwmEdge] | None:
        color[node] = 1
        for e in out[node]:
            if color[e.child] == 1:
                idx = next(i for i, pe in enumerate(path) if pe.parent == e.child)
                return path[idx:] + [e]
            if color[e.child] == 0:
                path.append(e)
                found = dfs(e.child)
                if found:
                    return found
                path.pop()
        color[node] = 2
        return None

    for n in sorted(awm.nodes):
        if color[n] == 0:
            found = dfs(n)
            if found:
                return found
    return None


def remove_cycles(awm: Awm) -> Awm:
    """Break circular dependencies in a hypothesized graph.

    Rule 1: a workbench/tool node drops its outgoing edges to items that appear
    in its own recipe. Rule 2: remaining mutual pairs lose both directions.
    Longer cycles (if any remain) lose their lexicographically-last edge, one
    per pass, until the graph is acyclic. Acyclic inputs are returned as-is.
    """
    out = awm.copy()

    special = _workbench_or_tool_nodes(out)
    for node in sorted(special):
        own_recipe = set(out.ingredient_parents(node))
        drop = {e for e in out.edges if e.parent == node and e.child in own_recipe}
        out.edges -= drop
        for e in drop:
            _clear_belief_for_removed_edge(out, e)

    pairs = {(e.parent, e.child) for e in out.edges}
    mutual = {frozenset((a, b)) for a, b in pairs if (b, a) in pairs}
    drop = {e for e in out.edges if frozenset((e.parent, e.child)) in mutual}
    out.edges -= drop
    for e in drop:
        _clear_belief_for_removed_edge(out, e)

    while True:
        cycle = _find_cycle(out)
        if cycle is None:
            break
        victim = max(cycle, key=lambda e: (e.parent, e.child, e.kind))
        out.edges.discard(victim)
        _clear_belief_for_removed_edge(out, victim)
    return out


def _clear_belief_for_removed_edge(awm: Awm, edge: AwmEdge) -> None:
    # Keep belief labels consistent with the surviving edge set.
    b = awm.beliefs.get(edge.child)
    if b is None:
        return
    if edge.kind == TOOL and b.required_tool == edge.parent:
        b.required_tool = None
    if edge.kind == WORKBENCH and b.workbench == edge.parent:
        remaining = sorted(
            e.parent for e in awm.edges if e.child == edge.child and e.kind == WORKBENCH
        )
        b.workbench = remaining[0] if remaining else None
