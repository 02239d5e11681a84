"""Ground-truth crafting world: item definitions, dependency queries, and
collect/craft attempt simulation.

The tech tree is the environment's transition oracle at the subgoal level.
It is immutable after loading and safe to share across concurrent trials;
inventories and RNG streams are per-trial.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from random import Random
from typing import Iterable

INGREDIENT = "ingredient"
TOOL = "tool"
WORKBENCH = "workbench"

CRAFTING_TABLE = "crafting_table"
FURNACE = "furnace"

_NAME_RE = re.compile(r"^[a-z0-9_]+$")

# (parent item, edge kind, quantity) triples, as returned by ground_truth_parents
ParentSpec = tuple[str, str, int]


class TreeError(ValueError):
    """Base for tree loading/usage errors."""


class TreeParseError(TreeError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class TreeValidationError(TreeError):
    def __init__(self, item: str, message: str):
        super().__init__(f"item '{item}': {message}")
        self.item = item


class UnknownItemError(TreeError):
    pass


@dataclass(frozen=True)
class RecipeEntry:
    item: str
    quantity: int


@dataclass(frozen=True)
class ItemDef:
    """One item: either collectable (empty recipe) or craftable (non-empty)."""

    id: str
    collectable: bool
    required_tool: str | None = None
    requires_crafting_table: bool = False
    requires_furnace: bool = False
    recipe: tuple[RecipeEntry, ...] = ()
    craft_yield: int = 1


@dataclass(frozen=True)
class StepBudget:
    """Environment-step charges: one full episode per collect attempt, instant crafts."""

    collect_steps: int = 1000
    craft_steps: int = 0
    episode_cap_collect: int = 1000
    episode_cap_craft: int = 5000

    def __post_init__(self):
        if self.collect_steps <= 0:
            raise ValueError("collect_steps must be positive")
        if self.craft_steps < 0:
            raise ValueError("craft_steps must be non-negative")
        if self.episode_cap_collect < self.collect_steps:
            raise ValueError("episode_cap_collect below per-attempt collect cost")
        if self.episode_cap_craft < self.craft_steps:
            raise ValueError("episode_cap_craft below per-attempt craft cost")


DEFAULT_BUDGET = StepBudget()


@dataclass(frozen=True)
class Outcome:
    success: bool
    steps: int


class Inventory:
    """Multiset of item counts; counts can never go negative."""

    def __init__(self, counts: dict[str, int] | None = None):
        self._counts: Counter[str] = Counter()
        if counts:
            for item, n in counts.items():
                if n < 0:
                    raise ValueError(f"negative count for {item}")
                if n:
                    self._counts[item] = n

    def count(self, item: str) -> int:
        return self._counts.get(item, 0)

    def add(self, item: str, n: int = 1) -> None:
        if n < 0:
            raise ValueError("cannot add a negative amount")
        self._counts[item] += n

    def consume(self, item: str, n: int) -> None:
        have = self._counts.get(item, 0)
        if n > have:
            raise ValueError(f"cannot consume {n} {item}, only {have} held")
        if n == have:
            del self._counts[item]
        else:
            self._counts[item] = have - n

    def has(self, item: str, n: int = 1) -> bool:
        return self.count(item) >= n

    def clear(self) -> None:
        self._counts.clear()

    def items_held(self) -> set[str]:
        return {i for i, n in self._counts.items() if n > 0}

    def as_dict(self) -> dict[str, int]:
        return {i: self._counts[i] for i in sorted(self._counts) if self._counts[i] > 0}

    def copy(self) -> "Inventory":
        return Inventory(dict(self._counts))

    def __eq__(self, other) -> bool:
        return isinstance(other, Inventory) and self.as_dict() == other.as_dict()

    def __repr__(self) -> str:
        return f"Inventory({self.as_dict()})"


@dataclass
class TechTree:
    """Validated, immutable map of item definitions."""

    items: dict[str, ItemDef] = field(default_factory=dict)

    def __contains__(self, item: str) -> bool:
        return item in self.items

    def names(self) -> list[str]:
        return sorted(self.items)

    def definition(self, item: str) -> ItemDef:
        try:
            return self.items[item]
        except KeyError:
            raise UnknownItemError(f"unknown item '{item}'") from None

    def is_collectable(self, item: str) -> bool:
        return self.definition(item).collectable

    def is_craftable(self, item: str) -> bool:
        return not self.definition(item).collectable

    def collectables(self) -> list[str]:
        return sorted(i for i, d in self.items.items() if d.collectable)

    def craftables(self) -> list[str]:
        return sorted(i for i, d in self.items.items() if not d.collectable)

    def ground_truth_parents(self, item: str) -> set[ParentSpec]:
        """Typed dependency edges into `item`: recipe ingredients, the required
        tool, and workbench gates."""
        d = self.definition(item)
        parents: set[ParentSpec] = {(e.item, INGREDIENT, e.quantity) for e in d.recipe}
        if d.required_tool is not None:
            parents.add((d.required_tool, TOOL, 1))
        if d.requires_crafting_table:
            parents.add((CRAFTING_TABLE, WORKBENCH, 1))
        if d.requires_furnace:
            parents.add((FURNACE, WORKBENCH, 1))
        return parents


def _validate(items: dict[str, ItemDef]) -> TechTree:
    for name, d in items.items():
        if not _NAME_RE.match(name):
            raise TreeValidationError(name, "name must match [a-z0-9_]+")
        if d.collectable and d.recipe:
            raise TreeValidationError(name, "collectable item has a recipe")
        if not d.collectable and not d.recipe:
            raise TreeValidationError(name, "craftable item has an empty recipe")
        if d.required_tool is not None and not d.collectable:
            raise TreeValidationError(name, "required_tool only applies to collectables")
        if d.collectable and (d.requires_crafting_table or d.requires_furnace):
            raise TreeValidationError(name, "workbench flags only apply to craftables")
        if d.craft_yield < 1:
            raise TreeValidationError(name, "yield must be positive")
        seen = set()
        for e in d.recipe:
            if e.quantity < 1:
                raise TreeValidationError(name, f"non-positive quantity for {e.item}")
            if e.item in seen:
                raise TreeValidationError(name, f"duplicate recipe entry {e.item}")
            seen.add(e.item)
            if e.item not in items:
                raise TreeValidationError(name, f"recipe references unknown item '{e.item}'")
        if d.required_tool is not None and d.required_tool not in items:
            raise TreeValidationError(name, f"required_tool references unknown item '{d.required_tool}'")
        if d.requires_crafting_table and CRAFTING_TABLE not in items:
            raise TreeValidationError(name, "requires_crafting_table but no crafting_table item")
        if d.requires_furnace and FURNACE not in items:
            raise TreeValidationError(name, "requires_furnace but no furnace item")

    tree = TechTree(items)
    _check_acyclic(tree)
    return tree


def _check_acyclic(tree: TechTree) -> None:
    # Kahn's algorithm over all dependency kinds; leftovers form cycles.
    indeg = {i: 0 for i in tree.items}
    children: dict[str, list[str]] = {i: [] for i in tree.items}
    for item in tree.items:
        for parent, _, _ in tree.ground_truth_parents(item):
            indeg[item] += 1
            children[parent].append(item)
    ready = [i for i, n in indeg.items() if n == 0]
    done = 0
    while ready:
        node = ready.pop()
        done += 1
        for child in children[node]:
            indeg[child] -= 1
            if indeg[child] == 0:
                ready.append(child)
    if done != len(tree.items):
        cyclic = sorted(i for i, n in indeg.items() if n > 0)
        raise TreeValidationError(cyclic[0], f"dependency cycle involving {cyclic}")


def load_tree(text: str) -> TechTree:
    """Parse and validate a tree-definition document (JSON, item name -> fields)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TreeParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(raw, dict):
        raise TreeParseError("top level must be a map of item definitions")

    items: dict[str, ItemDef] = {}
    for name, body in raw.items():
        if not isinstance(body, dict):
            raise TreeParseError(f"definition of '{name}' must be a map")
        try:
            recipe = tuple(
                RecipeEntry(entry["item"], int(entry["quantity"]))
                for entry in body.get("recipe", [])
            )
            items[name] = ItemDef(
                id=name,
                collectable=bool(body["collectable"]),
                required_tool=body.get("required_tool"),
                requires_crafting_table=bool(body.get("requires_crafting_table", False)),
                requires_furnace=bool(body.get("requires_furnace", False)),
                recipe=recipe,
                craft_yield=int(body.get("yield", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise TreeParseError(f"malformed definition for '{name}': {exc}") from exc
    return _validate(items)


def load_tree_file(path) -> TechTree:
    with open(path, encoding="utf-8") as fh:
        return load_tree(fh.read())


def serialize_tree(tree: TechTree) -> str:
    """Canonical form: sorted items, fixed key order, sorted recipe entries."""
    doc = {}
    for name in tree.names():
        d = tree.items[name]
        doc[name] = {
            "collectable": d.collectable,
            "required_tool": d.required_tool,
            "requires_crafting_table": d.requires_crafting_table,
            "requires_furnace": d.requires_furnace,
            "recipe": [
                {"item": e.item, "quantity": e.quantity}
                for e in sorted(d.recipe, key=lambda e: e.item)
            ],
            "yield": d.craft_yield,
        }
    return json.dumps(doc, indent=2) + "\n"


def attempt_collect(
    tree: TechTree,
    item: str,
    inventory: Inventory,
    success_prob: float,
    rng: Random,
    budget: StepBudget = DEFAULT_BUDGET,
) -> Outcome:
    """One collect attempt. Tool gating is ground truth: without the required
    tool in the inventory the attempt fails for every seed (no draw consumed).
    The full per-attempt step budget is charged either way."""
    d = tree.definition(item)
    if not d.collectable:
        raise TreeError(f"item '{item}' is not collectable")
    if not 0.0 <= success_prob <= 1.0:
        raise ValueError("success_prob must be within [0, 1]")
    steps = budget.collect_steps
    if d.required_tool is not None and not inventory.has(d.required_tool):
        return Outcome(False, steps)
    if rng.random() < success_prob:
        inventory.add(item, 1)
        return Outcome(True, steps)
    return Outcome(False, steps)


def attempt_craft(
    tree: TechTree,
    item: str,
    inventory: Inventory,
    budget: StepBudget = DEFAULT_BUDGET,
) -> Outcome:
    """One craft attempt: deterministic given the inventory. Ingredients are
    consumed, the yield added; tools and workbenches are never consumed."""
    d = tree.definition(item)
    if d.collectable:
        raise TreeError(f"item '{item}' is not craftable")
    steps = budget.craft_steps
    if d.requires_crafting_table and not inventory.has(CRAFTING_TABLE):
        return Outcome(False, steps)
    if d.requires_furnace and not inventory.has(FURNACE):
        return Outcome(False, steps)
    if not all(inventory.has(e.item, e.quantity) for e in d.recipe):
        return Outcome(False, steps)
    for e in d.recipe:
        inventory.consume(e.item, e.quantity)
    inventory.add(item, d.craft_yield)
    return Outcome(True, steps)


def make_tree(defs: Iterable[ItemDef]) -> TechTree:
    """Build a validated tree from item definitions (test/scenario helper)."""
    return _validate({d.id: d for d in defs})
