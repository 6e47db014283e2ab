"""Helpful contexts and decision-tree action ordering at search time."""

from __future__ import annotations

import os
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .grounding import GroundAction, GroundTask, State
from .learner import FactIndex, Leaf, RelationalTree, classify, example_bindings
from .logic import context_facts, sanitize, static_facts
from .pddl import Atom

OPERATOR_TREE_FILE = "operators.tree"
CONTEXT_EXAMPLE_ID = "ctx"
LOW_COVERAGE = 5


@dataclass(frozen=True)
class HelpfulContext:
    """H(s): helpful actions, unachieved goals and static facts of a state."""

    task: GroundTask
    state: State
    helpful: tuple[GroundAction, ...]
    target: frozenset[Atom]
    statics: frozenset[Atom]

    def facts(self, ex_id: str = CONTEXT_EXAMPLE_ID) -> FactIndex:
        prob = sanitize(self.task.name)
        ids = [a.id for a in self.helpful]
        return FactIndex(context_facts(self.task, self.state, ids, ex_id, prob) + _static_facts_cached(self.task))


_STATIC_CACHE: "weakref.WeakKeyDictionary[GroundTask, list]" = weakref.WeakKeyDictionary()


def _static_facts_cached(task: GroundTask) -> list:
    hit = _STATIC_CACHE.get(task)
    if hit is None:
        hit = _STATIC_CACHE[task] = static_facts(task, sanitize(task.name))
    return hit


def build_helpful_context(task: GroundTask, s: State, helpful_ids: Iterable[int]) -> HelpfulContext:
    helpful = tuple(task.actions[i] for i in sorted(set(helpful_ids)))
    target = frozenset(
        task.facts.atom(g) for g in task.goals if g not in s and g not in task.static_facts
    )
    statics = frozenset(task.facts.atom(f) for f in task.static_facts)
    return HelpfulContext(task, s, helpful, target, statics)


@dataclass
class DckBundle:
    """Operator tree plus per-operator binding trees (keys are sanitized operator names)."""

    operator_tree: RelationalTree | None = None
    binding_trees: dict[str, RelationalTree] = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.operator_tree is None

    def binding_tree(self, schema: str) -> RelationalTree | None:
        return self.binding_trees.get(sanitize(schema))

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        if self.operator_tree is not None:
            self.operator_tree.save(d / OPERATOR_TREE_FILE)
        for op, tree in sorted(self.binding_trees.items()):
            tree.save(d / f"{op}.tree")

    @classmethod
    def load(cls, directory) -> "DckBundle":
        d = Path(directory)
        op_path = d / OPERATOR_TREE_FILE
        if not op_path.exists():
            raise FileNotFoundError(f"{op_path} not found")
        bindings = {}
        for p in sorted(d.glob("*.tree")):
            if p.name != OPERATOR_TREE_FILE:
                bindings[p.stem] = RelationalTree.load(p)
        return cls(RelationalTree.load(op_path), bindings)

    @classmethod
    def from_files(cls, operator_tree: os.PathLike | str, binding_trees: dict[str, os.PathLike | str]) -> "DckBundle":
        return cls(
            RelationalTree.load(operator_tree),
            {sanitize(k): RelationalTree.load(v) for k, v in binding_trees.items()},
        )


def selection_ratio(selected, rejected) -> Fraction:
    selected, rejected = Fraction(selected), Fraction(rejected)
    if selected < 0 or rejected < 0:
        raise ValueError("counts must be nonnegative")
    total = selected + rejected
    return selected / total if total else Fraction(0)


@dataclass(frozen=True)
class Scored:
    action: GroundAction
    priority: Fraction
    count: Fraction
    ratio: Fraction
    helpful: bool
    binding_leaf: Leaf | None = None


def _binding_leaf(dck: DckBundle, a: GroundAction, facts: FactIndex, prob: str) -> Leaf | None:
    tree = dck.binding_tree(a.schema)
    if tree is None:
        return None
    return classify(tree, facts, example_bindings(tree, CONTEXT_EXAMPLE_ID, prob, [sanitize(x) for x in a.args]))


def _leaf_ratio(leaf: Leaf | None) -> Fraction:
    if leaf is None:
        return Fraction(0)
    return selection_ratio(leaf.counts.get("selected", 0), leaf.counts.get("rejected", 0))


def score_actions(applicable: Sequence[GroundAction], ctx: HelpfulContext, dck: DckBundle) -> tuple[list[Scored], Leaf | None]:
    """Priority breakdown for every kept action (sorted) and the operator leaf."""
    helpful_ids = {a.id for a in ctx.helpful}
    ha = [a for a in applicable if a.id in helpful_ids]
    if dck.empty:
        return [Scored(a, Fraction(1), Fraction(1), Fraction(0), True) for a in ha], None
    facts = ctx.facts()
    prob = sanitize(ctx.task.name)
    op_leaf = classify(dck.operator_tree, facts, example_bindings(dck.operator_tree, CONTEXT_EXAMPLE_ID, prob))
    kept: list[Scored] = []
    for a in ha:
        count = op_leaf.counts.get(sanitize(a.schema), Fraction(0))
        if count > 0:
            leaf = _binding_leaf(dck, a, facts, prob)
            ratio = _leaf_ratio(leaf)
            kept.append(Scored(a, count + ratio, count, ratio, True, leaf))
    max_ha = max((s.priority for s in kept), default=Fraction(0))
    for a in applicable:
        if a.id in helpful_ids:
            continue
        count = op_leaf.counts.get(sanitize(a.schema), Fraction(0))
        if count > max_ha:
            leaf = _binding_leaf(dck, a, facts, prob)
            ratio = _leaf_ratio(leaf)
            kept.append(Scored(a, count + ratio, count, ratio, False, leaf))
    kept.sort(key=lambda s: (-s.priority, not s.helpful, s.action.id))
    return kept, op_leaf


def dt_filter_sort(applicable: Sequence[GroundAction], ctx: HelpfulContext, dck: DckBundle) -> list[tuple[GroundAction, Fraction]]:
    """Kept actions with their priorities, highest priority first.

    Helpful actions are kept when their operator count is positive; a
    non-helpful one only when its operator count alone exceeds the best
    helpful priority.  An empty bundle keeps the helpful actions in
    generation order with priority 1.
    """
    scored, _ = score_actions(applicable, ctx, dck)
    return [(s.action, s.priority) for s in scored]


def explain(task: GroundTask, s: State, helpful_ids: Iterable[int], dck: DckBundle, applicable: Sequence[GroundAction]) -> str:
    ctx = build_helpful_context(task, s, helpful_ids)
    scored, op_leaf = score_actions(applicable, ctx, dck)
    lines = ["helpful actions:"]
    lines += [f"  {a.name}" for a in ctx.helpful] or ["  (none)"]
    lines.append("target goals:")
    lines += [f"  {g}" for g in sorted(map(str, ctx.target))] or ["  (none)"]
    lines.append(f"static facts: {len(ctx.statics)}")
    if op_leaf is None:
        lines.append("operator leaf: (no trees; helpful actions in generation order)")
    else:
        dist = ", ".join(f"{c}:{float(n):g}" for c, n in op_leaf.counts.items())
        lines.append(f"operator leaf: [{op_leaf.majority}] {dist}")
    lines.append("priorities:")
    if not scored:
        lines.append("  (no action passes the filter)")
    for sc in scored:
        kind = "HA" if sc.helpful else "non-HA"
        note = ""
        if sc.binding_leaf is None and not dck.empty:
            note = "  [no binding tree]"
        elif sc.binding_leaf is not None and sc.binding_leaf.total < LOW_COVERAGE:
            note = f"  [low coverage: {float(sc.binding_leaf.total):g} examples]"
        lines.append(
            f"  {sc.action.name}  {kind}  count={float(sc.count):g} ratio={sc.ratio} priority={float(sc.priority):.4f}{note}"
        )
    return "\n".join(lines) + "\n"


def learn_bundle(data, domain, goal_predicates=None, gain_epsilon=None, min_leaf=None) -> DckBundle:
    """Induce the operator tree and one binding tree per operator that has examples."""
    from .learner import GAIN_EPSILON, MIN_LEAF, induce_tree
    from .logic import emit_language_bias

    eps = GAIN_EPSILON if gain_epsilon is None else gain_epsilon
    ml = MIN_LEAF if min_leaf is None else min_leaf
    biases = emit_language_bias(domain, goal_predicates)
    op_tree = induce_tree(data.operators, biases["ops"], eps, ml)
    bindings = {op: induce_tree(kb, biases[op], eps, ml) for op, kb in data.bindings.items() if len(kb)}
    return DckBundle(op_tree, bindings)
