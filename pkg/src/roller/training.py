"""Training-example generation from exhaustively solved problems.

A best-first branch and bound collects every best-cost plan (no repeated
state pruning, so commutative orderings stay distinct), plans are ranked by
action preferences, and the top-ranked plans are turned into operator and
binding examples.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .grounding import GroundTask, State, applicable_actions
from .logic import Example, KnowledgeBase, context_facts, sanitize, static_facts
from .relaxed import INF, Evaluator

log = logging.getLogger(__name__)

DEFAULT_TIME_BOUND = 60.0


@dataclass
class SolutionSet:
    """All best-cost plans of one task.

    ``on_solution`` is the tagged search tree restricted to solution nodes:
    it maps every plan prefix (a tree node) to the action ids of its children
    that lie on some best-cost plan.
    """

    task: GroundTask
    best_cost: float
    plans: list[tuple[int, ...]]
    exhausted: bool
    on_solution: dict[tuple[int, ...], frozenset[int]] = field(default_factory=dict)
    expanded: int = 0
    generated: int = 0

    def tagged_children(self, prefix: tuple[int, ...]) -> frozenset[int]:
        return self.on_solution.get(tuple(prefix), frozenset())


def tag_plans(plans) -> dict[tuple[int, ...], frozenset[int]]:
    children: dict[tuple[int, ...], set[int]] = {}
    for plan in plans:
        for i, a in enumerate(plan):
            children.setdefault(tuple(plan[:i]), set()).add(a)
    return {k: frozenset(v) for k, v in children.items()}


def bfs_bnb_solve_all(task: GroundTask, time_bound: float = DEFAULT_TIME_BOUND, evaluator: Evaluator | None = None) -> SolutionSet:
    """Best-first branch and bound over f = g + h_FF returning all best-cost plans.

    Nodes with ``f > best`` are pruned; equal-cost alternatives survive.  If
    the open list does not empty within ``time_bound`` seconds the result has
    ``exhausted = False`` and must not be used for training.
    """
    if time_bound <= 0:
        raise ValueError("time_bound must be positive")
    ev = evaluator or Evaluator(task)
    deadline = time.perf_counter() + time_bound
    hcache: dict[State, float] = {}

    def h_of(s: State) -> float:
        h = hcache.get(s)
        if h is None:
            h = hcache[s] = ev.evaluate(s)[0]
        return h

    parent: list[int] = [-1]
    via: list[int] = [-1]
    depth: list[int] = [0]
    counter = itertools.count()
    h0 = h_of(task.init)
    heap: list = []
    if h0 != INF:
        heap.append((h0, h0, next(counter), 0, task.init))
    best = INF
    goal_nodes: list[int] = []
    expanded = 0
    exhausted = True
    actions_cache: dict[State, list] = {}
    while heap:
        if time.perf_counter() > deadline:
            exhausted = False
            break
        f, h, _, nid, s = heapq.heappop(heap)
        if f > best:
            break
        g = depth[nid]
        if h == 0:
            if g < best:
                best = g
                goal_nodes = [nid]
            elif g == best:
                goal_nodes.append(nid)
            continue
        expanded += 1
        succ = actions_cache.get(s)
        if succ is None:
            succ = []
            for a in applicable_actions(task, s):
                s2 = (s - a.dele) | a.add
                h2 = h_of(s2)
                if h2 != INF:
                    succ.append((a.id, s2, h2))
            actions_cache[s] = succ
        g2 = g + 1
        for aid, s2, h2 in succ:
            f2 = g2 + h2
            if f2 > best:
                continue
            parent.append(nid)
            via.append(aid)
            depth.append(g2)
            heapq.heappush(heap, (f2, h2, next(counter), len(parent) - 1, s2))
    plans = []
    for nid in goal_nodes:
        steps = []
        while nid > 0:
            steps.append(via[nid])
            nid = parent[nid]
        plans.append(tuple(reversed(steps)))
    plans.sort()
    log.debug("bnb %s: cost=%s plans=%d expanded=%d exhausted=%s", task.name, best, len(plans), expanded, exhausted)
    return SolutionSet(task, best, plans, exhausted, tag_plans(plans), expanded, len(parent))


# -- ranking -----------------------------------------------------------------


def phi_commitment(solset: SolutionSet, plan, i: int) -> int:
    """On-solution children of the tree node reached by the first ``i`` actions of ``plan``."""
    if not 1 <= i <= len(plan):
        raise ValueError("i must lie in 1..len(plan)")
    return len(solset.tagged_children(tuple(plan[:i])))


def supporter_counts(task: GroundTask) -> list[int]:
    counts = [0] * len(task.facts)
    for a in task.actions:
        for f in a.add:
            counts[f] += 1
    return counts


def phi_difficulty(task: GroundTask, a, _counts: list[int] | None = None) -> Fraction:
    """1 / (fewest achievers of any add effect of ``a``); 0 for an empty add list."""
    if isinstance(a, int):
        a = task.actions[a]
    if not a.add:
        return Fraction(0)
    counts = _counts if _counts is not None else supporter_counts(task)
    return Fraction(1, min(counts[f] for f in a.add))


def ranking(values) -> Fraction:
    """Position-weighted sum: the i-th (0-based) value is weighted by (n - i) / n."""
    n = len(values)
    return sum((Fraction(n - i, n) * v for i, v in enumerate(values)), Fraction(0))


@dataclass
class RankedSolutions:
    commitment: list[Fraction]
    difficulty: list[Fraction]
    top: list[int]

    def top_plans(self, solset: SolutionSet) -> list[tuple[int, ...]]:
        return [solset.plans[i] for i in self.top]


def rank_solutions(solset: SolutionSet) -> RankedSolutions:
    """Rank by commitment, break ties by difficulty; ``top`` holds plan indices."""
    if not solset.exhausted:
        raise ValueError("refusing to rank a solution set that was not exhaustively explored")
    task = solset.task
    counts = supporter_counts(task)
    com, dif = [], []
    for plan in solset.plans:
        com.append(ranking([phi_commitment(solset, plan, i) for i in range(1, len(plan) + 1)]))
        dif.append(ranking([phi_difficulty(task, a, counts) for a in plan]))
    if not solset.plans:
        return RankedSolutions([], [], [])
    best_c = max(com)
    cands = [i for i, c in enumerate(com) if c == best_c]
    best_d = max(dif[i] for i in cands)
    return RankedSolutions(com, dif, [i for i in cands if dif[i] == best_d])


# -- example extraction --------------------------------------------------------


def _states(task: GroundTask, plan) -> list[State]:
    states = [task.init]
    for aid in plan:
        a = task.actions[aid]
        states.append((states[-1] - a.dele) | a.add)
    return states


def _pairs(solset: SolutionSet, ranked: RankedSolutions, evaluator: Evaluator | None):
    """Yield ``(example id, plan, i, state, helpful)`` for every decision of every top plan."""
    task = solset.task
    ev = evaluator or Evaluator(task)
    prob = sanitize(task.name)
    k = 0
    cache: dict[State, tuple[int, ...]] = {}
    for plan in ranked.top_plans(solset):
        states = _states(task, plan)
        for i in range(len(plan)):
            k += 1
            s = states[i]
            if s not in cache:
                cache[s] = ev.evaluate(s)[1]
            yield f"{prob}_e{k}", plan, i, s, cache[s]


def extract_operator_examples(solset: SolutionSet, ranked: RankedSolutions, evaluator: Evaluator | None = None) -> KnowledgeBase:
    task = solset.task
    prob = sanitize(task.name)
    kb = KnowledgeBase("selected")
    for ex_id, plan, i, s, helpful in _pairs(solset, ranked, evaluator):
        op = sanitize(task.actions[plan[i]].schema)
        kb.examples.append(Example(ex_id, prob, [((), op)], context_facts(task, s, helpful, ex_id, prob)))
    kb.statics[prob] = static_facts(task, prob)
    return kb


def extract_binding_examples(
    solset: SolutionSet, ranked: RankedSolutions, op_name: str, evaluator: Evaluator | None = None
) -> KnowledgeBase:
    """Binding examples for one operator: every applicable instantiation, selected iff on a best plan."""
    task = solset.task
    prob = sanitize(task.name)
    kb = KnowledgeBase("selected_" + sanitize(op_name))
    for ex_id, plan, i, s, helpful in _pairs(solset, ranked, evaluator):
        chosen = task.actions[plan[i]]
        if chosen.schema != op_name:
            continue
        tagged = solset.tagged_children(plan[:i])
        targets = []
        for a in applicable_actions(task, s):
            if a.schema == op_name:
                label = "selected" if a.id in tagged else "rejected"
                targets.append((tuple(sanitize(x) for x in a.args), label))
        kb.examples.append(Example(ex_id, prob, targets, context_facts(task, s, helpful, ex_id, prob)))
    kb.statics[prob] = static_facts(task, prob)
    return kb


@dataclass
class TrainingData:
    operators: KnowledgeBase
    bindings: dict[str, KnowledgeBase]
    solved: list[str] = field(default_factory=list)
    discarded: list[str] = field(default_factory=list)


def generate_training_data(tasks, time_bound: float = DEFAULT_TIME_BOUND) -> TrainingData:
    """Solve, rank and encode every task; tasks not exhausted in time are discarded."""
    tasks = list(tasks)
    if not tasks:
        raise ValueError("no training tasks")
    domain = tasks[0].domain
    data = TrainingData(KnowledgeBase("selected"), {sanitize(op.name): KnowledgeBase("selected_" + sanitize(op.name)) for op in domain.operators})
    for task in tasks:
        ev = Evaluator(task)
        sol = bfs_bnb_solve_all(task, time_bound, ev)
        if not sol.exhausted or not sol.plans:
            log.info("discarding %s (exhausted=%s, plans=%d)", task.name, sol.exhausted, len(sol.plans))
            data.discarded.append(task.name)
            continue
        ranked = rank_solutions(sol)
        data.operators.merge(extract_operator_examples(sol, ranked, ev))
        for op in domain.operators:
            data.bindings[sanitize(op.name)].merge(extract_binding_examples(sol, ranked, op.name, ev))
        data.solved.append(task.name)
        log.info("%s: cost=%s plans=%d top=%d", task.name, sol.best_cost, len(sol.plans), len(ranked.top))
    return data
