"""Delete-relaxation heuristic with relaxed-plan extraction and helpful actions.

Ties are fixed so that evaluations are reproducible: within a goal layer,
goals are processed by ascending fact id, and among achievers of minimal
layer the one with the lowest action id is chosen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .grounding import GroundTask, State

INF = math.inf


@dataclass(frozen=True)
class RelaxedPlanningGraph:
    """Layered reachability from a state, stored as first-appearance levels.

    ``fact_level[f]`` is the index of the first fact layer containing ``f``
    (``INF`` if unreached) and ``action_level[a]`` the first action layer
    containing ``a``.
    """

    task: GroundTask
    state: State
    fact_level: list
    action_level: list
    depth: int
    goals_reached: bool

    @cached_property
    def fact_layers(self) -> list[frozenset[int]]:
        return [frozenset(f for f, lv in enumerate(self.fact_level) if lv <= i) for i in range(self.depth + 1)]

    @cached_property
    def action_layers(self) -> list[frozenset[int]]:
        return [frozenset(a for a, lv in enumerate(self.action_level) if lv <= i) for i in range(self.depth)]

    def first_layer_of(self, fid: int) -> float:
        return self.fact_level[fid]


@dataclass(frozen=True)
class RelaxedResult:
    h: float
    relaxed_plan: frozenset[int]
    helpful: tuple[int, ...]
    goal_sets: tuple[frozenset[int], ...]


class Evaluator:
    """FF heuristic evaluator for one task; keeps per-task index structures."""

    def __init__(self, task: GroundTask):
        self.task = task
        n_facts = len(task.facts)
        self.n_facts = n_facts
        self.pre_count = [len(a.dyn_pre) for a in task.actions]
        self.pre_of: list[list[int]] = [[] for _ in range(n_facts)]
        self.achievers: list[list[int]] = [[] for _ in range(n_facts)]
        for a in task.actions:
            for f in a.dyn_pre:
                self.pre_of[f].append(a.id)
            for f in a.add:
                self.achievers[f].append(a.id)
        self.free_actions = [a.id for a in task.actions if not a.dyn_pre]
        self.adds = [tuple(a.add) for a in task.actions]
        self.dyn_pre = [tuple(a.dyn_pre) for a in task.actions]
        self.goals = tuple(sorted(task.goals))
        self.calls = 0

    def build_rpg(self, s: State) -> RelaxedPlanningGraph:
        task = self.task
        level = [INF] * self.n_facts
        for f in s:
            level[f] = 0
        for f in task.static_facts:
            level[f] = 0
        alevel = [INF] * len(task.actions)
        counter = list(self.pre_count)
        goals = self.goals
        missing = sum(1 for g in goals if level[g] != 0)
        frontier = list(s)
        newly = list(self.free_actions)
        t = 0
        pre_of, adds = self.pre_of, self.adds
        while missing:
            for f in frontier:
                for a in pre_of[f]:
                    counter[a] -= 1
                    if counter[a] == 0:
                        newly.append(a)
            nxt = []
            t1 = t + 1
            for a in newly:
                alevel[a] = t
                for f in adds[a]:
                    if level[f] == INF:
                        level[f] = t1
                        nxt.append(f)
            if not nxt:
                return RelaxedPlanningGraph(task, s, level, alevel, t, False)
            for f in nxt:
                if f in task.goals:
                    missing -= 1
            frontier = nxt
            newly = []
            t = t1
        return RelaxedPlanningGraph(task, s, level, alevel, t, True)

    def extract(self, rpg: RelaxedPlanningGraph) -> RelaxedResult:
        if not rpg.goals_reached:
            return RelaxedResult(INF, frozenset(), (), ())
        t = rpg.depth
        level, alevel = rpg.fact_level, rpg.action_level
        goal_sets: list[set[int]] = [set() for _ in range(t + 1)]
        for g in self.goals:
            goal_sets[level[g]].add(g)
        plan: set[int] = set()
        achievers, dyn_pre, adds = self.achievers, self.dyn_pre, self.adds
        for i in range(t, 0, -1):
            marked: set[int] = set()
            want = i - 1
            for g in sorted(goal_sets[i]):
                if g in marked:
                    continue
                a = next(a for a in achievers[g] if alevel[a] == want)
                plan.add(a)
                for p in dyn_pre[a]:
                    lp = level[p]
                    if lp:
                        goal_sets[lp].add(p)
                marked.update(adds[a])
        helpful: tuple[int, ...] = ()
        if t >= 1:
            g1 = goal_sets[1]
            helpful = tuple(sorted({a for f in g1 for a in achievers[f] if alevel[a] == 0}))
        return RelaxedResult(len(plan), frozenset(plan), helpful, tuple(frozenset(g) for g in goal_sets))

    def evaluate(self, s: State) -> tuple[float, tuple[int, ...]]:
        """Return ``(h, helpful action ids)`` for ``s``."""
        self.calls += 1
        r = self.extract(self.build_rpg(s))
        return r.h, r.helpful


def build_rpg(task: GroundTask, s: State) -> RelaxedPlanningGraph:
    return Evaluator(task).build_rpg(s)


def extract_relaxed_plan(rpg: RelaxedPlanningGraph, goals=None) -> RelaxedResult:
    """Backward relaxed-plan extraction over ``rpg`` (goals default to the task's)."""
    ev = Evaluator(rpg.task)
    if goals is not None:
        ev.goals = tuple(sorted(goals))
        if rpg.goals_reached and any(rpg.fact_level[g] == INF for g in ev.goals):
            return RelaxedResult(INF, frozenset(), (), ())
    return ev.extract(rpg)


def helpful_actions(rresult: RelaxedResult, rpg: RelaxedPlanningGraph) -> frozenset[int]:
    """Layer-0 actions whose add list meets the first subgoal layer."""
    if rresult.h == INF or len(rresult.goal_sets) < 2:
        return frozenset()
    g1 = rresult.goal_sets[1]
    return frozenset(
        a.id for a in rpg.task.actions if rpg.action_level[a.id] == 0 and a.add & g1
    )
