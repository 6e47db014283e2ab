"""Policy-guided forward search.

Three algorithms share one evaluation cache and duplicate table per run:

* ``df-policy``: depth-first search that expands the policy's ordering first
  and parks filtered-out successors on a delayed stack.
* ``lookahead-bfs``: weighted best-first search that also inserts a lookahead
  state built by repeatedly following the policy's top action.
* ``lookahead-bfs-ha``: as above, with non-helpful successors kept on a FIFO
  secondary list.
"""

from __future__ import annotations

import heapq
import itertools
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from .grounding import GroundAction, GroundTask, State, applicable_actions
from .policy import DckBundle, build_helpful_context, dt_filter_sort
from .relaxed import INF, Evaluator

ALGORITHMS = ("df-policy", "lookahead-bfs", "lookahead-bfs-ha")
DCK_SOURCES = ("trees", "ff-order", "none")


@dataclass
class SearchConfig:
    algorithm: str = "df-policy"
    dck_source: str = "trees"
    horizon: int = 100
    weight: Fraction = Fraction(1)
    time_bound: float = 60.0
    anytime: bool = False

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.dck_source not in DCK_SOURCES:
            raise ValueError(f"unknown dck source {self.dck_source!r}; choose from {', '.join(DCK_SOURCES)}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        self.weight = Fraction(self.weight)
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        if self.time_bound <= 0:
            raise ValueError("time_bound must be positive")

    @property
    def id(self) -> str:
        return f"{self.algorithm}/{self.dck_source}"


@dataclass
class SearchStats:
    evaluated: int = 0
    expanded: int = 0
    lookahead: int = 0
    time: float = 0.0
    timeout: bool = False

    def line(self, length) -> str:
        return (
            f"evaluated={self.evaluated} expanded={self.expanded} lookahead={self.lookahead} "
            f"length={length if length is not None else -1} time={self.time:.3f}"
        )


@dataclass
class SearchResult:
    plan: list[GroundAction] | None
    stats: SearchStats = field(default_factory=SearchStats)
    expansion_order: list[State] = field(default_factory=list, repr=False)

    @property
    def solved(self) -> bool:
        return self.plan is not None

    @property
    def length(self) -> int | None:
        return None if self.plan is None else len(self.plan)


class Node:
    __slots__ = ("state", "parent", "action", "g")

    def __init__(self, state: State, parent: "Node | None", action: GroundAction | None, g: int):
        self.state = state
        self.parent = parent
        self.action = action
        self.g = g

    def plan(self) -> list[GroundAction]:
        out = []
        n = self
        while n.action is not None:
            out.append(n.action)
            n = n.parent
        out.reverse()
        return out


class _Timeout(Exception):
    pass


class _Run:
    """Per-search state: evaluation cache, duplicate table, statistics and the anytime bound."""

    def __init__(self, task: GroundTask, dck: DckBundle | None, cfg: SearchConfig, evaluator: Evaluator | None = None):
        self.task = task
        self.dck = dck if dck is not None else DckBundle()
        if cfg.dck_source == "trees" and self.dck.empty:
            raise ValueError("dck_source 'trees' needs a bundle with an operator tree")
        self.cfg = cfg
        self.ev = evaluator or Evaluator(task)
        self.evals: dict[State, tuple[float, tuple[int, ...]]] = {}
        self.best_g: dict[State, int] = {}
        self.stats = SearchStats()
        self.start = time.perf_counter()
        self.deadline = self.start + cfg.time_bound
        self.bound = INF
        self.trace: list[State] = []
        self._ticks = 0

    def check_time(self) -> None:
        self._ticks += 1
        if (self._ticks & 31) == 0 and time.perf_counter() > self.deadline:
            self.stats.timeout = True
            raise _Timeout

    def evaluate(self, s: State) -> tuple[float, tuple[int, ...]]:
        hit = self.evals.get(s)
        if hit is None:
            self.check_time()
            hit = self.evals[s] = self.ev.evaluate(s)
            self.stats.evaluated += 1
        return hit

    def ordered(self, s: State, helpful: tuple[int, ...], applicable: list[GroundAction]) -> list[GroundAction]:
        """The policy's kept actions for ``s`` in priority order (AA' in the algorithms)."""
        src = self.cfg.dck_source
        if src == "trees":
            ctx = build_helpful_context(self.task, s, helpful)
            return [a for a, _ in dt_filter_sort(applicable, ctx, self.dck)]
        hs = set(helpful)
        ha = [a for a in applicable if a.id in hs]
        if src == "none":
            return ha
        keyed = []
        for a in ha:
            h, _ = self.evaluate((s - a.dele) | a.add)
            keyed.append((h, a.id, a))
        keyed.sort(key=lambda t: (t[0], t[1]))
        return [a for _, _, a in keyed]

    def result(self, node: Node | None) -> SearchResult:
        self.stats.time = time.perf_counter() - self.start
        stats = SearchStats(**vars(self.stats))
        return SearchResult(node.plan() if node is not None else None, stats, list(self.trace))


# -- depth-first policy search ---------------------------------------------------


def _df_policy(run: _Run) -> Iterator[SearchResult]:
    task = run.task
    root = Node(task.init, None, None, 0)
    open_list: deque[Node] = deque([root])
    delayed: list[Node] = []
    run.best_g[root.state] = 0
    try:
        while True:
            if not open_list:
                moved = False
                while delayed and not moved:
                    n = delayed.pop()
                    if n.g + 1 > run.bound:
                        continue
                    old = run.best_g.get(n.state)
                    if old is None or n.g < old:
                        run.best_g[n.state] = n.g
                        open_list.append(n)
                        moved = True
                if not moved:
                    break
            n = open_list.popleft()
            if run.best_g.get(n.state, n.g) < n.g or n.g >= run.bound:
                continue
            h, helpful = run.evaluate(n.state)
            if h == INF:
                continue
            if h == 0:
                yield run.result(n)
                run.bound = n.g
                continue
            run.stats.expanded += 1
            run.trace.append(n.state)
            g2 = n.g + 1
            if g2 >= run.bound:
                continue
            applicable = applicable_actions(task, n.state)
            chosen = run.ordered(n.state, helpful, applicable)
            chosen_ids = {a.id for a in chosen}
            front = []
            for a in chosen:
                s2 = (n.state - a.dele) | a.add
                old = run.best_g.get(s2)
                if old is None or g2 < old:
                    run.best_g[s2] = g2
                    front.append(Node(s2, n, a, g2))
            open_list.extendleft(reversed(front))
            for a in reversed(applicable):
                if a.id not in chosen_ids:
                    s2 = (n.state - a.dele) | a.add
                    old = run.best_g.get(s2)
                    if old is None or g2 < old:
                        delayed.append(Node(s2, n, a, g2))
    except _Timeout:
        pass


def df_hcontext_policy(task: GroundTask, dck: DckBundle | None, cfg: SearchConfig, evaluator: Evaluator | None = None) -> SearchResult:
    """First plan found by the depth-first policy search (or a failure result)."""
    run = _Run(task, dck, cfg, evaluator)
    for res in _df_policy(run):
        return res
    return run.result(None)


# -- lookahead best-first search --------------------------------------------------


class _OpenList:
    """Heap ordered by (f, h, insertion order)."""

    def __init__(self) -> None:
        self.heap: list = []
        self.counter = itertools.count()

    def push(self, f, h, node: Node) -> None:
        heapq.heappush(self.heap, (f, h, next(self.counter), node))

    def pop(self) -> Node:
        return heapq.heappop(self.heap)[3]

    def __len__(self) -> int:
        return len(self.heap)


def add_to_open(run: _Run, node: Node, open_list: _OpenList) -> bool:
    """Insert ``node`` by f = w*h + g; False for a repeat without lower g or a dead end."""
    old = run.best_g.get(node.state)
    if old is not None and node.g >= old:
        return False
    h, _ = run.evaluate(node.state)
    if h == INF:
        return False
    f = run.cfg.weight * h + node.g
    if f >= run.bound:
        return False
    run.best_g[node.state] = node.g
    open_list.push(f, h, node)
    return True


def add_lookahead_successors(run: _Run, n: Node, horizon: int, open_list: _OpenList) -> Node:
    """Follow the policy's best addable action up to ``horizon`` steps, adding each state to open."""
    task = run.task
    while horizon > 0:
        _, helpful = run.evaluate(n.state)
        nxt = None
        for a in run.ordered(n.state, helpful, applicable_actions(task, n.state)):
            child = Node((n.state - a.dele) | a.add, n, a, n.g + 1)
            if add_to_open(run, child, open_list):
                nxt = child
                break
        if nxt is None:
            return n
        run.stats.lookahead += 1
        if task.is_goal(nxt.state):
            return nxt
        n = nxt
        horizon -= 1
    return n


def _lookahead_bfs(run: _Run, ha_only: bool) -> Iterator[SearchResult]:
    task = run.task
    open_list = _OpenList()
    secondary: deque[Node] = deque()
    try:
        add_to_open(run, Node(task.init, None, None, 0), open_list)
        while True:
            if not open_list:
                while secondary and not open_list:
                    add_to_open(run, secondary.popleft(), open_list)
                if not open_list:
                    break
            n = open_list.pop()
            if run.best_g.get(n.state, n.g) < n.g:
                continue
            h, helpful = run.evaluate(n.state)
            if run.cfg.weight * h + n.g >= run.bound:
                continue
            if task.is_goal(n.state):
                yield run.result(n)
                run.bound = n.g
                continue
            run.stats.expanded += 1
            run.trace.append(n.state)
            add_lookahead_successors(run, n, run.cfg.horizon, open_list)
            hs = set(helpful)
            for a in applicable_actions(task, n.state):
                child = Node((n.state - a.dele) | a.add, n, a, n.g + 1)
                if ha_only and a.id not in hs:
                    secondary.append(child)
                else:
                    add_to_open(run, child, open_list)
    except _Timeout:
        pass


def hcontext_lookahead_bfs(task: GroundTask, dck: DckBundle | None, cfg: SearchConfig, evaluator: Evaluator | None = None) -> SearchResult:
    run = _Run(task, dck, cfg, evaluator)
    for res in _lookahead_bfs(run, cfg.algorithm == "lookahead-bfs-ha"):
        return res
    return run.result(None)


# -- entry points ---------------------------------------------------------------------


def _stream(run: _Run) -> Iterator[SearchResult]:
    if run.cfg.algorithm == "df-policy":
        return _df_policy(run)
    return _lookahead_bfs(run, run.cfg.algorithm == "lookahead-bfs-ha")


def _anytime(run: _Run) -> Iterator[SearchResult]:
    last = None
    for res in _stream(run):
        if last is not None and res.length >= last:
            raise AssertionError("anytime stream did not improve")
        last = res.length
        yield res


def anytime(task: GroundTask, dck: DckBundle | None, cfg: SearchConfig, evaluator: Evaluator | None = None) -> Iterator[SearchResult]:
    """Strictly improving plans; after a plan of length L, nodes with g >= L (f >= L for best-first) are pruned."""
    return _anytime(_Run(task, dck, cfg, evaluator))


def solve(task: GroundTask, dck: DckBundle | None, cfg: SearchConfig, evaluator: Evaluator | None = None) -> SearchResult:
    """Run the configured algorithm; with ``cfg.anytime`` return the last (best) plan found."""
    if not cfg.anytime:
        if cfg.algorithm == "df-policy":
            return df_hcontext_policy(task, dck, cfg, evaluator)
        return hcontext_lookahead_bfs(task, dck, cfg, evaluator)
    run = _Run(task, dck, cfg, evaluator)
    best = None
    for best in _anytime(run):
        pass
    if best is None:
        return run.result(None)
    # report the effort of the whole anytime run alongside the best plan
    final = run.result(None)
    return SearchResult(best.plan, final.stats, final.expansion_order)
