"""Grounding of operator schemas into integer-indexed STRIPS actions.

States are ``frozenset`` objects of fact ids.  Facts of static predicates are
kept once on the task (``GroundTask.static_facts``) and never appear in a
state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .pddl import Atom, DomainModel, ProblemModel, detect_static_predicates

State = frozenset


class FactTable:
    """Bidirectional ground-atom <-> dense fact id map."""

    def __init__(self) -> None:
        self._atoms: list[Atom] = []
        self._ids: dict[Atom, int] = {}

    def intern(self, atom: Atom) -> int:
        fid = self._ids.get(atom)
        if fid is None:
            fid = len(self._atoms)
            self._atoms.append(atom)
            self._ids[atom] = fid
        return fid

    def id(self, atom: Atom) -> int:
        return self._ids[atom]

    def get(self, atom: Atom) -> int | None:
        return self._ids.get(atom)

    def atom(self, fid: int) -> Atom:
        return self._atoms[fid]

    def __len__(self) -> int:
        return len(self._atoms)

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._ids

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._atoms)


@dataclass(frozen=True, eq=False)
class GroundAction:
    id: int
    schema: str
    args: tuple[str, ...]
    pre: frozenset[int]
    add: frozenset[int]
    dele: frozenset[int]
    # preconditions on non-static facts; the static ones held in s0 by construction
    dyn_pre: frozenset[int] = field(repr=False, default=frozenset())

    @property
    def name(self) -> str:
        return "(" + " ".join((self.schema,) + self.args) + ")"

    def __str__(self) -> str:
        return self.name


@dataclass(eq=False)
class GroundTask:
    domain: DomainModel
    problem: ProblemModel
    facts: FactTable
    actions: list[GroundAction]
    init: State
    goals: frozenset[int]
    static_facts: frozenset[int]
    static_predicates: frozenset[str]

    @property
    def name(self) -> str:
        return self.problem.name

    def is_goal(self, s: State) -> bool:
        return all(g in s or g in self.static_facts for g in self.goals)

    def action_by_name(self, schema: str, *args: str) -> GroundAction:
        for a in self.actions:
            if a.schema == schema and a.args == args:
                return a
        raise KeyError(f"({schema} {' '.join(args)})")

    def atoms(self, fids) -> list[Atom]:
        return [self.facts.atom(f) for f in sorted(fids)]


def objects_by_type(domain: DomainModel, problem: ProblemModel) -> dict[str, list[str]]:
    """Every type mapped to its objects (including objects of subtypes), in declaration order."""
    out: dict[str, list[str]] = {t: [] for t in domain.types.names}
    for name, t in domain.constants + problem.objects:
        for anc in domain.types.ancestors(t):
            if name not in out[anc]:
                out[anc].append(name)
    return out


def _substitute(atom: Atom, binding: dict[str, str]) -> Atom:
    return Atom(atom.pred, tuple(binding.get(a, a) for a in atom.args))


def ground_task(domain: DomainModel, problem: ProblemModel) -> GroundTask:
    """Instantiate every operator over type-compatible objects.

    Instantiations whose static preconditions do not hold in the initial
    state are never created; neither are instantiations whose add and delete
    lists overlap (e.g. ``turn_to(s, d, d)`` or ``stack(a, a)``).
    """
    statics = frozenset(detect_static_predicates(domain))
    facts = FactTable()
    for atom in problem.init:
        facts.intern(atom)
    for atom in problem.goals:
        facts.intern(atom)
    static_atoms = {a for a in problem.init if a.pred in statics}
    by_type = objects_by_type(domain, problem)

    actions: list[GroundAction] = []
    for op in domain.operators:
        names = op.param_names
        pos = {v: i for i, v in enumerate(names)}
        # static preconditions, each checked as soon as its last variable is bound
        checks: list[list[Atom]] = [[] for _ in range(len(names) + 1)]
        for atom in op.pre:
            if atom.pred in statics:
                depth = max((pos[a] + 1 for a in atom.args if a in pos), default=0)
                checks[depth].append(atom)
        if any(_substitute(a, {}) not in static_atoms for a in checks[0]):
            continue
        domains = [by_type[t] for _, t in op.params]
        binding: dict[str, str] = {}

        def emit() -> None:
            add = frozenset(facts.intern(_substitute(a, binding)) for a in op.add)
            dele = frozenset(facts.intern(_substitute(a, binding)) for a in op.dele)
            if add & dele:
                return
            pre_atoms = [_substitute(a, binding) for a in op.pre]
            pre = frozenset(facts.intern(a) for a in pre_atoms)
            dyn = frozenset(facts.id(a) for a in pre_atoms if a.pred not in statics)
            args = tuple(binding[v] for v in names)
            actions.append(GroundAction(len(actions), op.name, args, pre, add, dele, dyn))

        def extend(depth: int) -> None:
            if depth == len(names):
                emit()
                return
            var = names[depth]
            for obj in domains[depth]:
                binding[var] = obj
                if all(_substitute(a, binding) in static_atoms for a in checks[depth + 1]):
                    extend(depth + 1)
            binding.pop(var, None)

        extend(0)

    static_ids = frozenset(facts.id(a) for a in static_atoms)
    init = frozenset(facts.id(a) for a in problem.init) - static_ids
    goals = frozenset(facts.id(a) for a in problem.goals)
    return GroundTask(domain, problem, facts, actions, init, goals, static_ids, statics)


def applicable_actions(task: GroundTask, s: State) -> list[GroundAction]:
    """Actions whose preconditions hold in ``s`` (plus statics), by ascending id."""
    return [a for a in task.actions if a.dyn_pre <= s]


def apply_action(s: State, a: GroundAction) -> State:
    if not a.dyn_pre <= s:
        raise ValueError(f"{a.name} is not applicable")
    return (s - a.dele) | a.add


def validate_plan(task: GroundTask, plan) -> bool:
    """Replay ``plan`` from the initial state; True iff every step applies and the goals hold."""
    s = task.init
    for a in plan:
        if not a.dyn_pre <= s:
            return False
        s = (s - a.dele) | a.add
    return task.is_goal(s)
