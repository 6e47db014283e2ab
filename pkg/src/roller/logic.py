"""Logic-fact encoding shared by the trainer, the learner and the policy.

Knowledge bases (``.kb``) hold one period-terminated ground atom per line with
``%`` comments.  Language biases (``.bias``) declare the target concept, the
classes and one ``rmode``/``type`` pair per context predicate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .grounding import GroundTask, State
from .pddl import DomainModel, detect_static_predicates

Fact = tuple[str, tuple[str, ...]]

ID_EXAMPLE = "index"
ID_PROBLEM = "idprob"
CLASS_TYPE = "class"


def sanitize(name: str) -> str:
    """Turn a PDDL symbol into a lower-case logic constant."""
    return name.lower().replace("-", "_")


def format_fact(pred: str, args: Iterable[str]) -> str:
    return f"{pred}({', '.join(args)}) ."


_FACT_RE = re.compile(r"^\s*([a-z_][\w]*)\s*\(([^()]*)\)\s*\.\s*$")


def parse_fact(line: str) -> Fact:
    m = _FACT_RE.match(line)
    if not m:
        raise ValueError(f"malformed fact: {line!r}")
    args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2).strip() else ()
    return m.group(1), args


# -- helpful contexts ---------------------------------------------------------


def context_facts(task: GroundTask, state: State, helpful: Iterable[int], ex_id: str, prob_id: str) -> list[Fact]:
    """helpful_* and target_goal_* facts of one state, keyed by example and problem id."""
    out: list[Fact] = []
    for aid in sorted(helpful):
        a = task.actions[aid]
        out.append(("helpful_" + sanitize(a.schema), (ex_id, prob_id) + tuple(sanitize(x) for x in a.args)))
    for atom in task.problem.goals:
        fid = task.facts.id(atom)
        if fid in state or fid in task.static_facts:
            continue
        out.append(("target_goal_" + sanitize(atom.pred), (ex_id, prob_id) + tuple(sanitize(x) for x in atom.args)))
    return out


def static_facts(task: GroundTask, prob_id: str) -> list[Fact]:
    out: list[Fact] = []
    for atom in task.problem.init:
        if atom.pred in task.static_predicates:
            out.append(("static_fact_" + sanitize(atom.pred), (prob_id,) + tuple(sanitize(x) for x in atom.args)))
    return out


# -- knowledge bases -----------------------------------------------------------


@dataclass
class Example:
    id: str
    problem: str
    targets: list[tuple[tuple[str, ...], str]]
    facts: list[Fact]


@dataclass
class KnowledgeBase:
    """Training examples for one target concept.

    Each example carries its target atoms as ``(object args, class label)``
    pairs; the operator target has no object args.  Static facts are stored
    once per problem.
    """

    target: str
    examples: list[Example] = field(default_factory=list)
    statics: dict[str, list[Fact]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(e.targets) for e in self.examples)

    def labels(self) -> list[str]:
        return [lab for e in self.examples for _, lab in e.targets]

    def merge(self, other: "KnowledgeBase") -> None:
        if other.target != self.target:
            raise ValueError(f"cannot merge {other.target} into {self.target}")
        self.examples.extend(other.examples)
        for prob, facts in other.statics.items():
            self.statics.setdefault(prob, facts)

    def dumps(self) -> str:
        lines: list[str] = []
        problems = list(dict.fromkeys([e.problem for e in self.examples] + list(self.statics)))
        for prob in problems:
            for e in self.examples:
                if e.problem != prob:
                    continue
                lines.append(f"% Example {e.id} from problem {e.problem}")
                for args, label in e.targets:
                    lines.append(format_fact(self.target, (e.id, e.problem) + args + (label,)))
                for pred, args in e.facts:
                    lines.append(format_fact(pred, args))
                lines.append("")
            if prob in self.statics:
                lines.append(f"% Static Predicates of problem {prob}")
                for pred, args in self.statics[prob]:
                    lines.append(format_fact(pred, args))
                lines.append("")
        return "\n".join(lines)

    @classmethod
    def loads(cls, text: str, target: str) -> "KnowledgeBase":
        facts: list[Fact] = []
        for raw in text.splitlines():
            line = raw.split("%", 1)[0].strip()
            if line:
                facts.append(parse_fact(line))
        kb = cls(target)
        by_id: dict[str, Example] = {}
        for pred, args in facts:
            if pred == target:
                ex = by_id.get(args[0])
                if ex is None:
                    ex = by_id[args[0]] = Example(args[0], args[1], [], [])
                    kb.examples.append(ex)
                ex.targets.append((args[2:-1], args[-1]))
        problems = {e.problem for e in kb.examples}
        for pred, args in facts:
            if pred == target:
                continue
            if args and args[0] in by_id:
                by_id[args[0]].facts.append((pred, args))
            elif args and args[0] in problems:
                kb.statics.setdefault(args[0], []).append((pred, args))
            else:
                raise ValueError(f"fact {pred}{args} belongs to no example or problem")
        return kb

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path, target: str) -> "KnowledgeBase":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), target)


# -- language bias -------------------------------------------------------------


@dataclass(frozen=True)
class Mode:
    """One declared predicate: per-argument mode (``+``, ``-`` or ``+-``), name and type."""

    pred: str
    modes: tuple[str, ...]
    names: tuple[str, ...]
    types: tuple[str, ...]

    def render_mode(self) -> str:
        return f"{self.pred}({','.join(m + n for m, n in zip(self.modes, self.names))})"

    def render_type(self) -> str:
        return f"{self.pred}({','.join(self.types)})"


@dataclass
class LanguageBias:
    target: Mode
    classes: tuple[str, ...]
    rmodes: list[Mode]

    def dumps(self) -> str:
        out = [
            "% ---- The target concept ----",
            f"predict({self.target.render_mode()}).",
            f"type({self.target.render_type()}).",
            f"classes([{','.join(self.classes)}]).",
            "",
            "% ---- The helpful context ----",
        ]
        groups = (
            ("helpful_", "% predicates for the helpful actions"),
            ("target_goal_", "% predicates for the target goals"),
            ("static_fact_", "% predicates for the static facts"),
        )
        for prefix, title in groups:
            modes = [m for m in self.rmodes if m.pred.startswith(prefix)]
            if not modes:
                continue
            out.append(title)
            for m in modes:
                out.append(f"rmode({m.render_mode()}).")
                out.append(f"type({m.render_type()}).")
                out.append("")
        others = [m for m in self.rmodes if not m.pred.startswith(tuple(p for p, _ in groups))]
        for m in others:
            out.append(f"rmode({m.render_mode()}).")
            out.append(f"type({m.render_type()}).")
            out.append("")
        return "\n".join(out)

    @classmethod
    def loads(cls, text: str) -> "LanguageBias":
        body = "\n".join(line.split("%", 1)[0] for line in text.splitlines())
        decl_re = re.compile(r"(predict|rmode|type)\(\s*([a-z_]\w*)\(([^()]*)\)\s*\)\s*\.")
        target_args = None
        target_pred = None
        mode_args: dict[str, list[str]] = {}
        order: list[str] = []
        types: dict[str, tuple[str, ...]] = {}
        for kind, pred, args in decl_re.findall(body):
            parts = [a.strip() for a in args.split(",")] if args.strip() else []
            if kind == "predict":
                target_pred, target_args = pred, parts
            elif kind == "rmode":
                if pred not in mode_args:
                    order.append(pred)
                mode_args[pred] = parts
            else:
                types[pred] = tuple(parts)
        m = re.search(r"classes\(\s*\[([^\]]*)\]\s*\)\s*\.", body)
        if target_pred is None or m is None:
            raise ValueError("bias lacks predict(...) or classes([...])")
        classes = tuple(c.strip() for c in m.group(1).split(",") if c.strip())

        def mode(pred: str, parts: list[str]) -> Mode:
            modes, names = [], []
            for p in parts:
                mm = re.match(r"(\+-|\+|-)?(.*)", p)
                modes.append(mm.group(1) or "+")
                names.append(mm.group(2))
            if pred not in types or len(types[pred]) != len(parts):
                raise ValueError(f"missing or inconsistent type declaration for {pred}")
            return Mode(pred, tuple(modes), tuple(names), types[pred])

        return cls(mode(target_pred, target_args), classes, [mode(p, mode_args[p]) for p in order])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "LanguageBias":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def _arg_names(types: Iterable[str]) -> tuple[str, ...]:
    counters: dict[str, int] = {}
    names = []
    for t in types:
        letter = t[0].upper()
        counters[letter] = counters.get(letter, 0) + 1
        names.append(f"{letter}{counters[letter]}")
    return tuple(names)


def _context_modes(domain: DomainModel, goal_predicates: Iterable[str] | None) -> list[Mode]:
    statics = detect_static_predicates(domain)
    ids_m, ids_n, ids_t = ("+", "+"), ("IdExample", "IdProblem"), (ID_EXAMPLE, ID_PROBLEM)
    modes: list[Mode] = []
    for op in domain.operators:
        types = tuple(t for _, t in op.params)
        modes.append(
            Mode("helpful_" + sanitize(op.name), ids_m + ("+-",) * len(types), ids_n + _arg_names(types), ids_t + types)
        )
    wanted = None if goal_predicates is None else set(goal_predicates)
    for pd in domain.predicates:
        if pd.name in statics or (wanted is not None and pd.name not in wanted):
            continue
        modes.append(
            Mode(
                "target_goal_" + sanitize(pd.name),
                ids_m + ("+-",) * pd.arity,
                ids_n + _arg_names(pd.arg_types),
                ids_t + pd.arg_types,
            )
        )
    for pd in domain.predicates:
        if pd.name not in statics:
            continue
        modes.append(
            Mode(
                "static_fact_" + sanitize(pd.name),
                ("+",) + ("+-",) * pd.arity,
                ("IdProblem",) + _arg_names(pd.arg_types),
                (ID_PROBLEM,) + pd.arg_types,
            )
        )
    return modes


def operator_bias(domain: DomainModel, goal_predicates: Iterable[str] | None = None) -> LanguageBias:
    target = Mode("selected", ("+", "+", "-"), ("IdExample", "IdProblem", "Operator"), (ID_EXAMPLE, ID_PROBLEM, CLASS_TYPE))
    classes = tuple(sanitize(op.name) for op in domain.operators)
    return LanguageBias(target, classes, _context_modes(domain, goal_predicates))


def binding_bias(domain: DomainModel, op_name: str, goal_predicates: Iterable[str] | None = None) -> LanguageBias:
    op = domain.operator(op_name)
    types = tuple(t for _, t in op.params)
    target = Mode(
        "selected_" + sanitize(op.name),
        ("+", "+") + ("+",) * len(types) + ("-",),
        ("IdExample", "IdProblem") + tuple(f"{t[:4].upper()}{i}" for i, t in enumerate(types)) + ("Class",),
        (ID_EXAMPLE, ID_PROBLEM) + types + (CLASS_TYPE,),
    )
    return LanguageBias(target, ("selected", "rejected"), _context_modes(domain, goal_predicates))


def emit_language_bias(domain: DomainModel, goal_predicates: Iterable[str] | None = None) -> dict[str, LanguageBias]:
    """Operator bias under key ``"ops"`` plus one binding bias per operator (keyed by sanitized name)."""
    goal_predicates = None if goal_predicates is None else list(goal_predicates)
    out = {"ops": operator_bias(domain, goal_predicates)}
    for op in domain.operators:
        out[sanitize(op.name)] = binding_bias(domain, op.name, goal_predicates)
    return out
