"""Typed-STRIPS subset of PDDL: tokenizer, parser, models and printer.

Only ``:strips`` and ``:typing`` are accepted.  Anything else (negative
preconditions, conditional effects, quantifiers, numeric fluents, ``either``
types) is rejected with a diagnostic that names the offending feature.
All symbols are lower-cased on input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

ROOT_TYPE = "object"

_UNSUPPORTED_KEYWORDS = {
    "not": "negative preconditions",
    "or": "disjunctive preconditions",
    "imply": "disjunctive preconditions",
    "when": "conditional effects",
    "forall": "universal quantifiers",
    "exists": "existential quantifiers",
    "either": "either types",
    "increase": "numeric fluents",
    "decrease": "numeric fluents",
    "assign": "numeric fluents",
    "scale-up": "numeric fluents",
    "scale-down": "numeric fluents",
    "=": "equality",
}

_SUPPORTED_REQUIREMENTS = {":strips", ":typing"}


class PDDLError(Exception):
    """Syntax or semantic error, formatted as ``file:line:col: message``."""

    def __init__(self, message: str, line: int = 0, col: int = 0, filename: str = "<string>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.col}: {self.message}"


# -- s-expressions -----------------------------------------------------------


class Sym(str):
    """A symbol token that remembers where it came from."""

    line: int
    col: int

    def __new__(cls, value: str, line: int, col: int) -> "Sym":
        obj = super().__new__(cls, value)
        obj.line = line
        obj.col = col
        return obj


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def read_sexpr(text: str, filename: str = "<string>") -> SList:
    """Read exactly one top-level s-expression."""
    stack: list[SList] = []
    top: SList | None = None
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        tok = m.group(0)
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        if tok == "(":
            lst = SList()
            lst.line, lst.col = line, col
            if stack:
                stack[-1].append(lst)
            elif top is not None:
                raise PDDLError("unexpected text after end of definition", line, col, filename)
            stack.append(lst)
        elif tok == ")":
            if not stack:
                raise PDDLError("unbalanced ')'", line, col, filename)
            done = stack.pop()
            if not stack:
                top = done
        else:
            if not stack:
                raise PDDLError(f"unexpected symbol {tok!r} outside of a list", line, col, filename)
            stack[-1].append(Sym(tok.lower(), line, col))
    if stack:
        raise PDDLError("unbalanced '(': missing ')'", stack[-1].line, stack[-1].col, filename)
    if top is None:
        raise PDDLError("empty input", line, 1, filename)
    return top


# -- models ------------------------------------------------------------------


class Atom(NamedTuple):
    pred: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "(" + " ".join((self.pred,) + self.args) + ")"


@dataclass(frozen=True)
class TypeHierarchy:
    parent: dict[str, str]

    @property
    def names(self) -> frozenset[str]:
        return frozenset(self.parent) | {ROOT_TYPE}

    def ancestors(self, t: str) -> list[str]:
        chain = [t]
        while t != ROOT_TYPE:
            t = self.parent[t]
            chain.append(t)
        return chain

    def is_subtype(self, t: str, of: str) -> bool:
        return of in self.ancestors(t)


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    arg_types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_types)


@dataclass(frozen=True)
class OperatorSchema:
    name: str
    params: tuple[tuple[str, str], ...]
    pre: tuple[Atom, ...]
    add: tuple[Atom, ...]
    dele: tuple[Atom, ...]

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.params)


@dataclass(frozen=True)
class DomainModel:
    name: str
    types: TypeHierarchy
    constants: tuple[tuple[str, str], ...]
    predicates: tuple[PredicateDecl, ...]
    operators: tuple[OperatorSchema, ...]
    _pred_index: dict[str, PredicateDecl] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_pred_index", {p.name: p for p in self.predicates})

    def predicate(self, name: str) -> PredicateDecl:
        return self._pred_index[name]

    def operator(self, name: str) -> OperatorSchema:
        for op in self.operators:
            if op.name == name:
                return op
        raise KeyError(name)


@dataclass(frozen=True)
class ProblemModel:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: tuple[Atom, ...]
    goals: tuple[Atom, ...]


# -- parsing helpers ---------------------------------------------------------


def _pos(node) -> tuple[int, int]:
    return getattr(node, "line", 0), getattr(node, "col", 0)


class _Parser:
    def __init__(self, filename: str):
        self.filename = filename

    def error(self, msg: str, node=None) -> PDDLError:
        line, col = _pos(node)
        return PDDLError(msg, line, col, self.filename)

    def sym(self, node, what: str) -> Sym:
        if not isinstance(node, str):
            raise self.error(f"expected {what}, found a list", node)
        return node

    def lst(self, node, what: str) -> SList:
        if not isinstance(node, list):
            raise self.error(f"expected {what}, found {node!r}", node)
        return node

    def typed_list(self, items: list, allow_vars: bool | None) -> list[tuple[Sym, str, Sym | None]]:
        """Parse ``a b - t c`` into ``[(a, t, tnode), (b, t, tnode), (c, object, None)]``."""
        out: list[tuple[Sym, str, Sym | None]] = []
        pending: list[Sym] = []
        i = 0
        while i < len(items):
            tok = items[i]
            if isinstance(tok, list):
                if tok and isinstance(tok[0], str) and tok[0] == "either":
                    raise self.error("unsupported PDDL feature: either types", tok)
                raise self.error("unexpected list in typed list", tok)
            if tok == "-":
                if i + 1 >= len(items) or not pending:
                    raise self.error("dangling '-' in typed list", tok)
                tnode = items[i + 1]
                if isinstance(tnode, list):
                    if tnode and tnode[0] == "either":
                        raise self.error("unsupported PDDL feature: either types", tnode)
                    raise self.error("expected a type name after '-'", tnode)
                out.extend((p, str(tnode), tnode) for p in pending)
                pending = []
                i += 2
                continue
            if allow_vars is True and not tok.startswith("?"):
                raise self.error(f"expected a variable, found {tok!r}", tok)
            if allow_vars is False and tok.startswith("?"):
                raise self.error(f"unexpected variable {tok!r}", tok)
            pending.append(tok)
            i += 1
        out.extend((p, ROOT_TYPE, None) for p in pending)
        return out

    def atom_list(self, node, what: str, allow_neg: bool) -> tuple[list[Atom], list[Atom], list]:
        """Flatten an ``(and ...)`` formula; returns positive, negative atoms and their nodes."""
        if node is None or (isinstance(node, list) and len(node) == 0):
            return [], [], []
        node = self.lst(node, what)
        head = node[0] if node else None
        if isinstance(head, str) and head == "and":
            pos: list[Atom] = []
            neg: list[Atom] = []
            nodes: list = []
            for sub in node[1:]:
                p, n, ns = self.atom_list(sub, what, allow_neg)
                pos += p
                neg += n
                nodes += ns
            return pos, neg, nodes
        if isinstance(head, str) and head == "not":
            if not allow_neg:
                raise self.error("unsupported PDDL feature: negative preconditions", node)
            if len(node) != 2:
                raise self.error("'not' takes exactly one argument", node)
            inner = self.lst(node[1], "atom")
            self._check_feature(inner)
            return [], [self._atom(inner)], [inner]
        self._check_feature(node)
        return [self._atom(node)], [], [node]

    def _check_feature(self, node: SList) -> None:
        head = node[0] if node else None
        if not isinstance(head, str):
            raise self.error("expected an atom", node)
        if head in _UNSUPPORTED_KEYWORDS:
            raise self.error(f"unsupported PDDL feature: {_UNSUPPORTED_KEYWORDS[head]}", node)

    def _atom(self, node: SList) -> Atom:
        for a in node:
            if isinstance(a, list):
                raise self.error("nested terms are not allowed in atoms", a)
        return Atom(str(node[0]), tuple(str(a) for a in node[1:]))

    def sections(self, body: list, allowed: set[str]) -> dict[str, SList]:
        found: dict[str, SList] = {}
        for sec in body:
            sec = self.lst(sec, "a section")
            key = self.sym(sec[0], "a section keyword") if sec else None
            if key is None:
                raise self.error("empty section", sec)
            if key in (":functions", ":durative-action", ":derived", ":constraints", ":metric"):
                raise self.error(f"unsupported PDDL feature: {key[1:]}", sec)
            if key not in allowed:
                raise self.error(f"unknown section {key}", sec)
            if key == ":action":
                found.setdefault(key, SList()).append(sec)
            elif key in found:
                raise self.error(f"duplicate section {key}", sec)
            else:
                found[key] = sec
        return found

    def requirements(self, sec: SList | None) -> None:
        if sec is None:
            return
        for req in sec[1:]:
            req = self.sym(req, "a requirement")
            if req not in _SUPPORTED_REQUIREMENTS:
                raise self.error(f"unsupported PDDL feature: requirement {req}", req)


def _header(p: _Parser, root: SList, kind: str) -> tuple[str, list]:
    if len(root) < 2 or root[0] != "define":
        raise p.error("expected (define ...)", root)
    head = p.lst(root[1], f"({kind} <name>)")
    if len(head) != 2 or head[0] != kind:
        raise p.error(f"expected ({kind} <name>)", head)
    return str(p.sym(head[1], "a name")), root[2:]


def parse_domain(text: str, filename: str = "<domain>") -> DomainModel:
    """Parse and validate a typed-STRIPS domain."""
    p = _Parser(filename)
    root = read_sexpr(text, filename)
    name, body = _header(p, root, "domain")
    secs = p.sections(body, {":requirements", ":types", ":constants", ":predicates", ":action"})
    p.requirements(secs.get(":requirements"))

    parent: dict[str, str] = {}
    type_nodes: dict[str, Sym | None] = {}
    if ":types" in secs:
        for tname, tparent, tnode in p.typed_list(secs[":types"][1:], allow_vars=False):
            if tname == ROOT_TYPE:
                continue
            if tname in parent and parent[tname] != tparent:
                raise p.error(f"type {tname} declared twice with different parents", tname)
            parent[str(tname)] = tparent
            type_nodes[str(tname)] = tnode
    for tname, tparent in parent.items():
        if tparent != ROOT_TYPE and tparent not in parent:
            raise p.error(f"undeclared type {tparent}", type_nodes[tname])
    for start in parent:
        seen = {start}
        t = parent[start]
        while t != ROOT_TYPE:
            if t in seen:
                raise p.error(f"cyclic type hierarchy through {t}", type_nodes[start])
            seen.add(t)
            t = parent[t]
    types = TypeHierarchy(parent)

    def check_type(t: str, node) -> None:
        if t not in types.names:
            raise p.error(f"undeclared type {t}", node)

    constants: list[tuple[str, str]] = []
    if ":constants" in secs:
        for cname, ctype, cnode in p.typed_list(secs[":constants"][1:], allow_vars=False):
            check_type(ctype, cnode or cname)
            constants.append((str(cname), ctype))

    predicates: list[PredicateDecl] = []
    seen_preds: set[str] = set()
    if ":predicates" in secs:
        for decl in secs[":predicates"][1:]:
            decl = p.lst(decl, "a predicate declaration")
            pname = p.sym(decl[0], "a predicate name")
            if pname in seen_preds:
                raise p.error(f"predicate {pname} declared twice", pname)
            seen_preds.add(pname)
            args = p.typed_list(decl[1:], allow_vars=True)
            for v, t, tnode in args:
                check_type(t, tnode or v)
            predicates.append(PredicateDecl(str(pname), tuple(t for _, t, _ in args)))
    pred_index = {pd.name: pd for pd in predicates}
    const_types = dict(constants)

    operators: list[OperatorSchema] = []
    seen_ops: set[str] = set()
    for sec in secs.get(":action", []):
        if len(sec) < 2:
            raise p.error("action without a name", sec)
        oname = p.sym(sec[1], "an action name")
        if oname in seen_ops:
            raise p.error(f"action {oname} declared twice", oname)
        seen_ops.add(oname)
        fields: dict[str, object] = {}
        rest = sec[2:]
        if len(rest) % 2:
            raise p.error("malformed action body", sec)
        for key, val in zip(rest[0::2], rest[1::2]):
            key = p.sym(key, "an action keyword")
            if key not in (":parameters", ":precondition", ":effect"):
                raise p.error(f"unknown action keyword {key}", key)
            fields[key] = val
        params_raw = p.typed_list(p.lst(fields.get(":parameters", SList()), "a parameter list"), allow_vars=True)
        params: list[tuple[str, str]] = []
        for v, t, tnode in params_raw:
            check_type(t, tnode or v)
            if any(v == q for q, _ in params):
                raise p.error(f"duplicate parameter {v}", v)
            params.append((str(v), t))
        scope = dict(params)
        pre, _, pre_nodes = p.atom_list(fields.get(":precondition"), "a precondition", allow_neg=False)
        add, dele, eff_nodes = p.atom_list(fields.get(":effect"), "an effect", allow_neg=True)
        for atom, node in zip(pre + add + dele, pre_nodes + eff_nodes):
            decl = pred_index.get(atom.pred)
            if decl is None:
                raise p.error(f"undeclared predicate {atom.pred}", node)
            if decl.arity != len(atom.args):
                raise p.error(f"arity mismatch for {atom.pred}: expected {decl.arity}, got {len(atom.args)}", node)
            for arg, want in zip(atom.args, decl.arg_types):
                if arg.startswith("?"):
                    if arg not in scope:
                        raise p.error(f"undeclared variable {arg} in {oname}", node)
                    have = scope[arg]
                elif arg in const_types:
                    have = const_types[arg]
                else:
                    raise p.error(f"unknown constant {arg}", node)
                if not types.is_subtype(have, want):
                    raise p.error(f"type mismatch in {atom.pred}: {arg} is {have}, expected {want}", node)
        operators.append(
            OperatorSchema(str(oname), tuple(params), tuple(_dedupe(pre)), tuple(_dedupe(add)), tuple(_dedupe(dele)))
        )
    return DomainModel(name, types, tuple(constants), tuple(predicates), tuple(operators))


def _dedupe(atoms: Iterable[Atom]) -> list[Atom]:
    return list(dict.fromkeys(atoms))


def parse_problem(text: str, domain: DomainModel, filename: str = "<problem>") -> ProblemModel:
    """Parse a problem and type-check it against ``domain``."""
    p = _Parser(filename)
    root = read_sexpr(text, filename)
    name, body = _header(p, root, "problem")
    secs: dict[str, SList] = {}
    for sec in body:
        sec = p.lst(sec, "a section")
        key = p.sym(sec[0], "a section keyword") if sec else None
        if key is None:
            raise p.error("empty section", sec)
        if key == ":metric":
            raise p.error("unsupported PDDL feature: metric", sec)
        if key not in (":domain", ":objects", ":init", ":goal", ":requirements"):
            raise p.error(f"unknown section {key}", sec)
        secs[key] = sec
    p.requirements(secs.get(":requirements"))
    if ":domain" not in secs or len(secs[":domain"]) != 2:
        raise p.error("missing (:domain <name>)", root)
    dname = str(secs[":domain"][1])
    if dname != domain.name:
        raise p.error(f"problem is for domain {dname}, not {domain.name}", secs[":domain"][1])

    objects: list[tuple[str, str]] = []
    obj_types = dict(domain.constants)
    if ":objects" in secs:
        for oname, otype, onode in p.typed_list(secs[":objects"][1:], allow_vars=False):
            if otype not in domain.types.names:
                raise p.error(f"object {oname} has undeclared type {otype}", onode or oname)
            if oname in obj_types and obj_types[oname] != otype:
                raise p.error(f"object {oname} declared twice", oname)
            obj_types[str(oname)] = otype
            objects.append((str(oname), otype))

    def check(atoms: list[Atom], nodes: list) -> None:
        for atom, node in zip(atoms, nodes):
            try:
                decl = domain.predicate(atom.pred)
            except KeyError:
                raise p.error(f"undeclared predicate {atom.pred}", node) from None
            if decl.arity != len(atom.args):
                raise p.error(f"arity mismatch for {atom.pred}: expected {decl.arity}, got {len(atom.args)}", node)
            for arg, want in zip(atom.args, decl.arg_types):
                if arg not in obj_types:
                    raise p.error(f"unknown object {arg}", node)
                if not domain.types.is_subtype(obj_types[arg], want):
                    raise p.error(f"type mismatch in {atom.pred}: {arg} is {obj_types[arg]}, expected {want}", node)

    init_nodes = [p.lst(n, "a ground atom") for n in secs[":init"][1:]] if ":init" in secs else []
    for n in init_nodes:
        p._check_feature(n)
    init = [p._atom(n) for n in init_nodes]
    check(init, init_nodes)
    goal_sec = secs.get(":goal")
    if goal_sec is None or len(goal_sec) != 2:
        raise p.error("missing (:goal <formula>)", goal_sec if goal_sec is not None else root)
    goals, _, goal_nodes = p.atom_list(goal_sec[1], "a goal", allow_neg=False)
    check(goals, goal_nodes)
    return ProblemModel(name, domain.name, tuple(objects), tuple(_dedupe(init)), tuple(_dedupe(goals)))


def detect_static_predicates(domain: DomainModel) -> set[str]:
    """Predicate names that occur in no operator's add or delete list."""
    affected = {a.pred for op in domain.operators for a in op.add + op.dele}
    return {pd.name for pd in domain.predicates} - affected


# -- printing ----------------------------------------------------------------


def _typed(items: Iterable[tuple[str, str]]) -> str:
    return " ".join(f"{n} - {t}" for n, t in items)


def _conj(atoms: tuple[Atom, ...], negated: tuple[Atom, ...] = ()) -> str:
    parts = [str(a) for a in atoms] + [f"(not {a})" for a in negated]
    return "(and " + " ".join(parts) + ")"


def domain_to_pddl(domain: DomainModel) -> str:
    lines = [f"(define (domain {domain.name})", "  (:requirements :strips :typing)"]
    if domain.types.parent:
        lines.append("  (:types " + _typed(domain.types.parent.items()) + ")")
    if domain.constants:
        lines.append("  (:constants " + _typed(domain.constants) + ")")
    preds = []
    for pd in domain.predicates:
        args = " ".join(f"?x{i} - {t}" for i, t in enumerate(pd.arg_types))
        preds.append(f"({pd.name}{' ' + args if args else ''})")
    lines.append("  (:predicates " + " ".join(preds) + ")")
    for op in domain.operators:
        lines.append(f"  (:action {op.name}")
        lines.append(f"    :parameters ({_typed(op.params)})")
        lines.append(f"    :precondition {_conj(op.pre)}")
        lines.append(f"    :effect {_conj(op.add, op.dele)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def problem_to_pddl(problem: ProblemModel) -> str:
    lines = [
        f"(define (problem {problem.name})",
        f"  (:domain {problem.domain_name})",
        f"  (:objects {_typed(problem.objects)})",
        "  (:init " + " ".join(str(a) for a in problem.init) + ")",
        f"  (:goal {_conj(problem.goals)})",
        ")",
    ]
    return "\n".join(lines) + "\n"


def load_domain(path) -> DomainModel:
    with open(path, encoding="utf-8") as fh:
        return parse_domain(fh.read(), str(path))


def load_problem(path, domain: DomainModel) -> ProblemModel:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), domain, str(path))
