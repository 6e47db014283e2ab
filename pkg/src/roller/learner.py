"""Top-down induction of first-order decision trees.

Internal nodes hold one query literal each; literals on a yes-path share
variables, and a query succeeds on an example when the whole yes-path
conjunction plus the new literal has a satisfying assignment over the
example's ground facts.  Leaves keep the full class-count distribution.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .logic import CLASS_TYPE, ID_EXAMPLE, ID_PROBLEM, Fact, KnowledgeBase, LanguageBias, Mode

GAIN_EPSILON = 1e-6
MIN_LEAF = 2


def is_var(term: str) -> bool:
    return term[:1].isupper() or term[:1] == "_"


@dataclass(frozen=True)
class QueryLiteral:
    pred: str
    args: tuple[str, ...]
    fresh: frozenset[str] = frozenset()

    def variables(self) -> list[str]:
        return [a for a in self.args if is_var(a)]


@dataclass
class Leaf:
    counts: dict[str, Fraction]

    @property
    def total(self) -> Fraction:
        return sum(self.counts.values(), Fraction(0))

    @property
    def majority(self) -> str:
        best = max(self.counts.values())
        return next(c for c, n in self.counts.items() if n == best)


@dataclass
class Node:
    query: QueryLiteral
    yes: "TreeNode"
    no: "TreeNode"


TreeNode = Union[Node, Leaf]


@dataclass
class RelationalTree:
    target: str
    target_vars: tuple[str, ...]
    classes: tuple[str, ...]
    root: TreeNode

    def leaves(self) -> list[Leaf]:
        out: list[Leaf] = []
        stack = [self.root]
        while stack:
            n = stack.pop()
            if isinstance(n, Leaf):
                out.append(n)
            else:
                stack += [n.no, n.yes]
        return out

    def internal_nodes(self) -> list[Node]:
        out: list[Node] = []
        stack = [self.root]
        while stack:
            n = stack.pop()
            if isinstance(n, Node):
                out.append(n)
                stack += [n.no, n.yes]
        return out

    def dumps(self) -> str:
        return dump_tree(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RelationalTree":
        return parse_tree(text)

    @classmethod
    def load(cls, path) -> "RelationalTree":
        with open(path, encoding="utf-8") as fh:
            return parse_tree(fh.read())


# -- matching ----------------------------------------------------------------


class FactIndex:
    """Ground facts of one example grouped by predicate."""

    def __init__(self, facts: Iterable[Fact]):
        by_pred: dict[str, list[tuple[str, ...]]] = {}
        for pred, args in facts:
            by_pred.setdefault(pred, []).append(tuple(args))
        self.lists = {p: list(dict.fromkeys(v)) for p, v in by_pred.items()}
        self.sets = {p: set(v) for p, v in by_pred.items()}

    def get(self, pred: str) -> list[tuple[str, ...]]:
        return self.lists.get(pred, [])

    def __contains__(self, fact: Fact) -> bool:
        return fact[1] in self.sets.get(fact[0], ())


def _solve(literals: list[QueryLiteral], idx: int, theta: dict[str, str], facts: FactIndex) -> dict[str, str] | None:
    if idx == len(literals):
        return theta
    lit = literals[idx]
    args = lit.args
    if all(not is_var(a) or a in theta for a in args):
        ground = tuple(theta.get(a, a) for a in args)
        return _solve(literals, idx + 1, theta, facts) if (lit.pred, ground) in facts else None
    for tup in facts.get(lit.pred):
        if len(tup) != len(args):
            continue
        ext = theta
        ok = True
        for a, v in zip(args, tup):
            if is_var(a):
                cur = ext.get(a)
                if cur is None:
                    if ext is theta:
                        ext = dict(theta)
                    ext[a] = v
                elif cur != v:
                    ok = False
                    break
            elif a != v:
                ok = False
                break
        if ok:
            found = _solve(literals, idx + 1, ext, facts)
            if found is not None:
                return found
    return None


def query_succeeds(
    facts: FactIndex | Iterable[Fact],
    conjunction: Iterable[QueryLiteral],
    candidate: QueryLiteral,
    bindings: Mapping[str, str] | None = None,
) -> tuple[bool, dict[str, str] | None]:
    """Existential test of ``conjunction & candidate`` over ground facts.

    Returns the truth value and, on success, a witness extending ``bindings``.
    """
    if not isinstance(facts, FactIndex):
        facts = FactIndex(facts)
    witness = _solve(list(conjunction) + [candidate], 0, dict(bindings or {}), facts)
    return witness is not None, witness


def classify(tree: RelationalTree, facts: FactIndex | Iterable[Fact], target_args: Mapping[str, str]) -> Leaf:
    """Route an example to its leaf; ``target_args`` binds the target atom's variables."""
    if not isinstance(facts, FactIndex):
        facts = FactIndex(facts)
    node = tree.root
    path: list[QueryLiteral] = []
    theta = dict(target_args)
    while isinstance(node, Node):
        if _solve(path + [node.query], 0, theta, facts) is not None:
            path.append(node.query)
            node = node.yes
        else:
            node = node.no
    return node


# -- candidate generation ------------------------------------------------------


@dataclass(frozen=True)
class TypedVar:
    name: str
    type: str


def generate_candidate_queries(bias: LanguageBias, bound_vars: Iterable[TypedVar], fresh_prefix: str = "_N") -> list[QueryLiteral]:
    """All literals allowed by the bias given the variables bound on the current yes-path.

    Identifier positions always take the example/problem identifier variables.
    ``+`` positions take a type-compatible bound variable, ``-`` positions a
    fresh variable, ``+-`` positions either (fresh first).  Output order is
    bias declaration order, then argument pattern order.
    """
    bound = list(bound_vars)
    id_vars = {t.type: t.name for t in bound if t.type in (ID_EXAMPLE, ID_PROBLEM)}
    out: list[QueryLiteral] = []
    for mode in bias.rmodes:
        options: list[list[tuple[str, bool]]] = []
        fresh_n = 0
        feasible = True
        for m, t in zip(mode.modes, mode.types):
            if t in (ID_EXAMPLE, ID_PROBLEM):
                if t not in id_vars:
                    feasible = False
                    break
                options.append([(id_vars[t], False)])
                continue
            opts: list[tuple[str, bool]] = []
            if "-" in m:
                opts.append((f"{fresh_prefix}{fresh_n}", True))
                fresh_n += 1
            if "+" in m:
                opts += [(v.name, False) for v in bound if v.type == t]
            if not opts:
                feasible = False
                break
            options.append(opts)
        if not feasible:
            continue
        for combo in itertools.product(*options):
            args = tuple(a for a, _ in combo)
            fresh = frozenset(a for a, f in combo if f)
            out.append(QueryLiteral(mode.pred, args, fresh))
    return out


# -- induction -----------------------------------------------------------------


@dataclass
class _Instance:
    label: str
    facts: FactIndex
    subs: list[tuple[str, ...]]  # satisfying assignments, aligned with the node's variable list


def _entropy(counts: Iterable[int]) -> float:
    counts = [c for c in counts if c]
    n = sum(counts)
    if n == 0:
        return 0.0
    return -sum(c / n * math.log2(c / n) for c in counts)


def _class_counts(insts: list[_Instance], classes: tuple[str, ...]) -> dict[str, int]:
    counts = dict.fromkeys(classes, 0)
    for inst in insts:
        counts[inst.label] = counts.get(inst.label, 0) + 1
    return counts


def _compile(lit: QueryLiteral, var_pos: dict[str, int]):
    """Per-argument plan: (kind, payload) with kind 0 = bound index, 1 = fresh slot, 2 = constant."""
    plan = []
    fresh_slots: dict[str, int] = {}
    for a in lit.args:
        if is_var(a) and a in var_pos:
            plan.append((0, var_pos[a]))
        elif is_var(a):
            plan.append((1, fresh_slots.setdefault(a, len(fresh_slots))))
        else:
            plan.append((2, a))
    return plan, len(fresh_slots)


def _extend(inst: _Instance, pred: str, plan, n_fresh: int, first_only: bool) -> list[tuple[str, ...]]:
    facts = inst.facts
    out: list[tuple[str, ...]] = []
    if n_fresh == 0:
        fset = facts.sets.get(pred)
        if not fset:
            return out
        for sub in inst.subs:
            ground = tuple(sub[p] if k == 0 else p for k, p in plan)
            if ground in fset:
                out.append(sub)
                if first_only:
                    return out
        return out
    tuples = facts.lists.get(pred)
    if not tuples:
        return out
    seen = set()
    for sub in inst.subs:
        for tup in tuples:
            fresh = [None] * n_fresh
            ok = True
            for (k, p), v in zip(plan, tup):
                if k == 0:
                    if sub[p] != v:
                        ok = False
                        break
                elif k == 1:
                    cur = fresh[p]
                    if cur is None:
                        fresh[p] = v
                    elif cur != v:
                        ok = False
                        break
                elif p != v:
                    ok = False
                    break
            if ok:
                new = sub + tuple(fresh)
                if first_only:
                    return [new]
                if new not in seen:
                    seen.add(new)
                    out.append(new)
    return out


class TreeInducer:
    def __init__(self, bias: LanguageBias, gain_epsilon: float = GAIN_EPSILON, min_leaf: int = MIN_LEAF):
        self.bias = bias
        self.gain_epsilon = gain_epsilon
        self.min_leaf = min_leaf
        self.classes = bias.classes
        self._fresh_counter = 0

    def _instances(self, kb: KnowledgeBase) -> tuple[list[_Instance], list[TypedVar]]:
        target = self.bias.target
        obj_types = [t for t in target.types if t not in (ID_EXAMPLE, ID_PROBLEM, CLASS_TYPE)]
        tvars = [TypedVar("T_ex", ID_EXAMPLE), TypedVar("T_prob", ID_PROBLEM)]
        tvars += [TypedVar(f"T_{i}", t) for i, t in enumerate(obj_types)]
        insts: list[_Instance] = []
        for ex in kb.examples:
            index = FactIndex(ex.facts + kb.statics.get(ex.problem, []))
            for args, label in ex.targets:
                if len(args) != len(obj_types):
                    raise ValueError(f"target arity mismatch in example {ex.id}")
                insts.append(_Instance(label, index, [(ex.id, ex.problem) + tuple(args)]))
        return insts, tvars

    def induce(self, kb: KnowledgeBase) -> RelationalTree:
        if len(kb) == 0:
            raise ValueError("cannot induce a tree from an empty knowledge base")
        insts, tvars = self._instances(kb)
        classes = tuple(self.classes) + tuple(sorted(set(i.label for i in insts) - set(self.classes)))
        self.classes = classes
        root = self._grow(insts, tvars)
        header = tuple(v.name for v in tvars) + ("T_class",)
        return RelationalTree(self.bias.target.pred, header, classes, root)

    def _grow(self, insts: list[_Instance], scope: list[TypedVar]) -> TreeNode:
        counts = _class_counts(insts, self.classes)
        leaf = Leaf({c: Fraction(n) for c, n in counts.items()})
        n = len(insts)
        if n < self.min_leaf or sum(1 for c in counts.values() if c) <= 1:
            return leaf
        base = _entropy(counts.values())
        var_pos = {v.name: i for i, v in enumerate(scope)}
        best = None
        best_gain = -1.0
        prefix = f"_N{self._fresh_counter}_"
        for cand in generate_candidate_queries(self.bias, scope, prefix):
            plan, n_fresh = _compile(cand, var_pos)
            yes_counts = dict.fromkeys(self.classes, 0)
            n_yes = 0
            for inst in insts:
                if _extend(inst, cand.pred, plan, n_fresh, True):
                    yes_counts[inst.label] += 1
                    n_yes += 1
            if n_yes == 0 or n_yes == n:
                continue
            no_counts = [counts[c] - yes_counts[c] for c in self.classes]
            gain = base - (n_yes / n) * _entropy(yes_counts.values()) - ((n - n_yes) / n) * _entropy(no_counts)
            if gain > best_gain + 1e-12:
                best, best_gain = (cand, plan, n_fresh), gain
        if best is None or best_gain < self.gain_epsilon:
            return leaf
        cand, plan, n_fresh = best
        self._fresh_counter += 1
        # give the chosen literal's fresh variables permanent names
        rename = {}
        for a in cand.args:
            if a in cand.fresh and a not in rename:
                rename[a] = f"V{self._fresh_counter}_{len(rename)}"
        lit = QueryLiteral(cand.pred, tuple(rename.get(a, a) for a in cand.args), frozenset(rename.values()))
        types = {}
        mode = next(m for m in self.bias.rmodes if m.pred == cand.pred)
        for a, t in zip(cand.args, mode.types):
            if a in rename:
                types[rename[a]] = t
        yes_insts, no_insts = [], []
        for inst in insts:
            ext = _extend(inst, cand.pred, plan, n_fresh, False)
            if ext:
                yes_insts.append(_Instance(inst.label, inst.facts, ext))
            else:
                no_insts.append(inst)
        new_scope = scope + [TypedVar(v, types[v]) for v in dict.fromkeys(rename.values())]
        yes = self._grow(yes_insts, new_scope)
        no = self._grow(no_insts, scope)
        return Node(lit, yes, no)


def induce_tree(kb: KnowledgeBase, bias: LanguageBias, gain_epsilon: float = GAIN_EPSILON, min_leaf: int = MIN_LEAF) -> RelationalTree:
    return TreeInducer(bias, gain_epsilon, min_leaf).induce(kb)


def example_bindings(tree: RelationalTree, ex_id: str, prob_id: str, obj_args: Iterable[str] = ()) -> dict[str, str]:
    """Bind a tree's target variables (minus the class) for one example."""
    values = (ex_id, prob_id) + tuple(obj_args)
    names = tree.target_vars[:-1]
    if len(values) != len(names):
        raise ValueError(f"{tree.target} expects {len(names) - 2} object arguments")
    return dict(zip(names, values))


def training_accuracy(tree: RelationalTree, kb: KnowledgeBase) -> float:
    hits = total = 0
    for ex in kb.examples:
        index = FactIndex(ex.facts + kb.statics.get(ex.problem, []))
        for args, label in ex.targets:
            leaf = classify(tree, index, example_bindings(tree, ex.id, ex.problem, args))
            hits += leaf.majority == label
            total += 1
    return hits / total if total else 0.0


# -- text format -----------------------------------------------------------------


def _letters(i: int) -> str:
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = chr(65 + r) + s
    return s


def _fmt_count(c: Fraction) -> str:
    if c.denominator == 1:
        return f"{c.numerator}.0"
    return repr(float(c))


def _fmt_leaf(leaf: Leaf, classes: tuple[str, ...]) -> str:
    dist = ",".join(f"{c}:{_fmt_count(leaf.counts.get(c, Fraction(0)))}" for c in classes)
    return f"[{leaf.majority}] {_fmt_count(leaf.total)} [[{dist}]]"


def dump_tree(tree: RelationalTree) -> str:
    names: dict[str, str] = {}

    def name(v: str) -> str:
        if v not in names:
            names[v] = _letters(len(names))
        return names[v]

    header = ",".join("-" + name(v) for v in tree.target_vars)
    lines = [f"{tree.target}({header})"]

    def lit_text(lit: QueryLiteral) -> str:
        parts = []
        for a in lit.args:
            if not is_var(a):
                parts.append(a)
            elif a in lit.fresh and a not in names:
                parts.append("-" + name(a))
            else:
                parts.append(name(a))
        return f"{lit.pred}({','.join(parts)}) ?"

    def render(node: TreeNode, prefix: str) -> str:
        # returns the text for the first line; continuation lines are appended to ``lines``
        if isinstance(node, Leaf):
            return _fmt_leaf(node, tree.classes)
        head = lit_text(node.query)
        yes_line_idx = len(lines)
        lines.append(None)
        lines[yes_line_idx] = prefix + "+--yes: " + render(node.yes, prefix + "|       ")
        no_line_idx = len(lines)
        lines.append(None)
        lines[no_line_idx] = prefix + "+--no:  " + render(node.no, prefix + "        ")
        return head

    if isinstance(tree.root, Leaf):
        lines.append(_fmt_leaf(tree.root, tree.classes))
    else:
        idx = len(lines)
        lines.append(None)
        lines[idx] = render(tree.root, "")
    return "\n".join(lines) + "\n"


_TREE_TOKEN = re.compile(
    r"(?P<yes>\+--yes:)|(?P<no>\+--no:)|\[\[(?P<dist>.*?)\]\]|\[(?P<maj>[^\[\]]+)\]"
    r"|(?P<lit>[a-z_]\w*\s*\([^()]*\))\s*(?P<q>\?)?|(?P<num>-?\d+(?:\.\d+)?)|(?P<ws>\s+)",
    re.S,
)


def parse_tree(text: str) -> RelationalTree:
    """Parse the tree text format; tolerant of wrapped lines and ``|`` rails."""
    body = text.replace("|", " ")
    toks: list[tuple[str, str]] = []
    pos = 0
    while pos < len(body):
        m = _TREE_TOKEN.match(body, pos)
        if not m:
            raise ValueError(f"unexpected text in tree at offset {pos}: {body[pos:pos + 30]!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        if m.group("lit") is not None:
            toks.append(("query" if m.group("q") else "atom", m.group("lit")))
        else:
            toks.append((kind, m.group(kind)))
    if not toks or toks[0][0] != "atom":
        raise ValueError("tree must start with the target atom")

    def split_lit(s: str) -> tuple[str, list[str]]:
        pred, rest = s.split("(", 1)
        args = [a.strip() for a in rest.rstrip()[:-1].split(",")] if rest.strip() != ")" else []
        return pred.strip(), args

    target, targs = split_lit(toks[0][1])
    target_vars = tuple(a.lstrip("-") for a in targs)
    classes: list[str] = []
    i = 1

    def node(scope: frozenset[str]) -> TreeNode:
        nonlocal i
        kind, val = toks[i]
        if kind == "query":
            i += 1
            pred, args = split_lit(val)
            fresh, clean = set(), []
            for a in args:
                if a.startswith("-"):
                    fresh.add(a[1:])
                    clean.append(a[1:])
                else:
                    if is_var(a) and a not in scope:
                        raise ValueError(f"variable {a} in {pred} is not bound on the yes-path")
                    clean.append(a)
            lit = QueryLiteral(pred, tuple(clean), frozenset(fresh))
            if toks[i][0] != "yes":
                raise ValueError("expected +--yes:")
            i += 1
            yes = node(scope | fresh)
            if toks[i][0] != "no":
                raise ValueError("expected +--no:")
            i += 1
            no = node(scope)
            return Node(lit, yes, no)
        if kind == "maj":
            i += 1
            if toks[i][0] == "num":
                i += 1
            kind, dist = toks[i]
            if kind != "dist":
                raise ValueError("expected [[class:count,...]]")
            i += 1
            counts: dict[str, Fraction] = {}
            for item in dist.split(","):
                item = item.strip()
                if not item:
                    continue
                c, n = item.split(":")
                counts[c.strip()] = Fraction(n.strip())
                if c.strip() not in classes:
                    classes.append(c.strip())
            return Leaf(counts)
        raise ValueError(f"unexpected token {val!r}")

    root = node(frozenset(target_vars))
    if i != len(toks):
        raise ValueError("trailing tokens after tree")
    return RelationalTree(target, target_vars, tuple(classes), root)
