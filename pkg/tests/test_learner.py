import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_query

from roller.fixtures import bundled_task, data_text
from roller.learner import (
    FactIndex,
    Leaf,
    Node,
    QueryLiteral,
    RelationalTree,
    TypedVar,
    classify,
    example_bindings,
    generate_candidate_queries,
    induce_tree,
    parse_tree,
    query_succeeds,
    training_accuracy,
)
from roller.logic import Example, KnowledgeBase, LanguageBias, emit_language_bias
from roller.training import bfs_bnb_solve_all, extract_binding_examples, extract_operator_examples, rank_solutions

BIAS = """
predict(selected(+IdExample,+IdProblem,-Class)).
type(selected(index,idprob,class)).
classes([a,b]).
rmode(p(+IdExample,+IdProblem,-X)).
type(p(index,idprob,obj)).
rmode(q(+IdExample,+IdProblem,+-X,+-Y)).
type(q(index,idprob,obj,obj)).
rmode(r(+IdExample,+IdProblem,+X)).
type(r(index,idprob,obj)).
"""


def synthetic_kb(rows):
    """rows: list of (label, [(pred, obj args)])."""
    kb = KnowledgeBase("selected")
    for i, (label, facts) in enumerate(rows):
        eid = f"e{i}"
        kb.examples.append(Example(eid, "pr", [((), label)], [(p, (eid, "pr") + tuple(a)) for p, a in facts]))
    return kb


# -- fixture trees and text format ----------------------------------------------------------


def test_operator_fixture_parses():
    tree = parse_tree(data_text("satellite-operators.tree"))
    assert tree.target == "selected"
    assert tree.classes == ("turn_to", "switch_on", "switch_off", "calibrate", "take_image")
    assert [n.query.pred for n in tree.internal_nodes()] == ["helpful_calibrate", "helpful_take_image", "helpful_switch_on"]
    assert [leaf.total for leaf in tree.leaves()] == [44, 110, 59, 149]
    assert tree.root.query.fresh == {"D", "E", "F"}


def test_binding_fixture_parses():
    tree = parse_tree(data_text("satellite-switch_on.tree"))
    assert tree.root.query.args == ("A", "B", "C", "D") and not tree.root.query.fresh
    assert tree.root.yes.counts == {"selected": 213, "rejected": 36}
    assert tree.root.no.majority == "rejected"


@pytest.mark.parametrize("name", ["satellite-operators.tree", "satellite-switch_on.tree"])
def test_printer_round_trip(name):
    tree = parse_tree(data_text(name))
    text = tree.dumps()
    again = parse_tree(text)
    assert again.dumps() == text
    assert [l.counts for l in again.leaves()] == [l.counts for l in tree.leaves()]


def test_printer_layout():
    text = parse_tree(data_text("satellite-switch_on.tree")).dumps()
    assert text.splitlines() == [
        "selected_switch_on(-A,-B,-C,-D,-E)",
        "helpful_switch_on(A,B,C,D) ?",
        "+--yes: [selected] 249.0 [[selected:213.0,rejected:36.0]]",
        "+--no:  [rejected] 63.0 [[selected:2.0,rejected:61.0]]",
    ]


def test_fractional_counts_survive_round_trip():
    tree = RelationalTree("t", ("A", "B", "C"), ("x", "y"), Leaf({"x": Fraction(1, 4), "y": Fraction(3)}))
    assert parse_tree(tree.dumps()).root.counts == {"x": Fraction(1, 4), "y": 3}


def test_parser_rejects_unbound_variable():
    bad = "t(-A,-B,-C)\nq(A,B,Z) ?\n+--yes: [x] 1.0 [[x:1.0]]\n+--no: [x] 1.0 [[x:1.0]]\n"
    with pytest.raises(ValueError, match="not bound"):
        parse_tree(bad)


def test_parser_rejects_truncated_tree():
    with pytest.raises((ValueError, IndexError)):
        parse_tree("t(-A,-B,-C)\nq(A,B) ?\n+--yes: [x] 1.0 [[x:1.0]]\n")


def test_majority_first_on_ties():
    assert Leaf({"x": Fraction(2), "y": Fraction(2)}).majority == "x"


def test_fixture_replay_on_satellite_state():
    t = bundled_task("satellite", "satellite-tr01")
    sol = bfs_bnb_solve_all(t)
    kb = extract_operator_examples(sol, rank_solutions(sol))
    tree = parse_tree(data_text("satellite-operators.tree"))
    ex = kb.examples[0]
    leaf = classify(tree, ex.facts, example_bindings(tree, ex.id, ex.problem))
    assert leaf.majority == "switch_on" and leaf.total == 59


# -- query evaluation ---------------------------------------------------------------------------


def test_query_shares_variables_along_path():
    facts = [("p", ("e", "pr", "o1")), ("r", ("e", "pr", "o2"))]
    b = {"A": "e", "B": "pr"}
    p = QueryLiteral("p", ("A", "B", "X"), frozenset({"X"}))
    assert query_succeeds(facts, [], p, b)[0]
    assert not query_succeeds(facts, [p], QueryLiteral("r", ("A", "B", "X")), b)[0]
    ok, witness = query_succeeds(facts, [], QueryLiteral("r", ("A", "B", "Y"), frozenset({"Y"})), b)
    assert ok and witness["Y"] == "o2"


def test_query_needs_joint_assignment():
    # each literal satisfiable alone, never together
    facts = [("q", ("e", "pr", "o1", "o2")), ("q", ("e", "pr", "o3", "o4")), ("r", ("e", "pr", "o4"))]
    b = {"A": "e", "B": "pr"}
    q = QueryLiteral("q", ("A", "B", "X", "Y"), frozenset({"X", "Y"}))
    assert query_succeeds(facts, [q], QueryLiteral("r", ("A", "B", "Y")), b)[0]
    assert not query_succeeds(facts, [q], QueryLiteral("r", ("A", "B", "X")), b)[0]


def test_constant_arguments():
    facts = [("p", ("e", "pr", "o1"))]
    assert query_succeeds(facts, [], QueryLiteral("p", ("e", "pr", "o1")))[0]
    assert not query_succeeds(facts, [], QueryLiteral("p", ("e", "pr", "o2")))[0]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_query_matches_brute_enumeration(seed):
    rng = random.Random(seed)
    objs = [f"o{i}" for i in range(rng.randint(1, 4))]
    facts = []
    for _ in range(rng.randint(0, 8)):
        pred = rng.choice(["p", "q"])
        n = 1 if pred == "p" else 2
        facts.append((pred, ("e", "pr") + tuple(rng.choice(objs) for _ in range(n))))
    vars_ = ["X", "Y", "Z"]
    lits = []
    for _ in range(rng.randint(1, 3)):
        pred = rng.choice(["p", "q"])
        n = 1 if pred == "p" else 2
        args = tuple(rng.choice(vars_ + objs[:1]) for _ in range(n))
        lits.append(QueryLiteral(pred, ("A", "B") + args))
    b = {"A": "e", "B": "pr"}
    assert query_succeeds(facts, lits[:-1], lits[-1], b)[0] == brute_query(facts, lits, b)


# -- candidate generation ------------------------------------------------------------------------


def _ids():
    return [TypedVar("A", "index"), TypedVar("B", "idprob")]


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_candidate_counts_closed_form(k):
    bias = LanguageBias.loads(BIAS)
    bound = _ids() + [TypedVar(f"O{i}", "obj") for i in range(k)]
    cands = generate_candidate_queries(bias, bound)
    by_pred = {p: sum(c.pred == p for c in cands) for p in "pqr"}
    # p: one fresh slot; q: (1 + k) choices per +- slot; r: k bound choices
    assert by_pred == {"p": 1, "q": (1 + k) ** 2, "r": k}


def test_candidate_order_puts_fresh_first():
    bias = LanguageBias.loads(BIAS)
    cands = generate_candidate_queries(bias, _ids() + [TypedVar("O", "obj")])
    qs = [c.args[2:] for c in cands if c.pred == "q"]
    assert qs == [("_N0", "_N1"), ("_N0", "O"), ("O", "_N1"), ("O", "O")]
    assert [c.pred for c in cands] == ["p"] + ["q"] * 4 + ["r"]


def test_satellite_root_candidates():
    bias = emit_language_bias(bundled_task("satellite", "satellite-tr01").domain)["ops"]
    cands = generate_candidate_queries(bias, _ids())
    for c in cands:
        ids = 1 if c.pred.startswith("static_fact_") else 2
        assert c.args[:ids] == ("A", "B")[2 - ids :]
        assert len(c.fresh) == len(c.args) - ids
    assert len(cands) == len(bias.rmodes)


# -- induction ------------------------------------------------------------------------------------


def test_single_relevant_literal_gives_pure_split():
    rows = [("a", [("p", ("o",))]) for _ in range(5)] + [("b", [("r", ("o",))]) for _ in range(5)]
    tree = induce_tree(synthetic_kb(rows), LanguageBias.loads(BIAS))
    assert isinstance(tree.root, Node) and tree.root.query.pred == "p"
    assert tree.root.yes.counts == {"a": 5, "b": 0} and tree.root.no.counts == {"a": 0, "b": 5}
    assert training_accuracy(tree, synthetic_kb(rows)) == 1.0


def test_relational_join_is_learned():
    # class a iff some q(X, Y) has r(Y); r alone is uninformative, so the
    # split on r must reuse a variable introduced by q
    rows = []
    for i in range(6):
        rows.append(("a", [("q", ("o1", "o2")), ("r", ("o2",))]))
        rows.append(("b", [("q", ("o1", "o2")), ("r", ("o1",))]))
    rows += [("b", [("r", ("o2",))]) for _ in range(4)]
    tree = induce_tree(synthetic_kb(rows), LanguageBias.loads(BIAS))
    assert training_accuracy(tree, synthetic_kb(rows)) == 1.0
    assert tree.root.query.pred == "q" and tree.root.query.fresh
    inner = tree.root.yes.query
    assert inner.pred == "r" and not inner.fresh and set(inner.args[2:]) <= tree.root.query.fresh


def test_greedy_split_cannot_see_pure_joins():
    # every literal alone has zero gain, so induction stops at the root
    rows = []
    for i in range(6):
        rows.append(("a", [("q", ("o1", "o2")), ("r", ("o2",))]))
        rows.append(("b", [("q", ("o1", "o2")), ("r", ("o1",))]))
    tree = induce_tree(synthetic_kb(rows), LanguageBias.loads(BIAS))
    assert isinstance(tree.root, Leaf) and tree.root.counts == {"a": 6, "b": 6}


def test_noise_free_constant_class_is_single_leaf():
    rows = [("a", [("p", ("o",))]) for _ in range(4)]
    tree = induce_tree(synthetic_kb(rows), LanguageBias.loads(BIAS))
    assert isinstance(tree.root, Leaf) and tree.root.counts == {"a": 4, "b": 0}


def test_min_leaf_stops_growth():
    rows = [("a", [("p", ("o",))]), ("b", [])]
    tree = induce_tree(synthetic_kb(rows), LanguageBias.loads(BIAS), min_leaf=3)
    assert isinstance(tree.root, Leaf)


def test_empty_kb_rejected():
    with pytest.raises(ValueError):
        induce_tree(KnowledgeBase("selected"), LanguageBias.loads(BIAS))


def test_root_split_maximises_information_gain():
    rng = random.Random(7)
    rows = []
    for _ in range(40):
        facts = [(rng.choice("pr"), (rng.choice(["o1", "o2"]),)) for _ in range(rng.randint(0, 2))]
        has_p = any(f[0] == "p" for f in facts)
        label = "a" if (has_p and rng.random() < 0.9) or rng.random() < 0.2 else "b"
        rows.append((label, facts))
    kb = synthetic_kb(rows)
    bias = LanguageBias.loads(BIAS)
    tree = induce_tree(kb, bias)

    def entropy(xs):
        n = len(xs)
        return -sum(xs.count(c) / n * math.log2(xs.count(c) / n) for c in set(xs)) if n else 0.0

    labels = [lab for lab, _ in rows]
    best = None
    for cand in generate_candidate_queries(bias, _ids()):
        yes = [lab for i, (lab, _) in enumerate(rows) if brute_query(kb.examples[i].facts, [cand], {"A": f"e{i}", "B": "pr"})]
        no = [lab for i, (lab, _) in enumerate(rows) if not brute_query(kb.examples[i].facts, [cand], {"A": f"e{i}", "B": "pr"})]
        if not yes or not no:
            continue
        gain = entropy(labels) - len(yes) / len(rows) * entropy(yes) - len(no) / len(rows) * entropy(no)
        if best is None or gain > best[1] + 1e-12:
            best = (cand, gain)
    assert tree.root.query.pred == best[0].pred
    assert tree.root.query.args[2:] == tuple(
        a if a not in best[0].fresh else tree.root.query.args[2 + i] for i, a in enumerate(best[0].args[2:])
    )


@pytest.fixture(scope="module")
def satellite_kbs():
    t = bundled_task("satellite", "satellite-tr01")
    sol = bfs_bnb_solve_all(t)
    ranked = rank_solutions(sol)
    biases = emit_language_bias(t.domain)
    return (
        (extract_operator_examples(sol, ranked), biases["ops"]),
        (extract_binding_examples(sol, ranked, "turn_to"), biases["turn_to"]),
    )


def test_induction_is_deterministic(satellite_kbs):
    for kb, bias in satellite_kbs:
        assert induce_tree(kb, bias).dumps() == induce_tree(kb, bias).dumps()


def test_leaf_counts_sum_to_kb_size(satellite_kbs):
    for kb, bias in satellite_kbs:
        tree = induce_tree(kb, bias)
        assert sum(l.total for l in tree.leaves()) == len(kb)
        for leaf in tree.leaves():
            assert set(leaf.counts) == set(tree.classes)


def test_every_example_routes_to_its_training_leaf(satellite_kbs):
    # reconstruct leaf counts by classification; must equal the stored counts
    for kb, bias in satellite_kbs:
        tree = induce_tree(kb, bias)
        tally = {id(l): dict.fromkeys(tree.classes, 0) for l in tree.leaves()}
        for ex in kb.examples:
            index = FactIndex(ex.facts + kb.statics.get(ex.problem, []))
            for args, label in ex.targets:
                leaf = classify(tree, index, example_bindings(tree, ex.id, ex.problem, args))
                tally[id(leaf)][label] += 1
        for leaf in tree.leaves():
            assert tally[id(leaf)] == leaf.counts


def test_induced_trees_round_trip(satellite_kbs):
    for kb, bias in satellite_kbs:
        tree = induce_tree(kb, bias)
        again = parse_tree(tree.dumps())
        assert again.dumps() == tree.dumps()
        for ex in kb.examples:
            for args, _ in ex.targets:
                f = ex.facts + kb.statics.get(ex.problem, [])
                assert classify(again, f, example_bindings(again, ex.id, ex.problem, args)).counts == classify(
                    tree, f, example_bindings(tree, ex.id, ex.problem, args)
                ).counts


def test_yes_path_variables_are_scoped(satellite_kbs):
    for kb, bias in satellite_kbs:
        tree = induce_tree(kb, bias)

        def walk(node, scope):
            if isinstance(node, Leaf):
                return
            q = node.query
            assert all(a in scope or a in q.fresh for a in q.variables())
            walk(node.yes, scope | q.fresh)
            walk(node.no, scope)

        walk(tree.root, frozenset(tree.target_vars))


def test_example_bindings_arity():
    tree = parse_tree(data_text("satellite-switch_on.tree"))
    assert example_bindings(tree, "x", "p", ("i", "s")) == {"A": "x", "B": "p", "C": "i", "D": "s"}
    with pytest.raises(ValueError):
        example_bindings(tree, "x", "p")
