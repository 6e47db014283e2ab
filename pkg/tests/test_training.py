import logging
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from oracles import all_optimal_plans, brute_rank, ff_never_prunes, random_bw_problem, random_satellite_problem

from roller.fixtures import bundled_task, load_bundled_domain
from roller.grounding import ground_task
from roller.logic import KnowledgeBase, LanguageBias, emit_language_bias, sanitize, static_facts
from roller.pddl import Atom, ProblemModel
from roller.relaxed import Evaluator
from roller.training import (
    SolutionSet,
    bfs_bnb_solve_all,
    extract_binding_examples,
    extract_operator_examples,
    generate_training_data,
    phi_commitment,
    phi_difficulty,
    rank_solutions,
    ranking,
    supporter_counts,
    tag_plans,
)

log = logging.getLogger(__name__)


@pytest.fixture(scope="module")
def tr01():
    t = bundled_task("satellite", "satellite-tr01")
    sol = bfs_bnb_solve_all(t)
    return t, sol, rank_solutions(sol)


def two_block_task(goal_true=False):
    d = load_bundled_domain("blocksworld")
    init = (Atom("ontable", ("a",)), Atom("ontable", ("b",)), Atom("clear", ("a",)), Atom("clear", ("b",)), Atom("handempty", ()))
    goals = (Atom("ontable", ("a",)),) if goal_true else (Atom("on", ("a", "b")),)
    return ground_task(d, ProblemModel("two", "blocksworld", (("a", "block"), ("b", "block")), init, goals))


# -- branch and bound --------------------------------------------------------------------------


def test_two_blocks_single_plan():
    t = two_block_task()
    sol = bfs_bnb_solve_all(t)
    assert sol.best_cost == 2 and sol.exhausted
    assert [[t.actions[a].name for a in p] for p in sol.plans] == [["(pick-up a)", "(stack a b)"]]
    assert (sol.best_cost, sol.plans) == all_optimal_plans(t)


def test_goal_in_initial_state():
    sol = bfs_bnb_solve_all(two_block_task(goal_true=True))
    assert sol.best_cost == 0 and sol.plans == [()]


def test_time_bound_must_be_positive():
    with pytest.raises(ValueError):
        bfs_bnb_solve_all(two_block_task(), 0)


def test_tiny_time_bound_is_not_exhausted_and_is_discarded():
    t = bundled_task("satellite", "satellite-tr07")
    assert not bfs_bnb_solve_all(t, 0.001).exhausted
    data = generate_training_data([t], 0.001)
    assert data.discarded == ["tr07"] and len(data.operators) == 0


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(st.integers(0, 10**6))
def test_bnb_equals_exhaustive_enumeration(seed):
    rng = random.Random(seed)
    if seed % 3 == 0:
        t = ground_task(load_bundled_domain("satellite"), random_satellite_problem(rng, n_dirs=rng.randint(2, 4), n_images=rng.randint(1, 2)))
    else:
        t = ground_task(load_bundled_domain("blocksworld"), random_bw_problem(rng.randint(3, 5), rng))
    oracle = all_optimal_plans(t)
    assume(oracle is not None)
    cost, plans = oracle
    ev = Evaluator(t)
    sol = bfs_bnb_solve_all(t, 60, ev)
    if ff_never_prunes(t, plans, cost, lambda s: ev.evaluate(s)[0]):
        assert (sol.best_cost, sol.plans) == (cost, plans)
    elif (sol.best_cost, sol.plans) != (cost, plans):
        log.info("heuristic pruned an optimal plan on seed %s", seed)
    # every returned plan is optimal regardless
    assert all(len(p) == cost for p in sol.plans) or sol.best_cost > cost


def test_tagged_nodes_lie_on_plans(tr01):
    t, sol, _ = tr01
    for prefix, kids in sol.on_solution.items():
        for a in kids:
            assert any(p[: len(prefix) + 1] == prefix + (a,) for p in sol.plans)


def test_bundled_satellite_counts(tr01):
    _, sol, ranked = tr01
    assert sol.best_cost == 9 and len(sol.plans) == 12 and len(ranked.top) == 6


# -- preferences and ranking --------------------------------------------------------------------


def test_commitment_of_unique_plan_ends_at_zero():
    t = two_block_task()
    sol = bfs_bnb_solve_all(t)
    assert phi_commitment(sol, sol.plans[0], 2) == 0
    with pytest.raises(ValueError):
        phi_commitment(sol, sol.plans[0], 0)


def test_commitment_matches_brute_force_tagger():
    t = bundled_task("satellite", "satellite-turns")
    sol = bfs_bnb_solve_all(t)
    cost, plans = all_optimal_plans(t)
    assert sol.plans == plans
    for p in plans:
        for i in range(1, len(p) + 1):
            kids = {q[i] for q in plans if len(q) > i and q[:i] == p[:i]}
            assert phi_commitment(sol, p, i) == len(kids)


def test_commitment_full_branching():
    plans = [(0, 1), (1, 0), (2, 3)]
    sol = SolutionSet(None, 2, plans, True, tag_plans(plans))
    assert len(sol.tagged_children(())) == 3


def test_difficulty_values_on_toy():
    t = bundled_task("satellite", "satellite-commit")
    assert phi_difficulty(t, t.action_by_name("switch_on", "t", "s")) == 1
    assert phi_difficulty(t, t.action_by_name("turn_to", "s", "d1", "d3")) == Fraction(1, 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_difficulty_equals_supporter_scan(seed):
    rng = random.Random(seed)
    t = ground_task(load_bundled_domain("blocksworld"), random_bw_problem(rng.randint(2, 4), rng))
    counts = supporter_counts(t)
    for a in t.actions:
        direct = min(sum(1 for b in t.actions if f in b.add) for f in a.add)
        assert phi_difficulty(t, a, counts) == Fraction(1, direct)


def test_ranking_single_action_plan():
    assert ranking([Fraction(3, 7)]) == Fraction(3, 7)
    assert ranking([1, 1, 1]) == 1 + Fraction(2, 3) + Fraction(1, 3)


def test_identical_rankings_both_top():
    plans = [(0,), (1,)]
    t = two_block_task()
    sol = SolutionSet(t, 1, plans, True, tag_plans(plans))
    assert rank_solutions(sol).top == [0, 1]


def test_rank_refuses_unexhausted():
    with pytest.raises(ValueError):
        rank_solutions(SolutionSet(None, 1, [], False))


def test_toy_ranking_prefers_switch_on_first():
    t = bundled_task("satellite", "satellite-commit")
    sol = bfs_bnb_solve_all(t)
    ranked = rank_solutions(sol)
    top, com, dif = brute_rank(t, sol.plans)
    assert ranked.top == top and ranked.commitment == com and ranked.difficulty == dif
    assert all(t.actions[sol.plans[i][0]].schema == "switch_on" for i in ranked.top)
    assert len(sol.plans) == 2 and com[0] == com[1]


def _rename(problem, mapping):
    sub = lambda a: Atom(a.pred, tuple(mapping.get(x, x) for x in a.args))
    return ProblemModel(
        problem.name,
        problem.domain_name,
        tuple((mapping.get(n, n), t) for n, t in problem.objects),
        tuple(map(sub, problem.init)),
        tuple(map(sub, problem.goals)),
    )


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_ranking_invariant_under_renaming(seed):
    rng = random.Random(seed)
    d = load_bundled_domain("blocksworld")
    p = random_bw_problem(rng.randint(3, 4), rng)
    names = [n for n, _ in p.objects]
    shuffled = names[:]
    rng.shuffle(shuffled)
    q = _rename(p, {a: "z" + b for a, b in zip(names, shuffled)})

    def values(problem):
        t = ground_task(d, problem)
        cost, plans = all_optimal_plans(t)
        sol = SolutionSet(t, cost, plans, True, tag_plans(plans))
        r = rank_solutions(sol)
        return sorted(zip(r.commitment, r.difficulty))

    assert values(p) == values(q)


# -- example extraction -----------------------------------------------------------------------------


def test_first_operator_example_reproduces_bundled_context(tr01):
    t, sol, ranked = tr01
    kb = extract_operator_examples(sol, ranked)
    ex = kb.examples[0]
    assert ex.id == "tr01_e1" and ex.targets == [((), "switch_on")]
    expected = {
        ("helpful_turn_to", ("tr01_e1", "tr01", "satellite0", d, "star0"))
        for d in ("groundstation1", "phenomenon2", "phenomenon3", "phenomenon4")
    }
    expected.add(("helpful_switch_on", ("tr01_e1", "tr01", "instrument0", "satellite0")))
    expected |= {
        ("target_goal_have_image", ("tr01_e1", "tr01", d, m))
        for d, m in (("phenomenon3", "infrared2"), ("phenomenon4", "infrared2"), ("phenomenon2", "spectrograph1"))
    }
    assert set(ex.facts) == expected
    assert kb.dumps().splitlines()[:2] == ["% Example tr01_e1 from problem tr01", "selected(tr01_e1, tr01, switch_on) ."]


def test_examples_per_plan(tr01):
    t, sol, ranked = tr01
    kb = extract_operator_examples(sol, ranked)
    assert len(kb.examples) == sum(len(p) for p in ranked.top_plans(sol))


def test_binding_example_labels():
    t = bundled_task("satellite", "satellite-tr07")
    sol = bfs_bnb_solve_all(t)
    kb = extract_binding_examples(sol, rank_solutions(sol), "switch_on")
    ex = kb.examples[0]
    assert sorted(ex.targets) == [(("instrument0", "satellite0"), "rejected"), (("instrument1", "satellite0"), "selected")]


def test_single_binding_gives_one_selected():
    t = bundled_task("satellite", "satellite-commit")
    sol = bfs_bnb_solve_all(t)
    kb = extract_binding_examples(sol, rank_solutions(sol), "switch_on")
    assert kb.examples[0].targets == [(("t", "s"), "selected")]


def test_commutative_turns_all_selected():
    t = bundled_task("satellite", "satellite-turns")
    sol = bfs_bnb_solve_all(t)
    kb = extract_binding_examples(sol, rank_solutions(sol), "turn_to")
    first = kb.examples[0]
    selected = sorted(args for args, lab in first.targets if lab == "selected")
    assert selected == [("s", "d1", "d0"), ("s", "d2", "d0"), ("s", "d3", "d0")]


def test_knowledge_base_invariants(tr01):
    t, sol, ranked = tr01
    ev = Evaluator(t)
    kb = extract_operator_examples(sol, ranked)
    prob = sanitize(t.name)
    for ex, (plan, i) in zip(kb.examples, [(p, i) for p in ranked.top_plans(sol) for i in range(len(p))]):
        s = t.init
        for aid in plan[:i]:
            a = t.actions[aid]
            s = (s - a.dele) | a.add
        _, helpful = ev.evaluate(s)
        got_helpful = {(f[0], f[1][2:]) for f in ex.facts if f[0].startswith("helpful_")}
        want = {("helpful_" + sanitize(t.actions[a].schema), t.actions[a].args) for a in helpful}
        assert got_helpful == want
        got_goals = {f[1][2:] for f in ex.facts if f[0].startswith("target_goal_")}
        assert got_goals == {t.facts.atom(g).args for g in t.goals if g not in s}
        assert all(f[1][:2] == (ex.id, prob) for f in ex.facts)
    statics = {(f[0], f[1][1:]) for f in kb.statics[prob]}
    assert statics == {("static_fact_" + a.pred, a.args) for a in t.problem.init if a.pred in t.static_predicates}


def test_knowledge_base_round_trip(tr01):
    t, sol, ranked = tr01
    for kb in (extract_operator_examples(sol, ranked), extract_binding_examples(sol, ranked, "turn_to")):
        again = KnowledgeBase.loads(kb.dumps(), kb.target)
        assert again == kb
        assert again.dumps() == kb.dumps()


def test_static_facts_grouped_by_problem(tr01):
    t, _, _ = tr01
    facts = static_facts(t, "tr01")
    assert {f[0] for f in facts} == {"static_fact_on_board", "static_fact_supports", "static_fact_calibration_target"}


# -- language bias ------------------------------------------------------------------------------------


def test_operator_bias_shape():
    b = emit_language_bias(load_bundled_domain("satellite"))
    text = b["ops"].dumps()
    assert "classes([turn_to,switch_on,switch_off,calibrate,take_image])." in text
    assert "predict(selected(+IdExample,+IdProblem,-Operator))." in text
    assert LanguageBias.loads(text) == b["ops"]


def test_binding_bias_shape():
    b = emit_language_bias(load_bundled_domain("satellite"))["switch_on"]
    assert b.target.pred == "selected_switch_on"
    assert b.target.types == ("index", "idprob", "instrument", "satellite", "class")
    assert b.classes == ("selected", "rejected")
    assert LanguageBias.loads(b.dumps()) == b


def test_identifier_arguments_are_input_only():
    for bias in emit_language_bias(load_bundled_domain("satellite")).values():
        for m in bias.rmodes:
            for mode, typ in zip(m.modes, m.types):
                if typ in ("index", "idprob"):
                    assert mode == "+"


def test_no_static_modes_without_static_predicates():
    b = emit_language_bias(load_bundled_domain("blocksworld"))
    assert not any(m.pred.startswith("static_fact_") for bias in b.values() for m in bias.rmodes)


def test_goal_predicate_restriction():
    b = emit_language_bias(load_bundled_domain("satellite"), ["have_image"])
    assert [m.pred for m in b["ops"].rmodes if m.pred.startswith("target_goal_")] == ["target_goal_have_image"]
