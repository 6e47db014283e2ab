"""Command-line front end: ``roller <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from .bench import SuiteConfig, read_csv, run_suite, score_records
from .fixtures import blocksworld_suite
from .grounding import applicable_actions, apply_action, ground_task
from .learner import induce_tree
from .logic import KnowledgeBase, LanguageBias, emit_language_bias
from .pddl import PDDLError, load_domain, load_problem, problem_to_pddl
from .policy import OPERATOR_TREE_FILE, DckBundle, explain
from .relaxed import INF, Evaluator
from .search import ALGORITHMS, DCK_SOURCES, SearchConfig, anytime, solve
from .training import DEFAULT_TIME_BOUND, generate_training_data


class CLIError(Exception):
    pass


def _task(domain_path: str, problem_path: str):
    d = load_domain(domain_path)
    return ground_task(d, load_problem(problem_path, d))


def _bundle(args):
    if args.dck == "trees":
        if not args.trees:
            raise CLIError("--dck trees needs --trees DIR")
        return DckBundle.load(args.trees)
    return None


def cmd_ground(args) -> int:
    t = _task(args.domain, args.problem)
    print(f"facts={len(t.facts)}")
    print(f"actions={len(t.actions)}")
    return 0


def cmd_heuristic(args) -> int:
    t = _task(args.domain, args.problem)
    h, helpful = Evaluator(t).evaluate(t.init)
    print(f"h={'inf' if h == INF else int(h)}")
    for aid in helpful:
        print(t.actions[aid].name)
    return 0


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for p in blocksworld_suite(args.blocks, args.count, args.seed, args.tag):
        (out / f"{p.name}.pddl").write_text(problem_to_pddl(p), encoding="utf-8")
        print(out / f"{p.name}.pddl")
    return 0


def cmd_train(args) -> int:
    d = load_domain(args.domain)
    tasks = [ground_task(d, load_problem(p, d)) for p in args.problems]
    data = generate_training_data(tasks, args.time_bound)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    biases = emit_language_bias(d, args.goal_predicates)
    data.operators.save(out / f"{d.name}-ops.kb")
    biases["ops"].save(out / f"{d.name}-ops.bias")
    for op, kb in data.bindings.items():
        kb.save(out / f"{d.name}-{op}.kb")
        biases[op].save(out / f"{d.name}-{op}.bias")
    print(f"solved={len(data.solved)} discarded={len(data.discarded)} operator_examples={len(data.operators)}")
    for name in data.discarded:
        print(f"discarded {name} (not exhausted within {args.time_bound}s)", file=sys.stderr)
    return 0 if data.solved else 1


def cmd_learn(args) -> int:
    src = Path(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for bias_path in sorted(src.glob("*.bias")):
        kb_path = bias_path.with_suffix(".kb")
        if not kb_path.exists():
            raise CLIError(f"{kb_path} missing for {bias_path}")
        bias = LanguageBias.load(bias_path)
        kb = KnowledgeBase.load(kb_path, bias.target.pred)
        if len(kb) == 0:
            continue
        tree = induce_tree(kb, bias, args.gain_epsilon, args.min_leaf)
        target = bias.target.pred
        name = OPERATOR_TREE_FILE if target == "selected" else f"{target[len('selected_'):]}.tree"
        tree.save(out / name)
        print(f"{out / name}: {len(kb)} examples, {len(tree.leaves())} leaves")
        written += 1
    if not written:
        raise CLIError(f"no non-empty kb/bias pairs in {src}")
    return 0


def _search_config(args) -> SearchConfig:
    return SearchConfig(args.algo, args.dck, args.horizon, Fraction(args.weight), args.time_bound, args.anytime)


def cmd_plan(args) -> int:
    t = _task(args.domain, args.problem)
    cfg = _search_config(args)
    dck = _bundle(args)
    if cfg.anytime:
        last = None
        for res in anytime(t, dck, cfg):
            last = res
            print(f"; improved plan length={res.length} time={res.stats.time:.3f}", file=sys.stderr)
        res = last
    else:
        res = solve(t, dck, cfg)
    if res is None or res.plan is None:
        print("no plan found", file=sys.stderr)
        if res is not None:
            print(res.stats.line(None))
        return 1
    for a in res.plan:
        print(a.name)
    print(res.stats.line(res.length))
    return 0


def _parse_config(spec: str) -> tuple[str, str]:
    algo, _, dck = spec.partition("/")
    if algo not in ALGORITHMS or dck not in DCK_SOURCES:
        raise CLIError(f"bad config {spec!r}; expected ALGO/DCK, e.g. df-policy/trees")
    return algo, dck


def cmd_bench(args) -> int:
    d = load_domain(args.domain)
    tasks = [ground_task(d, load_problem(p, d)) for p in args.problems]
    bundle = DckBundle.load(args.trees) if args.trees else None
    configs = []
    for spec in args.configs:
        algo, dck = _parse_config(spec)
        if dck == "trees" and bundle is None:
            raise CLIError(f"{spec} needs --trees DIR")
        sc = SearchConfig(algo, dck, args.horizon, Fraction(args.weight), args.time_bound)
        configs.append(SuiteConfig(spec, sc, bundle if dck == "trees" else None))
    report, _ = run_suite(tasks, configs, args.csv, args.workers)
    print(report.table(), end="")
    return 0


def cmd_score(args) -> int:
    print(score_records(read_csv(args.csv)).table(), end="")
    return 0


def cmd_explain(args) -> int:
    t = _task(args.domain, args.problem)
    s = t.init
    for name in args.after or []:
        parts = name.strip().strip("()").split()
        if not parts:
            raise CLIError("empty action in --after")
        s = apply_action(s, t.action_by_name(parts[0], *parts[1:]))
    dck = DckBundle.load(args.trees) if args.trees else DckBundle()
    _, helpful = Evaluator(t).evaluate(s)
    print(explain(t, s, helpful, dck, applicable_actions(t, s)), end="")
    return 0


def _add_search_flags(p: argparse.ArgumentParser, with_anytime: bool = True) -> None:
    p.add_argument("--horizon", type=int, default=100, help="lookahead horizon (default 100)")
    p.add_argument("--weight", default="1", help="weight on h in f = w*h + g (default 1)")
    p.add_argument("--time-bound", type=float, default=60.0, help="seconds per problem (default 60)")
    if with_anytime:
        p.add_argument("--anytime", action="store_true", help="keep searching for shorter plans")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roller", description="Learn relational decision trees and plan with them.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ground", help="print fact and action counts")
    p.add_argument("domain")
    p.add_argument("problem")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("heuristic", help="print h(s0) and the helpful actions")
    p.add_argument("domain")
    p.add_argument("problem")
    p.set_defaults(func=cmd_heuristic)

    p = sub.add_parser("generate", help="write random Blocksworld problems (seeded by ROLLER_SEED)")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=None, help="overrides ROLLER_SEED")
    p.add_argument("--tag", default="bw")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="solve training problems and write kb/bias files")
    p.add_argument("domain")
    p.add_argument("problems", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--time-bound", type=float, default=DEFAULT_TIME_BOUND)
    p.add_argument("--goal-predicates", nargs="*", default=None, help="restrict target_goal modes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("learn", help="induce trees from a train output directory")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p.add_argument("--gain-epsilon", type=float, default=1e-6)
    p.add_argument("--min-leaf", type=int, default=2)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("plan", help="solve one problem")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--algo", choices=ALGORITHMS, default="df-policy")
    p.add_argument("--dck", choices=DCK_SOURCES, default="trees")
    p.add_argument("--trees", help="directory with operators.tree and <op>.tree files")
    _add_search_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run configurations over problems and score them")
    p.add_argument("domain")
    p.add_argument("problems", nargs="+")
    p.add_argument("--configs", nargs="+", default=["df-policy/trees", "df-policy/none"], help="ALGO/DCK pairs")
    p.add_argument("--trees")
    p.add_argument("--csv", help="write run records here")
    p.add_argument("--workers", type=int, default=1)
    _add_search_flags(p, with_anytime=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("score", help="recompute the score table from a bench CSV")
    p.add_argument("csv")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("policy", help="inspect the learned policy")
    psub = p.add_subparsers(dest="policy_command", required=True)
    e = psub.add_parser("explain", help="context and priority breakdown for a state")
    e.add_argument("domain")
    e.add_argument("problem")
    e.add_argument("--trees")
    e.add_argument("--after", action="append", help="apply this action first, e.g. '(pick-up b1)'; repeatable")
    e.set_defaults(func=cmd_explain)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except PDDLError as e:
        print(str(e), file=sys.stderr)
        return 2
    except (CLIError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"roller: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
