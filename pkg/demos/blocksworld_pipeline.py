"""Train on small Blocksworld problems and plan on larger ones.

Run with:  ROLLER_SEED=0 python demos/blocksworld_pipeline.py
Takes a few seconds; each search is capped at 20 s.
"""

from roller.bench import SuiteConfig, run_suite
from roller.fixtures import blocksworld_suite, load_bundled_domain, seed_from_env
from roller.grounding import ground_task
from roller.policy import learn_bundle
from roller.search import SearchConfig
from roller.training import generate_training_data


def main() -> None:
    seed = seed_from_env()
    domain = load_bundled_domain("blocksworld")
    train = [ground_task(domain, p) for p in blocksworld_suite(5, 6, seed, "train")]
    data = generate_training_data(train, time_bound=60)
    print(f"training: {len(data.solved)} problems solved, {len(data.operators)} operator examples")

    bundle = learn_bundle(data, domain)
    print("\noperator tree:")
    print(bundle.operator_tree.dumps())

    test = [ground_task(domain, p) for p in blocksworld_suite(12, 5, seed, "test")]
    configs = [
        SuiteConfig("df-policy/trees", SearchConfig("df-policy", "trees", time_bound=20), bundle),
        SuiteConfig("df-policy/none", SearchConfig("df-policy", "none", time_bound=20)),
        SuiteConfig("lookahead-bfs/trees", SearchConfig("lookahead-bfs", "trees", weight=5, time_bound=20), bundle),
    ]
    report, records = run_suite(test, configs)
    for r in records:
        print(f"{r.config:<22} {r.problem:<16} solved={int(r.solved)} length={r.length} evaluations={r.evaluations}")
    print()
    print(report.table(), end="")


if __name__ == "__main__":
    main()
