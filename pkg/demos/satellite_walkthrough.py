"""Walk one small Satellite problem through the training and policy pipeline.

Run with:  python demos/satellite_walkthrough.py
"""

from roller.fixtures import bundled_task, data_path
from roller.grounding import applicable_actions
from roller.policy import DckBundle, build_helpful_context, dt_filter_sort
from roller.relaxed import Evaluator
from roller.training import bfs_bnb_solve_all, extract_operator_examples, rank_solutions


def main() -> None:
    task = bundled_task("satellite", "satellite-tr01")
    print(f"{task.name}: {len(task.facts)} facts, {len(task.actions)} ground actions")

    sol = bfs_bnb_solve_all(task)
    print(f"branch and bound: cost {sol.best_cost}, {len(sol.plans)} optimal plans, exhausted={sol.exhausted}")

    ranked = rank_solutions(sol)
    print(f"{len(ranked.top)} plans share the best (commitment, difficulty) ranking; the first is:")
    for aid in sol.plans[ranked.top[0]]:
        print("   ", task.actions[aid].name)

    kb = extract_operator_examples(sol, ranked)
    print("\nfirst operator example in the knowledge base:")
    print("\n".join(kb.dumps().splitlines()[:8]))

    # the bundled trees were learned on a larger training set
    dck = DckBundle.from_files(data_path("satellite-operators.tree"), {"switch_on": data_path("satellite-switch_on.tree")})
    h, helpful = Evaluator(task).evaluate(task.init)
    ctx = build_helpful_context(task, task.init, helpful)
    print(f"\nh(s0) = {h}; the policy orders the helpful actions as:")
    for action, priority in dt_filter_sort(applicable_actions(task, task.init), ctx, dck):
        print(f"    {float(priority):8.4f}  {action.name}")


if __name__ == "__main__":
    main()
