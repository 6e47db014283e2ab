import os
import subprocess
import sys

import pytest

from roller.fixtures import data_path

BW = str(data_path("blocksworld.pddl"))
SAT = str(data_path("satellite.pddl"))
TR01 = str(data_path("satellite-tr01.pddl"))


def roller(*args, env=None, check=True):
    e = dict(os.environ, **(env or {}))
    out = subprocess.run([sys.executable, "-m", "roller", *map(str, args)], capture_output=True, text=True, env=e)
    if check and out.returncode != 0:
        raise AssertionError(f"exit {out.returncode}\n{out.stdout}\n{out.stderr}")
    return out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    roller("generate", "--blocks", 4, "--count", 4, "--seed", 3, "--tag", "tr", "--out", root / "train")
    roller("generate", "--blocks", 6, "--count", 2, "--seed", 4, "--tag", "te", "--out", root / "test")
    train = sorted((root / "train").glob("*.pddl"))
    out = roller("train", BW, *train, "--out", root / "kb", "--time-bound", 30)
    roller("learn", root / "kb", "--out", root / "trees")
    return root, out


def test_ground_and_heuristic():
    out = roller("ground", SAT, TR01).stdout.splitlines()
    assert out[0].startswith("facts=") and out[1].startswith("actions=")
    h = roller("heuristic", SAT, TR01).stdout.splitlines()
    assert h[0] == "h=9" and "(switch_on instrument0 satellite0)" in h


def test_generate_honours_seed_env(tmp_path):
    roller("generate", "--blocks", 5, "--count", 2, "--out", tmp_path / "a", env={"ROLLER_SEED": "7"})
    roller("generate", "--blocks", 5, "--count", 2, "--out", tmp_path / "b", env={"ROLLER_SEED": "7"})
    roller("generate", "--blocks", 5, "--count", 2, "--out", tmp_path / "c", env={"ROLLER_SEED": "8"})
    read = lambda d: [p.read_text() for p in sorted((tmp_path / d).glob("*.pddl"))]
    assert read("a") == read("b") != read("c")


def test_train_writes_kb_and_bias(pipeline):
    root, out = pipeline
    assert "solved=4" in out.stdout
    names = {p.name for p in (root / "kb").iterdir()}
    assert {"blocksworld-ops.kb", "blocksworld-ops.bias"} <= names
    assert (root / "trees" / "operators.tree").exists()


def test_plan_prints_actions_and_stats(pipeline):
    root, _ = pipeline
    prob = sorted((root / "test").glob("*.pddl"))[0]
    lines = roller("plan", BW, prob, "--trees", root / "trees").stdout.splitlines()
    assert lines[-1].startswith("evaluated=") and all(l.startswith("(") for l in lines[:-1])
    n = int(lines[-1].split("length=")[1].split()[0])
    assert n == len(lines) - 1


def test_plan_anytime_and_bfs(pipeline):
    root, _ = pipeline
    prob = sorted((root / "test").glob("*.pddl"))[0]
    out = roller("plan", BW, prob, "--algo", "lookahead-bfs", "--dck", "ff-order", "--anytime", "--time-bound", 5)
    assert out.stdout.splitlines()[-1].startswith("evaluated=")


def test_bench_and_score(pipeline):
    root, _ = pipeline
    probs = sorted((root / "test").glob("*.pddl"))
    csv = root / "runs.csv"
    out = roller("bench", BW, *probs, "--trees", root / "trees", "--configs", "df-policy/trees", "df-policy/none", "--csv", csv)
    assert "df-policy/trees" in out.stdout
    again = roller("score", csv).stdout
    assert again == out.stdout


def test_policy_explain(pipeline):
    root, _ = pipeline
    prob = sorted((root / "test").glob("*.pddl"))[0]
    out = roller("policy", "explain", BW, prob, "--trees", root / "trees").stdout
    assert "helpful actions:" in out and "priorities:" in out


def test_pddl_error_has_position(tmp_path):
    bad = tmp_path / "bad.pddl"
    bad.write_text("(define (domain x)\n  (:predicates (p ?a))\n  (:action a :parameters (?a)\n     :precondition (q ?a) :effect (p ?a)))")
    out = roller("ground", bad, TR01, check=False)
    assert out.returncode == 2 and out.stderr.startswith(f"{bad}:4:20:")


def test_trees_required_for_tree_source():
    out = roller("plan", SAT, TR01, check=False)
    assert out.returncode == 2 and "--trees" in out.stderr


def test_bad_bench_config():
    out = roller("bench", SAT, TR01, "--configs", "dfs/none", check=False)
    assert out.returncode == 2 and "ALGO/DCK" in out.stderr
