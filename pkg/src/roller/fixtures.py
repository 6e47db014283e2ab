"""Bundled domains and problems, and a seeded random Blocksworld generator."""

from __future__ import annotations

import os
import random
from importlib import resources

from .grounding import GroundTask, ground_task
from .pddl import Atom, DomainModel, ProblemModel, parse_domain, parse_problem

SEED_ENV = "ROLLER_SEED"
DEFAULT_SEED = 0


def seed_from_env(default: int = DEFAULT_SEED) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def data_text(name: str) -> str:
    return resources.files("roller").joinpath("data", name).read_text(encoding="utf-8")


def data_path(name: str):
    return resources.files("roller").joinpath("data", name)


def load_bundled_domain(name: str) -> DomainModel:
    return parse_domain(data_text(f"{name}.pddl"), f"{name}.pddl")


def load_bundled_problem(name: str, domain: DomainModel) -> ProblemModel:
    return parse_problem(data_text(f"{name}.pddl"), domain, f"{name}.pddl")


def bundled_task(domain_name: str, problem_name: str) -> GroundTask:
    d = load_bundled_domain(domain_name)
    return ground_task(d, load_bundled_problem(problem_name, d))


def _towers(blocks: list[str], rng: random.Random) -> list[list[str]]:
    b = list(blocks)
    rng.shuffle(b)
    out = []
    while b:
        k = rng.randint(1, len(b))
        out.append(b[:k])
        b = b[k:]
    return out


def random_blocksworld(n: int, seed: int, name: str | None = None) -> ProblemModel:
    """Random initial and goal tower configurations over ``n`` blocks.

    Goals are the ``on`` facts of the goal towers.  Draws are repeated until
    the goal is nonempty and not already true in the initial state.
    """
    if n < 2:
        raise ValueError("need at least two blocks")
    rng = random.Random(f"bw-{n}-{seed}")
    blocks = [f"b{i}" for i in range(1, n + 1)]
    while True:
        init: list[Atom] = []
        for t in _towers(blocks, rng):
            init.append(Atom("ontable", (t[0],)))
            init += [Atom("on", (x, y)) for x, y in zip(t[1:], t)]
            init.append(Atom("clear", (t[-1],)))
        init.append(Atom("handempty", ()))
        goals = [Atom("on", (x, y)) for t in _towers(blocks, rng) for x, y in zip(t[1:], t)]
        if goals and not set(goals) <= set(init):
            break
    return ProblemModel(
        name or f"bw{n}_{seed}", "blocksworld", tuple((b, "block") for b in blocks), tuple(init), tuple(goals)
    )


def blocksworld_suite(n: int, count: int, seed: int | None = None, tag: str = "bw") -> list[ProblemModel]:
    """``count`` problems of ``n`` blocks; the suite seed defaults to ``ROLLER_SEED``."""
    base = seed_from_env() if seed is None else seed
    return [random_blocksworld(n, base * 100003 + i, f"{tag}{n}_{base}_{i}") for i in range(count)]
