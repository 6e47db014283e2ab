"""Benchmark suites and IPC-style time and quality scores."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .grounding import GroundTask, validate_plan
from .policy import DckBundle
from .search import SearchConfig, solve

log = logging.getLogger(__name__)

CSV_FIELDS = ("config", "problem", "solved", "time", "length", "evaluations")


@dataclass(frozen=True)
class RunRecord:
    config: str
    problem: str
    solved: bool
    time: float
    length: int | None
    evaluations: int


def exact(x) -> Fraction:
    """Exact rational for a measurement; floats go through their shortest decimal repr."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _ratio_scores(values: Mapping[str, Mapping[str, object]]) -> dict[str, Fraction]:
    """Per config, the sum over problems of best/own (0 when unsolved)."""
    problems = sorted({p for per in values.values() for p in per})
    scores = {c: Fraction(0) for c in values}
    for p in problems:
        solved = {c: exact(per[p]) for c, per in values.items() if per.get(p) is not None}
        if not solved:
            continue
        if any(v < 0 for v in solved.values()):
            raise ValueError(f"negative measurement on problem {p}")
        best = min(solved.values())
        for c, v in solved.items():
            # an empty plan is a perfect score; 0/0 counts as 1
            scores[c] += best / v if v else Fraction(1)
    return scores


def time_score(times: Mapping[str, Mapping[str, object]]) -> dict[str, Fraction]:
    """``times[config][problem]`` is seconds, or None when unsolved."""
    return _ratio_scores(times)


def quality_score(lengths: Mapping[str, Mapping[str, object]]) -> dict[str, Fraction]:
    return _ratio_scores(lengths)


@dataclass
class ScoreReport:
    configs: list[str]
    solved: dict[str, int]
    time: dict[str, Fraction]
    quality: dict[str, Fraction]
    common: list[str]
    avg_time: dict[str, Fraction | None]
    avg_length: dict[str, Fraction | None]

    def table(self) -> str:
        head = f"{'config':<28} {'solved':>6} {'time':>9} {'quality':>9} {'avg_time':>10} {'avg_len':>9}"
        rows = [head]
        for c in self.configs:
            at, al = self.avg_time[c], self.avg_length[c]
            rows.append(
                f"{c:<28} {self.solved[c]:>6} {float(self.time[c]):>9.3f} {float(self.quality[c]):>9.3f} "
                f"{'-' if at is None else f'{float(at):.3f}':>10} {'-' if al is None else f'{float(al):.2f}':>9}"
            )
        rows.append(f"averages over {len(self.common)} problem(s) solved by every config that solved any")
        return "\n".join(rows) + "\n"


def score_records(records: Iterable[RunRecord]) -> ScoreReport:
    records = list(records)
    configs = list(dict.fromkeys(r.config for r in records))
    times: dict[str, dict[str, object]] = {c: {} for c in configs}
    lengths: dict[str, dict[str, object]] = {c: {} for c in configs}
    for r in records:
        times[r.config][r.problem] = r.time if r.solved else None
        lengths[r.config][r.problem] = r.length if r.solved else None
    solved = {c: sum(v is not None for v in times[c].values()) for c in configs}
    active = [c for c in configs if solved[c] > 0]
    problems = sorted({r.problem for r in records})
    common = [p for p in problems if active and all(times[c].get(p) is not None for c in active)]
    avg_time: dict[str, Fraction | None] = {c: None for c in configs}
    avg_len: dict[str, Fraction | None] = {c: None for c in configs}
    if common:
        for c in active:
            avg_time[c] = sum((exact(times[c][p]) for p in common), Fraction(0)) / len(common)
            avg_len[c] = sum((exact(lengths[c][p]) for p in common), Fraction(0)) / len(common)
    return ScoreReport(configs, solved, time_score(times), quality_score(lengths), common, avg_time, avg_len)


def write_csv(records: Iterable[RunRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([r.config, r.problem, int(r.solved), repr(r.time), "" if r.length is None else r.length, r.evaluations])


def read_csv(path) -> list[RunRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(
                RunRecord(
                    row["config"],
                    row["problem"],
                    row["solved"].strip() in ("1", "true", "True"),
                    float(row["time"]),
                    int(row["length"]) if row["length"].strip() else None,
                    int(row["evaluations"]),
                )
            )
    return out


@dataclass(frozen=True)
class SuiteConfig:
    name: str
    search: SearchConfig
    dck: DckBundle | None = None


def run_one(cfg: SuiteConfig, task: GroundTask) -> RunRecord:
    res = solve(task, cfg.dck, cfg.search)
    solved = res.plan is not None
    if solved and not validate_plan(task, res.plan):
        log.error("INVALID PLAN from %s on %s: counted as unsolved", cfg.name, task.name)
        solved = False
    return RunRecord(
        cfg.name,
        task.name,
        solved,
        max(res.stats.time, 1e-9) if solved else res.stats.time,
        res.length if solved else None,
        res.stats.evaluated,
    )


def run_suite(
    tasks: Sequence[GroundTask],
    configs: Sequence[SuiteConfig],
    csv_path=None,
    workers: int = 1,
) -> tuple[ScoreReport, list[RunRecord]]:
    """Run every config on every task, replay-validate plans and score the results."""
    jobs = [(c, t) for c in configs for t in tasks]
    if workers <= 1:
        records = [run_one(c, t) for c, t in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, *zip(*jobs)))
    if csv_path is not None:
        write_csv(records, csv_path)
    return score_records(records), records
