"""Dataset layout, asset generation, and scoped asset loading.

Layout per domain directory::

    <domain>/
      domain.pddl            ground truth (evaluation only)
      description.json       the natural-language description document
      pool/*.pddl            committed problem pool, consumed in name order
      feedback/{problems,plans,landmarks}/
      eval/{problems,plans}/

Asset generation reads only the ground truth and the pool; construction
reads only the description. All reads go through :func:`read_text`, which
records (scope, path) pairs when tracing is active, so tests can assert
the separation.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from .construction import DomainDescription
from .core import Domain, Plan, Problem
from .landmarks import problem_landmarks, read_landmarks, write_landmarks
from .planner import DEFAULT_HORIZON, PlannerConfig, enumerate_plans, solvable
from .search import FeedbackAssets
from .text import parse_domain, parse_plan, parse_problem, print_plan, print_problem

_active_trace: Optional[list[tuple[str, Path]]] = None


@contextmanager
def trace_reads() -> Iterator[list[tuple[str, Path]]]:
    """Record every (scope, path) read while the context is active."""
    global _active_trace
    previous = _active_trace
    _active_trace = trace = []
    try:
        yield trace
    finally:
        _active_trace = previous


def read_text(path: Path, scope: str) -> str:
    if _active_trace is not None:
        _active_trace.append((scope, path))
    return path.read_text(encoding="utf-8")


def write_text(path: Path, content: str) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


def load_ground_truth(domain_dir: Path) -> Domain:
    return parse_domain(read_text(domain_dir / "domain.pddl", "ground-truth"))


def load_description(domain_dir: Path) -> DomainDescription:
    return DomainDescription.from_json(read_text(domain_dir / "description.json", "description"))


def load_pool(domain_dir: Path) -> list[Problem]:
    """Pool problems in file-name order."""
    out = []
    for path in sorted((domain_dir / "pool").glob("*.pddl")):
        out.append(parse_problem(read_text(path, "pool")))
    return out


class AssetError(Exception):
    pass


def gen_assets(
    domain_dir: Path,
    feedback_problem_count: int = 5,
    eval_problem_count: int = 5,
    feedback_plans_per_problem: int = 2,
    eval_plans_per_problem: int = 100,
    horizon: int = DEFAULT_HORIZON,
) -> None:
    """Split the pool into feedback and evaluation problems and write plans
    and landmarks for them.

    The first ``feedback_problem_count`` solvable pool problems feed back,
    the next ``eval_problem_count`` evaluate; unsolvable pool entries are
    skipped. Deterministic given the pool: reruns are byte-identical.
    """
    gt = load_ground_truth(domain_dir)
    pool = load_pool(domain_dir)
    solvable_problems = [p for p in pool if solvable(gt, p, horizon)]
    needed = feedback_problem_count + eval_problem_count
    if len(solvable_problems) < needed:
        raise AssetError(
            f"{domain_dir.name}: need {needed} solvable problems, found {len(solvable_problems)}"
        )
    feedback = solvable_problems[:feedback_problem_count]
    evaluation = solvable_problems[feedback_problem_count:needed]

    for sub in ("feedback/problems", "feedback/plans", "feedback/landmarks", "eval/problems", "eval/plans"):
        (domain_dir / sub).mkdir(parents=True, exist_ok=True)

    for problem in feedback:
        write_text(domain_dir / "feedback" / "problems" / f"{problem.name}.pddl", print_problem(problem))
        plans = enumerate_plans(gt, problem, PlannerConfig(k=feedback_plans_per_problem)).plans
        for i, plan in enumerate(plans):
            write_text(
                domain_dir / "feedback" / "plans" / f"{problem.name}-{i:03d}.soln", print_plan(plan) + "\n"
            )
        landmarks = problem_landmarks(gt, problem, horizon)
        write_text(domain_dir / "feedback" / "landmarks" / f"{problem.name}.lmk", write_landmarks(landmarks))

    for problem in evaluation:
        write_text(domain_dir / "eval" / "problems" / f"{problem.name}.pddl", print_problem(problem))
        plans = enumerate_plans(gt, problem, PlannerConfig(k=eval_plans_per_problem)).plans
        for i, plan in enumerate(plans):
            write_text(
                domain_dir / "eval" / "plans" / f"{problem.name}-{i:03d}.soln", print_plan(plan) + "\n"
            )


def _load_problem_set(base: Path, scope: str) -> tuple[list[Problem], dict[str, list[Plan]]]:
    problems = []
    plans: dict[str, list[Plan]] = {}
    for path in sorted((base / "problems").glob("*.pddl")):
        problem = parse_problem(read_text(path, scope))
        problems.append(problem)
        plans[problem.name] = [
            parse_plan(read_text(p, scope)) for p in sorted((base / "plans").glob(f"{path.stem}-*.soln"))
        ]
    return problems, plans


def load_feedback_assets(domain_dir: Path) -> FeedbackAssets:
    problems, plans = _load_problem_set(domain_dir / "feedback", "feedback")
    landmarks = {}
    for problem in problems:
        path = domain_dir / "feedback" / "landmarks" / f"{problem.name}.lmk"
        landmarks[problem.name] = read_landmarks(read_text(path, "feedback")) if path.exists() else []
    return FeedbackAssets(problems=problems, plans=plans, landmarks=landmarks)


def load_eval_assets(domain_dir: Path) -> tuple[list[Problem], dict[str, list[Plan]]]:
    return _load_problem_set(domain_dir / "eval", "evaluation")
