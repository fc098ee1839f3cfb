"""Heuristic Domain Equivalence scoring between two domains.

Per problem: the forward fraction of reference plans valid under the
candidate domain, averaged with the backward fraction of candidate-domain
plans valid under the reference domain (0 when the candidate yields no
plans). Fractions are exact rationals so a perfect score is detectable by
equality; floats appear only in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .core import Domain, Plan, Problem, RebindError, rebind_problem
from .planner import PlannerConfig, enumerate_plans
from .semantics import validate_plan


@dataclass(frozen=True)
class HdeEntry:
    problem_id: str
    forward: Fraction
    backward: Fraction
    score: Fraction
    reference_plan_count: int
    candidate_plan_count: int
    flags: tuple[str, ...] = ()


@dataclass
class HdeBreakdown:
    per_problem: list[HdeEntry] = field(default_factory=list)

    @property
    def aggregate(self) -> Fraction:
        if not self.per_problem:
            return Fraction(0)
        return sum((e.score for e in self.per_problem), Fraction(0)) / len(self.per_problem)

    @property
    def aggregate_float(self) -> float:
        return float(self.aggregate)


def hde_pair(
    gt: Domain,
    gen: Domain,
    problem: Problem,
    reference_plans: list[Plan],
    cfg: PlannerConfig,
) -> HdeEntry:
    """Score one problem. ``reference_plans`` must be nonempty and valid on
    the ground truth; a candidate that cannot bind the problem scores 0 in
    both directions."""
    if not reference_plans:
        raise ValueError(f"no reference plans for problem {problem.name}")
    try:
        rebound = rebind_problem(problem, gen)
    except RebindError:
        return HdeEntry(
            problem_id=problem.name,
            forward=Fraction(0),
            backward=Fraction(0),
            score=Fraction(0),
            reference_plan_count=len(reference_plans),
            candidate_plan_count=0,
            flags=("rebind failure",),
        )
    forward_hits = sum(1 for p in reference_plans if validate_plan(gen, rebound, p).valid)
    forward = Fraction(forward_hits, len(reference_plans))

    flags = []
    candidate = enumerate_plans(gen, rebound, cfg)
    if candidate.truncated:
        flags.append("truncated candidate plans")
    if candidate.plans:
        backward_hits = sum(1 for p in candidate.plans if validate_plan(gt, problem, p).valid)
        backward = Fraction(backward_hits, len(candidate.plans))
    else:
        backward = Fraction(0)
    return HdeEntry(
        problem_id=problem.name,
        forward=forward,
        backward=backward,
        score=(forward + backward) / 2,
        reference_plan_count=len(reference_plans),
        candidate_plan_count=len(candidate.plans),
        flags=tuple(flags),
    )


def hde_domains(
    gt: Domain,
    gen: Domain,
    eval_problems: list[Problem],
    eval_plans: Mapping[str, list[Plan]],
    cfg: PlannerConfig,
) -> HdeBreakdown:
    """Mean of per-problem scores; ``eval_plans`` is keyed by problem name."""
    breakdown = HdeBreakdown()
    for problem in eval_problems:
        breakdown.per_problem.append(hde_pair(gt, gen, problem, list(eval_plans[problem.name]), cfg))
    return breakdown


def perfect_count(scores: list[Fraction]) -> int:
    """How many aggregates equal exactly 1."""
    return sum(1 for s in scores if s == 1)
