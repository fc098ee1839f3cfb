"""Build and select feedback messages for a candidate domain.

Plan feedback: each reference plan that fails to validate under the
candidate yields one message splicing the problem, the plan, and the
validator output into the plan template. Landmark feedback: each landmark
not hit by the candidate's own plans yields one message splicing the
landmark's actions and the shortest candidate plan (or a no-plan marker).
Message pools are deterministic; selection is either seeded-uniform or
stable-prefix for search children.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Mapping, Optional

from . import assets
from .core import Domain, Plan, Problem, RebindError, rebind_problem
from .landmarks import DisjunctiveActionLandmark, landmark_hit
from .planner import PlannerConfig, enumerate_plans
from .semantics import Verdict, validate_plan
from .text import print_plan, print_problem

NO_PLAN_MARKER = "; no plan could be found for this problem"


def _display_problem(gen: Domain, problem: Problem) -> Problem:
    """The problem as the candidate domain sees it; the original when the
    candidate cannot bind it."""
    try:
        return rebind_problem(problem, gen)
    except RebindError:
        return problem


@dataclass(frozen=True)
class FeedbackMessage:
    kind: str  # "plan" or "landmark"
    problem_id: str
    rendered: str
    stable_index: int
    plan: Optional[Plan] = None
    verdict: Optional[Verdict] = None
    landmark: Optional[DisjunctiveActionLandmark] = None
    shown_plan: Optional[Plan] = None


def _splice(template: str, fields: Mapping[str, str]) -> str:
    out = template
    for key, value in fields.items():
        out = out.replace("{" + key + "}", value.rstrip("\n"))
    return out


def render_plan_feedback(problem: Problem, plan: Plan, verdict: Verdict) -> str:
    return _splice(
        assets.plan_feedback_template(),
        {
            "problem": print_problem(problem),
            "plan": print_plan(plan),
            "val_output": verdict.rendered,
        },
    )


def render_landmark_feedback(
    problem: Problem, landmark: DisjunctiveActionLandmark, shown_plan: Optional[Plan]
) -> str:
    plan_text = print_plan(shown_plan) if shown_plan else NO_PLAN_MARKER
    return _splice(
        assets.landmark_feedback_template(),
        {
            "problem": print_problem(problem),
            "landmark": landmark.render_actions(),
            "plan": plan_text,
        },
    )


def plan_feedback_pool(
    gen: Domain, problems: list[Problem], plans: Mapping[str, list[Plan]]
) -> list[FeedbackMessage]:
    """One message per reference plan that is invalid under the candidate,
    including plans whose problem no longer binds. Ordered by (problem id,
    plan index)."""
    out = []
    for problem in sorted(problems, key=lambda p: p.name):
        shown_problem = _display_problem(gen, problem)
        for plan in plans.get(problem.name, []):
            verdict = validate_plan(gen, problem, plan)
            if verdict.valid:
                continue
            out.append(
                FeedbackMessage(
                    kind="plan",
                    problem_id=problem.name,
                    rendered=render_plan_feedback(shown_problem, plan, verdict),
                    stable_index=len(out),
                    plan=plan,
                    verdict=verdict,
                )
            )
    return out


def landmark_feedback_pool(
    gen: Domain,
    problems: list[Problem],
    landmarks: Mapping[str, list[DisjunctiveActionLandmark]],
    cfg: PlannerConfig,
) -> list[FeedbackMessage]:
    """One message per landmark no candidate-domain plan hits.

    The candidate's plans come from the top-k enumerator under ``cfg``;
    when it finds none (unsolvable or unbindable), every landmark of that
    problem is reported with the no-plan marker. Ordered by (problem id,
    landmark index)."""
    out = []
    for problem in sorted(problems, key=lambda p: p.name):
        shown_problem = _display_problem(gen, problem)
        generated = enumerate_plans(gen, problem, cfg).plans
        shown = generated[0] if generated else None
        for lm in landmarks.get(problem.name, []):
            if landmark_hit(lm, generated):
                continue
            out.append(
                FeedbackMessage(
                    kind="landmark",
                    problem_id=problem.name,
                    rendered=render_landmark_feedback(shown_problem, lm, shown),
                    stable_index=len(out),
                    landmark=lm,
                    shown_plan=shown,
                )
            )
    return out


def combined_pool(
    plan_pool: list[FeedbackMessage], landmark_pool: list[FeedbackMessage]
) -> list[FeedbackMessage]:
    """Concatenate with plan messages first, re-assigning stable indices."""
    out = []
    for msg in list(plan_pool) + list(landmark_pool):
        out.append(replace(msg, stable_index=len(out)))
    return out


class NoFeedbackAvailable(Exception):
    pass


def select_feedback(
    pool: list[FeedbackMessage],
    strategy: str,
    n: int = 1,
    rng: Optional[random.Random] = None,
) -> list[FeedbackMessage]:
    """random_single: one uniform draw with the caller's RNG.
    first_n: the min(n, |pool|) messages of lowest stable index."""
    if strategy == "random_single":
        if not pool:
            raise NoFeedbackAvailable("no feedback available")
        if rng is None:
            raise ValueError("random_single requires a seeded RNG")
        return [pool[rng.randrange(len(pool))]]
    if strategy == "first_n":
        ordered = sorted(pool, key=lambda m: m.stable_index)
        return ordered[: max(0, min(n, len(ordered)))]
    raise ValueError(f"unknown selection strategy {strategy!r}")
