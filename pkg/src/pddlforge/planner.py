"""Enumerate the k shortest valid plans of a problem, deterministically.

Best-first search over partial plans: nodes are action sequences, ordered
by (length, lexicographic sequence). Every popped sequence is generated
exactly once, so the first k goal-reaching pops are exactly the k smallest
valid plans in that order. Correctness and reproducibility over speed;
intended for desk-scale problems.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .core import Diagnostic, Domain, Plan, Problem, RebindError, rebind_problem
from .semantics import applicable, apply_action, goal_satisfied, ground_actions

DEFAULT_HORIZON = 12


@dataclass(frozen=True)
class PlannerConfig:
    """Search limits.

    ``max_plan_length`` of None means adaptive: twice the length of the
    shortest plan once one is found, 12 until then.
    """

    k: int = 100
    max_plan_length: int | None = None
    node_limit: int = 1_000_000
    distinct_args: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_plan_length is not None and self.max_plan_length < 0:
            raise ValueError("max_plan_length must be >= 0")
        if self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")


@dataclass
class PlanSearchResult:
    plans: list[Plan] = field(default_factory=list)
    truncated: bool = False
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def none_found(self) -> bool:
        return not self.plans


def enumerate_plans(domain: Domain, problem: Problem, cfg: PlannerConfig) -> PlanSearchResult:
    """Up to k distinct valid plans sorted by (length, lexicographic order).

    Exhaustively complete up to the horizon unless ``node_limit`` is hit
    (flagged ``truncated``). A problem that does not rebind yields an empty
    result carrying the diagnostics.
    """
    try:
        bound = rebind_problem(problem, domain)
    except RebindError as e:
        return PlanSearchResult(diagnostics=e.diagnostics)

    actions = ground_actions(domain, bound, distinct_args=cfg.distinct_args)
    adaptive = cfg.max_plan_length is None
    horizon = DEFAULT_HORIZON if adaptive else cfg.max_plan_length

    result = PlanSearchResult()
    # (length, sequence) is a total order; sequences are unique, so the
    # trailing state payload is never compared.
    frontier: list = [(0, (), bound.init)]
    pops = 0
    while frontier:
        length, seq, state = heapq.heappop(frontier)
        if length > horizon:
            continue
        pops += 1
        if pops > cfg.node_limit:
            result.truncated = True
            break
        if goal_satisfied(state, bound.goal):
            if adaptive and not result.plans:
                horizon = 2 * length
            result.plans.append(seq)
            if len(result.plans) >= cfg.k:
                break
        if length < horizon:
            for action in actions:
                if applicable(state, action):
                    heapq.heappush(
                        frontier, (length + 1, seq + (action.step,), apply_action(state, action))
                    )
    return result


def solvable(domain: Domain, problem: Problem, horizon: int = DEFAULT_HORIZON) -> bool:
    """True iff at least one valid plan of length <= horizon exists."""
    cfg = PlannerConfig(k=1, max_plan_length=horizon)
    return not enumerate_plans(domain, problem, cfg).none_found
