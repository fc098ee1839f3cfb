"""Refinement drivers: pass-through, random walk, and best-first search
over feedback space.

Every candidate is a tree node holding its own full conversation. The
walk applies one uniformly drawn message per iteration, spending its
budget on backend calls (syntax retries included). The search expands the
open node with the lowest depth + weight * invalid-plan-count, generating
one child per stable-order feedback message up to the child cap; a child
with no invalid feedback plans, or a node with nothing left to report,
ends the run.
"""

from __future__ import annotations

import heapq
import logging
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .backends import BackendError, History, syntax_repair_loop, user
from .core import Domain, Plan, Problem
from .feedback import (
    FeedbackMessage,
    combined_pool,
    landmark_feedback_pool,
    plan_feedback_pool,
    select_feedback,
)
from .landmarks import DisjunctiveActionLandmark
from .planner import PlannerConfig
from .semantics import validate_plan
from .text import extract_pddl_block, parse_domain

logger = logging.getLogger(__name__)

PIPELINES = ("N", "LR", "LS", "VR", "VS", "LVR", "LVS")
RANDOM_WALK_PIPELINES = ("LR", "VR", "LVR")
SEARCH_PIPELINES = ("LS", "VS", "LVS")


@dataclass(frozen=True)
class PipelineConfig:
    kind: str
    budget: int = 15
    child_cap: int = 10
    weight: float = 1.0
    planner: PlannerConfig = field(default_factory=lambda: PlannerConfig(k=2))
    seed: int = 0
    syntax_retries: int = 3

    def __post_init__(self) -> None:
        if self.kind not in PIPELINES:
            raise ValueError(f"unknown pipeline kind {self.kind!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.child_cap < 0:
            raise ValueError("child_cap must be >= 0")
        if self.weight < 0:
            raise ValueError("weight must be >= 0")


@dataclass
class FeedbackAssets:
    """Feedback problems with their reference plans and landmarks."""

    problems: list[Problem]
    plans: Mapping[str, list[Plan]]
    landmarks: Mapping[str, list[DisjunctiveActionLandmark]] = field(default_factory=dict)


@dataclass
class SearchNode:
    id: int
    domain: Optional[Domain]
    history: History
    parent: Optional[int]
    depth: int
    invalid_plans: Optional[int]
    priority: Optional[float]
    feedback: Optional[FeedbackMessage] = None
    status: str = "open"  # open, expanded, goal, discarded


@dataclass
class RunResult:
    final_domain: Domain
    tree: list[SearchNode]
    termination: str  # goal, budget, no_feedback, failure
    llm_calls: int
    chosen_node: int


class _CountingBackend:
    """Counts completions so call accounting survives backend exceptions."""

    def __init__(self, inner):
        self._inner = inner
        self.calls = 0

    def complete(self, history: History):
        self.calls += 1
        return self._inner.complete(history)


def invalid_plan_count(gen: Domain, assets: FeedbackAssets) -> int:
    """Reference feedback plans that do not validate under the candidate.

    A problem the candidate cannot bind counts all of its plans as invalid
    (validation reports them as bad-arguments verdicts).
    """
    count = 0
    for problem in assets.problems:
        for plan in assets.plans.get(problem.name, []):
            if not validate_plan(gen, problem, plan).valid:
                count += 1
    return count


def build_pool(kind: str, gen: Domain, assets: FeedbackAssets, cfg: PlannerConfig) -> list[FeedbackMessage]:
    """The feedback pool for the pipeline's active kinds; plan messages
    precede landmark messages in combined pipelines."""
    plan_msgs: list[FeedbackMessage] = []
    landmark_msgs: list[FeedbackMessage] = []
    if "V" in kind:
        plan_msgs = plan_feedback_pool(gen, assets.problems, assets.plans)
    if "L" in kind:
        landmark_msgs = landmark_feedback_pool(gen, assets.problems, assets.landmarks, cfg)
    if "V" in kind and "L" in kind:
        return combined_pool(plan_msgs, landmark_msgs)
    return plan_msgs or landmark_msgs


def _parse_refined_domain(content: str) -> Domain:
    return parse_domain(extract_pddl_block(content))


def _node_line(node: SearchNode) -> str:
    h = "-" if node.invalid_plans is None else str(node.invalid_plans)
    f = "-" if node.priority is None else f"{node.priority:g}"
    parent = "-" if node.parent is None else str(node.parent)
    kind = node.feedback.kind if node.feedback else "-"
    return f"{node.id} {parent} {node.depth} {h} {f} {node.status} {kind}"


def render_tree(tree: list[SearchNode]) -> str:
    """One line per node: id, parent, depth, invalid plans, priority,
    status, feedback kind."""
    return "\n".join(_node_line(n) for n in tree) + "\n"


def run_no_feedback(domain: Domain, history: History, assets: FeedbackAssets) -> RunResult:
    """Evaluate the constructed domain as-is: a single root node."""
    h = invalid_plan_count(domain, assets)
    root = SearchNode(
        id=0, domain=domain, history=history, parent=None, depth=0,
        invalid_plans=h, priority=float(h), status="goal" if h == 0 else "open",
    )
    return RunResult(final_domain=domain, tree=[root], termination="no_feedback", llm_calls=0, chosen_node=0)


def run_random_walk(
    domain: Domain, history: History, cfg: PipelineConfig, assets: FeedbackAssets, backend
) -> RunResult:
    """Apply one random feedback message per iteration until the pool is
    empty or the call budget is spent; unparseable revisions keep the
    previous domain."""
    if cfg.kind not in RANDOM_WALK_PIPELINES:
        raise ValueError(f"{cfg.kind} is not a random-walk pipeline")
    rng = random.Random(cfg.seed)
    counting = _CountingBackend(backend)
    root = SearchNode(
        id=0, domain=domain, history=history, parent=None, depth=0,
        invalid_plans=invalid_plan_count(domain, assets),
        priority=None, status="expanded",
    )
    tree = [root]
    current = root
    budget = cfg.budget

    while True:
        pool = build_pool(cfg.kind, current.domain, assets, cfg.planner)
        if not pool:
            current.status = "goal"
            termination = "no_feedback"
            break
        if budget <= 0:
            termination = "budget"
            break
        message = select_feedback(pool, "random_single", rng=rng)[0]
        attempt_history = current.history.append(user(message.rendered))
        try:
            outcome = syntax_repair_loop(
                counting, attempt_history, _parse_refined_domain, min(cfg.syntax_retries, budget)
            )
        except BackendError:
            termination = "failure"
            break
        budget -= outcome.attempts
        if outcome.value is None:
            tree.append(
                SearchNode(
                    id=len(tree), domain=None, history=outcome.history, parent=current.id,
                    depth=current.depth + 1, invalid_plans=None, priority=None,
                    feedback=message, status="discarded",
                )
            )
            continue
        child = SearchNode(
            id=len(tree), domain=outcome.value, history=outcome.history, parent=current.id,
            depth=current.depth + 1, invalid_plans=invalid_plan_count(outcome.value, assets),
            priority=None, feedback=message, status="expanded",
        )
        tree.append(child)
        current = child

    return RunResult(
        final_domain=current.domain, tree=tree, termination=termination,
        llm_calls=counting.calls, chosen_node=current.id,
    )


def run_search(
    domain: Domain, history: History, cfg: PipelineConfig, assets: FeedbackAssets, backend
) -> RunResult:
    """Best-first search over feedback space.

    Open nodes are ordered by (priority, invalid plans, insertion). A node
    whose pool is empty is a goal; a child with zero invalid feedback
    plans ends the run at creation. The budget caps node expansions; on
    exhaustion the best node by (invalid plans, depth, insertion) wins.
    """
    if cfg.kind not in SEARCH_PIPELINES:
        raise ValueError(f"{cfg.kind} is not a search pipeline")
    counting = _CountingBackend(backend)

    def make_node(dom, hist, parent, depth, feedback, status="open") -> SearchNode:
        h = invalid_plan_count(dom, assets) if dom is not None else None
        priority = depth + cfg.weight * h if h is not None else None
        node = SearchNode(
            id=len(tree), domain=dom, history=hist, parent=parent, depth=depth,
            invalid_plans=h, priority=priority, feedback=feedback, status=status,
        )
        tree.append(node)
        return node

    def finish(chosen: SearchNode, termination: str) -> RunResult:
        if "L" in cfg.kind:
            leftovers = landmark_feedback_pool(chosen.domain, assets.problems, assets.landmarks, cfg.planner)
            if leftovers:
                logger.info(
                    "search ended with %d unhit landmark(s) on node %d", len(leftovers), chosen.id
                )
        return RunResult(
            final_domain=chosen.domain, tree=tree, termination=termination,
            llm_calls=counting.calls, chosen_node=chosen.id,
        )

    tree: list[SearchNode] = []
    root = make_node(domain, history, None, 0, None)
    if root.invalid_plans == 0:
        root.status = "goal"
        return finish(root, "goal")

    open_heap: list[tuple[float, int, int]] = []
    heapq.heappush(open_heap, (root.priority, root.invalid_plans, root.id))
    expansions = 0

    while open_heap and expansions < cfg.budget:
        _, _, node_id = heapq.heappop(open_heap)
        node = tree[node_id]
        if node.status != "open":
            continue
        pool = build_pool(cfg.kind, node.domain, assets, cfg.planner)
        if not pool:
            node.status = "goal"
            return finish(node, "goal")
        node.status = "expanded"
        expansions += 1
        for message in select_feedback(pool, "first_n", n=min(cfg.child_cap, len(pool))):
            child_history = node.history.append(user(message.rendered))
            try:
                outcome = syntax_repair_loop(
                    counting, child_history, _parse_refined_domain, cfg.syntax_retries
                )
            except BackendError:
                make_node(None, child_history, node.id, node.depth + 1, message, status="discarded")
                continue
            if outcome.value is None:
                make_node(None, outcome.history, node.id, node.depth + 1, message, status="discarded")
                continue
            child = make_node(outcome.value, outcome.history, node.id, node.depth + 1, message)
            if child.invalid_plans == 0:
                child.status = "goal"
                return finish(child, "goal")
            heapq.heappush(open_heap, (child.priority, child.invalid_plans, child.id))

    candidates = [n for n in tree if n.domain is not None]
    chosen = min(candidates, key=lambda n: (n.invalid_plans, n.depth, n.id))
    return finish(chosen, "budget")


def run_pipeline(
    kind_cfg: PipelineConfig,
    domain: Domain,
    history: History,
    assets: FeedbackAssets,
    backend=None,
) -> RunResult:
    """Dispatch on the pipeline kind."""
    if kind_cfg.kind == "N":
        return run_no_feedback(domain, history, assets)
    if kind_cfg.kind in RANDOM_WALK_PIPELINES:
        return run_random_walk(domain, history, kind_cfg, assets, backend)
    return run_search(domain, history, kind_cfg, assets, backend)
