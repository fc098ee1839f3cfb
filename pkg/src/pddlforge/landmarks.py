"""Fact landmarks by backchaining, achiever-set action landmarks, and the
.lmk file format.

Extraction is sound: every returned fact holds at some state of every
valid plan, and every returned action set intersects every valid plan.
Goal atoms seed the fixpoint; a fact not initially true propagates the
intersection of its achievers' preconditions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import Atom, Domain, Plan, PlanStep, Problem
from .planner import DEFAULT_HORIZON, solvable
from .semantics import ground_actions
from .text import SourceError


@dataclass(frozen=True)
class DisjunctiveActionLandmark:
    """A set of ground actions, one of which occurs in every valid plan."""

    actions: frozenset[PlanStep]
    origin: Optional[Atom] = None

    def render_actions(self) -> str:
        return ", ".join(str(a) for a in sorted(self.actions))


class UnsolvableProblem(Exception):
    pass


def fact_landmarks(domain: Domain, problem: Problem, horizon: int = DEFAULT_HORIZON) -> frozenset[Atom]:
    """Ground atoms that hold at some state of every valid plan.

    Requires the problem to be solvable within ``horizon``; termination is
    bounded by the number of ground atoms.
    """
    if not solvable(domain, problem, horizon):
        raise UnsolvableProblem(f"no landmarks for unsolvable problem {problem.name}")
    actions = ground_actions(domain, problem)
    found: set[Atom] = set()
    queue = sorted(problem.goal)
    while queue:
        fact = queue.pop(0)
        if fact in found:
            continue
        found.add(fact)
        if fact in problem.init:
            continue
        achiever_pres = [a.pre for a in actions if fact in a.add]
        if not achiever_pres:
            # Unreachable for a solvable problem; the solvability gate above
            # makes this a hard internal error.
            raise UnsolvableProblem(f"landmark {fact} of {problem.name} has no achiever")
        common = frozenset.intersection(*achiever_pres) if achiever_pres else frozenset()
        for g in sorted(common):
            if g not in found:
                queue.append(g)
    return frozenset(found)


def achiever_landmarks(
    domain: Domain, problem: Problem, facts: frozenset[Atom]
) -> list[DisjunctiveActionLandmark]:
    """One landmark per fact not initially true: all ground actions adding it.

    Sorted by origin fact for deterministic feedback enumeration.
    """
    actions = ground_actions(domain, problem)
    out = []
    for fact in sorted(facts):
        if fact in problem.init:
            continue
        achievers = frozenset(a.step for a in actions if fact in a.add)
        if not achievers:
            raise UnsolvableProblem(f"landmark fact {fact} has no achiever in {problem.name}")
        out.append(DisjunctiveActionLandmark(actions=achievers, origin=fact))
    return out


def problem_landmarks(
    domain: Domain, problem: Problem, horizon: int = DEFAULT_HORIZON
) -> list[DisjunctiveActionLandmark]:
    """Fact extraction and achiever derivation in one call."""
    return achiever_landmarks(domain, problem, fact_landmarks(domain, problem, horizon))


def landmark_hit(lm: DisjunctiveActionLandmark, plans: list[Plan]) -> bool:
    """True iff some plan contains some action of the landmark (exact match)."""
    return any(step in lm.actions for plan in plans for step in plan)


_STEP_RE = re.compile(r"\(\s*([^\s()]+)((?:\s+[^\s()]+)*)\s*\)")


def _parse_step(text: str, lineno: int) -> PlanStep:
    m = _STEP_RE.fullmatch(text.strip())
    if m is None:
        raise SourceError(lineno, 1, f"malformed action: {text.strip()!r}", text.strip())
    return PlanStep(m.group(1).lower(), tuple(a.lower() for a in m.group(2).split()))


def read_landmarks(text: str) -> list[DisjunctiveActionLandmark]:
    """Parse the .lmk format: actions joined by " | ", optional "; origin:"."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        body, origin = raw, None
        if ";" in raw:
            body, tail = raw.split(";", 1)
            tail = tail.strip()
            if not tail.startswith("origin:"):
                raise SourceError(lineno, 1, f"expected '; origin: (...)', got {tail!r}", raw)
            origin_text = tail[len("origin:"):].strip()
            m = _STEP_RE.fullmatch(origin_text)
            if m is None:
                raise SourceError(lineno, 1, f"malformed origin fact: {origin_text!r}", raw)
            origin = Atom(m.group(1).lower(), tuple(a.lower() for a in m.group(2).split()))
        parts = [p for p in body.split("|")]
        actions = frozenset(_parse_step(p, lineno) for p in parts)
        if not actions:
            raise SourceError(lineno, 1, "empty landmark line", raw)
        out.append(DisjunctiveActionLandmark(actions=actions, origin=origin))
    return out


def write_landmarks(landmarks: list[DisjunctiveActionLandmark]) -> str:
    lines = []
    for lm in landmarks:
        line = " | ".join(str(a) for a in sorted(lm.actions))
        if lm.origin is not None:
            line += f" ; origin: {lm.origin}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")
