"""Grounding, applicability, state transition, and plan validation.

The validator mirrors VAL's behavior: simulate from the initial state and
report the first defect with the exact missing atoms, in prose suitable
for splicing into a revision prompt.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .core import (
    ROOT_TYPE,
    ActionSchema,
    Atom,
    Domain,
    Plan,
    PlanStep,
    Problem,
    RebindError,
    is_subtype,
    rebind_problem,
)

State = frozenset[Atom]


@dataclass(frozen=True, order=True)
class GroundAction:
    """A schema instantiated with objects; delete set canonicalized to not
    overlap the add set (delete-then-add transition semantics)."""

    name: str
    args: tuple[str, ...]
    pre: frozenset[Atom] = field(compare=False, default=frozenset())
    add: frozenset[Atom] = field(compare=False, default=frozenset())
    delete: frozenset[Atom] = field(compare=False, default=frozenset())

    @property
    def step(self) -> PlanStep:
        return PlanStep(self.name, self.args)

    def __str__(self) -> str:
        return str(self.step)


class VerdictKind(Enum):
    VALID = "valid"
    PRECONDITION_FAILURE = "precondition-failure"
    GOAL_FAILURE = "goal-failure"
    UNKNOWN_ACTION = "unknown-action"
    BAD_ARGUMENTS = "bad-arguments"


@dataclass(frozen=True)
class Verdict:
    """Outcome of validating one plan, with VAL-style prose in ``rendered``."""

    kind: VerdictKind
    step: Optional[int] = None
    missing: frozenset[Atom] = frozenset()
    rendered: str = ""

    @property
    def valid(self) -> bool:
        return self.kind is VerdictKind.VALID


class InapplicableAction(Exception):
    """Raised by apply_action when preconditions do not hold."""

    def __init__(self, action: GroundAction, missing: frozenset[Atom]):
        self.action = action
        self.missing = missing
        super().__init__(f"{action} is not applicable; missing {sorted(str(a) for a in missing)}")


def _substitute(atom: Atom, binding: dict[str, str]) -> Atom:
    return Atom(atom.pred, tuple(binding.get(a, a) for a in atom.args))


def ground_schema(
    schema: ActionSchema, objects_by_type: dict[str, list[str]], distinct_args: bool
) -> list[GroundAction]:
    pools = []
    for _, typ in schema.params:
        # A parameter type nothing satisfies kills the whole schema.
        pools.append(objects_by_type.get(typ, []))
    out = []
    for combo in itertools.product(*pools):
        if distinct_args and len(set(combo)) != len(combo):
            continue
        binding = {var: obj for (var, _), obj in zip(schema.params, combo)}
        add = frozenset(_substitute(a, binding) for a in schema.add)
        delete = frozenset(_substitute(a, binding) for a in schema.delete) - add
        out.append(
            GroundAction(
                name=schema.name,
                args=tuple(combo),
                pre=frozenset(_substitute(a, binding) for a in schema.pre),
                add=add,
                delete=delete,
            )
        )
    return out


def ground_actions(domain: Domain, problem: Problem, distinct_args: bool = False) -> list[GroundAction]:
    """All type-consistent instantiations, sorted by (name, args).

    The problem must already be rebound to ``domain``; rebind diagnostics
    propagate as :class:`RebindError`.
    """
    problem = rebind_problem(problem, domain)
    objects_by_type: dict[str, list[str]] = {}
    types = set(domain.hierarchy.names) | {ROOT_TYPE}
    for typ in types:
        objects_by_type[typ] = sorted(
            obj for obj, otyp in problem.objects.items()
            if domain.hierarchy.declares(otyp) and is_subtype(domain.hierarchy, otyp, typ)
        )
    out = []
    for schema in domain.actions:
        out.extend(ground_schema(schema, objects_by_type, distinct_args))
    out.sort(key=lambda g: (g.name, g.args))
    return out


def applicable(state: State, action: GroundAction) -> bool:
    return action.pre <= state


def apply_action(state: State, action: GroundAction) -> State:
    """The successor state ``(state - delete) | add``; the input is unchanged."""
    if not applicable(state, action):
        raise InapplicableAction(action, frozenset(action.pre - state))
    return (state - action.delete) | action.add


def goal_satisfied(state: State, goal: frozenset[Atom]) -> bool:
    return goal <= state


def _atoms_text(atoms: frozenset[Atom]) -> str:
    return "\n".join(f"  {a}" for a in sorted(atoms))


def _resolve_step(domain: Domain, problem: Problem, step: PlanStep, index: int) -> GroundAction | Verdict:
    schema = domain.action(step.name)
    if schema is None:
        return Verdict(
            kind=VerdictKind.UNKNOWN_ACTION,
            step=index,
            rendered=(
                f"Plan failed because of unknown action {step} at step {index}: "
                f"the domain declares no action named {step.name}."
            ),
        )
    if len(step.args) != len(schema.params):
        return Verdict(
            kind=VerdictKind.BAD_ARGUMENTS,
            step=index,
            rendered=(
                f"Plan failed because of bad arguments in action {step} at step {index}: "
                f"{step.name} takes {len(schema.params)} arguments, got {len(step.args)}."
            ),
        )
    binding = {}
    for pos, (arg, (var, want)) in enumerate(zip(step.args, schema.params)):
        otyp = problem.objects.get(arg)
        if otyp is None:
            return Verdict(
                kind=VerdictKind.BAD_ARGUMENTS,
                step=index,
                rendered=(
                    f"Plan failed because of bad arguments in action {step} at step {index}: "
                    f"object {arg} is not declared in the problem."
                ),
            )
        if not domain.hierarchy.declares(otyp) or not is_subtype(domain.hierarchy, otyp, want):
            return Verdict(
                kind=VerdictKind.BAD_ARGUMENTS,
                step=index,
                rendered=(
                    f"Plan failed because of bad arguments in action {step} at step {index}: "
                    f"argument {pos + 1} ({arg}) has type {otyp}, expected {want}."
                ),
            )
        binding[var] = arg
    add = frozenset(_substitute(a, binding) for a in schema.add)
    return GroundAction(
        name=step.name,
        args=step.args,
        pre=frozenset(_substitute(a, binding) for a in schema.pre),
        add=add,
        delete=frozenset(_substitute(a, binding) for a in schema.delete) - add,
    )


def validate_plan(domain: Domain, problem: Problem, plan: Plan) -> Verdict:
    """Simulate the plan from the initial state and report the first defect.

    A problem that fails to rebind to the domain yields a BAD_ARGUMENTS
    verdict carrying the rebind diagnostics, so feedback generation can
    treat predicate-name drift like any other invalid plan.
    """
    try:
        bound = rebind_problem(problem, domain)
    except RebindError as e:
        detail = "\n".join(f"  {d.message}" for d in e.diagnostics)
        return Verdict(
            kind=VerdictKind.BAD_ARGUMENTS,
            rendered=(
                "Plan failed because the problem could not be bound to the domain:\n" + detail
            ),
        )
    state: State = bound.init
    for index, step in enumerate(plan):
        resolved = _resolve_step(domain, bound, step, index)
        if isinstance(resolved, Verdict):
            return resolved
        if not applicable(state, resolved):
            missing = frozenset(resolved.pre - state)
            return Verdict(
                kind=VerdictKind.PRECONDITION_FAILURE,
                step=index,
                missing=missing,
                rendered=(
                    f"Plan failed because of unsatisfied precondition in action {step} at step {index}.\n"
                    f"The following preconditions were not satisfied:\n{_atoms_text(missing)}"
                ),
            )
        state = apply_action(state, resolved)
    if not goal_satisfied(state, bound.goal):
        missing = frozenset(bound.goal - state)
        return Verdict(
            kind=VerdictKind.GOAL_FAILURE,
            missing=missing,
            rendered=(
                "Plan executed successfully but the final state does not satisfy the goal.\n"
                f"The following goal conditions were not satisfied:\n{_atoms_text(missing)}"
            ),
        )
    return Verdict(kind=VerdictKind.VALID, rendered="Plan valid.")
