from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pddlforge.core import Atom, PlanStep
from pddlforge.semantics import (
    GroundAction,
    InapplicableAction,
    VerdictKind,
    applicable,
    apply_action,
    goal_satisfied,
    ground_actions,
    validate_plan,
)
from pddlforge.text import parse_plan

from .conftest import mutate, pool_problem
from .oracles import naive_validate


def A(pred, *args):
    return Atom(pred, tuple(args))


def test_ground_count_two_blocks(blocks, two_blocks):
    grounded = ground_actions(blocks, two_blocks)
    assert len(grounded) == 12  # 2 pick-up + 2 put-down + 4 stack + 4 unstack
    assert len(ground_actions(blocks, two_blocks, distinct_args=True)) == 8
    names = [g.step for g in grounded]
    assert names == sorted(names)


def test_ground_empty_domain(blocks, two_blocks):
    from dataclasses import replace

    empty = replace(blocks, actions=())
    assert ground_actions(empty, two_blocks) == []


def test_ground_unsatisfiable_parameter_type(courier):
    problem = pool_problem("courier", "c01")
    from dataclasses import replace

    no_parcels = replace(
        problem, objects={o: t for o, t in problem.objects.items() if t != "parcel"}
    )
    grounded = ground_actions(courier, no_parcels)
    assert all(g.name == "walk" for g in grounded)


def test_self_stack_effects_are_canonical(blocks, two_blocks):
    grounded = {g.step: g for g in ground_actions(blocks, two_blocks)}
    self_stack = grounded[PlanStep("stack", ("a", "a"))]
    assert not (self_stack.add & self_stack.delete)
    assert A("clear", "a") in self_stack.add


def test_applicable_in_init(blocks, two_blocks):
    grounded = {g.step: g for g in ground_actions(blocks, two_blocks)}
    assert applicable(two_blocks.init, grounded[PlanStep("pick-up", ("a",))])
    hand_busy = two_blocks.init - {A("handempty")}
    assert not applicable(hand_busy, grounded[PlanStep("pick-up", ("a",))])
    empty_pre = GroundAction("noop", (), pre=frozenset())
    assert applicable(frozenset(), empty_pre)


def test_apply_pick_up(blocks, two_blocks):
    grounded = {g.step: g for g in ground_actions(blocks, two_blocks)}
    before = two_blocks.init
    after = apply_action(before, grounded[PlanStep("pick-up", ("a",))])
    assert A("holding", "a") in after
    for gone in (A("ontable", "a"), A("clear", "a"), A("handempty")):
        assert gone not in after
    assert before == two_blocks.init  # input untouched


def test_apply_noop_and_absent_delete():
    state = frozenset({A("p")})
    noop = GroundAction("noop", ())
    assert apply_action(state, noop) == state
    dell = GroundAction("del", (), delete=frozenset({A("q")}))
    assert apply_action(state, dell) == state


def test_apply_requires_applicability():
    action = GroundAction("a", (), pre=frozenset({A("p")}))
    with pytest.raises(InapplicableAction) as err:
        apply_action(frozenset(), action)
    assert A("p") in err.value.missing


@given(st.integers(min_value=0, max_value=10_000))
def test_apply_reverse_restores_state(seed):
    rng = random.Random(seed)
    atoms = [A(f"p{i}") for i in range(6)]
    state = frozenset(a for a in atoms if rng.random() < 0.5)
    add = frozenset(a for a in atoms if rng.random() < 0.3)
    delete = frozenset(a for a in atoms if a not in add and rng.random() < 0.3)
    action = GroundAction("f", (), add=add, delete=delete)
    reverse = GroundAction("r", (), add=delete, delete=add)
    if delete <= state and not (add & state):
        assert apply_action(apply_action(state, action), reverse) == state


def test_validate_plan_valid(blocks, two_blocks):
    verdict = validate_plan(blocks, two_blocks, parse_plan("(pick-up a)\n(stack a b)"))
    assert verdict.kind is VerdictKind.VALID
    assert verdict.valid


def test_validate_plan_precondition_failure(blocks, two_blocks):
    verdict = validate_plan(blocks, two_blocks, parse_plan("(stack a b)"))
    assert verdict.kind is VerdictKind.PRECONDITION_FAILURE
    assert verdict.step == 0
    assert verdict.missing == frozenset({A("holding", "a")})
    assert "unsatisfied precondition" in verdict.rendered
    assert "(stack a b)" in verdict.rendered and "(holding a)" in verdict.rendered


def test_validate_empty_plan_goal_failure(blocks, two_blocks):
    verdict = validate_plan(blocks, two_blocks, ())
    assert verdict.kind is VerdictKind.GOAL_FAILURE
    assert verdict.step is None
    assert verdict.missing == frozenset({A("on", "a", "b")})
    assert "(on a b)" in verdict.rendered


def test_validate_unknown_action(blocks, two_blocks):
    verdict = validate_plan(blocks, two_blocks, parse_plan("(fly a)"))
    assert verdict.kind is VerdictKind.UNKNOWN_ACTION
    assert verdict.step == 0
    assert "step 0" in verdict.rendered


def test_validate_bad_arity(blocks, two_blocks):
    verdict = validate_plan(blocks, two_blocks, parse_plan("(stack a)"))
    assert verdict.kind is VerdictKind.BAD_ARGUMENTS
    assert verdict.step == 0


def test_validate_rebind_failure_reports_diagnostics(blocks, two_blocks):
    from dataclasses import replace

    gen = replace(blocks, predicates=tuple(p for p in blocks.predicates if p.name != "handempty"))
    verdict = validate_plan(gen, two_blocks, parse_plan("(pick-up a)"))
    assert verdict.kind is VerdictKind.BAD_ARGUMENTS
    assert not verdict.valid
    assert "handempty/0" in verdict.rendered


def test_goal_satisfied(blocks, two_blocks):
    assert goal_satisfied(two_blocks.init, frozenset())
    assert goal_satisfied(two_blocks.init, two_blocks.init)
    assert not goal_satisfied(two_blocks.init, two_blocks.goal)


def _random_plan(rng, steps):
    length = rng.randrange(0, 7)
    return tuple(rng.choice(steps) for _ in range(length))


def test_validator_agrees_with_oracle_on_random_plans(blocks):
    problems = [pool_problem("blocks", s) for s in ("p01", "p03", "p04")]
    mutant = mutate(blocks, "remove-add stack (on ?x ?y)")
    rng = random.Random(7)
    for problem in problems:
        steps = [g.step for g in ground_actions(blocks, problem)]
        steps.append(PlanStep("bogus", ("a",)))  # exercise unknown actions
        steps.append(PlanStep("stack", ("a",)))  # and bad arity
        for domain in (blocks, mutant):
            for _ in range(150):
                plan = _random_plan(rng, steps)
                verdict = validate_plan(domain, problem, plan)
                kind, step, missing = naive_validate(domain, problem, plan)
                assert verdict.kind.value == kind
                assert verdict.step == step
                assert verdict.missing == missing
