from __future__ import annotations

from dataclasses import replace

import pytest

from pddlforge.core import Atom, PlanStep
from pddlforge.landmarks import (
    DisjunctiveActionLandmark,
    UnsolvableProblem,
    achiever_landmarks,
    fact_landmarks,
    landmark_hit,
    problem_landmarks,
    read_landmarks,
    write_landmarks,
)
from pddlforge.semantics import ground_actions
from pddlforge.text import SourceError

from .conftest import fixture_problem, pool_problem
from .oracles import brute_force_plans


def A(pred, *args):
    return Atom(pred, tuple(args))


def S(name, *args):
    return PlanStep(name, tuple(args))


def test_blocks_fact_landmarks(blocks, two_blocks):
    facts = fact_landmarks(blocks, two_blocks)
    assert A("on", "a", "b") in facts
    assert A("holding", "a") in facts


def test_goal_in_init_yields_goal_facts_only(blocks, two_blocks):
    trivial = replace(two_blocks, goal=frozenset({A("handempty"), A("clear", "a")}))
    facts = fact_landmarks(blocks, trivial)
    assert facts == trivial.goal
    assert achiever_landmarks(blocks, trivial, facts) == []


def test_mixed_goal_only_nontrivial_facts_get_action_landmarks(blocks, two_blocks):
    mixed = replace(two_blocks, goal=frozenset({A("handempty"), A("on", "a", "b")}))
    facts = fact_landmarks(blocks, mixed)
    assert A("handempty") in facts and A("on", "a", "b") in facts
    lms = achiever_landmarks(blocks, mixed, facts)
    origins = {lm.origin for lm in lms}
    assert A("handempty") not in origins
    assert A("on", "a", "b") in origins


def test_unsolvable_problem_rejected(blocks):
    with pytest.raises(UnsolvableProblem):
        fact_landmarks(blocks, pool_problem("blocks", "p07"))


def test_achievers_unique_stack(blocks, two_blocks):
    lms = {lm.origin: lm for lm in problem_landmarks(blocks, two_blocks)}
    assert lms[A("on", "a", "b")].actions == frozenset({S("stack", "a", "b")})
    holding = lms[A("holding", "a")].actions
    assert S("pick-up", "a") in holding
    assert S("unstack", "a", "b") in holding


def test_landmarks_sorted_by_origin(blocks):
    lms = problem_landmarks(blocks, pool_problem("blocks", "p03"))
    origins = [lm.origin for lm in lms]
    assert origins == sorted(origins)


def test_achiever_actions_exist_in_grounding(blocks, two_blocks):
    grounded = {g.step for g in ground_actions(blocks, two_blocks)}
    for lm in problem_landmarks(blocks, two_blocks):
        assert lm.actions <= grounded


def test_landmark_hit():
    lm = DisjunctiveActionLandmark(frozenset({S("stack", "a", "b")}))
    assert landmark_hit(lm, [(S("pick-up", "a"), S("stack", "a", "b"))])
    assert not landmark_hit(lm, [])
    both = DisjunctiveActionLandmark(frozenset({S("stack", "a", "b"), S("stack", "b", "a")}))
    assert landmark_hit(both, [(S("stack", "b", "a"),)])


def test_every_landmark_hit_by_every_plan(blocks, gripper, switches, dials):
    cases = [
        (blocks, pool_problem("blocks", "p01"), 4),
        (blocks, pool_problem("blocks", "p02"), 6),
        (gripper, pool_problem("gripper", "g01"), 5),
        (switches, fixture_problem("switches_p1.pddl"), 4),
        (dials, fixture_problem("dials_p1.pddl"), 7),
    ]
    for domain, problem, horizon in cases:
        plans, explored = brute_force_plans(domain, problem, horizon)
        assert plans and explored <= 10**5
        for lm in problem_landmarks(domain, problem):
            for plan in plans:
                assert landmark_hit(lm, [plan]), (lm.render_actions(), plan)


def test_extraction_terminates_within_atom_bound(blocks):
    problem = pool_problem("blocks", "p03")
    facts = fact_landmarks(blocks, problem)
    # 3 blocks: 9 on + 3 ontable + 3 clear + 3 holding + 1 handempty atoms
    assert len(facts) <= 19


def test_landmark_file_round_trip():
    text = "(pick-up a) | (unstack a b) ; origin: (holding a)\n(stack a b)\n"
    lms = read_landmarks(text)
    assert len(lms) == 2
    assert lms[0].origin == A("holding", "a")
    assert lms[0].actions == frozenset({S("pick-up", "a"), S("unstack", "a", "b")})
    assert lms[1].origin is None
    assert write_landmarks(lms) == text


def test_write_read_inverse(blocks, two_blocks):
    lms = problem_landmarks(blocks, two_blocks)
    text = write_landmarks(lms)
    back = read_landmarks(text)
    assert [(lm.actions, lm.origin) for lm in back] == [(lm.actions, lm.origin) for lm in lms]
    assert write_landmarks(back) == text


def test_malformed_landmark_line():
    with pytest.raises(SourceError) as err:
        read_landmarks("(ok a)\nnot-parenthesized\n")
    assert err.value.line == 2
