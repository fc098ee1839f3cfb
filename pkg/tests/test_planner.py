from __future__ import annotations

from dataclasses import replace

import pytest

from pddlforge.core import Atom, PlanStep
from pddlforge.planner import PlannerConfig, enumerate_plans, solvable
from pddlforge.semantics import validate_plan
from pddlforge.text import print_plan

from .conftest import fixture_problem, pool_problem
from .oracles import brute_force_plans


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(k=0)
    with pytest.raises(ValueError):
        PlannerConfig(node_limit=0)


def test_first_plan_two_blocks(blocks, two_blocks):
    result = enumerate_plans(blocks, two_blocks, PlannerConfig(k=3, max_plan_length=4))
    assert result.plans[0] == (PlanStep("pick-up", ("a",)), PlanStep("stack", ("a", "b")))
    assert not result.truncated


def test_goal_in_init_yields_empty_plan(blocks, two_blocks):
    trivial = replace(two_blocks, goal=frozenset({Atom("handempty")}))
    result = enumerate_plans(blocks, trivial, PlannerConfig(k=5, max_plan_length=3))
    assert result.plans[0] == ()


def test_unreachable_goal(blocks):
    unsolvable = pool_problem("blocks", "p07")  # (on a a)
    result = enumerate_plans(blocks, unsolvable, PlannerConfig(k=2, max_plan_length=6))
    assert result.none_found
    assert not result.truncated


def test_rebind_failure_reported_as_diagnostics(blocks, two_blocks):
    gen = replace(blocks, predicates=tuple(p for p in blocks.predicates if p.name != "on"))
    result = enumerate_plans(gen, two_blocks, PlannerConfig(k=2))
    assert result.none_found
    assert result.diagnostics


def test_all_returned_plans_validate(blocks):
    for stem in ("p01", "p02", "p03"):
        problem = pool_problem("blocks", stem)
        result = enumerate_plans(blocks, problem, PlannerConfig(k=20))
        assert result.plans
        for plan in result.plans:
            assert validate_plan(blocks, problem, plan).valid


def test_order_is_total_and_deterministic(blocks, two_blocks):
    cfg = PlannerConfig(k=25, max_plan_length=4)
    first = enumerate_plans(blocks, two_blocks, cfg)
    second = enumerate_plans(blocks, two_blocks, cfg)
    rendered = [print_plan(p) for p in first.plans]
    assert rendered == [print_plan(p) for p in second.plans]
    keys = [(len(p), p) for p in first.plans]
    assert keys == sorted(keys)
    assert len(set(rendered)) == len(rendered)


def test_matches_brute_force_small(blocks, gripper, switches):
    cases = [
        (blocks, pool_problem("blocks", "p01"), 4),
        (blocks, pool_problem("blocks", "p02"), 5),
        (gripper, pool_problem("gripper", "g01"), 4),
        (switches, fixture_problem("switches_p1.pddl"), 4),
    ]
    for domain, problem, horizon in cases:
        expected, explored = brute_force_plans(domain, problem, horizon)
        assert explored <= 10**5
        result = enumerate_plans(domain, problem, PlannerConfig(k=10, max_plan_length=horizon))
        assert result.plans == expected[:10]


def test_adaptive_horizon_is_twice_shortest(blocks, two_blocks):
    result = enumerate_plans(blocks, two_blocks, PlannerConfig(k=10**6))
    # Shortest plan has 2 steps, so nothing longer than 4 may appear, and
    # every valid plan up to 4 must appear.
    assert max(len(p) for p in result.plans) == 4
    expected, _ = brute_force_plans(blocks, two_blocks, 4)
    assert result.plans == expected


def test_node_limit_truncates(blocks):
    problem = pool_problem("blocks", "p03")
    result = enumerate_plans(blocks, problem, PlannerConfig(k=10**6, max_plan_length=6, node_limit=50))
    assert result.truncated


def test_solvable(blocks, two_blocks):
    assert solvable(blocks, two_blocks, 4)
    assert not solvable(blocks, pool_problem("blocks", "p07"), 6)
    assert not solvable(blocks, two_blocks, 0)
    trivial = replace(two_blocks, goal=frozenset({Atom("handempty")}))
    assert solvable(blocks, trivial, 0)
