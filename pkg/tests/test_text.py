from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pddlforge.core import PlanStep
from pddlforge.text import (
    SourceError,
    extract_pddl_block,
    parse_action,
    parse_domain,
    parse_plan,
    parse_problem,
    print_domain,
    print_plan,
    print_problem,
)

from .conftest import DATASET, FIXTURES, dataset_domain, fixture_text


def test_blocks_appendix_text_parses(blocks):
    text = (DATASET / "blocks" / "domain.pddl").read_text()
    domain = parse_domain(text)
    assert {a.name for a in domain.actions} == {"pick-up", "put-down", "stack", "unstack"}


def test_unsupported_requirement():
    with pytest.raises(SourceError) as err:
        parse_domain("(define (domain d) (:requirements :adl))")
    assert "unsupported requirement :adl" in str(err.value)


def test_missing_closing_paren_reports_end_of_input():
    text = (DATASET / "blocks" / "domain.pddl").read_text().rstrip()
    broken = text[:-1]  # drop the final ')'
    with pytest.raises(SourceError) as err:
        parse_domain(broken)
    assert "closing parenthesis" in err.value.message
    assert err.value.line >= broken.count("\n")


def test_negative_precondition_rejected():
    with pytest.raises(SourceError) as err:
        parse_domain(
            "(define (domain d) (:predicates (p))"
            " (:action a :parameters () :precondition (not (p)) :effect (and (p))))"
        )
    assert "negative literals" in err.value.message


def test_equality_rejected():
    with pytest.raises(SourceError):
        parse_domain(
            "(define (domain d) (:types t) (:predicates (p ?x - t))"
            " (:action a :parameters (?x - t ?y - t) :precondition (= ?x ?y) :effect (and (p ?x))))"
        )


def test_identifiers_are_lowercased():
    domain = parse_domain(
        "(define (domain D) (:types T) (:predicates (P ?X - T))"
        " (:action Go :parameters (?X - T) :precondition (and (P ?X)) :effect (and)))"
    )
    assert domain.name == "d"
    assert domain.actions[0].name == "go"
    assert domain.predicates[0].name == "p"


def test_print_domain_is_canonical_and_idempotent(blocks, gripper, courier):
    for domain in (blocks, gripper, courier):
        printed = print_domain(domain)
        reparsed = parse_domain(printed)
        assert print_domain(reparsed) == printed


def test_print_domain_requirements_line(blocks):
    assert "  (:requirements :strips :typing)\n" in print_domain(blocks)


def test_courier_type_hierarchy_round_trips(courier):
    printed = print_domain(courier)
    reparsed = parse_domain(printed)
    assert reparsed.hierarchy.parent_of("agent") == "thing"
    assert reparsed.hierarchy.parent_of("parcel") == "thing"
    assert reparsed.hierarchy.parent_of("place") == "object"


def test_parse_problem_round_trip(two_blocks):
    assert len(two_blocks.objects) == 2
    printed = print_problem(two_blocks)
    reparsed = parse_problem(printed)
    assert reparsed == two_blocks
    assert print_problem(reparsed) == printed


def test_parse_problem_empty_goal():
    with pytest.raises(SourceError) as err:
        parse_problem("(define (problem p) (:domain d) (:objects a) (:init) (:goal (and)))")
    assert "empty goal" in err.value.message


def test_parse_problem_keeps_undeclared_types_for_rebind():
    problem = parse_problem(
        "(define (problem p) (:domain d) (:objects a - widget) (:init (q a)) (:goal (and (q a))))"
    )
    assert problem.objects["a"] == "widget"


def test_parse_plan_basics():
    plan = parse_plan("(pick-up a)\n(stack a b)")
    assert plan == (PlanStep("pick-up", ("a",)), PlanStep("stack", ("a", "b")))
    assert parse_plan("") == ()
    assert parse_plan("; comment only\n\n") == ()


def test_parse_plan_malformed_line_number():
    with pytest.raises(SourceError) as err:
        parse_plan("pick-up a")
    assert err.value.line == 1


def test_print_plan_round_trip():
    plan = (PlanStep("pick-up", ("a",)), PlanStep("stack", ("a", "b")))
    assert parse_plan(print_plan(plan)) == plan
    assert print_plan(()) == ""
    assert print_plan(plan).count("\n") == 1


plan_steps = st.lists(
    st.tuples(
        st.sampled_from(["pick-up", "put-down", "stack", "unstack"]),
        st.lists(st.sampled_from(["a", "b", "c"]), max_size=3),
    ),
    max_size=8,
)


@given(plan_steps)
def test_plan_round_trip_property(steps):
    plan = tuple(PlanStep(name, tuple(args)) for name, args in steps)
    assert parse_plan(print_plan(plan)) == plan


def test_source_error_str_carries_position():
    err = SourceError(3, 7, "boom", "(bad")
    assert "line 3" in str(err) and "column 7" in str(err)


def test_extract_fenced_block():
    response = "here it is:\n```\n(define (domain d))\n```\nenjoy"
    assert extract_pddl_block(response) == "(define (domain d))"


def test_extract_labeled_fence():
    response = "```pddl\n(:action a\n  :parameters ()\n)\n```"
    assert extract_pddl_block(response).startswith("(:action a")


def test_extract_bare_action_with_prose():
    response = "I think\n(:action pick-up\n :parameters (?x - block)\n) works"
    block = extract_pddl_block(response)
    assert block.startswith("(:action pick-up") and block.endswith(")")


def test_extract_prefers_first_matching_fence():
    response = "```\nnothing here\n```\n```\n(define (domain d))\n```"
    assert "(define" in extract_pddl_block(response)


def test_extract_no_block():
    with pytest.raises(SourceError) as err:
        extract_pddl_block("pure prose, no code")
    assert "no PDDL block" in err.value.message


def test_parse_action_checks_variables():
    with pytest.raises(SourceError) as err:
        parse_action("(:action a :parameters (?x - t) :precondition (and (p ?z)) :effect (and))")
    assert "undeclared variable ?z" in err.value.message


def test_crlf_tolerated():
    text = (DATASET / "blocks" / "domain.pddl").read_text().replace("\n", "\r\n")
    domain = parse_domain(text)
    assert len(domain.actions) == 4


def test_fixture_files_all_parse():
    for path in sorted(FIXTURES.glob("*.pddl")):
        text = fixture_text(path.name)
        if "(domain" in text:
            parse_domain(text)
        else:
            parse_problem(text)
    for domain_dir in sorted(DATASET.iterdir()):
        parse_domain((domain_dir / "domain.pddl").read_text())
        for pool_file in sorted((domain_dir / "pool").glob("*.pddl")):
            parse_problem(pool_file.read_text())
