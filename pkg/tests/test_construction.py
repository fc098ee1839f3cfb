from __future__ import annotations


import pytest

from pddlforge.backends import MutationBackend, ScriptedBackend, parse_defect_spec
from pddlforge.construction import (
    CARRY_FORWARD_HEADER,
    ConstructionError,
    DomainDescription,
    action_name_contract,
    build_initial_domain,
    initial_history,
)
from pddlforge.core import check_domain_wellformed, domains_structurally_equal

from .conftest import DATASET, fixture_text, mutate


def blocks_description() -> DomainDescription:
    return DomainDescription.from_json((DATASET / "blocks" / "description.json").read_text())


def scripted_blocks_backend() -> ScriptedBackend:
    return ScriptedBackend.from_script(fixture_text("blocks_construction_script.txt"))


def test_description_document_shape():
    desc = blocks_description()
    assert list(desc.actions) == ["pick-up", "put-down", "stack", "unstack"]
    assert set(desc.predicates) == {"on", "ontable", "clear", "handempty", "holding"}
    with pytest.raises(ValueError):
        DomainDescription(overall={}, predicates={}, actions={})
    with pytest.raises(ValueError):
        DomainDescription(overall={"florid": "x"}, predicates={}, actions={"a": {"simple": "t"}})


def test_initial_history_shape():
    history = initial_history()
    roles = [m.role for m in history.messages]
    assert roles == ["system", "user", "assistant", "user", "assistant"]
    assert history.violations() == []


def test_scripted_construction_rebuilds_reference_domain(blocks):
    desc = blocks_description()
    result = build_initial_domain(desc, "simple", scripted_blocks_backend(), domain_name="blocks")
    assert check_domain_wellformed(result.domain) == []
    assert domains_structurally_equal(result.domain, blocks)
    assert action_name_contract(desc, result)
    assert result.per_action_attempts == {"pick-up": 1, "put-down": 1, "stack": 1, "unstack": 1}
    assert result.predicate_glossary["on"].startswith("block ?x sits")
    assert result.type_glossary["block"]


def test_construction_transcript_grows_monotonically():
    desc = blocks_description()
    backend = scripted_blocks_backend()
    result = build_initial_domain(desc, "detailed", backend, domain_name="blocks")
    prefix = initial_history().messages
    assert result.transcript.messages[: len(prefix)] == prefix
    # one (user, assistant) pair per action, no repairs needed
    assert len(result.transcript.messages) == len(prefix) + 2 * len(desc.actions)


def test_prompts_carry_forward_predicates():
    desc = blocks_description()
    backend = scripted_blocks_backend()
    result = build_initial_domain(desc, "simple", backend, domain_name="blocks")
    context_len = len(initial_history().messages)
    user_prompts = [
        m.content for m in result.transcript.messages[context_len:] if m.role == "user"
    ]
    action_prompts = [p for p in user_prompts if "Write the PDDL action" in p]
    assert "Domain description:" in action_prompts[0]
    assert CARRY_FORWARD_HEADER not in action_prompts[0]
    for later in action_prompts[1:]:
        assert CARRY_FORWARD_HEADER in later
        assert "(clear ?x - block)" in later
        assert "Types defined so far: block" in later


def test_single_action_description():
    desc = DomainDescription(
        overall={"simple": "One lamp."},
        predicates={},
        actions={"glow": {"simple": "make it glow"}},
    )
    response = (
        "```pddl\n(:action glow\n  :parameters (?l - lamp)\n"
        "  :precondition (and (dark ?l))\n  :effect (and (lit ?l) (not (dark ?l)))\n)\n```\n"
        "```predicates\n(dark ?l - lamp): off\n(lit ?l - lamp): on\n```\n"
        "```types\nlamp: a lamp\n```"
    )
    result = build_initial_domain(desc, "simple", ScriptedBackend([response]))
    assert [a.name for a in result.domain.actions] == ["glow"]
    assert result.per_action_attempts == {"glow": 1}


def test_wrong_action_name_triggers_repair():
    desc = DomainDescription(
        overall={}, predicates={}, actions={"glow": {"simple": "make it glow"}}
    )
    wrong = (
        "```pddl\n(:action shine\n  :parameters ()\n  :precondition (and)\n  :effect (and)\n)\n```\n"
        "```predicates\n```\n```types\n```"
    )
    right = wrong.replace("shine", "glow")
    result = build_initial_domain(desc, "simple", ScriptedBackend([wrong, right]))
    assert result.per_action_attempts["glow"] == 2


def test_arity_conflict_fails_construction():
    desc = DomainDescription(
        overall={},
        predicates={},
        actions={"a1": {"simple": "first"}, "a2": {"simple": "second"}},
    )
    first = (
        "```pddl\n(:action a1\n  :parameters (?x - t ?y - t)\n"
        "  :precondition (and)\n  :effect (and (on ?x ?y))\n)\n```\n"
        "```predicates\n(on ?x - t ?y - t): two-place\n```\n```types\nt: thing\n```"
    )
    second = (
        "```pddl\n(:action a2\n  :parameters (?x - t ?y - t ?z - t)\n"
        "  :precondition (and)\n  :effect (and (on ?x ?y ?z))\n)\n```\n"
        "```predicates\n(on ?x - t ?y - t ?z - t): three-place\n```\n```types\n```"
    )
    with pytest.raises(ConstructionError) as err:
        build_initial_domain(desc, "simple", ScriptedBackend([first, second]))
    assert "arity conflict" in str(err.value)


def test_retry_exhaustion_fails_with_transcript():
    desc = DomainDescription(overall={}, predicates={}, actions={"go": {"simple": "go"}})
    backend = ScriptedBackend(["junk"] * 5)
    with pytest.raises(ConstructionError) as err:
        build_initial_domain(desc, "simple", backend, retry_limit=5)
    assert len(err.value.errors) == 5
    replies = [m for m in err.value.transcript.messages if m.content == "junk"]
    assert len(replies) == 5


def test_undeclared_predicate_is_repairable():
    desc = DomainDescription(overall={}, predicates={}, actions={"go": {"simple": "go"}})
    missing_decl = (
        "```pddl\n(:action go\n  :parameters (?x - t)\n"
        "  :precondition (and (ready ?x))\n  :effect (and)\n)\n```\n"
        "```predicates\n```\n```types\nt: thing\n```"
    )
    fixed = missing_decl.replace(
        "```predicates\n```", "```predicates\n(ready ?x - t): ready to go\n```"
    )
    result = build_initial_domain(desc, "simple", ScriptedBackend([missing_decl, fixed]))
    assert result.per_action_attempts["go"] == 2
    repair = [m for m in result.transcript.messages if "Parser error" in m.content]
    assert len(repair) == 1 and "undeclared predicate ready" in repair[0].content


def test_duplicate_identical_predicate_merges_silently():
    desc = DomainDescription(
        overall={}, predicates={}, actions={"a1": {"simple": "x"}, "a2": {"simple": "y"}}
    )
    r1 = (
        "```pddl\n(:action a1\n  :parameters (?x - t)\n  :precondition (and)\n"
        "  :effect (and (p ?x))\n)\n```\n```predicates\n(p ?x - t): pred\n```\n```types\nt: thing\n```"
    )
    r2 = (
        "```pddl\n(:action a2\n  :parameters (?x - t)\n  :precondition (and (p ?x))\n"
        "  :effect (and)\n)\n```\n```predicates\n(p ?x - t): pred again\n```\n```types\n```"
    )
    result = build_initial_domain(desc, "simple", ScriptedBackend([r1, r2]))
    assert len(result.domain.predicates) == 1
    assert result.predicate_glossary["p"] == "pred"


def test_mutation_backend_constructs_defective_domain(blocks):
    desc = blocks_description()
    defects = parse_defect_spec("remove-add stack (on ?x ?y)")
    backend = MutationBackend(blocks, defects, repair_probability=1.0, seed=5)
    result = build_initial_domain(desc, "simple", backend, domain_name="blocks")
    assert action_name_contract(desc, result)
    assert check_domain_wellformed(result.domain) == []
    assert domains_structurally_equal(result.domain, mutate(blocks, "remove-add stack (on ?x ?y)"))


def test_action_name_contract_detects_mismatch(blocks):
    desc = blocks_description()
    result = build_initial_domain(desc, "simple", scripted_blocks_backend(), domain_name="blocks")
    from dataclasses import replace

    missing = replace(result, domain=replace(result.domain, actions=result.domain.actions[:-1]))
    assert not action_name_contract(desc, missing)
    extra_desc = DomainDescription(
        overall={}, predicates={}, actions={**dict(desc.actions), "fly": {"simple": "fly"}}
    )
    assert not action_name_contract(extra_desc, result)
