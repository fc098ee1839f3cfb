from __future__ import annotations

from pathlib import Path

import pytest

from pddlforge.backends import Defect, apply_defect, parse_defect_spec
from pddlforge.core import Domain, Problem
from pddlforge.text import parse_domain, parse_problem

FIXTURES = Path(__file__).parent / "fixtures"
DATASET = Path(__file__).resolve().parent.parent / "dataset"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_domain(name: str) -> Domain:
    return parse_domain(fixture_text(name))


def fixture_problem(name: str) -> Problem:
    return parse_problem(fixture_text(name))


def dataset_domain(name: str) -> Domain:
    return parse_domain((DATASET / name / "domain.pddl").read_text(encoding="utf-8"))


def pool_problem(domain: str, stem: str) -> Problem:
    return parse_problem((DATASET / domain / "pool" / f"{stem}.pddl").read_text(encoding="utf-8"))


def mutate(domain: Domain, spec_line: str) -> Domain:
    out = domain
    for defect in parse_defect_spec(spec_line):
        out = apply_defect(out, defect)
    return out


@pytest.fixture(scope="session")
def blocks() -> Domain:
    return dataset_domain("blocks")


@pytest.fixture(scope="session")
def gripper() -> Domain:
    return dataset_domain("gripper")


@pytest.fixture(scope="session")
def courier() -> Domain:
    return dataset_domain("courier")


@pytest.fixture(scope="session")
def switches() -> Domain:
    return fixture_domain("switches.pddl")


@pytest.fixture(scope="session")
def dials() -> Domain:
    return fixture_domain("dials.pddl")


@pytest.fixture()
def two_blocks() -> Problem:
    return pool_problem("blocks", "p01")
