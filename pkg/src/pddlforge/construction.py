"""Build the first candidate domain from a structured description.

One backend query per described action, in description order, each guarded
by the syntax repair loop. Every response must restate the action inside a
fenced PDDL block and declare any new predicates/types in labeled fenced
blocks with one-line glosses; declarations accumulate across actions and
are replayed into later prompts. Assembly merges everything into a single
checked domain.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional

from . import assets
from .backends import History, Message, RepairOutcome, syntax_repair_loop, system, user
from .core import (
    ActionSchema,
    Atom,
    Domain,
    PredicateDecl,
    TypeHierarchy,
    check_domain_wellformed,
)
from .text import SourceError, extract_pddl_block, fenced_blocks, parse_action

DESCRIPTION_CLASSES = ("simple", "detailed")

ACTION_REQUEST_TEMPLATE = 'Write the PDDL action for "{name}".\nDescription: {text}'
CARRY_FORWARD_HEADER = (
    "Predicates defined so far (prefer these and only create new predicates when necessary):"
)


class ConstructionError(Exception):
    """Construction aborted; carries the transcript accumulated so far."""

    def __init__(self, message: str, transcript: History, errors: Optional[list[SourceError]] = None):
        self.transcript = transcript
        self.errors = errors or []
        super().__init__(message)


@dataclass(frozen=True)
class DomainDescription:
    """The structured natural-language description document.

    ``actions`` is ordered; its order is the generation order. Every entry
    maps description classes ("simple"/"detailed") to text.
    """

    overall: Mapping[str, str]
    predicates: Mapping[str, Mapping[str, str]]
    actions: Mapping[str, Mapping[str, str]]

    def __post_init__(self) -> None:
        if not self.actions:
            raise ValueError("description declares no actions")
        for section in (self.overall,):
            for cls in section:
                if cls not in DESCRIPTION_CLASSES:
                    raise ValueError(f"unknown description class {cls!r}")
        for name, entry in list(self.predicates.items()) + list(self.actions.items()):
            for cls in entry:
                if cls not in DESCRIPTION_CLASSES:
                    raise ValueError(f"unknown description class {cls!r} under {name!r}")

    @classmethod
    def from_json(cls, text: str) -> "DomainDescription":
        data = json.loads(text)
        return cls(
            overall=data.get("overall", {}),
            predicates=data.get("predicates", {}),
            actions=data["actions"],
        )


@dataclass
class ConstructionResult:
    domain: Domain
    transcript: History
    predicate_glossary: dict[str, str] = field(default_factory=dict)
    type_glossary: dict[str, str] = field(default_factory=dict)
    per_action_attempts: dict[str, int] = field(default_factory=dict)


def action_name_contract(desc: DomainDescription, result: ConstructionResult) -> bool:
    """True iff the produced action names equal the described action names."""
    return {a.name for a in result.domain.actions} == set(desc.actions.keys())


_GLOSS_LINE_RE = re.compile(r"^(?P<decl>[^:]+?)\s*:\s*(?P<gloss>.*\S)\s*$")


def _parse_predicate_gloss_block(content: str) -> list[tuple[PredicateDecl, str]]:
    out = []
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        m = _GLOSS_LINE_RE.match(line)
        if m is None:
            raise SourceError(lineno, 1, f"malformed predicate declaration line: {line!r}", line)
        decl_text = m.group("decl").strip()
        inner = decl_text.strip()
        if not (inner.startswith("(") and inner.endswith(")")):
            raise SourceError(lineno, 1, f"predicate declaration must be parenthesized: {line!r}", line)
        tokens = inner[1:-1].split()
        if not tokens:
            raise SourceError(lineno, 1, "empty predicate declaration", line)
        name = tokens[0].lower()
        params: list[tuple[str, str]] = []
        i = 1
        while i < len(tokens):
            var = tokens[i].lower()
            if not var.startswith("?"):
                raise SourceError(lineno, 1, f"predicate variable {var} must start with '?'", line)
            if i + 1 < len(tokens) and tokens[i + 1] == "-":
                if i + 2 >= len(tokens):
                    raise SourceError(lineno, 1, f"missing type after '-' in {line!r}", line)
                params.append((var, tokens[i + 2].lower()))
                i += 3
            else:
                params.append((var, "object"))
                i += 1
        out.append((PredicateDecl(name, tuple(params)), m.group("gloss").strip()))
    return out


_TYPE_DECL_RE = re.compile(r"^(?P<name>[a-z][a-z0-9_-]*)(\s+-\s+(?P<parent>[a-z][a-z0-9_-]*))?$")


def _parse_type_gloss_block(content: str) -> list[tuple[str, Optional[str], str]]:
    out = []
    for lineno, raw in enumerate(content.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        m = _GLOSS_LINE_RE.match(line)
        if m is None:
            raise SourceError(lineno, 1, f"malformed type declaration line: {line!r}", line)
        decl = _TYPE_DECL_RE.match(m.group("decl").strip().lower())
        if decl is None:
            raise SourceError(lineno, 1, f"malformed type declaration: {line!r}", line)
        out.append((decl.group("name"), decl.group("parent"), m.group("gloss").strip()))
    return out


@dataclass
class _ParsedActionResponse:
    action: ActionSchema
    predicates: list[tuple[PredicateDecl, str]]
    types: list[tuple[str, Optional[str], str]]


class _KnownState:
    """Predicates/types accumulated so far, in first-declaration order."""

    def __init__(self) -> None:
        self.predicates: dict[str, PredicateDecl] = {}
        self.types: dict[str, Optional[str]] = {}
        self.predicate_glossary: dict[str, str] = {}
        self.type_glossary: dict[str, str] = {}


def _check_action_response(
    response: str, expected_name: str, known: _KnownState
) -> _ParsedActionResponse:
    """Extract and validate one action response; SourceError means re-prompt."""
    action = parse_action(extract_pddl_block(response))
    if action.name != expected_name:
        raise SourceError(1, 1, f"expected an action named {expected_name}, got {action.name}")
    labeled = {label: content for label, content in fenced_blocks(response)}
    new_predicates = _parse_predicate_gloss_block(labeled.get("predicates", ""))
    new_types = _parse_type_gloss_block(labeled.get("types", ""))

    visible_preds = dict(known.predicates)
    for decl, _ in new_predicates:
        existing = visible_preds.get(decl.name)
        if existing is not None and existing.params != decl.params:
            if existing.arity != decl.arity:
                # Hard construction failure per the arity-conflict rule;
                # signalled with a non-SourceError so the repair loop exits.
                raise PredicateConflict(decl.name, existing, decl)
            raise SourceError(1, 1, f"predicate {decl.name} redeclared with different parameter types")
        visible_preds[decl.name] = decl
    visible_types = set(known.types) | {n for n, _, _ in new_types} | {"object"}
    for _, parent, _ in new_types:
        if parent is not None:
            visible_types.add(parent)
    for _, typ in action.params:
        if typ not in visible_types:
            raise SourceError(1, 1, f"action {action.name} uses undeclared type {typ}")
    for atom in sorted(action.pre | action.add | action.delete):
        decl = visible_preds.get(atom.pred)
        if decl is None:
            raise SourceError(1, 1, f"action {action.name} uses undeclared predicate {atom.pred}")
        if len(atom.args) != decl.arity:
            raise SourceError(
                1, 1, f"predicate {atom.pred} has arity {decl.arity}, used with {len(atom.args)}"
            )
    return _ParsedActionResponse(action=action, predicates=new_predicates, types=new_types)


class PredicateConflict(Exception):
    def __init__(self, name: str, first: PredicateDecl, second: PredicateDecl):
        self.name = name
        super().__init__(f"arity conflict: predicate {name} declared as {first} and {second}")


def initial_history() -> History:
    messages = [system(assets.system_prompt())]
    for u, a in assets.context_examples():
        messages.append(user(u))
        messages.append(Message("assistant", a))
    return History(tuple(messages))


def _action_prompt(
    desc: DomainDescription,
    description_class: str,
    action_name: str,
    first: bool,
    known: _KnownState,
) -> str:
    parts = []
    if first and description_class in desc.overall:
        parts.append(f"Domain description:\n{desc.overall[description_class]}\n")
    text = desc.actions[action_name].get(description_class, "")
    parts.append(ACTION_REQUEST_TEMPLATE.format(name=action_name, text=text))
    available = {
        name: entry[description_class]
        for name, entry in desc.predicates.items()
        if description_class in entry
    }
    if available:
        lines = [f"- {name}: {available[name]}" for name in sorted(available)]
        parts.append("\nRelevant predicate descriptions:\n" + "\n".join(lines))
    if not first:
        if known.predicates:
            decls = "\n".join(f"  {d}" for d in known.predicates.values())
            parts.append(f"\n{CARRY_FORWARD_HEADER}\n{decls}")
        if known.types:
            parts.append("Types defined so far: " + ", ".join(sorted(known.types)))
    return "\n".join(parts)


def build_initial_domain(
    desc: DomainDescription,
    description_class: str,
    backend,
    retry_limit: int = 5,
    domain_name: str = "generated",
) -> ConstructionResult:
    """Generate one action at a time and assemble the candidate domain.

    Raises :class:`ConstructionError` when any action exhausts its syntax
    retries, when two actions declare one predicate at different arities,
    or when the assembled domain fails the well-formedness check.
    """
    if description_class not in DESCRIPTION_CLASSES:
        raise ValueError(f"unknown description class {description_class!r}")
    history = initial_history()
    known = _KnownState()
    actions: list[ActionSchema] = []
    attempts: dict[str, int] = {}

    for index, action_name in enumerate(desc.actions):
        prompt = _action_prompt(desc, description_class, action_name, index == 0, known)
        history = history.append(user(prompt))

        def parse_fn(content: str, _name=action_name) -> _ParsedActionResponse:
            return _check_action_response(content, _name, known)

        try:
            outcome: RepairOutcome = syntax_repair_loop(backend, history, parse_fn, retry_limit)
        except PredicateConflict as e:
            raise ConstructionError(str(e), history) from e
        history = outcome.history
        attempts[action_name] = outcome.attempts
        if outcome.value is None:
            raise ConstructionError(
                f"action {action_name} failed to parse after {retry_limit} attempts",
                history,
                outcome.errors,
            )
        parsed: _ParsedActionResponse = outcome.value
        actions.append(parsed.action)
        for decl, gloss in parsed.predicates:
            known.predicates.setdefault(decl.name, decl)
            known.predicate_glossary.setdefault(decl.name, gloss)
        for name, parent, gloss in parsed.types:
            prior = known.types.get(name)
            if prior is not None and parent is not None and prior != parent:
                raise ConstructionError(f"type {name} redeclared with parent {parent} (was {prior})", history)
            if name not in known.types or parent is not None:
                known.types[name] = parent
            known.type_glossary.setdefault(name, gloss)

    names = set(known.types) | {p for p in known.types.values() if p}
    parent = {t: p for t, p in known.types.items() if p not in (None, "object")}
    domain = Domain(
        name=domain_name,
        hierarchy=TypeHierarchy(names=frozenset(names), parent=parent),
        predicates=tuple(known.predicates.values()),
        actions=tuple(actions),
    )
    diagnostics = check_domain_wellformed(domain)
    if diagnostics:
        raise ConstructionError(
            "assembled domain is ill-formed: " + "; ".join(str(d) for d in diagnostics), history
        )
    return ConstructionResult(
        domain=domain,
        transcript=history,
        predicate_glossary=dict(known.predicate_glossary),
        type_glossary=dict(known.type_glossary),
        per_action_attempts=attempts,
    )
