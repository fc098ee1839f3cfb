"""In-memory typed STRIPS domains and problems, with well-formedness checks.

Values are immutable after construction and safe to share across threads.
Identifiers are case-insensitive on input; constructors expect them already
lowercased (the parser in :mod:`pddlforge.text` canonicalizes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

ROOT_TYPE = "object"


@dataclass(frozen=True, order=True)
class Atom:
    """A predicate applied to arguments, lifted (``?x``) or ground (``a``)."""

    pred: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.pred})"
        return f"({self.pred} {' '.join(self.args)})"

    @property
    def is_ground(self) -> bool:
        return all(not a.startswith("?") for a in self.args)


@dataclass(frozen=True, order=True)
class PlanStep:
    """A grounded action reference: name plus argument objects."""

    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.name})"
        return f"({self.name} {' '.join(self.args)})"


Plan = tuple[PlanStep, ...]


@dataclass(frozen=True)
class TypeHierarchy:
    """A tree of type names rooted at the implicit "object" type.

    ``parent`` omits types whose parent is "object".
    """

    names: frozenset[str] = frozenset()
    parent: Mapping[str, str] = field(default_factory=dict)

    def parent_of(self, t: str) -> Optional[str]:
        if t == ROOT_TYPE:
            return None
        return self.parent.get(t, ROOT_TYPE)

    def declares(self, t: str) -> bool:
        return t == ROOT_TYPE or t in self.names


def is_subtype(hierarchy: TypeHierarchy, t1: str, t2: str) -> bool:
    """True iff t1 equals t2 or t2 is an ancestor of t1 (everything <= object)."""
    for t in (t1, t2):
        if not hierarchy.declares(t):
            raise ValueError(f"undeclared type: {t}")
    seen = set()
    cur: Optional[str] = t1
    while cur is not None:
        if cur == t2:
            return True
        if cur in seen:  # defensive; well-formed hierarchies are acyclic
            return False
        seen.add(cur)
        cur = hierarchy.parent_of(cur)
    return False


@dataclass(frozen=True)
class PredicateDecl:
    """A lifted predicate signature: name plus typed parameter list."""

    name: str
    params: tuple[tuple[str, str], ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)

    def __str__(self) -> str:
        parts = [self.name]
        for var, typ in self.params:
            parts.append(f"{var} - {typ}")
        return f"({' '.join(parts)})"


@dataclass(frozen=True)
class ActionSchema:
    """A lifted action: typed parameters and precondition/add/delete atom sets."""

    name: str
    params: tuple[tuple[str, str], ...] = ()
    pre: frozenset[Atom] = frozenset()
    add: frozenset[Atom] = frozenset()
    delete: frozenset[Atom] = frozenset()


@dataclass(frozen=True)
class Domain:
    """A typed STRIPS domain: type tree, predicate signatures, action schemas."""

    name: str
    hierarchy: TypeHierarchy = TypeHierarchy()
    predicates: tuple[PredicateDecl, ...] = ()
    actions: tuple[ActionSchema, ...] = ()

    def predicate(self, name: str) -> Optional[PredicateDecl]:
        for p in self.predicates:
            if p.name == name:
                return p
        return None

    def action(self, name: str) -> Optional[ActionSchema]:
        for a in self.actions:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class Problem:
    """Objects, initial state, and a conjunctive positive goal, bound by name."""

    name: str
    domain_name: str
    objects: Mapping[str, str] = field(default_factory=dict)
    init: frozenset[Atom] = frozenset()
    goal: frozenset[Atom] = frozenset()


@dataclass(frozen=True)
class Diagnostic:
    """A well-formedness violation: the offending element and the broken rule."""

    element: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.element}: {self.message} [{self.rule}]"


class RebindError(Exception):
    """Raised when a problem cannot be re-bound to a new domain."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


def _hierarchy_diagnostics(h: TypeHierarchy) -> list[Diagnostic]:
    out = []
    for child, parent in h.parent.items():
        if child not in h.names:
            out.append(Diagnostic(child, "undeclared-type", f"parent entry for undeclared type {child}"))
        if parent != ROOT_TYPE and parent not in h.names:
            out.append(Diagnostic(child, "undeclared-type", f"parent type {parent} of {child} is undeclared"))
    # Tree order: walking up from every type must terminate at the root.
    for t in h.names:
        seen = set()
        cur: Optional[str] = t
        while cur is not None and cur != ROOT_TYPE:
            if cur in seen:
                out.append(Diagnostic(t, "type-cycle", f"type {t} participates in a parent cycle"))
                break
            seen.add(cur)
            cur = h.parent.get(cur, ROOT_TYPE)
    return out


def _atom_diagnostics(
    domain: Domain, atom: Atom, scope: str, var_types: Mapping[str, str]
) -> list[Diagnostic]:
    out = []
    decl = domain.predicate(atom.pred)
    if decl is None:
        out.append(Diagnostic(scope, "undeclared-predicate", f"predicate {atom.pred} is not declared"))
        return out
    if len(atom.args) != decl.arity:
        out.append(
            Diagnostic(
                scope,
                "arity-mismatch",
                f"predicate {atom.pred} declared with arity {decl.arity}, used with {len(atom.args)}",
            )
        )
        return out
    for arg, (_, want) in zip(atom.args, decl.params):
        if arg.startswith("?"):
            if arg not in var_types:
                out.append(Diagnostic(scope, "undeclared-variable", f"variable {arg} is not a parameter"))
            elif not is_subtype(domain.hierarchy, var_types[arg], want):
                out.append(
                    Diagnostic(
                        scope,
                        "type-mismatch",
                        f"argument {arg} of {atom.pred} has type {var_types[arg]}, expected {want}",
                    )
                )
    return out


def check_domain_wellformed(domain: Domain) -> list[Diagnostic]:
    """All invariant violations in the domain; empty list iff well-formed."""
    out = _hierarchy_diagnostics(domain.hierarchy)

    seen_preds: dict[str, int] = {}
    for p in domain.predicates:
        if p.name in seen_preds:
            out.append(Diagnostic(p.name, "duplicate-predicate", f"predicate {p.name} declared twice"))
        seen_preds[p.name] = p.arity
        vars_seen = set()
        for var, typ in p.params:
            if var in vars_seen:
                out.append(Diagnostic(p.name, "duplicate-variable", f"variable {var} repeats in {p.name}"))
            vars_seen.add(var)
            if not domain.hierarchy.declares(typ):
                out.append(Diagnostic(p.name, "undeclared-type", f"predicate {p.name} uses undeclared type {typ}"))

    seen_actions = set()
    for a in domain.actions:
        scope = f"action {a.name}"
        if a.name in seen_actions:
            out.append(Diagnostic(a.name, "duplicate-action", f"action {a.name} declared twice"))
        seen_actions.add(a.name)
        var_types: dict[str, str] = {}
        for var, typ in a.params:
            if var in var_types:
                out.append(Diagnostic(scope, "duplicate-variable", f"parameter {var} repeats in {a.name}"))
            var_types[var] = typ
            if not domain.hierarchy.declares(typ):
                out.append(Diagnostic(scope, "undeclared-type", f"action {a.name} uses undeclared type {typ}"))
        overlap = a.add & a.delete
        for atom in sorted(overlap):
            out.append(Diagnostic(scope, "conflicting-effect", f"{atom} appears as both add and delete effect"))
        for atom in sorted(a.pre | a.add | a.delete):
            out.extend(_atom_diagnostics(domain, atom, scope, var_types))
    return out


def check_problem(problem: Problem, domain: Domain) -> list[Diagnostic]:
    """Violations of the problem against a concrete domain (predicates, types)."""
    out = []
    for obj, typ in problem.objects.items():
        if not domain.hierarchy.declares(typ):
            out.append(Diagnostic(obj, "undeclared-type", f"object {obj} has undeclared type {typ}"))
    for scope, atoms in (("init", problem.init), ("goal", problem.goal)):
        for atom in sorted(atoms):
            decl = domain.predicate(atom.pred)
            if decl is None:
                out.append(
                    Diagnostic(scope, "missing-predicate", f"missing predicate {atom.pred}/{len(atom.args)}")
                )
                continue
            if len(atom.args) != decl.arity:
                out.append(
                    Diagnostic(
                        scope,
                        "arity-mismatch",
                        f"predicate {atom.pred} declared with arity {decl.arity}, used with {len(atom.args)}",
                    )
                )
            for arg in atom.args:
                if arg not in problem.objects:
                    out.append(Diagnostic(scope, "unknown-object", f"object {arg} in {atom} is not declared"))
    return out


def rebind_problem(problem: Problem, new_domain: Domain) -> Problem:
    """Bind a problem to a different domain.

    Succeeds iff every init/goal predicate exists in the new domain with
    matching arity. Object types missing from the new domain fall back to
    "object". Raises :class:`RebindError` with one diagnostic per defect.
    """
    diags = []
    for scope, atoms in (("init", problem.init), ("goal", problem.goal)):
        for atom in sorted(atoms):
            decl = new_domain.predicate(atom.pred)
            if decl is None:
                diags.append(
                    Diagnostic(scope, "missing-predicate", f"missing predicate {atom.pred}/{len(atom.args)}")
                )
            elif len(atom.args) != decl.arity:
                diags.append(
                    Diagnostic(
                        scope,
                        "arity-mismatch",
                        f"predicate {atom.pred} has arity {decl.arity} in the new domain, used with {len(atom.args)}",
                    )
                )
    if diags:
        raise RebindError(diags)
    objects = {
        obj: (typ if new_domain.hierarchy.declares(typ) else ROOT_TYPE)
        for obj, typ in problem.objects.items()
    }
    return Problem(
        name=problem.name,
        domain_name=new_domain.name,
        objects=objects,
        init=problem.init,
        goal=problem.goal,
    )


def domains_structurally_equal(d1: Domain, d2: Domain) -> bool:
    """Equality up to element order and domain name."""
    if frozenset(d1.hierarchy.names) != frozenset(d2.hierarchy.names):
        return False
    parents1 = {t: d1.hierarchy.parent_of(t) for t in d1.hierarchy.names}
    parents2 = {t: d2.hierarchy.parent_of(t) for t in d2.hierarchy.names}
    if parents1 != parents2:
        return False
    if {p.name: p.params for p in d1.predicates} != {p.name: p.params for p in d2.predicates}:
        return False
    key1 = {a.name: (a.params, a.pre, a.add, a.delete) for a in d1.actions}
    key2 = {a.name: (a.params, a.pre, a.add, a.delete) for a in d2.actions}
    return key1 == key2


def make_hierarchy(types: Iterable[tuple[str, Optional[str]]]) -> TypeHierarchy:
    """Build a hierarchy from (type, parent-or-None) pairs."""
    names = set()
    parent = {}
    for t, p in types:
        names.add(t)
        if p is not None and p != ROOT_TYPE:
            parent[t] = p
    return TypeHierarchy(names=frozenset(names), parent=parent)
