"""Read and write the typed-STRIPS PDDL fragment.

Covers domains, problems, plan files, landmark files live in
:mod:`pddlforge.landmarks`. Errors carry 1-based line/column positions so
they can be spliced into repair prompts verbatim. Identifiers are
lowercased on input; printing is canonical (sorted atoms, two-space
indentation) so textual diffs between refinement iterations stay small.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .core import (
    ROOT_TYPE,
    ActionSchema,
    Atom,
    Domain,
    Plan,
    PlanStep,
    PredicateDecl,
    Problem,
    TypeHierarchy,
    check_domain_wellformed,
)

SUPPORTED_REQUIREMENTS = (":strips", ":typing")


class SourceError(Exception):
    """A parse or well-formedness failure at a position in the input text."""

    def __init__(self, line: int, column: int, message: str, snippet: str = ""):
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet
        super().__init__(str(self))

    def __str__(self) -> str:
        base = f"line {self.line}, column {self.column}: {self.message}"
        if self.snippet:
            base += f"\n  {self.snippet}"
        return base


@dataclass(frozen=True)
class _Sym:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class _List:
    items: tuple[Union["_List", _Sym], ...]
    line: int
    col: int


_Node = Union[_List, _Sym]


def _line_snippet(text: str, line: int) -> str:
    lines = text.splitlines()
    if 1 <= line <= len(lines):
        return lines[line - 1].strip()
    return ""


class _Reader:
    """S-expression reader with position tracking and ';' comments."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, c: str) -> None:
        self.pos += 1
        if c == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1

    def _skip_space(self) -> None:
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == ";":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance(self.text[self.pos])
            elif c in " \t\r\n":
                self._advance(c)
            else:
                return

    def at_end(self) -> bool:
        self._skip_space()
        return self.pos >= len(self.text)

    def error(self, message: str, line: Optional[int] = None, col: Optional[int] = None) -> SourceError:
        line = self.line if line is None else line
        col = self.col if col is None else col
        return SourceError(line, col, message, _line_snippet(self.text, line))

    def read(self) -> _Node:
        self._skip_space()
        if self.pos >= len(self.text):
            raise self.error("unexpected end of input")
        c = self.text[self.pos]
        if c == "(":
            line, col = self.line, self.col
            self._advance(c)
            items = []
            while True:
                self._skip_space()
                if self.pos >= len(self.text):
                    raise self.error("missing closing parenthesis")
                if self.text[self.pos] == ")":
                    self._advance(")")
                    return _List(tuple(items), line, col)
                items.append(self.read())
        if c == ")":
            raise self.error("unexpected closing parenthesis")
        line, col = self.line, self.col
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in " \t\r\n();":
            self._advance(self.text[self.pos])
        return _Sym(self.text[start:self.pos].lower(), line, col)


def _expect_list(node: _Node, what: str) -> _List:
    if not isinstance(node, _List):
        raise SourceError(node.line, node.col, f"expected {what}, got atom '{node.text}'")
    return node


def _expect_sym(node: _Node, what: str) -> _Sym:
    if not isinstance(node, _Sym):
        raise SourceError(node.line, node.col, f"expected {what}, got a list")
    return node


def _head(node: _List) -> str:
    if node.items and isinstance(node.items[0], _Sym):
        return node.items[0].text
    return ""


def _parse_typed_names(items: tuple[_Node, ...], owner: str) -> list[tuple[str, str]]:
    """Parse a PDDL typed list: ``a b - t c`` pairs names with types.

    Names with no trailing ``- type`` default to "object".
    """
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        sym = _expect_sym(items[i], f"name in {owner}")
        if sym.text == "-":
            if not pending:
                raise SourceError(sym.line, sym.col, f"dangling '-' in {owner}")
            if i + 1 >= len(items):
                raise SourceError(sym.line, sym.col, f"missing type after '-' in {owner}")
            typ = _expect_sym(items[i + 1], f"type in {owner}").text
            out.extend((n, typ) for n in pending)
            pending = []
            i += 2
        else:
            pending.append(sym.text)
            i += 1
    out.extend((n, ROOT_TYPE) for n in pending)
    return out


def _parse_atom(node: _Node, owner: str) -> Atom:
    lst = _expect_list(node, f"atom in {owner}")
    if not lst.items:
        raise SourceError(lst.line, lst.col, f"empty atom in {owner}")
    pred = _expect_sym(lst.items[0], "predicate name")
    if pred.text in ("and", "or", "not", "=", "forall", "exists", "when"):
        raise SourceError(pred.line, pred.col, f"unsupported construct '{pred.text}' in {owner}")
    args = tuple(_expect_sym(a, "argument").text for a in lst.items[1:])
    return Atom(pred.text, args)


def _parse_conjunction(node: _Node, owner: str, allow_not: bool) -> tuple[set[Atom], set[Atom]]:
    """Parse an atom, (not atom), or (and ...) into (positive, negative) sets."""
    pos: set[Atom] = set()
    neg: set[Atom] = set()

    def one(n: _Node) -> None:
        lst = _expect_list(n, f"formula in {owner}")
        head = _head(lst)
        if head == "not":
            if not allow_not:
                raise SourceError(lst.line, lst.col, f"negative literals are not allowed in {owner}")
            if len(lst.items) != 2:
                raise SourceError(lst.line, lst.col, "'not' takes exactly one atom")
            neg.add(_parse_atom(lst.items[1], owner))
        elif head == "=":
            raise SourceError(lst.line, lst.col, f"equality is not allowed in {owner}")
        elif head in ("or", "forall", "exists", "when", "imply"):
            raise SourceError(lst.line, lst.col, f"unsupported construct '{head}' in {owner}")
        else:
            pos.add(_parse_atom(lst, owner))

    lst = _expect_list(node, f"formula in {owner}")
    if _head(lst) == "and":
        for item in lst.items[1:]:
            one(item)
    else:
        one(lst)
    return pos, neg


def _parse_action(lst: _List) -> ActionSchema:
    if len(lst.items) < 2:
        raise SourceError(lst.line, lst.col, "action is missing a name")
    name = _expect_sym(lst.items[1], "action name").text
    params: tuple[tuple[str, str], ...] = ()
    pre: set[Atom] = set()
    add: set[Atom] = set()
    delete: set[Atom] = set()
    i = 2
    seen = set()
    while i < len(lst.items):
        key = _expect_sym(lst.items[i], "action section keyword")
        if key.text not in (":parameters", ":precondition", ":effect"):
            raise SourceError(key.line, key.col, f"unknown action section {key.text}")
        if key.text in seen:
            raise SourceError(key.line, key.col, f"duplicate action section {key.text}")
        seen.add(key.text)
        if i + 1 >= len(lst.items):
            raise SourceError(key.line, key.col, f"missing body for {key.text}")
        body = lst.items[i + 1]
        if key.text == ":parameters":
            plist = _expect_list(body, ":parameters list")
            pairs = _parse_typed_names(plist.items, f"parameters of {name}")
            for var, _ in pairs:
                if not var.startswith("?"):
                    raise SourceError(plist.line, plist.col, f"parameter {var} of {name} must start with '?'")
            params = tuple(pairs)
        elif key.text == ":precondition":
            pos, _ = _parse_conjunction(body, f"precondition of {name}", allow_not=False)
            pre = pos
        else:
            pos, neg = _parse_conjunction(body, f"effect of {name}", allow_not=True)
            add, delete = pos, neg
        i += 2
    return ActionSchema(
        name=name, params=params, pre=frozenset(pre), add=frozenset(add), delete=frozenset(delete)
    )


def parse_action(text: str) -> ActionSchema:
    """Parse a single bare ``(:action ...)`` form."""
    reader = _Reader(text)
    node = reader.read()
    lst = _expect_list(node, "an action form")
    if _head(lst) != ":action":
        raise SourceError(lst.line, lst.col, "expected an (:action ...) form")
    if not reader.at_end():
        raise reader.error("unexpected content after the action form")
    action = _parse_action(lst)
    for atom in sorted(action.pre | action.add | action.delete):
        declared = {v for v, _ in action.params}
        for arg in atom.args:
            if arg.startswith("?") and arg not in declared:
                raise SourceError(lst.line, lst.col, f"undeclared variable {arg} in action {action.name}")
    return action


def parse_domain(text: str) -> Domain:
    """Parse a domain and check it; raises SourceError on any defect."""
    reader = _Reader(text)
    root = _expect_list(reader.read(), "a (define ...) form")
    if not reader.at_end():
        raise reader.error("unexpected content after the domain definition")
    if _head(root) != "define":
        raise SourceError(root.line, root.col, "expected (define (domain ...) ...)")
    if len(root.items) < 2:
        raise SourceError(root.line, root.col, "missing (domain NAME)")
    header = _expect_list(root.items[1], "(domain NAME)")
    if _head(header) != "domain" or len(header.items) != 2:
        raise SourceError(header.line, header.col, "expected (domain NAME)")
    name = _expect_sym(header.items[1], "domain name").text

    hierarchy = TypeHierarchy()
    predicates: list[PredicateDecl] = []
    actions: list[ActionSchema] = []
    positions: dict[str, tuple[int, int]] = {}
    seen_sections = set()

    for section in root.items[2:]:
        lst = _expect_list(section, "a domain section")
        head = _head(lst)
        if head == ":requirements":
            for req in lst.items[1:]:
                sym = _expect_sym(req, "requirement")
                if sym.text not in SUPPORTED_REQUIREMENTS:
                    raise SourceError(sym.line, sym.col, f"unsupported requirement {sym.text}")
        elif head == ":types":
            if ":types" in seen_sections:
                raise SourceError(lst.line, lst.col, "duplicate :types section")
            seen_sections.add(":types")
            pairs = _parse_typed_names(lst.items[1:], ":types")
            names = set()
            parent = {}
            for t, p in pairs:
                names.add(t)
                if p != ROOT_TYPE:
                    names.add(p)
                    parent[t] = p
                positions.setdefault(t, (lst.line, lst.col))
            hierarchy = TypeHierarchy(names=frozenset(names), parent=parent)
        elif head == ":predicates":
            if ":predicates" in seen_sections:
                raise SourceError(lst.line, lst.col, "duplicate :predicates section")
            seen_sections.add(":predicates")
            for pnode in lst.items[1:]:
                plist = _expect_list(pnode, "a predicate declaration")
                if not plist.items:
                    raise SourceError(plist.line, plist.col, "empty predicate declaration")
                pname = _expect_sym(plist.items[0], "predicate name").text
                pairs = _parse_typed_names(plist.items[1:], f"predicate {pname}")
                for var, _ in pairs:
                    if not var.startswith("?"):
                        raise SourceError(
                            plist.line, plist.col, f"predicate {pname} parameter {var} must start with '?'"
                        )
                predicates.append(PredicateDecl(pname, tuple(pairs)))
                positions[pname] = (plist.line, plist.col)
        elif head == ":action":
            action = _parse_action(lst)
            actions.append(action)
            positions[action.name] = (lst.line, lst.col)
            positions[f"action {action.name}"] = (lst.line, lst.col)
        else:
            raise SourceError(lst.line, lst.col, f"unknown section {head or '()'} in domain")

    domain = Domain(name=name, hierarchy=hierarchy, predicates=tuple(predicates), actions=tuple(actions))
    diags = check_domain_wellformed(domain)
    if diags:
        first = diags[0]
        line, col = positions.get(first.element, (root.line, root.col))
        raise SourceError(line, col, str(first), _line_snippet(text, line))
    return domain


def parse_problem(text: str) -> Problem:
    """Structural parse of a problem; predicate existence is checked at rebind."""
    reader = _Reader(text)
    root = _expect_list(reader.read(), "a (define ...) form")
    if not reader.at_end():
        raise reader.error("unexpected content after the problem definition")
    if _head(root) != "define":
        raise SourceError(root.line, root.col, "expected (define (problem ...) ...)")
    if len(root.items) < 2:
        raise SourceError(root.line, root.col, "missing (problem NAME)")
    header = _expect_list(root.items[1], "(problem NAME)")
    if _head(header) != "problem" or len(header.items) != 2:
        raise SourceError(header.line, header.col, "expected (problem NAME)")
    name = _expect_sym(header.items[1], "problem name").text

    domain_name = ""
    objects: dict[str, str] = {}
    init: set[Atom] = set()
    goal: Optional[set[Atom]] = None

    for section in root.items[2:]:
        lst = _expect_list(section, "a problem section")
        head = _head(lst)
        if head == ":domain":
            if len(lst.items) != 2:
                raise SourceError(lst.line, lst.col, "expected (:domain NAME)")
            domain_name = _expect_sym(lst.items[1], "domain name").text
        elif head == ":objects":
            for obj, typ in _parse_typed_names(lst.items[1:], ":objects"):
                if obj.startswith("?"):
                    raise SourceError(lst.line, lst.col, f"object {obj} must not start with '?'")
                if obj in objects:
                    raise SourceError(lst.line, lst.col, f"object {obj} declared twice")
                objects[obj] = typ
        elif head == ":init":
            for anode in lst.items[1:]:
                atom = _parse_atom(anode, ":init")
                if not atom.is_ground:
                    raise SourceError(lst.line, lst.col, f"init atom {atom} is not ground")
                init.add(atom)
        elif head == ":goal":
            if len(lst.items) != 2:
                raise SourceError(lst.line, lst.col, "expected (:goal FORMULA)")
            pos, _ = _parse_conjunction(lst.items[1], ":goal", allow_not=False)
            for atom in pos:
                if not atom.is_ground:
                    raise SourceError(lst.line, lst.col, f"goal atom {atom} is not ground")
            goal = pos
        else:
            raise SourceError(lst.line, lst.col, f"unknown section {head or '()'} in problem")

    if not domain_name:
        raise SourceError(root.line, root.col, "missing (:domain NAME) section")
    if not goal:
        raise SourceError(root.line, root.col, "empty goal")
    return Problem(name=name, domain_name=domain_name, objects=objects, init=frozenset(init), goal=frozenset(goal))


def parse_plan(text: str) -> Plan:
    """One grounded action per non-comment line: ``(name arg1 arg2 ...)``."""
    steps: list[PlanStep] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\(\s*([^\s()]+)((?:\s+[^\s()]+)*)\s*\)", line)
        if m is None:
            raise SourceError(lineno, 1, f"malformed plan step: {line!r}", raw.strip())
        name = m.group(1).lower()
        args = tuple(a.lower() for a in m.group(2).split())
        steps.append(PlanStep(name, args))
    return tuple(steps)


# ---------------------------------------------------------------------------
# Canonical printing


def _typed_groups(pairs: list[tuple[str, str]]) -> str:
    """Group names by type: explicit parents first (sorted), object group bare last."""
    by_type: dict[str, list[str]] = {}
    for n, t in pairs:
        by_type.setdefault(t, []).append(n)
    chunks = []
    for t in sorted(by_type):
        if t == ROOT_TYPE:
            continue
        chunks.append(f"{' '.join(sorted(by_type[t]))} - {t}")
    if ROOT_TYPE in by_type:
        chunks.append(" ".join(sorted(by_type[ROOT_TYPE])))
    return " ".join(chunks)


def _param_text(params: tuple[tuple[str, str], ...]) -> str:
    return " ".join(f"{v} - {t}" for v, t in params)


def _action_lines(a: ActionSchema, indent: str) -> list[str]:
    pre = " ".join(str(x) for x in sorted(a.pre))
    effects = [str(x) for x in sorted(a.add)] + [f"(not {x})" for x in sorted(a.delete)]
    eff = " ".join(effects)
    return [
        f"{indent}(:action {a.name}",
        f"{indent}  :parameters ({_param_text(a.params)})",
        f"{indent}  :precondition (and{' ' + pre if pre else ''})",
        f"{indent}  :effect (and{' ' + eff if eff else ''})",
        f"{indent})",
    ]


def print_action(action: ActionSchema) -> str:
    """Canonical text of a bare action form."""
    return "\n".join(_action_lines(action, "")) + "\n"


def print_domain(domain: Domain) -> str:
    """Canonical text: fixed section order, sorted atoms, two-space indent."""
    lines = [f"(define (domain {domain.name})"]
    lines.append("  (:requirements :strips :typing)")
    if domain.hierarchy.names:
        pairs = [(t, domain.hierarchy.parent_of(t) or ROOT_TYPE) for t in domain.hierarchy.names]
        lines.append(f"  (:types {_typed_groups(pairs)})")
    if domain.predicates:
        lines.append("  (:predicates")
        for p in sorted(domain.predicates, key=lambda p: p.name):
            body = p.name if not p.params else f"{p.name} {_param_text(p.params)}"
            lines.append(f"    ({body})")
        lines.append("  )")
    for a in domain.actions:
        lines.extend(_action_lines(a, "  "))
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(problem: Problem) -> str:
    lines = [f"(define (problem {problem.name})"]
    lines.append(f"  (:domain {problem.domain_name})")
    if problem.objects:
        lines.append(f"  (:objects {_typed_groups(sorted(problem.objects.items()))})")
    init = " ".join(str(a) for a in sorted(problem.init))
    lines.append(f"  (:init{' ' + init if init else ''})")
    goal = " ".join(str(a) for a in sorted(problem.goal))
    lines.append(f"  (:goal (and{' ' + goal if goal else ''}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_plan(plan: Plan) -> str:
    return "\n".join(str(step) for step in plan)


# ---------------------------------------------------------------------------
# Extracting PDDL from model responses

_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)


def fenced_blocks(response: str) -> list[tuple[str, str]]:
    """All fenced code blocks as (label, content) pairs; label may be ''."""
    return [(m.group(1).strip().lower(), m.group(2)) for m in _FENCE_RE.finditer(response)]


def _balanced_sexpr(text: str, start: int) -> Optional[str]:
    depth = 0
    i = start
    while i < len(text):
        c = text[i]
        if c == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
        i += 1
    return None


def extract_pddl_block(response: str) -> str:
    """The first fenced block holding a ``(define`` or ``(:action`` form.

    Falls back to the first balanced bare form when the response has no
    fences. Raises SourceError when neither exists.
    """
    for _, content in fenced_blocks(response):
        if "(define" in content or "(:action" in content:
            return content.strip()
    starts = [i for i in (response.find("(define"), response.find("(:action")) if i >= 0]
    if starts:
        block = _balanced_sexpr(response, min(starts))
        if block is not None:
            return block
        line = response.count("\n", 0, min(starts)) + 1
        raise SourceError(line, 1, "unbalanced PDDL form in response")
    raise SourceError(1, 1, "no PDDL block in response")
