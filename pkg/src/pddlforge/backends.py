"""Generation backends: conversation history, a chat-completions client,
and two deterministic offline mocks.

The scripted backend replays canned responses in order. The mutation
backend impersonates a model that knows a defective version of a target
domain: it answers construction prompts from that domain and, when a
feedback message names a defective action or one of its predicates,
repairs the defect with a configured probability. Mock responses are pure
functions of (seed, configuration, conversation), so reruns are
bit-identical.
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from .core import ActionSchema, Atom, Domain, PredicateDecl
from .text import SourceError, fenced_blocks, parse_domain, print_action, print_domain

SCRIPT_SEPARATOR = "---"

SYNTAX_REPAIR_TEMPLATE = (
    "The PDDL in your previous response could not be used.\n"
    "Parser error at {error}\n"
    "Please resend the complete corrected PDDL. You may not add new requirements."
)

# Fixed template phrases used to recognize feedback messages and locate the
# evidence splice (the VAL output block or the landmark action list).
PLAN_EVIDENCE_PHRASE = "The output of the plan validator VAL is:"
LANDMARK_EVIDENCE_PHRASE = "We expected that the one of the following actions:"
CONSTRUCTION_REQUEST_RE = re.compile(r'Write the PDDL action for "([^"]+)"')


class BackendError(Exception):
    pass


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"bad role: {self.role}")
        if self.role in ("user", "assistant") and not self.content:
            raise ValueError(f"empty {self.role} message")


@dataclass(frozen=True)
class History:
    messages: tuple[Message, ...] = ()

    def append(self, message: Message) -> "History":
        return History(self.messages + (message,))

    def last(self) -> Optional[Message]:
        return self.messages[-1] if self.messages else None

    def violations(self) -> list[str]:
        out = []
        if not self.messages:
            return out
        if self.messages[0].role != "system":
            out.append("first message must have role system")
        prev = None
        for m in self.messages[1:]:
            if m.role == "system":
                out.append("system message after the first position")
            elif m.role == prev:
                out.append(f"consecutive {m.role} messages")
            prev = m.role
        return out


def system(content: str) -> Message:
    return Message("system", content)


def user(content: str) -> Message:
    return Message("user", content)


def assistant(content: str) -> Message:
    return Message("assistant", content)


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"
    endpoint: str = ""
    model_name: str = ""
    temperature: float = 0.0
    seed: int = 0
    api_key_env: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    rate_limit_per_s: float = 1.0
    script_path: str = ""
    defect_spec: str = ""
    source_domain: str = ""
    repair_probability: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "scripted", "mutation"):
            raise ValueError(f"unknown backend kind: {self.kind}")
        if self.kind == "remote" and not (self.endpoint and self.model_name):
            raise ValueError("remote backend requires endpoint and model_name")
        if self.kind == "scripted" and not self.script_path:
            raise ValueError("scripted backend requires script_path")
        if self.kind == "mutation" and not (self.defect_spec and self.source_domain):
            raise ValueError("mutation backend requires defect_spec and source_domain")


class ScriptedBackend:
    """Replays a fixed list of responses; raises once the script runs out."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self._next = 0

    @classmethod
    def from_script(cls, text: str) -> "ScriptedBackend":
        chunks = []
        current: list[str] = []
        for line in text.splitlines():
            if line.strip() == SCRIPT_SEPARATOR:
                chunks.append("\n".join(current))
                current = []
            else:
                current.append(line)
        if current:
            chunks.append("\n".join(current))
        return cls([c for c in chunks if c.strip()])

    def complete(self, history: History) -> Message:
        if self._next >= len(self.responses):
            raise BackendError(f"script exhausted after {len(self.responses)} responses")
        content = self.responses[self._next]
        self._next += 1
        return assistant(content)


# ---------------------------------------------------------------------------
# Mutation backend


@dataclass(frozen=True)
class Defect:
    """One edit applied to the source domain.

    kinds: remove-precondition, remove-add, remove-del, add-precondition,
    rename-predicate-in-action.
    """

    kind: str
    action: str
    atom: Optional[Atom] = None
    rename_from: str = ""
    rename_to: str = ""

    def identifiers(self) -> frozenset[str]:
        names = {self.action}
        if self.atom is not None:
            names.add(self.atom.pred)
        if self.rename_from:
            names.add(self.rename_from)
        if self.rename_to:
            names.add(self.rename_to)
        return frozenset(names)


_ATOM_RE = re.compile(r"\(\s*([^\s()]+)((?:\s+[^\s()]+)*)\s*\)")
_WORD_RE = re.compile(r"[a-z?][a-z0-9_?-]*")


def _parse_defect_atom(text: str, lineno: int) -> Atom:
    m = _ATOM_RE.fullmatch(text.strip())
    if m is None:
        raise ValueError(f"defect spec line {lineno}: malformed atom {text.strip()!r}")
    return Atom(m.group(1).lower(), tuple(a.lower() for a in m.group(2).split()))


def parse_defect_spec(text: str) -> list[Defect]:
    """One edit per line: ``<kind> <action> <atom>`` or the rename triple."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 2)
        if len(parts) < 3:
            raise ValueError(f"defect spec line {lineno}: expected '<kind> <action> ...'")
        kind, action, rest = parts[0].lower(), parts[1].lower(), parts[2]
        if kind in ("remove-precondition", "remove-add", "remove-del", "add-precondition"):
            out.append(Defect(kind=kind, action=action, atom=_parse_defect_atom(rest, lineno)))
        elif kind == "rename-predicate-in-action":
            names = rest.split()
            if len(names) != 2:
                raise ValueError(f"defect spec line {lineno}: rename takes '<from> <to>'")
            out.append(
                Defect(kind=kind, action=action, rename_from=names[0].lower(), rename_to=names[1].lower())
            )
        else:
            raise ValueError(f"defect spec line {lineno}: unknown edit kind {kind!r}")
    return out


def apply_defect(domain: Domain, defect: Defect) -> Domain:
    schema = domain.action(defect.action)
    if schema is None:
        raise ValueError(f"defect targets unknown action {defect.action}")
    if defect.kind == "remove-precondition":
        new = replace(schema, pre=schema.pre - {defect.atom})
    elif defect.kind == "remove-add":
        new = replace(schema, add=schema.add - {defect.atom})
    elif defect.kind == "remove-del":
        new = replace(schema, delete=schema.delete - {defect.atom})
    elif defect.kind == "add-precondition":
        new = replace(schema, pre=schema.pre | {defect.atom})
    else:
        src, dst = defect.rename_from, defect.rename_to

        def ren(atoms: frozenset[Atom]) -> frozenset[Atom]:
            return frozenset(Atom(dst, a.args) if a.pred == src else a for a in atoms)

        new = replace(schema, pre=ren(schema.pre), add=ren(schema.add), delete=ren(schema.delete))
    actions = tuple(new if a.name == defect.action else a for a in domain.actions)
    predicates = domain.predicates
    if defect.kind == "rename-predicate-in-action":
        if domain.predicate(defect.rename_to) is None:
            original = domain.predicate(defect.rename_from)
            if original is None:
                raise ValueError(f"rename source predicate {defect.rename_from} is undeclared")
            predicates = predicates + (PredicateDecl(defect.rename_to, original.params),)
    return replace(domain, actions=actions, predicates=predicates)


def _deterministic_coin(seed: int, message_index: int, defect_index: int) -> float:
    digest = hashlib.blake2b(
        f"{seed}:{message_index}:{defect_index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big") / 2**64


def _evidence_text(content: str) -> Optional[str]:
    """The evidence splice of a feedback message, or None for other prompts."""
    for phrase in (PLAN_EVIDENCE_PHRASE, LANDMARK_EVIDENCE_PHRASE):
        idx = content.find(phrase)
        if idx >= 0:
            blocks = fenced_blocks(content[idx:])
            if blocks:
                return blocks[0][1]
            return content[idx:]
    return None


class MutationBackend:
    """A mock model holding a defective copy of a target domain.

    Responses are a pure function of the conversation: walking the history,
    each feedback message whose evidence names a defective action or one of
    its predicates repairs that defect with probability
    ``repair_probability``, decided by a per-(message, defect) seeded coin.
    """

    def __init__(
        self,
        source: Domain,
        defects: list[Defect],
        repair_probability: float = 1.0,
        seed: int = 0,
    ):
        self.source = source
        self.defects = list(defects)
        self.repair_probability = repair_probability
        self.seed = seed
        for d in self.defects:
            apply_defect(source, d)  # fail fast on specs that do not fit the domain

    def _repaired_after(self, history: History) -> set[int]:
        repaired: set[int] = set()
        for index, message in enumerate(history.messages):
            if message.role != "user":
                continue
            evidence = _evidence_text(message.content)
            if evidence is None:
                continue
            tokens = set(_WORD_RE.findall(evidence.lower()))
            for di, defect in enumerate(self.defects):
                if di in repaired:
                    continue
                if defect.identifiers() & tokens:
                    if _deterministic_coin(self.seed, index, di) < self.repair_probability:
                        repaired.add(di)
        return repaired

    def current_domain(self, history: History) -> Domain:
        repaired = self._repaired_after(history)
        domain = self.source
        for di, defect in enumerate(self.defects):
            if di not in repaired:
                domain = apply_defect(domain, defect)
        return domain

    def _construction_response(self, domain: Domain, action_name: str) -> str:
        schema = domain.action(action_name)
        if schema is None:
            raise BackendError(f"construction prompt names unknown action {action_name}")
        used_preds = sorted({a.pred for a in schema.pre | schema.add | schema.delete})
        pred_lines = []
        used_types = {t for _, t in schema.params}
        for name in used_preds:
            decl = domain.predicate(name)
            if decl is None:
                continue
            pred_lines.append(f"{decl}: the {name} relation")
            used_types.update(t for _, t in decl.params)
        type_lines = []
        for t in sorted(used_types):
            if t == "object":
                continue
            parent = domain.hierarchy.parent_of(t)
            shown = t if parent in (None, "object") else f"{t} - {parent}"
            type_lines.append(f"{shown}: the {t} type")
        parts = ["```pddl", print_action(schema).rstrip("\n"), "```"]
        parts += ["```predicates"] + pred_lines + ["```"]
        parts += ["```types"] + type_lines + ["```"]
        return "\n".join(parts)

    def complete(self, history: History) -> Message:
        domain = self.current_domain(history)
        last = history.last()
        if last is not None and last.role == "user":
            m = CONSTRUCTION_REQUEST_RE.search(last.content)
            if m is not None:
                return assistant(self._construction_response(domain, m.group(1).lower()))
        return assistant(f"```pddl\n{print_domain(domain)}```")


# ---------------------------------------------------------------------------
# Remote backend


class RemoteBackend:
    """Minimal chat-completions client with retry/backoff and rate limiting.

    The API key is read from the environment variable named in the config
    and never logged or echoed.
    """

    TRANSIENT_STATUSES = (429, 500, 502, 503, 504)

    def __init__(
        self,
        config: BackendConfig,
        post: Optional[Callable] = None,
        sleep: Callable[[float], None] = time.sleep,
        env: Optional[dict] = None,
    ):
        import os

        self.config = config
        if post is None:
            import requests

            post = requests.post
        self._post = post
        self._sleep = sleep
        self._env = os.environ if env is None else env
        self._last_request = 0.0

    def _api_key(self) -> str:
        if not self.config.api_key_env:
            raise BackendError("remote backend config does not name an API key variable")
        key = self._env.get(self.config.api_key_env)
        if not key:
            raise BackendError(f"environment variable {self.config.api_key_env} is not set")
        return key

    def _throttle(self) -> None:
        if self.config.rate_limit_per_s <= 0:
            return
        interval = 1.0 / self.config.rate_limit_per_s
        now = time.monotonic()
        wait = self._last_request + interval - now
        if wait > 0:
            self._sleep(wait)
        self._last_request = time.monotonic()

    def complete(self, history: History) -> Message:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in history.messages],
            "temperature": self.config.temperature,
            "seed": self.config.seed,
        }
        headers = {"Authorization": f"Bearer {self._api_key()}"}
        last_error: Optional[str] = None
        for attempt in range(self.config.max_retries + 1):
            self._throttle()
            try:
                response = self._post(
                    self.config.endpoint, json=payload, headers=headers, timeout=self.config.timeout
                )
            except Exception as e:  # connection errors are transient
                last_error = type(e).__name__
                self._sleep(2.0**attempt)
                continue
            status = getattr(response, "status_code", 200)
            if status in self.TRANSIENT_STATUSES:
                last_error = f"HTTP {status}"
                self._sleep(2.0**attempt)
                continue
            if status >= 400:
                raise BackendError(f"chat-completions request failed with HTTP {status}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except Exception:
                raise BackendError("malformed chat-completions response")
            if not isinstance(content, str) or not content:
                raise BackendError("chat-completions response has no content")
            return assistant(content)
        raise BackendError(f"request failed after {self.config.max_retries + 1} attempts ({last_error})")


def make_backend(config: BackendConfig):
    if config.kind == "scripted":
        return ScriptedBackend.from_script(Path(config.script_path).read_text(encoding="utf-8"))
    if config.kind == "mutation":
        source = parse_domain(Path(config.source_domain).read_text(encoding="utf-8"))
        defects = parse_defect_spec(Path(config.defect_spec).read_text(encoding="utf-8"))
        return MutationBackend(
            source, defects, repair_probability=config.repair_probability, seed=config.seed
        )
    return RemoteBackend(config)


# ---------------------------------------------------------------------------
# Syntax repair loop


@dataclass
class RepairOutcome:
    value: object
    history: History
    attempts: int
    errors: list[SourceError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.value is not None


def render_syntax_repair(error: SourceError) -> str:
    return SYNTAX_REPAIR_TEMPLATE.format(error=error)


def syntax_repair_loop(
    backend, history: History, parse_fn: Callable[[str], object], retry_limit: int
) -> RepairOutcome:
    """Alternate complete -> parse until success or ``retry_limit`` attempts.

    Each parse failure appends a repair request embedding the error before
    the next attempt. The outcome carries the grown history and the number
    of backend calls made; ``value`` is None when every attempt failed.
    """
    if retry_limit < 1:
        raise ValueError("retry_limit must be >= 1")
    errors: list[SourceError] = []
    attempts = 0
    for attempt in range(retry_limit):
        reply = backend.complete(history)
        attempts += 1
        history = history.append(reply)
        try:
            value = parse_fn(reply.content)
        except SourceError as e:
            errors.append(e)
            if attempt + 1 < retry_limit:
                history = history.append(user(render_syntax_repair(e)))
            continue
        return RepairOutcome(value=value, history=history, attempts=attempts, errors=errors)
    return RepairOutcome(value=None, history=history, attempts=attempts, errors=errors)
