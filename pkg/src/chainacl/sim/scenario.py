"""Scenario files: a header line followed by one event per line.

Every non-blank line that does not start with ``#`` is a JSON object. The first
one is the header::

    {"scenario": "burst", "n": 3, "members": [2, 2, 2], "config": {"window": 60}}

and each following line is an event::

    {"time": 12, "kind": "AccessRequest", "peer": "p0-001",
     "resource": "GlobalResourceTable", "action": "View"}

Event kinds and their fields:

    Join               peer, group
    Leave              peer
    AccessRequest      peer, resource + action  |  peer, target
    ReportMisbehavior  reporter, offender, event, [detail]
    Lookup             peer, resource_type
    AdvanceOnly        (none)

Times are integer simulated seconds and must not decrease. Events at the same
time run in file order.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

from ..contracts import ContractConfig
from ..overlay import initial_peers
from ..policy import Action, AttemptWindowConfig, CommTarget, ResourceKind, SecurityEvent


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ScenarioError):
    def __init__(self, field_name: str, message: str, line: Optional[int] = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field_name}: {message}")
        self.field = field_name
        self.line = line


class EventKind(str, Enum):
    JOIN = "Join"
    LEAVE = "Leave"
    ACCESS_REQUEST = "AccessRequest"
    REPORT_MISBEHAVIOR = "ReportMisbehavior"
    LOOKUP = "Lookup"
    ADVANCE_ONLY = "AdvanceOnly"


_FIELDS = {
    EventKind.JOIN: ({"peer", "group"}, set()),
    EventKind.LEAVE: ({"peer"}, set()),
    EventKind.ACCESS_REQUEST: ({"peer"}, {"resource", "action", "target"}),
    EventKind.REPORT_MISBEHAVIOR: ({"reporter", "offender", "event"}, {"detail"}),
    EventKind.LOOKUP: ({"peer", "resource_type"}, set()),
    EventKind.ADVANCE_ONLY: (set(), set()),
}

_CONFIG_KEYS = {
    "max_denials",
    "window",
    "unauthorized_suspension",
    "warning_limit",
    "warning_window",
    "escalation_ban",
    "seed",
}


@dataclass(frozen=True)
class Event:
    time: int
    kind: EventKind
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind.value, **self.payload}


@dataclass
class Scenario:
    name: str
    n: int
    members: list[int]
    config: dict = field(default_factory=dict)
    events: list[Event] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return int(self.config.get("seed", 0))

    def contract_config(self) -> ContractConfig:
        c = self.config
        defaults = ContractConfig()
        return ContractConfig(
            burst=AttemptWindowConfig(
                max_denials=c.get("max_denials", defaults.burst.max_denials),
                window=c.get("window", defaults.burst.window),
            ),
            unauthorized_suspension=c.get("unauthorized_suspension", defaults.unauthorized_suspension),
            warning_limit=c.get("warning_limit", defaults.warning_limit),
            warning_window=c.get("warning_window", defaults.warning_window),
            escalation_ban=c.get("escalation_ban", defaults.escalation_ban),
        )

    def to_text(self) -> str:
        header = {"scenario": self.name, "n": self.n, "members": self.members, "config": self.config}
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(e.to_dict(), sort_keys=True) for e in self.events)
        return "\n".join(lines) + "\n"


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_header(obj: Any, line: int) -> Scenario:
    if not isinstance(obj, dict) or "scenario" not in obj:
        raise ParseError(line, "first entry must be a header with a 'scenario' field")
    extra = set(obj) - {"scenario", "n", "members", "config"}
    if extra:
        raise ValidationError(sorted(extra)[0], "unknown header field", line)
    name = obj["scenario"]
    n = obj.get("n")
    members = obj.get("members", [0] * n if _is_int(n) else None)
    config = obj.get("config", {})
    if not isinstance(name, str) or not name:
        raise ValidationError("scenario", "must be a non-empty string", line)
    if not _is_int(n) or n < 1:
        raise ValidationError("n", "must be a positive integer", line)
    if not isinstance(members, list) or len(members) != n or not all(_is_int(m) and m >= 0 for m in members):
        raise ValidationError("members", f"must list {n} non-negative integers", line)
    if not isinstance(config, dict):
        raise ValidationError("config", "must be an object", line)
    for key, value in config.items():
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"config.{key}", "unknown setting", line)
        if not _is_int(value):
            raise ValidationError(f"config.{key}", "must be an integer", line)
    scenario = Scenario(name, n, list(members), dict(config))
    try:
        scenario.contract_config()
    except ValueError as exc:
        raise ValidationError("config", str(exc), line) from None
    return scenario


def _parse_event(obj: Any, line: int, n: int) -> Event:
    if not isinstance(obj, dict):
        raise ParseError(line, "event must be a JSON object")
    try:
        kind = EventKind(obj.get("kind"))
    except ValueError:
        raise ParseError(line, f"unknown event kind {obj.get('kind')!r}") from None
    time = obj.get("time")
    if not _is_int(time) or time < 0:
        raise ValidationError("time", "must be a non-negative integer", line)
    payload = {k: v for k, v in obj.items() if k not in ("time", "kind")}
    required, optional = _FIELDS[kind]
    missing = required - set(payload)
    if missing:
        raise ValidationError(sorted(missing)[0], f"required for {kind.value}", line)
    unknown = set(payload) - required - optional
    if unknown:
        raise ValidationError(sorted(unknown)[0], f"not a {kind.value} field", line)

    for key in ("peer", "reporter", "offender"):
        if key in payload and (not isinstance(payload[key], str) or not payload[key]):
            raise ValidationError(key, "must be a non-empty peer id", line)
    if kind is EventKind.JOIN:
        _check_index(payload["group"], n, "group", line)
    elif kind is EventKind.LOOKUP:
        _check_index(payload["resource_type"], n, "resource_type", line)
    elif kind is EventKind.ACCESS_REQUEST:
        if "target" in payload:
            if "resource" in payload or "action" in payload:
                raise ValidationError("target", "give either target or resource+action", line)
            _check_enum(CommTarget, payload["target"], "target", line)
        else:
            if "resource" not in payload or "action" not in payload:
                raise ValidationError("resource", "resource and action are both required", line)
            _check_enum(ResourceKind, payload["resource"], "resource", line)
            _check_enum(Action, payload["action"], "action", line)
    elif kind is EventKind.REPORT_MISBEHAVIOR:
        _check_enum(SecurityEvent, payload["event"], "event", line)
        if not isinstance(payload.get("detail", ""), str):
            raise ValidationError("detail", "must be a string", line)
        if payload["reporter"] == payload["offender"]:
            raise ValidationError("offender", "a peer cannot report itself", line)
    return Event(time, kind, payload)


def _check_index(value: Any, n: int, name: str, line: int) -> None:
    if not _is_int(value) or not 0 <= value < n:
        raise ValidationError(name, f"must be an integer in 0..{n - 1}", line)


def _check_enum(enum: type, value: Any, name: str, line: int) -> None:
    try:
        enum(value)
    except ValueError:
        raise ValidationError(name, f"{value!r} is not a valid {enum.__name__}", line) from None


def _check_membership(scenario: Scenario, lines: list[int]) -> None:
    """Walk the events and confirm every referenced peer is present when used."""
    where = dict(initial_peers(scenario.n, scenario.members))
    counts = [0] * scenario.n
    for _, g in where.items():
        counts[g] += 1
    prev_time = 0
    for event, line in zip(scenario.events, lines):
        if event.time < prev_time:
            raise ValidationError("time", f"{event.time} is earlier than previous event at {prev_time}", line)
        prev_time = event.time
        p = event.payload
        if event.kind is EventKind.JOIN:
            if p["peer"] in where:
                raise ValidationError("peer", f"{p['peer']} is already in the overlay", line)
            where[p["peer"]] = p["group"]
            counts[p["group"]] += 1
            continue
        for key in ("peer", "reporter", "offender"):
            if key in p and p[key] not in where:
                raise ValidationError(key, f"{p[key]} is not in the overlay at t={event.time}", line)
        if event.kind is EventKind.LEAVE:
            counts[where.pop(p["peer"])] -= 1
        elif event.kind is EventKind.LOOKUP and counts[p["resource_type"]] == 0:
            raise ValidationError("resource_type", f"group {p['resource_type']} is empty at t={event.time}", line)


def parse_scenario(text: str) -> Scenario:
    scenario: Optional[Scenario] = None
    lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        if scenario is None:
            scenario = _parse_header(obj, lineno)
        else:
            scenario.events.append(_parse_event(obj, lineno, scenario.n))
            lines.append(lineno)
    if scenario is None:
        raise ParseError(1, "no header line")
    _check_membership(scenario, lines)
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def generate_scenario(
    n: int = 6,
    events: int = 200,
    seed: int = 0,
    members: Optional[list[int]] = None,
    name: Optional[str] = None,
) -> Scenario:
    """A random but valid scenario mixing churn, requests, reports and lookups.

    Same arguments, same scenario. Groups are never emptied, so every lookup
    has a head to reach.
    """
    rng = random.Random(seed)
    members = list(members) if members is not None else [3] * n
    scenario = Scenario(name or f"random-n{n}-e{events}-s{seed}", n, members, {"seed": seed})
    where = dict(initial_peers(n, members))
    departed: list[tuple[str, int]] = []
    fresh = 0
    now = 0
    resources = list(ResourceKind)
    actions = list(Action)
    targets = list(CommTarget)
    offences = list(SecurityEvent)
    kinds = ["access"] * 40 + ["burst"] * 5 + ["report"] * 10 + ["join"] * 12 + ["leave"] * 10 + ["lookup"] * 15 + ["advance"] * 8

    def present() -> list[str]:
        return sorted(where)

    out: list[Event] = []
    while len(out) < events:
        roll = rng.random()
        if roll < 0.7:
            now += rng.randint(0, 20)
        elif roll < 0.95:
            now += rng.randint(60, 7200)
        else:
            now += rng.randint(86_400, 200_000)
        choice = rng.choice(kinds)
        if choice == "access":
            peer = rng.choice(present())
            if rng.random() < 0.25:
                payload = {"peer": peer, "target": rng.choice(targets).value}
            else:
                payload = {"peer": peer, "resource": rng.choice(resources).value, "action": rng.choice(actions).value}
            out.append(Event(now, EventKind.ACCESS_REQUEST, payload))
        elif choice == "burst":
            peer = rng.choice(present())
            for _ in range(rng.randint(3, 5)):
                if len(out) >= events:
                    break
                payload = {"peer": peer, "resource": ResourceKind.MALICIOUS_MEMBER_REGISTRY.value, "action": Action.DELETE.value}
                out.append(Event(now, EventKind.ACCESS_REQUEST, payload))
                now += rng.randint(0, 5)
        elif choice == "report":
            peers = present()
            if len(peers) < 2:
                continue
            reporter, offender = rng.sample(peers, 2)
            payload = {"reporter": reporter, "offender": offender, "event": rng.choice(offences).value, "detail": "scripted"}
            out.append(Event(now, EventKind.REPORT_MISBEHAVIOR, payload))
        elif choice == "join":
            if departed and rng.random() < 0.5:
                peer, group = departed.pop(rng.randrange(len(departed)))
            else:
                fresh += 1
                peer, group = f"j{fresh:04d}", rng.randrange(n)
            where[peer] = group
            out.append(Event(now, EventKind.JOIN, {"peer": peer, "group": group}))
        elif choice == "leave":
            sizes = [0] * n
            for g in where.values():
                sizes[g] += 1
            candidates = [p for p in present() if sizes[where[p]] > 1]
            if not candidates:
                continue
            peer = rng.choice(candidates)
            departed.append((peer, where.pop(peer)))
            out.append(Event(now, EventKind.LEAVE, {"peer": peer}))
        elif choice == "lookup":
            out.append(Event(now, EventKind.LOOKUP, {"peer": rng.choice(present()), "resource_type": rng.randrange(n)}))
        else:
            out.append(Event(now, EventKind.ADVANCE_ONLY, {}))
    scenario.events = out[:events]
    return scenario
