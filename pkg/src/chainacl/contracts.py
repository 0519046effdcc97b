"""Register, Judge and role Access-Control contracts as plain state machines.

The state of all contracts lives in one :class:`WorldState`. It changes only
through the functions here, and :func:`execute` maps a ledger transaction onto
them, so any node replaying the same transactions reaches the same state.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional, Union

from .policy import (
    DAY,
    DEFAULT_UNAUTHORIZED_SUSPENSION,
    Action,
    AttemptWindowConfig,
    CommTarget,
    Decision,
    Penalty,
    PenaltyKind,
    ResourceKind,
    Role,
    SecurityEvent,
    communication_allowed,
    detect_attempt_burst,
    response_for,
    static_permission,
)

REGISTER_CONTRACT = "RC"
JUDGE_CONTRACT = "Judge Contract"

ROLE_ACC = {
    Role.PRIMARY_GROUP_HEAD: "Primary Group Head Role ACC",
    Role.SECONDARY_GROUP_HEAD: "Secondary Group Head Role ACC",
    Role.REGULAR_MEMBER: "Regular Member Role ACC",
}

_ADDRESS = re.compile(r"0x[0-9a-f]{40}")


class ContractError(Exception):
    pass


class DuplicateMethodName(ContractError):
    pass


class MalformedAddress(ContractError):
    pass


class NotFound(ContractError):
    pass


class NotCreator(ContractError):
    pass


class UnknownSubject(ContractError):
    pass


class AlreadyJudged(ContractError):
    pass


class BadCall(ContractError):
    """Transaction names a contract, method or argument the world does not know."""


def contract_address(name: str) -> str:
    """Deterministic 20-byte address for a contract name."""
    return "0x" + hashlib.sha256(name.encode("utf-8")).hexdigest()[:40]


def check_address(address: str) -> str:
    if not isinstance(address, str) or not _ADDRESS.fullmatch(address):
        raise MalformedAddress(f"expected 0x + 40 lowercase hex digits, got {address!r}")
    return address


@dataclass(frozen=True)
class MethodRecord:
    method_name: str
    subject: str
    object: str
    sc_name: str
    creator: str
    sc_address: str
    abi: str = ""

    def __post_init__(self) -> None:
        check_address(self.sc_address)

    def to_dict(self) -> dict:
        return {
            "method_name": self.method_name,
            "subject": self.subject,
            "object": self.object,
            "sc_name": self.sc_name,
            "creator": self.creator,
            "sc_address": self.sc_address,
            "abi": self.abi,
        }


class LookupTable:
    """The RC lookup table, keyed by method name."""

    def __init__(self) -> None:
        self.rows: dict[str, MethodRecord] = {}

    def __len__(self) -> int:
        return len(self.rows)

    def __contains__(self, name: str) -> bool:
        return name in self.rows

    def register(self, caller: str, record: MethodRecord) -> MethodRecord:
        if record.method_name in self.rows:
            raise DuplicateMethodName(record.method_name)
        record = replace(record, creator=caller)
        self.rows[record.method_name] = record
        return record

    def _owned(self, caller: str, name: str) -> MethodRecord:
        if name not in self.rows:
            raise NotFound(name)
        record = self.rows[name]
        if record.creator != caller:
            raise NotCreator(f"{caller} did not create {name}")
        return record

    def update(self, caller: str, name: str, sc_address: str, abi: Optional[str] = None) -> MethodRecord:
        record = self._owned(caller, name)
        changes: dict[str, Any] = {"sc_address": check_address(sc_address)}
        if abi is not None:
            changes["abi"] = abi
        record = replace(record, **changes)
        self.rows[name] = record
        return record

    def delete(self, caller: str, name: str) -> None:
        self._owned(caller, name)
        del self.rows[name]

    def get(self, name: str) -> tuple[str, str]:
        try:
            record = self.rows[name]
        except KeyError:
            raise NotFound(name) from None
        return record.sc_address, record.sc_name

    def to_dict(self) -> dict:
        return {name: rec.to_dict() for name, rec in self.rows.items()}


def method_register(caller: str, record: MethodRecord, table: LookupTable) -> LookupTable:
    table.register(caller, record)
    return table


def method_update(caller: str, method_name: str, new_sc_address: str, table: LookupTable) -> LookupTable:
    table.update(caller, method_name, new_sc_address)
    return table


def method_delete(caller: str, method_name: str, table: LookupTable) -> LookupTable:
    table.delete(caller, method_name)
    return table


def get_contract(method_name: str, table: LookupTable) -> tuple[str, str]:
    return table.get(method_name)


def reference_acc_for(role: Role) -> str:
    return ROLE_ACC[Role(role)]


def default_registrations(creator: str) -> list[MethodRecord]:
    """The three role ACCs plus the judge, as deployed by ``creator``."""
    rows = [
        MethodRecord(
            method_name=name,
            subject=role.value,
            object="*",
            sc_name=name.title().replace(" ", "").replace("Acc", "ACC"),
            creator=creator,
            sc_address=contract_address(name),
        )
        for role, name in ROLE_ACC.items()
    ]
    rows.append(
        MethodRecord(
            method_name=JUDGE_CONTRACT,
            subject="ACC",
            object="MisbehaviorRecord",
            sc_name="JudgeContract",
            creator=creator,
            sc_address=contract_address(JUDGE_CONTRACT),
        )
    )
    return rows


@dataclass
class MisbehaviorRecord:
    object: str
    subject: str
    event: SecurityEvent
    detail: str
    time: int
    penalty: Optional[Penalty] = None

    def __post_init__(self) -> None:
        self.event = SecurityEvent(self.event)
        if self.time < 0:
            raise ValueError("misbehavior time must be >= 0")

    def to_dict(self) -> dict:
        return {
            "object": self.object,
            "subject": self.subject,
            "event": self.event.value,
            "detail": self.detail,
            "time": self.time,
            "penalty": self.penalty.label() if self.penalty else None,
        }


@dataclass
class AccState:
    acc_name: str
    misbehavior_list: list[MisbehaviorRecord] = field(default_factory=list)
    denial_history: dict[str, list[int]] = field(default_factory=dict)

    def add_record(self, record: MisbehaviorRecord) -> None:
        # insort_right keeps equal-time records in arrival order.
        bisect.insort_right(self.misbehavior_list, record, key=lambda r: r.time)

    def to_dict(self) -> dict:
        return {
            "misbehavior_list": [r.to_dict() for r in self.misbehavior_list],
            "denial_history": {s: list(ts) for s, ts in self.denial_history.items()},
        }


@dataclass(frozen=True)
class ActivePenalty:
    penalty: Penalty
    issued_at: int
    expires_at: Optional[int]

    def blocks_at(self, now: int) -> bool:
        if not self.penalty.blocking or now < self.issued_at:
            return False
        return self.expires_at is None or now < self.expires_at

    def to_dict(self) -> dict:
        return {"penalty": self.penalty.label(), "issued_at": self.issued_at, "expires_at": self.expires_at}


@dataclass(frozen=True)
class ContractConfig:
    burst: AttemptWindowConfig = AttemptWindowConfig()
    unauthorized_suspension: int = DEFAULT_UNAUTHORIZED_SUSPENSION
    warning_limit: int = 3
    warning_window: int = 7 * DAY
    escalation_ban: int = DAY

    def __post_init__(self) -> None:
        if self.unauthorized_suspension <= 0 or self.escalation_ban <= 0:
            raise ValueError("suspension and ban durations must be positive")
        if self.warning_limit < 1 or self.warning_window <= 0:
            raise ValueError("warning_limit must be >= 1 and warning_window > 0")


class PenaltyLedger:
    """Issued penalties per peer id, plus the rolling warning counter.

    Keyed by peer id alone, so nothing here is affected by a peer leaving and
    rejoining the overlay.
    """

    def __init__(self) -> None:
        self.active: dict[str, list[ActivePenalty]] = {}
        self.warnings: dict[str, tuple[int, int]] = {}

    def warnings_in_window(self, subject: str, now: int, window: int) -> int:
        count, start = self.warnings.get(subject, (0, 0))
        if count and now - start < window:
            return count
        return 0

    def note_warning(self, subject: str, now: int, window: int) -> None:
        prior = self.warnings_in_window(subject, now, window)
        start = self.warnings[subject][1] if prior else now
        self.warnings[subject] = (prior + 1, start)

    def clear_warnings(self, subject: str) -> None:
        self.warnings.pop(subject, None)

    def issue(self, subject: str, penalty: Penalty, now: int, warning_window: int) -> ActivePenalty:
        if penalty.kind is PenaltyKind.PERMANENT_REVOCATION:
            expires = None
        elif penalty.kind is PenaltyKind.WARNING:
            # A warning "lives" for as long as it counts toward escalation.
            expires = now + warning_window
            self.note_warning(subject, now, warning_window)
        else:
            expires = now + penalty.duration
        entry = ActivePenalty(penalty, now, expires)
        self.active.setdefault(subject, []).append(entry)
        return entry

    def blocking(self, subject: str, now: int) -> Optional[ActivePenalty]:
        live = [p for p in self.active.get(subject, ()) if p.blocks_at(now)]
        if not live:
            return None
        for p in live:
            if p.expires_at is None:
                return p
        # Longest remaining wins; max() keeps the earliest-issued on ties.
        return max(live, key=lambda p: p.expires_at)

    def to_dict(self) -> dict:
        return {
            "active": {s: [p.to_dict() for p in ps] for s, ps in self.active.items()},
            "warnings": {s: list(v) for s, v in self.warnings.items()},
        }


def judge(record: MisbehaviorRecord, ledger: PenaltyLedger, now: int, config: ContractConfig = ContractConfig()) -> Penalty:
    """Pick the penalty for a reported misbehavior without changing any state."""
    base = response_for(record.event, config.unauthorized_suspension).penalty
    if base.kind is PenaltyKind.WARNING:
        prior = ledger.warnings_in_window(record.subject, now, config.warning_window)
        if prior + 1 >= config.warning_limit:
            return Penalty.timed_ban(config.escalation_ban)
    return base


def enforce(
    subject: str, penalty: Penalty, now: int, ledger: PenaltyLedger, config: ContractConfig = ContractConfig()
) -> PenaltyLedger:
    ledger.issue(subject, penalty, now, config.warning_window)
    return ledger


def active_blocking_penalty(subject: str, now: int, ledger: PenaltyLedger) -> Optional[ActivePenalty]:
    return ledger.blocking(subject, now)


class AccessDecision(str, Enum):
    GRANTED = "Granted"
    DENIED_STATIC = "DeniedStatic"
    DENIED_DYNAMIC = "DeniedDynamic"
    DENIED_PENALTY = "DeniedPenalty"


@dataclass(frozen=True)
class AccessOutcome:
    decision: AccessDecision
    triggered_event: Optional[SecurityEvent] = None
    penalty: Optional[Penalty] = None

    @property
    def granted(self) -> bool:
        return self.decision is AccessDecision.GRANTED

    def label(self) -> str:
        parts = [self.decision.value]
        if self.triggered_event is not None:
            parts.append(self.triggered_event.value)
        if self.penalty is not None:
            parts.append(self.penalty.label())
        return ":".join(parts)


class WorldState:
    """Every contract's storage: RC table, per-ACC lists, penalties, known peers."""

    def __init__(self, config: Optional[ContractConfig] = None):
        self.config = config or ContractConfig()
        self.table = LookupTable()
        self.accs: dict[str, AccState] = {name: AccState(name) for name in ROLE_ACC.values()}
        self.penalties = PenaltyLedger()
        self.peers: dict[str, Role] = {}

    def acc_for(self, role: Role) -> AccState:
        name = reference_acc_for(role)
        self.table.get(name)
        return self.accs[name]

    def to_dict(self) -> dict:
        return {
            "lookup_table": self.table.to_dict(),
            "accs": {name: acc.to_dict() for name, acc in self.accs.items()},
            "penalties": self.penalties.to_dict(),
            "peers": {p: r.value for p, r in self.peers.items()},
        }

    def dump(self) -> bytes:
        """Canonical state dump: sorted-key JSON, no whitespace."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")


def install_default_contracts(world: WorldState, creator: str) -> WorldState:
    for record in default_registrations(creator):
        world.table.register(creator, record)
    return world


def report_misbehavior(world: WorldState, record: MisbehaviorRecord, offender_role: Role) -> Penalty:
    """Hand a report to the judge, enforce the verdict, file it with the offender's ACC."""
    if record.penalty is not None:
        raise AlreadyJudged(f"record for {record.subject} at t={record.time} already judged")
    if record.subject not in world.peers:
        raise UnknownSubject(record.subject)
    acc = world.acc_for(offender_role)
    world.table.get(JUDGE_CONTRACT)
    penalty = judge(record, world.penalties, record.time, world.config)
    if record.event is SecurityEvent.IDENTITY_MISREPRESENTATION and penalty.kind is not PenaltyKind.WARNING:
        world.penalties.clear_warnings(record.subject)
    enforce(record.subject, penalty, record.time, world.penalties, world.config)
    record.penalty = penalty
    acc.add_record(record)
    return penalty


Target = Union[ResourceKind, CommTarget]


def parse_target(value: Union[str, Target]) -> Target:
    if isinstance(value, (ResourceKind, CommTarget)):
        return value
    try:
        return ResourceKind(value)
    except ValueError:
        pass
    try:
        return CommTarget(value)
    except ValueError:
        raise BadCall(f"unknown access target {value!r}") from None


def access_request(
    world: WorldState,
    subject: str,
    role: Role,
    target: Target,
    action: Optional[Action],
    now: int,
) -> AccessOutcome:
    """Run one request through the penalty gate, the static table and the burst rule.

    ``action`` is ignored (and may be ``None``) when ``target`` is a
    :class:`CommTarget`.
    """
    role = Role(role)
    target = parse_target(target)
    if subject not in world.peers:
        raise UnknownSubject(subject)
    acc = world.acc_for(role)

    active = world.penalties.blocking(subject, now)
    if active is not None:
        return AccessOutcome(AccessDecision.DENIED_PENALTY, penalty=active.penalty)

    if isinstance(target, CommTarget):
        decision = communication_allowed(role, target)
    else:
        if action is None:
            raise BadCall("resource access needs an action")
        decision = static_permission(role, target, Action(action))
    denied = decision is Decision.DENY
    if denied:
        acc.denial_history.setdefault(subject, []).append(now)

    event = detect_attempt_burst(acc.denial_history.get(subject, ()), now, world.config.burst)
    if event is not None:
        record = MisbehaviorRecord(
            object=acc.acc_name,
            subject=subject,
            event=event,
            detail=f"denied request burst on {target.value}",
            time=now,
        )
        penalty = report_misbehavior(world, record, role)
        return AccessOutcome(AccessDecision.DENIED_DYNAMIC, event, penalty)
    if denied:
        return AccessOutcome(AccessDecision.DENIED_STATIC)
    return AccessOutcome(AccessDecision.GRANTED)


def _arg(args, key: str, default: Any = ...) -> Any:
    if key in args:
        return args[key]
    if default is ...:
        raise BadCall(f"missing argument {key!r}")
    return default


def execute(world: WorldState, tx) -> str:
    """Apply one transaction to ``world`` and return its outcome label.

    ``tx`` needs ``caller``, ``contract``, ``method``, ``args`` and
    ``timestamp``. An ``outcome`` entry in ``args`` is ignored here; replicas
    compare it against the returned label.
    """
    try:
        return _dispatch(world, tx)
    except ValueError as exc:
        raise BadCall(str(exc)) from exc


def _dispatch(world: WorldState, tx) -> str:
    args = tx.args
    now = tx.timestamp
    if tx.contract == REGISTER_CONTRACT:
        if tx.method == "methodRegister":
            record = MethodRecord(
                method_name=_arg(args, "method_name"),
                subject=_arg(args, "subject"),
                object=_arg(args, "object"),
                sc_name=_arg(args, "sc_name"),
                creator=tx.caller,
                sc_address=_arg(args, "sc_address"),
                abi=_arg(args, "abi", ""),
            )
            world.table.register(tx.caller, record)
            return "registered"
        if tx.method == "methodUpdate":
            world.table.update(tx.caller, _arg(args, "method_name"), _arg(args, "sc_address"), _arg(args, "abi", None))
            return "updated"
        if tx.method == "methodDelete":
            world.table.delete(tx.caller, _arg(args, "method_name"))
            return "deleted"
        if tx.method == "getContract":
            address, name = world.table.get(_arg(args, "method_name"))
            return f"{address}:{name}"
        if tx.method == "peerJoin":
            role = Role(_arg(args, "role"))
            world.peers[tx.caller] = role
            return f"joined:{role.value}"
        if tx.method == "peerLeave":
            if tx.caller not in world.peers:
                raise UnknownSubject(tx.caller)
            return "left"
        raise BadCall(f"RC has no method {tx.method!r}")

    if tx.contract in world.accs:
        role = Role(_arg(args, "role"))
        if reference_acc_for(role) != tx.contract:
            raise BadCall(f"{role.value} must go through {reference_acc_for(role)!r}, not {tx.contract!r}")
        if tx.method == "accessRequest":
            action = _arg(args, "action", None)
            outcome = access_request(
                world, tx.caller, role, _arg(args, "target"), Action(action) if action else None, now
            )
            return outcome.label()
        if tx.method == "reportMisbehavior":
            record = MisbehaviorRecord(
                object=tx.caller,
                subject=_arg(args, "offender"),
                event=SecurityEvent(_arg(args, "event")),
                detail=_arg(args, "detail", ""),
                time=now,
            )
            return report_misbehavior(world, record, role).label()
        raise BadCall(f"{tx.contract} has no method {tx.method!r}")

    raise BadCall(f"unknown contract {tx.contract!r}")
