"""Static permission matrix, communication rules and security-event responses.

Everything here is immutable data plus pure lookups. The contract layer
consults these tables; nothing in this module knows about ledgers or peers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

DAY = 86_400


class Role(str, Enum):
    PRIMARY_GROUP_HEAD = "PrimaryGroupHead"
    SECONDARY_GROUP_HEAD = "SecondaryGroupHead"
    REGULAR_MEMBER = "RegularMember"


class ResourceKind(str, Enum):
    GLOBAL_RESOURCE_TABLE = "GlobalResourceTable"
    LOCAL_RESOURCE_TABLE = "LocalResourceTable"
    MALICIOUS_GROUP_HEAD_REGISTRY = "MaliciousGroupHeadRegistry"
    MALICIOUS_MEMBER_REGISTRY = "MaliciousMemberRegistry"


class Action(str, Enum):
    VIEW = "View"
    EDIT = "Edit"
    CREATE = "Create"
    DELETE = "Delete"


class CommTarget(str, Enum):
    OWN_GROUP_HEAD = "OwnGroupHead"
    OWN_MEMBERS = "OwnMembers"
    OTHER_GROUP_HEAD = "OtherGroupHead"


class Decision(str, Enum):
    ALLOW = "Allow"
    DENY = "Deny"


class SecurityEvent(str, Enum):
    TOO_MANY_ACCESS_ATTEMPTS = "TooManyAccessAttempts"
    DATA_TAMPERING = "DataTampering"
    UNAUTHORIZED_ACCESS = "UnauthorizedAccess"
    DISRUPTION_OF_SERVICE = "DisruptionOfService"
    IDENTITY_MISREPRESENTATION = "IdentityMisrepresentation"


class Severity(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class CiaImpact(str, Enum):
    CONFIDENTIALITY = "Confidentiality"
    INTEGRITY = "Integrity"
    AVAILABILITY = "Availability"
    # Not a CIA letter, but it is what the response table lists.
    ACCOUNTABILITY = "Accountability"


class StrideImpact(str, Enum):
    SPOOFING = "Spoofing"
    TAMPERING = "Tampering"
    INFORMATION_DISCLOSURE = "InformationDisclosure"
    DENIAL_OF_SERVICE = "DenialOfService"
    ELEVATION_OF_PRIVILEGE = "ElevationOfPrivilege"


class PenaltyKind(str, Enum):
    TIMED_BAN = "TimedBan"
    PERMANENT_REVOCATION = "PermanentRevocation"
    TEMPORARY_SUSPENSION = "TemporarySuspension"
    WARNING = "Warning"


@dataclass(frozen=True)
class Penalty:
    """A sanction handed out by the judge.

    ``amount`` is a duration in simulated seconds for bans and suspensions,
    a count for warnings, and unused (``None``) for permanent revocation.
    """

    kind: PenaltyKind
    amount: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is PenaltyKind.PERMANENT_REVOCATION:
            if self.amount is not None:
                raise ValueError("permanent revocation carries no amount")
        elif not isinstance(self.amount, int) or isinstance(self.amount, bool) or self.amount <= 0:
            raise ValueError(f"{self.kind.value} needs a positive integer amount, got {self.amount!r}")

    @classmethod
    def timed_ban(cls, seconds: int) -> "Penalty":
        return cls(PenaltyKind.TIMED_BAN, seconds)

    @classmethod
    def permanent_revocation(cls) -> "Penalty":
        return cls(PenaltyKind.PERMANENT_REVOCATION)

    @classmethod
    def temporary_suspension(cls, seconds: int) -> "Penalty":
        return cls(PenaltyKind.TEMPORARY_SUSPENSION, seconds)

    @classmethod
    def warning(cls, count: int = 1) -> "Penalty":
        return cls(PenaltyKind.WARNING, count)

    @property
    def blocking(self) -> bool:
        return self.kind is not PenaltyKind.WARNING

    @property
    def duration(self) -> Optional[int]:
        if self.kind in (PenaltyKind.TIMED_BAN, PenaltyKind.TEMPORARY_SUSPENSION):
            return self.amount
        return None

    def label(self) -> str:
        if self.amount is None:
            return self.kind.value
        return f"{self.kind.value}({self.amount})"

    @classmethod
    def parse(cls, text: str) -> "Penalty":
        name, _, rest = text.partition("(")
        kind = PenaltyKind(name)
        if not rest:
            return cls(kind)
        if not rest.endswith(")"):
            raise ValueError(f"bad penalty label {text!r}")
        return cls(kind, int(rest[:-1]))


@dataclass(frozen=True)
class ResponseSpec:
    severity: Severity
    cia_impact: CiaImpact
    stride_impact: StrideImpact
    penalty: Penalty


@dataclass(frozen=True)
class AttemptWindowConfig:
    """Burst rule: more than ``max_denials`` denials inside ``window`` seconds."""

    max_denials: int = 3
    window: int = 60

    def __post_init__(self) -> None:
        if self.max_denials < 1:
            raise ValueError("max_denials must be >= 1")
        if self.window <= 0:
            raise ValueError("window must be > 0")


DEFAULT_UNAUTHORIZED_SUSPENSION = 3_600

_FULL = frozenset(Action)
_NONE: frozenset = frozenset()

PERMISSIONS: dict[Role, dict[ResourceKind, frozenset]] = {
    Role.PRIMARY_GROUP_HEAD: {r: _FULL for r in ResourceKind},
    Role.SECONDARY_GROUP_HEAD: {
        ResourceKind.GLOBAL_RESOURCE_TABLE: frozenset({Action.VIEW}),
        ResourceKind.LOCAL_RESOURCE_TABLE: frozenset({Action.VIEW}),
        ResourceKind.MALICIOUS_GROUP_HEAD_REGISTRY: frozenset({Action.VIEW, Action.EDIT}),
        ResourceKind.MALICIOUS_MEMBER_REGISTRY: _NONE,
    },
    Role.REGULAR_MEMBER: {
        ResourceKind.GLOBAL_RESOURCE_TABLE: _NONE,
        ResourceKind.LOCAL_RESOURCE_TABLE: frozenset({Action.VIEW}),
        ResourceKind.MALICIOUS_GROUP_HEAD_REGISTRY: _NONE,
        ResourceKind.MALICIOUS_MEMBER_REGISTRY: _NONE,
    },
}

COMMUNICATION: dict[Role, frozenset] = {
    Role.PRIMARY_GROUP_HEAD: frozenset({CommTarget.OTHER_GROUP_HEAD, CommTarget.OWN_MEMBERS}),
    Role.SECONDARY_GROUP_HEAD: frozenset({CommTarget.OWN_GROUP_HEAD, CommTarget.OWN_MEMBERS}),
    Role.REGULAR_MEMBER: frozenset({CommTarget.OWN_GROUP_HEAD}),
}


def static_permission(role: Role, resource: ResourceKind, action: Action) -> Decision:
    allowed = PERMISSIONS[Role(role)][ResourceKind(resource)]
    return Decision.ALLOW if Action(action) in allowed else Decision.DENY


def communication_allowed(role: Role, target: CommTarget) -> Decision:
    return Decision.ALLOW if CommTarget(target) in COMMUNICATION[Role(role)] else Decision.DENY


def response_table(unauthorized_suspension: int = DEFAULT_UNAUTHORIZED_SUSPENSION) -> dict[SecurityEvent, ResponseSpec]:
    """Event -> response mapping, in table order.

    Only the unauthorized-access suspension length is a free parameter; the
    other rows are fixed.
    """
    return {
        SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS: ResponseSpec(
            Severity.HIGH, CiaImpact.INTEGRITY, StrideImpact.ELEVATION_OF_PRIVILEGE, Penalty.timed_ban(DAY)
        ),
        SecurityEvent.DATA_TAMPERING: ResponseSpec(
            Severity.HIGH, CiaImpact.INTEGRITY, StrideImpact.TAMPERING, Penalty.permanent_revocation()
        ),
        SecurityEvent.UNAUTHORIZED_ACCESS: ResponseSpec(
            Severity.MEDIUM,
            CiaImpact.CONFIDENTIALITY,
            StrideImpact.INFORMATION_DISCLOSURE,
            Penalty.temporary_suspension(unauthorized_suspension),
        ),
        SecurityEvent.DISRUPTION_OF_SERVICE: ResponseSpec(
            Severity.HIGH, CiaImpact.AVAILABILITY, StrideImpact.DENIAL_OF_SERVICE, Penalty.temporary_suspension(30 * DAY)
        ),
        SecurityEvent.IDENTITY_MISREPRESENTATION: ResponseSpec(
            Severity.LOW, CiaImpact.ACCOUNTABILITY, StrideImpact.SPOOFING, Penalty.warning(1)
        ),
    }


def response_for(event: SecurityEvent, unauthorized_suspension: int = DEFAULT_UNAUTHORIZED_SUSPENSION) -> ResponseSpec:
    return response_table(unauthorized_suspension)[SecurityEvent(event)]


def detect_attempt_burst(
    denial_times: Sequence[int], now: int, cfg: AttemptWindowConfig
) -> Optional[SecurityEvent]:
    """Return ``TOO_MANY_ACCESS_ATTEMPTS`` if the denials in ``(now - window, now]``
    exceed ``cfg.max_denials``."""
    start = now - cfg.window
    count = sum(1 for t in denial_times if start < t <= now)
    if count > cfg.max_denials:
        return SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS
    return None
