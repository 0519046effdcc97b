import pytest
from hypothesis import given, strategies as st

from chainacl.policy import (
    Action,
    AttemptWindowConfig,
    CiaImpact,
    CommTarget,
    Decision,
    Penalty,
    PenaltyKind,
    ResourceKind,
    Role,
    SecurityEvent,
    Severity,
    StrideImpact,
    communication_allowed,
    detect_attempt_burst,
    response_for,
    response_table,
    static_permission,
)

# The permission table as printed, cell text and all. The oracle below parses
# these strings rather than reusing the library's own sets.
TABLE_TEXT = {
    "Primary Group Head": ["full (view, edit, create, delete)"] * 4 + ["other group head, own members"],
    "Secondary Group Head": ["view", "view", "view, edit", "deny", "own group head, own members"],
    "Regular Members": ["deny", "view", "deny", "deny", "own group head"],
}
ROW_ROLE = {
    "Primary Group Head": Role.PRIMARY_GROUP_HEAD,
    "Secondary Group Head": Role.SECONDARY_GROUP_HEAD,
    "Regular Members": Role.REGULAR_MEMBER,
}
COLUMNS = [
    ResourceKind.GLOBAL_RESOURCE_TABLE,
    ResourceKind.LOCAL_RESOURCE_TABLE,
    ResourceKind.MALICIOUS_GROUP_HEAD_REGISTRY,
    ResourceKind.MALICIOUS_MEMBER_REGISTRY,
]
COMM_TEXT = {
    "own group head": CommTarget.OWN_GROUP_HEAD,
    "own members": CommTarget.OWN_MEMBERS,
    "other group head": CommTarget.OTHER_GROUP_HEAD,
}


def cell_actions(text):
    if text == "deny":
        return set()
    if text.startswith("full"):
        text = text[text.index("(") + 1 : text.index(")")]
    return {Action(word.strip().capitalize()) for word in text.split(",")}


def oracle_permission(role, resource, action):
    for row, cells in TABLE_TEXT.items():
        if ROW_ROLE[row] is role:
            return Decision.ALLOW if action in cell_actions(cells[COLUMNS.index(resource)]) else Decision.DENY
    raise AssertionError(role)


def oracle_comm(role, target):
    for row, cells in TABLE_TEXT.items():
        if ROW_ROLE[row] is role:
            allowed = {COMM_TEXT[p.strip()] for p in cells[4].split(",")}
            return Decision.ALLOW if target in allowed else Decision.DENY
    raise AssertionError(role)


def test_enum_sizes():
    assert len(Role) == 3
    assert len(ResourceKind) == 4
    assert set(Action) == cell_actions("full (view, edit, create, delete)")
    assert len(CommTarget) == 3
    assert len(SecurityEvent) == 5


@pytest.mark.parametrize("role", list(Role))
@pytest.mark.parametrize("resource", list(ResourceKind))
@pytest.mark.parametrize("action", list(Action))
def test_static_permission_matches_table(role, resource, action):
    assert static_permission(role, resource, action) is oracle_permission(role, resource, action)


@pytest.mark.parametrize(
    "role, resource, action, expected",
    [
        (Role.PRIMARY_GROUP_HEAD, ResourceKind.GLOBAL_RESOURCE_TABLE, Action.DELETE, Decision.ALLOW),
        (Role.REGULAR_MEMBER, ResourceKind.GLOBAL_RESOURCE_TABLE, Action.VIEW, Decision.DENY),
        (Role.SECONDARY_GROUP_HEAD, ResourceKind.MALICIOUS_GROUP_HEAD_REGISTRY, Action.EDIT, Decision.ALLOW),
        (Role.SECONDARY_GROUP_HEAD, ResourceKind.MALICIOUS_MEMBER_REGISTRY, Action.VIEW, Decision.DENY),
        (Role.REGULAR_MEMBER, ResourceKind.LOCAL_RESOURCE_TABLE, Action.EDIT, Decision.DENY),
    ],
)
def test_static_permission_examples(role, resource, action, expected):
    assert static_permission(role, resource, action) is expected


def test_static_permission_accepts_plain_strings():
    assert static_permission("PrimaryGroupHead", "GlobalResourceTable", "Delete") is Decision.ALLOW


def test_primary_head_has_full_access_everywhere():
    assert all(
        static_permission(Role.PRIMARY_GROUP_HEAD, r, a) is Decision.ALLOW for r in ResourceKind for a in Action
    )


@pytest.mark.parametrize("role", list(Role))
@pytest.mark.parametrize("target", list(CommTarget))
def test_communication_matches_table(role, target):
    assert communication_allowed(role, target) is oracle_comm(role, target)


def test_communication_examples():
    assert communication_allowed(Role.REGULAR_MEMBER, CommTarget.OWN_GROUP_HEAD) is Decision.ALLOW
    assert communication_allowed(Role.REGULAR_MEMBER, CommTarget.OTHER_GROUP_HEAD) is Decision.DENY
    assert communication_allowed(Role.PRIMARY_GROUP_HEAD, CommTarget.OTHER_GROUP_HEAD) is Decision.ALLOW


def test_response_rows():
    assert response_for(SecurityEvent.DATA_TAMPERING).penalty == Penalty.permanent_revocation()
    assert response_for(SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS).penalty == Penalty.timed_ban(86_400)
    assert response_for(SecurityEvent.DISRUPTION_OF_SERVICE).penalty == Penalty.temporary_suspension(30 * 86_400)
    assert response_for(SecurityEvent.DISRUPTION_OF_SERVICE).penalty.amount == 2_592_000
    assert response_for(SecurityEvent.UNAUTHORIZED_ACCESS).penalty == Penalty.temporary_suspension(3600)
    assert response_for(SecurityEvent.IDENTITY_MISREPRESENTATION).penalty == Penalty.warning(1)


def test_response_classification():
    rows = {
        SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS: (Severity.HIGH, CiaImpact.INTEGRITY, StrideImpact.ELEVATION_OF_PRIVILEGE),
        SecurityEvent.DATA_TAMPERING: (Severity.HIGH, CiaImpact.INTEGRITY, StrideImpact.TAMPERING),
        SecurityEvent.UNAUTHORIZED_ACCESS: (Severity.MEDIUM, CiaImpact.CONFIDENTIALITY, StrideImpact.INFORMATION_DISCLOSURE),
        SecurityEvent.DISRUPTION_OF_SERVICE: (Severity.HIGH, CiaImpact.AVAILABILITY, StrideImpact.DENIAL_OF_SERVICE),
        SecurityEvent.IDENTITY_MISREPRESENTATION: (Severity.LOW, CiaImpact.ACCOUNTABILITY, StrideImpact.SPOOFING),
    }
    for event, (sev, cia, stride) in rows.items():
        spec = response_for(event)
        assert (spec.severity, spec.cia_impact, spec.stride_impact) == (sev, cia, stride)


def test_response_table_is_stable_and_injective_on_kind_except_suspensions():
    assert response_table() == response_table()
    kinds = [spec.penalty.kind for spec in response_table().values()]
    assert kinds.count(PenaltyKind.TEMPORARY_SUSPENSION) == 2
    assert len(set(kinds)) == 4


def test_unauthorized_suspension_is_configurable():
    assert response_for(SecurityEvent.UNAUTHORIZED_ACCESS, 7200).penalty.amount == 7200


@pytest.mark.parametrize(
    "kind, amount",
    [
        (PenaltyKind.TIMED_BAN, 0),
        (PenaltyKind.TEMPORARY_SUSPENSION, -5),
        (PenaltyKind.WARNING, 0),
        (PenaltyKind.PERMANENT_REVOCATION, 10),
        (PenaltyKind.TIMED_BAN, None),
    ],
)
def test_penalty_rejects_bad_amounts(kind, amount):
    with pytest.raises(ValueError):
        Penalty(kind, amount)


@pytest.mark.parametrize(
    "penalty", [Penalty.timed_ban(86400), Penalty.permanent_revocation(), Penalty.temporary_suspension(5), Penalty.warning(2)]
)
def test_penalty_label_round_trip(penalty):
    assert Penalty.parse(penalty.label()) == penalty


def test_window_config_validation():
    with pytest.raises(ValueError):
        AttemptWindowConfig(0, 60)
    with pytest.raises(ValueError):
        AttemptWindowConfig(3, 0)


CFG = AttemptWindowConfig(3, 60)


def test_burst_examples():
    assert detect_attempt_burst([], 100, CFG) is None
    assert detect_attempt_burst([10, 20, 30, 40], 50, CFG) is SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS
    assert detect_attempt_burst([10, 20, 30, 40], 500, CFG) is None


def test_burst_window_is_half_open():
    # (now - window, now]: a denial exactly at now - window no longer counts.
    assert detect_attempt_burst([0, 10, 20, 30], 60, CFG) is None
    assert detect_attempt_burst([1, 10, 20, 30], 60, CFG) is SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS


times = st.lists(st.integers(0, 500), max_size=12).map(sorted)


@given(times, st.integers(0, 600), st.integers(1, 5), st.integers(1, 120))
def test_burst_matches_brute_force(ts, extra, max_denials, window):
    now = (ts[-1] if ts else 0) + extra % 50
    cfg = AttemptWindowConfig(max_denials, window)
    inside = [t for t in ts if now - window < t <= now]
    expected = SecurityEvent.TOO_MANY_ACCESS_ATTEMPTS if len(inside) > max_denials else None
    assert detect_attempt_burst(ts, now, cfg) is expected


@given(times, st.integers(0, 100), st.integers(-1000, 1000))
def test_burst_shift_invariant(ts, extra, shift):
    now = (ts[-1] if ts else 0) + extra
    shifted = [t + shift for t in ts]
    assert detect_attempt_burst(ts, now, CFG) is detect_attempt_burst(shifted, now + shift, CFG)
