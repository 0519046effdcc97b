import json

import pytest
from hypothesis import given, settings, strategies as st

from chainacl.contracts import AccessDecision
from chainacl.ledger import verify_chain_lines
from chainacl.sim import (
    Event,
    EventKind,
    ParseError,
    Scenario,
    SimulationError,
    Trace,
    ValidationError,
    dump_policy_matrix,
    generate_scenario,
    load_scenario,
    parse_scenario,
    render_figures,
    replay,
    run,
    sequential_replay,
)
from chainacl.sim.cli import main

HEADER = '{"scenario": "t", "n": 2, "members": [1, 1]}\n'


def test_minimal_loads(scenario_dir):
    s = load_scenario(scenario_dir / "minimal.scn")
    assert s.name == "minimal" and s.n == 1 and s.members == [0] and s.events == []


def test_comments_and_blank_lines_are_skipped():
    s = parse_scenario("# hi\n\n" + HEADER + "\n# more\n" + '{"time": 1, "kind": "AdvanceOnly"}\n')
    assert [e.kind for e in s.events] == [EventKind.ADVANCE_ONLY]


@pytest.mark.parametrize(
    "body, error",
    [
        ('{"time": 1, "kind": "Teleport"}', ParseError),
        ("{not json", ParseError),
        ('{"time": 5, "kind": "AdvanceOnly"}\n{"time": 4, "kind": "AdvanceOnly"}', ValidationError),
        ('{"time": 1, "kind": "Leave", "peer": "ghost"}', ValidationError),
        ('{"time": 1, "kind": "Join", "peer": "h0", "group": 0}', ValidationError),
        ('{"time": 1, "kind": "Lookup", "peer": "h0", "resource_type": 2}', ValidationError),
        ('{"time": 1, "kind": "AccessRequest", "peer": "h0", "resource": "Nope", "action": "View"}', ValidationError),
        ('{"time": 1, "kind": "ReportMisbehavior", "reporter": "h0", "offender": "h0", "event": "DataTampering"}', ValidationError),
        ('{"time": -1, "kind": "AdvanceOnly"}', ValidationError),
    ],
)
def test_bad_scenarios(body, error):
    with pytest.raises(error):
        parse_scenario(HEADER + body + "\n")


def test_lookup_into_emptied_group_is_rejected():
    text = (
        '{"scenario": "t", "n": 2, "members": [0, 0]}\n'
        '{"time": 1, "kind": "Leave", "peer": "h1"}\n'
        '{"time": 2, "kind": "Lookup", "peer": "h0", "resource_type": 1}\n'
    )
    with pytest.raises(ValidationError) as info:
        parse_scenario(text)
    assert info.value.field == "resource_type"


def test_bad_headers():
    with pytest.raises(ValidationError):
        parse_scenario('{"scenario": "t", "n": 0, "members": []}\n')
    with pytest.raises(ValidationError):
        parse_scenario('{"scenario": "t", "n": 1, "members": [0], "config": {"speed": 3}}\n')
    with pytest.raises(ParseError):
        parse_scenario('{"time": 1, "kind": "AdvanceOnly"}\n')
    with pytest.raises(ParseError):
        parse_scenario("# only a comment\n")


def test_text_round_trip():
    s = generate_scenario(n=4, events=50, seed=3)
    again = parse_scenario(s.to_text())
    assert again == s


def test_pgh_edit(scenario_dir):
    result = run(load_scenario(scenario_dir / "pgh_edit.scn"))
    assert result.metrics.granted == 1 and result.metrics.denied == 0
    assert result.trace[0].outcome == "Granted"


def test_burst_ban_story(scenario_dir):
    result = run(load_scenario(scenario_dir / "burst_ban.scn"))
    outcomes = [(t.time, t.outcome) for t in result.trace]
    assert [o for _, o in outcomes[:3]] == ["DeniedStatic"] * 3
    assert outcomes[3] == (40, "DeniedDynamic:TooManyAccessAttempts:TimedBan(86400)")
    assert outcomes[4] == (40, "DeniedPenalty:TimedBan(86400)")
    assert outcomes[6] == (86439, "DeniedPenalty:TimedBan(86400)")
    assert outcomes[7] == (86440, "Granted")
    assert result.metrics.denied_dynamic == 1
    assert result.metrics.penalties_by_kind == {"TimedBan": 1}


def test_tampering_survives_rejoin(scenario_dir):
    result = run(load_scenario(scenario_dir / "tampering_churn.scn"))
    after = [t for t in result.trace if t.operation == "AccessRequest" and t.time > 200]
    assert after and all(t.outcome == "DeniedPenalty:PermanentRevocation" for t in after)
    assert result.trace[0].outcome == "Granted"


def test_warnings_escalate(scenario_dir):
    result = run(load_scenario(scenario_dir / "warnings.scn"))
    reports = [t.outcome for t in result.trace if t.operation == "ReportMisbehavior"]
    assert reports == ["Warning(1)", "Warning(1)", "TimedBan(86400)", "TemporarySuspension(2592000)", "TemporarySuspension(3600)"]
    access = [t.outcome for t in result.trace if t.operation == "AccessRequest"]
    assert access == ["Granted", "DeniedPenalty:TimedBan(86400)", "Granted", "Granted"]


def test_leave_reports_promotion():
    s = parse_scenario('{"scenario": "t", "n": 2, "members": [2, 0]}\n{"time": 1, "kind": "Leave", "peer": "h0"}\n')
    result = run(s)
    assert result.trace[0].outcome == "left;promoted:p0-001=PrimaryGroupHead,p0-002=SecondaryGroupHead"


def test_lookup_trace_and_metrics(scenario_dir):
    result = run(load_scenario(scenario_dir / "burst_ban.scn"))
    lookup = next(t for t in result.trace if t.operation == "Lookup")
    assert lookup.outcome == "route:p0-002>h0>h1"
    assert lookup.block_index is None
    assert result.metrics.to_dict()["mean_route_hops"] == "2/1"


def test_run_is_deterministic():
    s = generate_scenario(n=5, events=120, seed=11)
    a, b = run(s), run(s)
    assert a.trace_lines() == b.trace_lines()
    assert a.chain.to_lines() == b.chain.to_lines()
    assert a.metrics_json() == b.metrics_json()


def test_seed_is_echoed():
    s = generate_scenario(n=3, events=10, seed=9)
    assert s.seed == 9
    assert json.loads(run(s, seed=77).trace_lines().splitlines()[0])["seed"] == 77


def test_simulation_error_names_event():
    s = Scenario("bad", 2, [0, 0], {}, [Event(1, EventKind.LEAVE, {"peer": "ghost"})])
    with pytest.raises(SimulationError) as info:
        run(s)
    assert info.value.index == 0


def test_trace_matches_chain():
    result = run(generate_scenario(n=6, events=150, seed=5))
    assert verify_chain_lines(result.chain.to_lines()) is None
    for t in result.trace:
        if t.block_index is None:
            continue
        block = result.chain[t.block_index]
        recorded = [tx.args["outcome"] for tx in block.txs if tx.timestamp == t.time]
        assert t.outcome.split(";")[0] in recorded


def test_chain_reproduces_state():
    result = run(generate_scenario(n=4, events=100, seed=8))
    assert sequential_replay(result.chain.transactions(), result.world.config) == result.state_dump


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_access_counts_are_conserved(seed, n):
    result = run(generate_scenario(n=n, events=60, seed=seed))
    m = result.metrics
    assert m.granted + m.denied_static + m.denied_dynamic + m.denied_penalty == m.access_requests
    decisions = [t.outcome.split(":")[0] for t in result.trace if t.operation == "AccessRequest"]
    assert decisions.count(AccessDecision.GRANTED.value) == m.granted
    assert m.blocks_sealed == result.chain.height


def test_replay_ok_and_divergence(scenario_dir):
    s = load_scenario(scenario_dir / "burst_ban.scn")
    data = run(s).trace_lines()
    assert replay(data, s, replicas=2) is None
    trace = Trace.parse(data)
    rows = data.decode().splitlines()
    row = json.loads(rows[4])
    row["outcome"] = "Granted"
    rows[4] = json.dumps(row)
    div = replay("\n".join(rows).encode(), s)
    assert div is not None and div.index == trace.events[3].index == 3


def test_replay_detects_changed_footer(scenario_dir):
    s = load_scenario(scenario_dir / "pgh_edit.scn")
    rows = run(s).trace_lines().decode().splitlines()
    rows[-1] = json.dumps({"final": {"state_sha256": "0" * 64, "chain_tip": "", "blocks": 0}})
    assert replay("\n".join(rows).encode(), s).index == 1


def test_policy_matrix_dump():
    lines = dump_policy_matrix().splitlines()
    assert len(lines) == 62
    assert sum(line.startswith("permission ") for line in lines) == 48
    assert sum(line.startswith("communication ") for line in lines) == 9
    assert sum(line.startswith("response ") for line in lines) == 5


def test_figures_are_written(tmp_path, scenario_dir):
    result = run(load_scenario(scenario_dir / "burst_ban.scn"))
    paths = render_figures(result, tmp_path / "figs")
    assert {p.name for p in paths} == {"access_outcomes.png", "access_timeline.png", "route_hops.png"}
    for p in paths:
        assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_cli_round_trip(tmp_path, scenario_dir, capsys):
    scn = scenario_dir / "burst_ban.scn"
    trace, chain, metrics = tmp_path / "t.jsonl", tmp_path / "c.blocks", tmp_path / "m.json"
    assert main(["run", str(scn), "--trace", str(trace), "--chain", str(chain), "--metrics", str(metrics)]) == 0
    assert json.loads(metrics.read_text())["denied_dynamic"] == 1
    assert main(["replay", str(trace), str(scn), "--replicas", "3"]) == 0
    assert main(["verify-chain", str(chain)]) == 0
    out = capsys.readouterr().out
    assert out.count("OK") == 2

    raw = bytearray(chain.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    chain.write_bytes(bytes(raw))
    assert main(["verify-chain", str(chain)]) == 1
    assert "VIOLATION at block" in capsys.readouterr().out


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.scn")]) == 2
    bad = tmp_path / "bad.scn"
    bad.write_text('{"scenario": "x", "n": 1, "members": [0]}\n{"time": 1, "kind": "Fly"}\n')
    assert main(["run", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_cli_matrix_generate_and_figures(tmp_path, capsys):
    assert main(["matrix"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 62
    out = tmp_path / "g.scn"
    assert main(["generate", "--n", "3", "--events", "30", "--seed", "4", "-o", str(out)]) == 0
    assert load_scenario(out) == generate_scenario(3, 30, 4)
    assert main(["run", str(out), "--figures", str(tmp_path / "f")]) == 0
    assert len(list((tmp_path / "f").glob("*.png"))) == 3
