"""Deterministic driver tying overlay, contracts and ledger together.

One run walks the scenario's events in order. Contract calls are executed on
the sequencer's live world state, stamped with their outcome and sealed into
blocks. Any replica that applies those blocks must reach the same state.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .. import contracts, ledger, overlay
from ..contracts import REGISTER_CONTRACT, AccessDecision, ContractConfig, WorldState
from ..ledger import MAX_PENDING, Chain, Replica, Transaction
from ..policy import Penalty
from .scenario import EventKind, Scenario

TRACE_FORMAT = "chainacl-trace/1"


class SimulationError(Exception):
    def __init__(self, index: int, cause: Exception):
        super().__init__(f"event {index}: {type(cause).__name__}: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class TraceEvent:
    index: int
    time: int
    actor: str
    operation: str
    outcome: str
    block_index: Optional[int]

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "time": self.time,
            "actor": self.actor,
            "operation": self.operation,
            "outcome": self.outcome,
            "block_index": self.block_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEvent":
        return cls(d["index"], d["time"], d["actor"], d["operation"], d["outcome"], d["block_index"])


@dataclass
class Metrics:
    granted: int = 0
    denied_static: int = 0
    denied_dynamic: int = 0
    denied_penalty: int = 0
    access_requests: int = 0
    penalties_by_kind: Counter = field(default_factory=Counter)
    route_hops: list = field(default_factory=list)
    blocks_sealed: int = 0

    @property
    def mean_route_hops(self) -> Optional[Fraction]:
        if not self.route_hops:
            return None
        return Fraction(sum(self.route_hops), len(self.route_hops))

    @property
    def denied(self) -> int:
        return self.denied_static + self.denied_dynamic + self.denied_penalty

    def to_dict(self) -> dict:
        mean = self.mean_route_hops
        return {
            "granted": self.granted,
            "denied_static": self.denied_static,
            "denied_dynamic": self.denied_dynamic,
            "denied_penalty": self.denied_penalty,
            "access_requests": self.access_requests,
            "penalties_by_kind": dict(sorted(self.penalties_by_kind.items())),
            "lookups": len(self.route_hops),
            "mean_route_hops": None if mean is None else f"{mean.numerator}/{mean.denominator}",
            "blocks_sealed": self.blocks_sealed,
        }


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    trace: list[TraceEvent]
    metrics: Metrics
    chain: Chain
    world: WorldState
    network: overlay.NetworkState

    @property
    def state_dump(self) -> bytes:
        return self.world.dump()

    def footer(self) -> dict:
        return {
            "state_sha256": hashlib.sha256(self.state_dump).hexdigest(),
            "chain_tip": self.chain.tip.hash.hex(),
            "blocks": len(self.chain),
        }

    def trace_lines(self) -> bytes:
        header = {"format": TRACE_FORMAT, "scenario": self.scenario.name, "seed": self.seed, "events": len(self.trace)}
        rows = [header, *(t.to_dict() for t in self.trace), {"final": self.footer()}]
        return b"".join(_canon(r) + b"\n" for r in rows)

    def metrics_json(self) -> bytes:
        body = {"scenario": self.scenario.name, "seed": self.seed, **self.metrics.to_dict()}
        return (json.dumps(body, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _canon(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


class _Sequencer:
    """Executes calls on the live state and batches them into blocks."""

    def __init__(self, config: ContractConfig):
        self.world = WorldState(config)
        self.chain = Chain()
        self.pending: list[Transaction] = []
        self.seq = 0

    def call(self, caller: str, contract: str, method: str, args: dict, now: int) -> tuple[str, int]:
        draft = Transaction(self.seq, caller, contract, method, args, now)
        outcome = contracts.execute(self.world, draft)
        self.pending.append(Transaction(self.seq, caller, contract, method, {**args, "outcome": outcome}, now))
        self.seq += 1
        # Index of the block this transaction will land in.
        block_index = self.chain.height + 1
        if len(self.pending) >= MAX_PENDING:
            self.seal()
        return outcome, block_index

    def seal(self) -> None:
        if self.pending:
            self.chain.seal(self.pending)
            self.pending = []


def _bootstrap(seq: _Sequencer, net: overlay.NetworkState, scenario: Scenario) -> None:
    creator = overlay.head_id(0)
    for record in contracts.default_registrations(creator):
        args = {k: v for k, v in record.to_dict().items() if k != "creator"}
        seq.call(creator, REGISTER_CONTRACT, "methodRegister", args, 0)
    for pid, group in overlay.initial_peers(scenario.n, scenario.members):
        seq.call(pid, REGISTER_CONTRACT, "peerJoin", {"role": net.role_of(pid).value, "group": group}, 0)
    seq.seal()


def _promotions(before: dict, net: overlay.NetworkState) -> list[str]:
    changed = []
    for pid, role in sorted(before.items()):
        if pid in net.peers and net.peers[pid].role is not role:
            changed.append(f"{pid}={net.peers[pid].role.value}")
    return changed


def run(scenario: Scenario, seed: Optional[int] = None) -> RunResult:
    """Execute every event; the result is a pure function of ``(scenario, seed)``.

    Nothing in the run draws random numbers; ``seed`` is carried into the
    trace header so a trace names the generator seed it came from.
    """
    seed = scenario.seed if seed is None else seed
    net = overlay.build_network(scenario.n, scenario.members)
    seq = _Sequencer(scenario.contract_config())
    metrics = Metrics()
    trace: list[TraceEvent] = []
    _bootstrap(seq, net, scenario)

    for index, event in enumerate(scenario.events):
        p = event.payload
        now = event.time
        block_index: Optional[int] = None
        try:
            if event.kind is EventKind.JOIN:
                actor = p["peer"]
                peer = net.join(actor, p["group"])
                outcome, block_index = seq.call(
                    actor, REGISTER_CONTRACT, "peerJoin", {"role": peer.role.value, "group": p["group"]}, now
                )
            elif event.kind is EventKind.LEAVE:
                actor = p["peer"]
                group = net.peer(actor).group
                before = {m: net.peers[m].role for m in net.groups[group].members}
                net.leave(actor)
                outcome, block_index = seq.call(actor, REGISTER_CONTRACT, "peerLeave", {}, now)
                promoted = _promotions(before, net)
                if promoted:
                    outcome += ";promoted:" + ",".join(promoted)
            elif event.kind is EventKind.ACCESS_REQUEST:
                actor = p["peer"]
                role = net.role_of(actor)
                args = {"role": role.value, "target": p.get("target") or p["resource"]}
                if "action" in p:
                    args["action"] = p["action"]
                outcome, block_index = seq.call(actor, contracts.reference_acc_for(role), "accessRequest", args, now)
                _count_access(metrics, outcome)
            elif event.kind is EventKind.REPORT_MISBEHAVIOR:
                actor = p["reporter"]
                role = net.role_of(p["offender"])
                args = {"offender": p["offender"], "role": role.value, "event": p["event"], "detail": p.get("detail", "")}
                outcome, block_index = seq.call(actor, contracts.reference_acc_for(role), "reportMisbehavior", args, now)
                metrics.penalties_by_kind[Penalty.parse(outcome).kind.value] += 1
            elif event.kind is EventKind.LOOKUP:
                actor = p["peer"]
                route = net.route_lookup(actor, p["resource_type"])
                metrics.route_hops.append(route.hop_count)
                outcome = "route:" + ">".join(route.hops)
            else:
                actor = "-"
                outcome = "advance"
        except (overlay.OverlayError, contracts.ContractError, ledger.LedgerError) as exc:
            raise SimulationError(index, exc) from exc
        seq.seal()
        trace.append(TraceEvent(index, now, actor, event.kind.value, outcome, block_index))

    metrics.blocks_sealed = seq.chain.height
    return RunResult(scenario, seed, trace, metrics, seq.chain, seq.world, net)


def _count_access(metrics: Metrics, outcome: str) -> None:
    metrics.access_requests += 1
    decision = AccessDecision(outcome.split(":", 1)[0])
    if decision is AccessDecision.GRANTED:
        metrics.granted += 1
    elif decision is AccessDecision.DENIED_STATIC:
        metrics.denied_static += 1
    elif decision is AccessDecision.DENIED_PENALTY:
        metrics.denied_penalty += 1
    else:
        metrics.denied_dynamic += 1
        metrics.penalties_by_kind[Penalty.parse(outcome.split(":")[-1]).kind.value] += 1


def sequential_replay(transactions: Iterable[Transaction], config: ContractConfig) -> bytes:
    """Single-machine oracle: run every transaction in order on one fresh state."""
    world = WorldState(config)
    for tx in transactions:
        contracts.execute(world, tx)
    return world.dump()


def replicate(chain: Sequence[ledger.Block], config: ContractConfig, replicas: int = 3) -> list[Replica]:
    """Apply ``chain`` on independent replicas, one thread each."""

    def build(i: int) -> Replica:
        return Replica(f"r{i}", config).sync(chain)

    with ThreadPoolExecutor(max_workers=replicas) as pool:
        return list(pool.map(build, range(replicas)))


@dataclass(frozen=True)
class Trace:
    header: dict
    events: list[TraceEvent]
    final: dict

    @classmethod
    def parse(cls, data: bytes) -> "Trace":
        rows = [json.loads(line) for line in data.decode("utf-8").splitlines() if line.strip()]
        if len(rows) < 2 or rows[0].get("format") != TRACE_FORMAT or "final" not in rows[-1]:
            raise ValueError("not a chainacl trace")
        return cls(rows[0], [TraceEvent.from_dict(r) for r in rows[1:-1]], rows[-1]["final"])

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Trace":
        return cls.parse(Path(path).read_bytes())


@dataclass(frozen=True)
class Divergence:
    index: int
    reason: str


def replay(trace: Union[Trace, bytes], scenario: Scenario, replicas: int = 0) -> Optional[Divergence]:
    """Re-run ``scenario`` and compare it event by event with ``trace``.

    Returns ``None`` when everything matches. With ``replicas > 0`` the new
    chain is also applied on that many replicas whose state dumps must equal
    the run's. A mismatch after the last event is reported at index
    ``len(trace.events)``.
    """
    if isinstance(trace, (bytes, bytearray)):
        trace = Trace.parse(bytes(trace))
    result = run(scenario, trace.header.get("seed"))
    for i, (want, got) in enumerate(zip(trace.events, result.trace)):
        if want != got:
            return Divergence(i, f"expected {want.to_dict()}, got {got.to_dict()}")
    end = len(trace.events)
    if len(result.trace) != end:
        return Divergence(min(end, len(result.trace)), f"trace has {end} events, run produced {len(result.trace)}")
    if trace.final != result.footer():
        return Divergence(end, "final state or chain differs")
    if replicas:
        dump = result.state_dump
        for r in replicate(result.chain.blocks, result.world.config, replicas):
            if r.dump() != dump or r.tip_hash != result.chain.tip.hash:
                return Divergence(end, f"replica {r.id} disagrees with the run")
    return None
