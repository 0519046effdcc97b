"""Hash-chained transaction log and replicas that re-execute it.

A block's hash is SHA-256 over the canonical JSON of ``(index, prev_hash, txs)``.
Chains serialize to "block-lines": one canonical JSON block per line.
Replicas rebuild contract state purely from the blocks they have applied.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Optional, Sequence

from . import contracts

DIGEST_SIZE = 32
ZERO_HASH = bytes(DIGEST_SIZE)
# Seal once this many transactions are pending, even mid-step.
MAX_PENDING = 16


class LedgerError(Exception):
    pass


class UnencodableArgument(LedgerError):
    pass


class EmptyPending(LedgerError):
    pass


class HeightMismatch(LedgerError):
    pass


class InvalidBlock(LedgerError):
    pass


class ForkDetected(LedgerError):
    pass


def _dumps(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (str, int))


def _check_args(args: Mapping[str, Any]) -> None:
    for key, value in args.items():
        if not isinstance(key, str):
            raise UnencodableArgument(f"argument key {key!r} is not a string")
        if _is_scalar(value):
            continue
        if isinstance(value, (list, tuple)) and all(_is_scalar(v) for v in value):
            continue
        raise UnencodableArgument(f"argument {key!r} has unsupported value {value!r}")


@dataclass(frozen=True)
class Transaction:
    seq: int
    caller: str
    contract: str
    method: str
    args: Mapping[str, Any]
    timestamp: int

    def __post_init__(self) -> None:
        _check_args(self.args)
        frozen = {k: tuple(v) if isinstance(v, (list, tuple)) else v for k, v in self.args.items()}
        object.__setattr__(self, "args", MappingProxyType(frozen))

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "caller": self.caller,
            "contract": self.contract,
            "method": self.method,
            "args": {k: list(v) if isinstance(v, tuple) else v for k, v in self.args.items()},
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Transaction":
        if set(d) != {"seq", "caller", "contract", "method", "args", "timestamp"}:
            raise ValueError(f"unexpected transaction fields {sorted(d)}")
        return cls(d["seq"], d["caller"], d["contract"], d["method"], d["args"], d["timestamp"])


def canonical_encode(tx: Transaction) -> bytes:
    """UTF-8 JSON, sorted keys, no insignificant whitespace."""
    _check_args(tx.args)
    return _dumps(tx.to_dict())


def block_digest(index: int, prev_hash: bytes, txs: Sequence[Transaction]) -> bytes:
    payload = {"index": index, "prev_hash": prev_hash.hex(), "txs": [tx.to_dict() for tx in txs]}
    return hashlib.sha256(_dumps(payload)).digest()


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    txs: tuple
    hash: bytes

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "prev_hash": self.prev_hash.hex(),
            "txs": [tx.to_dict() for tx in self.txs],
            "hash": self.hash.hex(),
        }

    def to_line(self) -> bytes:
        return _dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Block":
        if set(d) != {"index", "prev_hash", "txs", "hash"}:
            raise ValueError(f"unexpected block fields {sorted(d)}")
        return cls(
            d["index"],
            bytes.fromhex(d["prev_hash"]),
            tuple(Transaction.from_dict(t) for t in d["txs"]),
            bytes.fromhex(d["hash"]),
        )

    def valid_hash(self) -> bool:
        return self.hash == block_digest(self.index, self.prev_hash, self.txs)


GENESIS = Block(0, ZERO_HASH, (), block_digest(0, ZERO_HASH, ()))


def seal_block(pending: Sequence[Transaction], tip: Block) -> Block:
    if not pending:
        raise EmptyPending("nothing to seal")
    last_seq = tip.txs[-1].seq if tip.txs else None
    for tx in pending:
        if last_seq is not None and tx.seq <= last_seq:
            raise InvalidBlock(f"transaction seq {tx.seq} does not follow {last_seq}")
        last_seq = tx.seq
    txs = tuple(pending)
    index = tip.index + 1
    return Block(index, tip.hash, txs, block_digest(index, tip.hash, txs))


@dataclass(frozen=True)
class TamperReport:
    index: int
    reason: str


class Chain:
    """An append-only list of linked blocks, starting at genesis."""

    def __init__(self, blocks: Optional[Iterable[Block]] = None):
        self.blocks: list[Block] = list(blocks) if blocks is not None else [GENESIS]

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]

    def __iter__(self):
        return iter(self.blocks)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.index

    def seal(self, pending: Sequence[Transaction]) -> Block:
        block = seal_block(pending, self.tip)
        self.blocks.append(block)
        return block

    def transactions(self) -> list[Transaction]:
        return [tx for b in self.blocks for tx in b.txs]

    def to_lines(self) -> bytes:
        return b"".join(b.to_line() + b"\n" for b in self.blocks)

    @classmethod
    def from_lines(cls, data: bytes) -> "Chain":
        """Parse and verify a block-lines dump. Raises ``InvalidBlock`` naming the bad block."""
        report = verify_chain_lines(data)
        if report is not None:
            raise InvalidBlock(f"block {report.index}: {report.reason}")
        return cls(_parse_lines(data)[0])


def verify_chain(chain: Iterable[Block]) -> Optional[TamperReport]:
    """Return ``None`` when every block is intact and linked, else the lowest bad index."""
    prev: Optional[Block] = None
    last_seq: Optional[int] = None
    for i, block in enumerate(chain):
        if block.index != i:
            return TamperReport(i, f"index {block.index} at position {i}")
        if i == 0:
            if block.prev_hash != ZERO_HASH or block.txs:
                return TamperReport(0, "malformed genesis")
        elif block.prev_hash != prev.hash:
            return TamperReport(i, "prev_hash does not match previous block")
        if not block.valid_hash():
            return TamperReport(i, "hash mismatch")
        for tx in block.txs:
            if last_seq is not None and tx.seq <= last_seq:
                return TamperReport(i, "transaction seq not increasing")
            last_seq = tx.seq
        prev = block
    if prev is None:
        return TamperReport(0, "empty chain")
    return None


def _parse_lines(data: bytes) -> tuple[list[Block], Optional[TamperReport]]:
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    blocks = []
    for i, line in enumerate(lines):
        try:
            block = Block.from_dict(json.loads(line.decode("utf-8")))
        except (ValueError, TypeError, KeyError, LedgerError, AttributeError) as exc:
            return blocks, TamperReport(i, f"unparseable: {exc}")
        # Non-canonical bytes (case, spacing, key order) count as tampering.
        if block.to_line() != line:
            return blocks, TamperReport(i, "non-canonical encoding")
        blocks.append(block)
    return blocks, None


def verify_chain_lines(data: bytes) -> Optional[TamperReport]:
    """Verify a block-lines dump byte-for-byte."""
    blocks, report = _parse_lines(data)
    structural = verify_chain(blocks) if blocks else TamperReport(0, "empty chain")
    if report is None:
        return structural
    if structural is not None and structural.index < report.index:
        return structural
    return report


class Replica:
    """One node's copy of the contract state, driven only by applied blocks.

    Not thread-safe; run one writer per replica.
    """

    def __init__(self, replica_id: str, config: Optional[contracts.ContractConfig] = None):
        self.id = replica_id
        self.config = config or contracts.ContractConfig()
        self.state = contracts.WorldState(self.config)
        self.applied: list[bytes] = []

    @property
    def applied_height(self) -> int:
        return len(self.applied) - 1

    def apply_block(self, block: Block) -> "Replica":
        if block.index != self.applied_height + 1:
            raise HeightMismatch(f"replica {self.id} at height {self.applied_height}, got block {block.index}")
        expected_prev = self.applied[-1] if self.applied else ZERO_HASH
        if block.prev_hash != expected_prev or not block.valid_hash():
            raise InvalidBlock(f"block {block.index} fails hash or linkage check")
        if block.index == 0 and block.txs:
            raise InvalidBlock("genesis must be empty")
        for tx in block.txs:
            try:
                outcome = contracts.execute(self.state, tx)
            except contracts.ContractError as exc:
                raise InvalidBlock(f"block {block.index} tx {tx.seq} failed: {exc!r}") from exc
            recorded = tx.args.get("outcome")
            if recorded is not None and recorded != outcome:
                raise InvalidBlock(f"block {block.index} tx {tx.seq}: recorded {recorded!r}, executed {outcome!r}")
        self.applied.append(block.hash)
        return self

    def sync(self, chain: Sequence[Block]) -> "Replica":
        for i, h in enumerate(self.applied):
            if i >= len(chain) or chain[i].hash != h:
                raise ForkDetected(f"replica {self.id} diverges from chain at block {i}")
        for block in list(chain)[len(self.applied):]:
            self.apply_block(block)
        return self

    def dump(self) -> bytes:
        return self.state.dump()

    @property
    def tip_hash(self) -> bytes:
        return self.applied[-1] if self.applied else ZERO_HASH


def apply_block(replica: Replica, block: Block) -> Replica:
    return replica.apply_block(block)


def sync(replica: Replica, chain: Sequence[Block]) -> Replica:
    return replica.sync(chain)
