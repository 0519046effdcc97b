from pathlib import Path

import pytest

from chainacl.ledger import Chain, Transaction

ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = ROOT / "scenarios"


def join_tx(seq, peer, role="RegularMember", t=0):
    return Transaction(seq, peer, "RC", "peerJoin", {"role": role, "group": 0}, t)


def build_chain(blocks, per_block=2):
    """Genesis plus ``blocks`` sealed blocks of peer-join transactions."""
    chain = Chain()
    seq = 0
    for b in range(blocks):
        txs = []
        for _ in range(per_block):
            txs.append(join_tx(seq, f"peer{seq}", t=b))
            seq += 1
        chain.seal(txs)
    return chain


@pytest.fixture
def chain5():
    return build_chain(5)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR
