"""Shared harness for running one call under each leash mode."""

import random

from shortleash.blocktree import BlockCtx, BlockTree
from shortleash.contracts import counter, well_known
from shortleash.crypto import Keypair, ZERO_DIGEST, sha256
from shortleash.leash import (
    GATEWAY_ACCOUNT, LeashVerdict, PASS, gateway_contract, gateway_encode, script_verdict, wrap_script,
)
from shortleash.records import Call, LeashParams, make_txn
from shortleash.state import DbState
from shortleash.vm import VM, fund, install_contract

from conftest import make_block

MODES = ("metadata", "wrapper", "gateway")
ALICE = Keypair.derive("leash-alice")
TARGET = well_known("leash-target")
WRAPPER = well_known("leash-wrapper")
OTHER_FORK = sha256(b"some other fork")


class World:
    """A main chain with one side branch hanging off it."""

    def __init__(self, rng: random.Random, main: int = 40, side: int = 12):
        self.tree = BlockTree()
        self.main = [self.tree.insert(make_block(None, 0))]
        for h in range(1, main):
            self.main.append(self.tree.insert(make_block(self.main[-1], h)))
        branch = rng.randrange(1, main - side)
        self.side = [self.main[branch]]
        for h in range(branch + 1, branch + side + 1):
            self.side.append(self.tree.insert(make_block(self.side[-1], h, tag=999)))
        self.side = self.side[1:]

    def ctx(self, parent, window=256, fork_id=ZERO_DIGEST):
        return BlockCtx(self.tree, parent, fork_id, window)


def random_params(rng: random.Random, w: World, parent) -> LeashParams:
    """Leash parameters hitting every branch of the check, relative to ``parent``."""
    d = w.tree.depth(parent)
    kind = rng.choice(["good", "good", "side", "future", "expired", "fork", "junk", "zero"])
    i = rng.randrange(0, d + 1)
    v = w.tree.up(parent, d - i)
    l = rng.randrange(d - i + 1, d - i + 20)
    fork = ZERO_DIGEST
    if kind == "side":
        sb = rng.choice(w.side)
        i, v = w.tree.depth(sb), sb
        l = max(l, d - i + 1) if d >= i else rng.randrange(1, 30)
    elif kind == "future":
        i = d + rng.randrange(1, 10)
        v = sha256(i.to_bytes(8, "big"))
    elif kind == "expired":
        l = rng.randrange(1, d - i + 1) if d > i else 0
    elif kind == "fork":
        fork = OTHER_FORK
    elif kind == "junk":
        v = sha256(rng.randbytes(8))
    elif kind == "zero":
        l = 0
    return LeashParams(i, v, l, fork)


def base_db(params: LeashParams, target=None, target_storage=None) -> DbState:
    """Funds, the target, the gateway and this case's wrapper, identical for every mode."""
    db = fund(DbState(), {ALICE.account: 1_000_000})
    db = install_contract(db, TARGET, target or counter(), storage=target_storage)
    db = install_contract(db, GATEWAY_ACCOUNT, gateway_contract())
    return install_contract(db, WRAPPER, wrap_script(TARGET, params))


def run_mode(mode: str, db: DbState, params: LeashParams | None, ctx: BlockCtx, calldata: bytes = b"",
             vm: VM | None = None, nonce: int = 0):
    """Submit a call to the target under ``mode``; ``params=None`` sends it unleashed."""
    vm = vm or VM()
    if params is None:
        txn = make_txn(ALICE, nonce, Call(TARGET, calldata))
    elif mode == "metadata":
        txn = make_txn(ALICE, nonce, Call(TARGET, calldata), leash=params)
    elif mode == "wrapper":
        txn = make_txn(ALICE, nonce, Call(WRAPPER, calldata))
    elif mode == "gateway":
        txn = make_txn(ALICE, nonce, Call(GATEWAY_ACCOUNT, gateway_encode(params, TARGET, calldata)))
    else:
        raise ValueError(mode)
    post, receipt = vm.apply_txn(db, txn, ctx)
    if params is None:
        verdict = PASS
    elif mode == "metadata":
        verdict = PASS if receipt.leash_reason is None else LeashVerdict(False, receipt.leash_reason)
    else:
        verdict = script_verdict(receipt)
    return verdict, post, receipt


