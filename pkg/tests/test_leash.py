import random

import pytest
from hypothesis import given, settings, strategies as st

from shortleash.blocktree import BlockCtx
from shortleash.contracts import counter
from shortleash.crypto import ZERO_DIGEST
from shortleash.encoding import MAX_U256, u256
from shortleash.leash import (
    GATEWAY_ACCOUNT, PREFIX_SIZE, STATUS_PREFIX_SIZE, CalldataTooLong, GatewayFault, LeashReason, MalformedParams,
    anchor_at, gateway_decode, gateway_encode, gateway_result, leash_check, script_verdict, wrap_metadata,
    wrap_script,
)
from shortleash.records import Call, LeashParams, Transfer, make_txn
from shortleash.script import assemble
from shortleash.state import DbState
from shortleash.vm import FEE_SINK, VM, BadSignature, LeashOutcome, Status, VMConfig, fund, install_contract

from conftest import linear_tree, random_tree
from leashkit import ALICE, MODES, OTHER_FORK, TARGET, WRAPPER, World, base_db, random_params, run_mode

FEE = VMConfig().base_fee


def oracle(tree, parent, p, fork_id=ZERO_DIGEST):
    """Direct reading of the leash predicate via the ancestor path, ignoring reason order."""
    path = tree.path_from_genesis(parent)
    d = len(path) - 1
    return (p.fork_id == fork_id and p.anchor_height <= d < p.anchor_height + p.length
            and path[p.anchor_height] == p.anchor_hash)


@pytest.fixture
def world():
    return World(random.Random(7))


def test_anchor_at_parent_with_length_one_passes(world):
    parent = world.main[20]
    p = anchor_at(world.tree, parent, 1, ZERO_DIGEST)
    assert leash_check(p, world.ctx(parent)).passed
    # one block later the same leash has expired
    assert leash_check(p, world.ctx(world.main[21])).reason is LeashReason.LEASH_EXPIRED


def test_reasons(world):
    parent = world.main[-1]
    d = world.tree.depth(parent)
    ctx = world.ctx(parent)
    side = world.side[-1]
    cases = [
        (LeashParams(5, world.main[5], 100, OTHER_FORK), LeashReason.FORK_MISMATCH),
        (LeashParams(d + 1, ZERO_DIGEST, 100, ZERO_DIGEST), LeashReason.ANCHOR_IN_FUTURE),
        (LeashParams(5, world.main[5], d - 5, ZERO_DIGEST), LeashReason.LEASH_EXPIRED),
        (LeashParams(world.tree.depth(side), side, 100, ZERO_DIGEST), LeashReason.ANCHOR_HASH_MISMATCH),
        (LeashParams(MAX_U256, world.main[5], 1, ZERO_DIGEST), LeashReason.MALFORMED),
        (LeashParams(5, world.main[5], 0, ZERO_DIGEST), LeashReason.LEASH_EXPIRED),
    ]
    for p, reason in cases:
        assert leash_check(p, ctx).reason is reason
    assert leash_check(LeashParams(5, world.main[5], d - 4, ZERO_DIGEST), ctx).passed


def test_zero_length_never_passes_even_in_the_future(world):
    ctx = world.ctx(world.main[10])
    for i in range(0, 40):
        assert leash_check(LeashParams(i, world.main[min(i, 39)], 0, ZERO_DIGEST), ctx).reason is \
            LeashReason.LEASH_EXPIRED


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 40), st.data())
def test_predicate_matches_oracle(seed, n, data):
    tree, ids = random_tree(random.Random(seed), n)
    parent = data.draw(st.sampled_from(ids))
    anchor = data.draw(st.sampled_from(ids))
    i = data.draw(st.one_of(st.just(tree.depth(anchor)), st.integers(0, 45)))
    p = LeashParams(i, anchor, data.draw(st.integers(0, 45)), ZERO_DIGEST)
    assert leash_check(p, BlockCtx(tree, parent)).passed == oracle(tree, parent, p)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 40), st.data())
def test_nullification(seed, n, data):
    """An anchor off the executing block's ancestor path never passes, whatever i and l."""
    tree, ids = random_tree(random.Random(seed), n)
    parent = data.draw(st.sampled_from(ids))
    off_path = [b for b in ids if not tree.is_ancestor_of(b, parent)]
    if not off_path:
        return
    anchor = data.draw(st.sampled_from(off_path))
    i = data.draw(st.integers(0, 50))
    for l in (0, 1, 50, MAX_U256 - i):
        assert not leash_check(LeashParams(i, anchor, l, ZERO_DIGEST), BlockCtx(tree, parent)).passed


# metadata mode


def test_metadata_leashed_transfer_commits(world):
    db = fund(DbState(), {ALICE.account: 10_000})
    p = anchor_at(world.tree, world.main[30], 5, ZERO_DIGEST)
    txn = make_txn(ALICE, 0, Transfer(123, 7), leash=p)
    post, r = VM().apply_txn(db, txn, world.ctx(world.main[32]))
    assert r.committed and r.leash_outcome is LeashOutcome.PASSED and post.balance(123) == 7


def test_metadata_stale_leash_costs_only_the_fee(world):
    p = anchor_at(world.tree, world.main[10], 5, ZERO_DIGEST)
    db = base_db(p)
    db = install_contract(db, TARGET, counter(), storage={0: 41})
    calls = []

    class Spy(VM):
        def execute_script(self, *a, **kw):
            calls.append(a)
            return super().execute_script(*a, **kw)

    _, post, r = run_mode("metadata", db, p, world.ctx(world.main[30]), vm=Spy())
    assert r.status is Status.REVERTED and r.leash_reason is LeashReason.LEASH_EXPIRED
    assert r.leash_outcome is LeashOutcome.REVERTED_BY_LEASH and r.gas_used == 0
    assert post.nonce(ALICE.account) == 1 and post.balance(FEE_SINK) == FEE
    assert post.contract_states() == db.contract_states()
    assert calls == []


def test_metadata_fork_mismatch_after_hard_fork(world):
    p = anchor_at(world.tree, world.main[30], 5, ZERO_DIGEST)
    _, _, r = run_mode("metadata", base_db(p), p, world.ctx(world.main[31], fork_id=OTHER_FORK))
    assert r.describe() == "Reverted(ForkMismatch)"


def test_leash_is_covered_by_signature(world):
    p = anchor_at(world.tree, world.main[30], 5, ZERO_DIGEST)
    signed = make_txn(ALICE, 0, Call(TARGET, b""), leash=p)
    stripped = signed.__class__(**{**signed.__dict__, "leash": None})
    with pytest.raises(BadSignature):
        VM().apply_txn(base_db(p), stripped, world.ctx(world.main[31]))


def test_wrap_metadata(world):
    p = anchor_at(world.tree, world.main[3], 2, ZERO_DIGEST)
    t = wrap_metadata(make_txn(ALICE, 0, Transfer(1, 1)), p, ALICE)
    assert t.leash == p and t.signature_ok()
    with pytest.raises(MalformedParams):
        wrap_metadata(t, LeashParams(MAX_U256, ZERO_DIGEST, 1, ZERO_DIGEST), ALICE)


# wrapper mode


def test_wrapper_blockhash_window():
    tree, ids = linear_tree(302)
    ctx = BlockCtx(tree, ids[300], window=256)
    p = LeashParams(0, ids[0], 400, ZERO_DIGEST)
    for full_domain, expect in ((False, "Reverted(AnchorHashMismatch)"), (True, "Committed")):
        db = install_contract(base_db(p), WRAPPER, wrap_script(TARGET, p, full_domain=full_domain))
        verdict, post, r = run_mode("wrapper", db, p, ctx)
        outcome = "Committed" if r.committed else f"Reverted({verdict.reason.name.title().replace('_', '')})"
        assert outcome == expect
    # the metadata mode agrees with the full-domain wrapper
    assert leash_check(p, ctx).passed


def test_wrapper_forwards_calldata_and_return(world):
    p = anchor_at(world.tree, world.main[30], 5, ZERO_DIGEST)
    _, post, r = run_mode("wrapper", base_db(p, target_storage={0: 9}), p, world.ctx(world.main[31]))
    assert r.committed and r.return_data == u256(10) and post.load(TARGET, 0) == 10


# gateway mode


@given(st.integers(0, MAX_U256), st.binary(min_size=32, max_size=32), st.integers(0, MAX_U256),
       st.binary(min_size=32, max_size=32), st.integers(0, MAX_U256), st.binary(max_size=200))
def test_gateway_roundtrip(i, v, l, fork, target, inner):
    p = LeashParams(i, v, l, fork)
    data = gateway_encode(p, target, inner)
    assert len(data) == PREFIX_SIZE + len(inner) == 224 + len(inner)
    call = gateway_decode(data)
    assert (call.params, call.target, call.inner) == (p, target, inner)


def test_gateway_encode_limits():
    p = LeashParams(0, ZERO_DIGEST, 1, ZERO_DIGEST)
    with pytest.raises(CalldataTooLong):
        gateway_encode(p, 1, bytes(4096 - 224 + 1))
    with pytest.raises(ValueError):
        gateway_decode(bytes(100))
    bad = bytearray(gateway_encode(p, 1, b""))
    bad[-1] = 1
    with pytest.raises(ValueError):
        gateway_decode(bytes(bad))


def test_gateway_counter(world):
    p = anchor_at(world.tree, world.main[30], 5, ZERO_DIGEST)
    db = base_db(p, target_storage={0: 4})
    _, post, r = run_mode("gateway", db, p, world.ctx(world.main[33]))
    assert r.committed and post.load(TARGET, 0) == 5
    assert len(r.return_data) == STATUS_PREFIX_SIZE + 32
    assert gateway_result(r.return_data) == (1, u256(5))
    side = world.side[-1]
    bad = anchor_at(world.tree, side, 50, ZERO_DIGEST)
    verdict, post, r = run_mode("gateway", db, bad, world.ctx(world.main[-1]))
    assert verdict.reason is LeashReason.ANCHOR_HASH_MISMATCH and post.load(TARGET, 0) == 4


def test_gateway_faults(world):
    p = anchor_at(world.tree, world.main[30], 5, ZERO_DIGEST)
    db = base_db(p)
    ctx = world.ctx(world.main[31])
    vm = VM()
    cases = [
        (gateway_encode(p, 0xDEAD, b""), GatewayFault.NO_TARGET),
        (gateway_encode(p, TARGET, b"")[:100], GatewayFault.BAD_FORMAT),
        (u256(2) + gateway_encode(p, TARGET, b"")[32:], GatewayFault.BAD_FORMAT),
        (gateway_encode(p, TARGET, b"")[:192] + u256(1), GatewayFault.BAD_FORMAT),
    ]
    for calldata, fault in cases:
        _, r = vm.apply_txn(db, make_txn(ALICE, 0, Call(GATEWAY_ACCOUNT, calldata)), ctx)
        assert script_verdict(r).reason is fault
    failing = install_contract(db, TARGET, assemble("REVERT 9"))
    _, r = vm.apply_txn(failing, make_txn(ALICE, 0, Call(GATEWAY_ACCOUNT, gateway_encode(p, TARGET, b""))), ctx)
    assert script_verdict(r).reason is GatewayFault.INNER_FAILED


# modes together


def test_modes_agree_with_predicate_and_each_other():
    rng = random.Random(11)
    w = World(rng)
    for _ in range(60):
        parent = rng.choice(w.main[1:])
        p = random_params(rng, w, parent)
        ctx = w.ctx(parent)
        want = leash_check(p, ctx)
        db = base_db(p)
        roots = set()
        for mode in MODES:
            verdict, post, _ = run_mode(mode, db, p, ctx)
            assert verdict == want, (mode, p)
            roots.add(post.root)
        assert len(roots) == 1


def test_window_consistency():
    rng = random.Random(5)
    w = World(rng, main=60)
    window = 8
    for _ in range(80):
        parent = rng.choice(w.main[1:])
        p = random_params(rng, w, parent)
        ctx = w.ctx(parent, window=window)
        db = install_contract(base_db(p), WRAPPER, wrap_script(TARGET, p, full_domain=False))
        windowed, _, _ = run_mode("wrapper", db, p, ctx)
        metadata, _, _ = run_mode("metadata", db, p, ctx)
        if w.tree.depth(parent) - p.anchor_height < window:
            assert windowed == metadata
        else:
            assert not windowed.passed
