import warnings

import pytest

from shortleash.blocktree import BlockCtx
from shortleash.consensus import LightClientState, light_verify
from shortleash.crypto import sha256
from shortleash.leash import leash_check
from shortleash.replay import (
    ALL_FIXED, BUGGY, LEASH_ANCHOR, LEASHED_HEIGHT, RECORDER, SUB_FIXED, TICKETS, CollisionFound, ForkedHash,
    IndexOutOfRange, NoSemanticChange, SwizzleError, SwizzleMap, build_demo_chain, collision_check,
    compose_swizzles, demo_double_fork, is_injective_on, random_corpus, replay_from, swizzle_apply,
)
from shortleash.vm import VM, LeashOutcome


@pytest.fixture(scope="module")
def demo():
    return build_demo_chain()


@pytest.fixture(scope="module")
def forks():
    return demo_double_fork()


def oracle_g(pairs):
    """The swizzler written out as its three cases."""
    def g(x):
        for a, b in pairs:
            if x == a:
                return b
            if x == b:
                return a
        return x
    return g


def blocks(chain):
    return [chain.tree.get(b) for b in chain.path()]


def test_identity_replay_is_degenerate(demo):
    with pytest.warns(NoSemanticChange):
        r = replay_from(demo.chain, 5, VM(BUGGY))
    assert r.degenerate and len(r.swizzle) == 0
    assert [b.serialize() for b in blocks(r.forked)] == [b.serialize() for b in blocks(demo.chain)]


def test_bad_z(demo):
    for z in (0, -1, demo.chain.height + 1):
        with pytest.raises(IndexOutOfRange):
            replay_from(demo.chain, z, VM(SUB_FIXED))


def test_pointer_stability(forks):
    demo, first, _ = forks
    old, new = blocks(demo.chain), blocks(first.forked)
    assert len(old) == len(new) == 21
    g = oracle_g(first.swizzle.pairs)
    for j in range(5):
        assert new[j].serialize() == old[j].serialize()
    changed = 0
    for j in range(5, 21):
        assert g(sha256(new[j].serialize())) == sha256(old[j].serialize())
        assert new[j].parent == old[j].parent and new[j].txs == old[j].txs
        changed += new[j].state_root != old[j].state_root
    assert new[5].state_root != old[5].state_root
    assert changed == len(first.swizzle)
    assert all(r["stable"] for r in first.pointer_table())


def test_fix_changes_the_ticket_outcome(forks):
    demo, first, _ = forks
    bid = demo.chain.at_height(5)
    old_receipts = [r.describe() for r in demo.chain.receipts[bid]]
    new_receipts = [r.describe() for r in first.forked.receipts[bid]]
    assert old_receipts[-1] == "Committed" and new_receipts[-1] == "Reverted(ArithmeticOverflow)"
    assert demo.chain.state().load(TICKETS, 0) != first.forked.state().load(TICKETS, 0)


def test_blockhash_values_survive_replay(forks):
    demo, first, second = forks
    recorded = demo.chain.state().get(RECORDER).storage
    assert recorded == first.forked.state().get(RECORDER).storage == second.forked.state().get(RECORDER).storage
    assert recorded[20] == int.from_bytes(demo.chain.at_height(17), "big")


def test_leash_anchored_before_the_fork_still_passes(forks):
    demo, first, second = forks
    for fork in (first, second):
        chain = fork.forked
        bid = chain.at_height(LEASHED_HEIGHT)
        leashed = [r for r in chain.receipts[bid] if r.leash_outcome is not LeashOutcome.NOT_LEASHED]
        assert [r.leash_outcome for r in leashed] == [LeashOutcome.PASSED]
        txn = next(t for t in chain.block(bid).txs if t.leash is not None)
        assert txn.leash.anchor_hash == demo.chain.at_height(LEASH_ANCHOR)
        ctx = BlockCtx(chain.tree, chain.at_height(LEASHED_HEIGHT - 1))
        assert leash_check(txn.leash, ctx).passed


def test_forked_chain_is_light_verifiable_under_h_prime(forks):
    demo, first, _ = forks
    chain = first.forked
    g0 = chain.block(chain.genesis)
    client = LightClientState.trusting(g0, chain.committees[0], hasher=first.hasher)
    segment = blocks(chain)[1:]
    assert light_verify(client, segment, hasher=first.hasher).accepted
    # under the plain hash the re-rooted blocks no longer link
    assert not light_verify(client, segment, hasher=sha256).accepted


def test_double_fork(forks):
    demo, first, second = forks
    assert all(r["stable"] for r in second.pointer_table())
    h2 = compose_swizzles(second.swizzle, first.swizzle)
    old, final = blocks(demo.chain), blocks(second.forked)
    for j in range(21):
        assert h2(sha256(final[j].serialize())) == sha256(old[j].serialize())
        assert final[j].parent == old[j].parent
    domain = h2.digests()
    assert is_injective_on(h2, domain)
    assert all(h2.inverse(h2.apply(x)) == x for x in domain)


def test_second_fix_alone_with_all_fixed():
    demo = build_demo_chain()
    r = replay_from(demo.chain, 12, VM(ALL_FIXED))
    assert all(row["stable"] for row in r.pointer_table())


def test_swizzle_map_cases(forks):
    _, first, _ = forks
    g = first.swizzle
    a, b = g.pairs[0]
    assert swizzle_apply(g, b) == a and swizzle_apply(g, a) == b
    other = sha256(b"unrelated")
    assert swizzle_apply(g, other) == other
    for x in list(g.digests()) + [other]:
        assert g(g(x)) == x
    assert len(g.digests()) == 2 * len(g)
    assert SwizzleMap.from_dict(g.to_dict()).pairs == g.pairs


def test_swizzle_map_rejects_bad_pairs():
    a, b, c = (sha256(bytes([k])) for k in range(3))
    g = SwizzleMap([(a, b)])
    for pair in ((a, c), (c, b), (c, c), (b"short", c)):
        with pytest.raises(SwizzleError):
            g.add(*pair)
    with pytest.raises(SwizzleError):
        SwizzleMap.from_dict({"format": "nope", "pairs": []})


def test_compose_with_empty_inner(forks):
    _, first, _ = forks
    c = compose_swizzles(first.swizzle, SwizzleMap())
    for x in list(first.swizzle.digests()) + [sha256(b"x")]:
        assert c(x) == first.swizzle(x)


def test_collision_check(forks):
    demo, first, second = forks
    h2 = ForkedHash(sha256, compose_swizzles(second.swizzle, first.swizzle))
    corpus = [b.serialize() for c in (demo.chain, first.forked, second.forked) for b in blocks(c)]
    corpus += random_corpus(2000)
    report = collision_check(h2, corpus)
    assert report.checked == len(corpus)
    with pytest.raises(CollisionFound):
        collision_check(lambda x: sha256(x[:1]), [b"ab", b"ac"])


def test_replay_does_not_touch_original(demo):
    before = [b.serialize() for b in blocks(demo.chain)]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        replay_from(demo.chain, 5, VM(SUB_FIXED))
    assert [b.serialize() for b in blocks(demo.chain)] == before
