import random
from dataclasses import replace

import pytest

from shortleash.adversary import InsufficientKeys, SideChainPlan, build_side_chain, leak_keys
from shortleash.consensus import BadQuorum, RejectReason, committee_of, light_verify, mint_block, register_transition
from shortleash.crypto import Keypair
from shortleash.records import Committee
from shortleash.state import DbState

from chainkit import client_at, random_history, rotating_chain, segment, validators


def test_committee_threshold_is_bft():
    for n in range(1, 20):
        c = committee_of(0, validators(0, n))
        assert 3 * c.threshold > 2 * n and 3 * (c.threshold - 1) <= 2 * n
    with pytest.raises(ValueError):
        Committee(0, tuple(k.public for k in validators(0, 4)), 2)


def test_quorum_accepts_three_of_four_and_rejects_two():
    chain = rotating_chain(2, 100)
    client = client_at(chain, 2)
    keys = chain.keys[0]
    for signers, ok in ((keys[:3], True), (keys, True), (keys[:2], False), (keys[1:3], False)):
        b = mint_block(signers, chain.tree, chain.tip)
        v = light_verify(client, [b])
        assert v.accepted is ok
        if not ok:
            assert v.reason is RejectReason.BAD_QUORUM and v.at_index == 0


def test_duplicate_and_foreign_signatures_do_not_count():
    chain = rotating_chain(1, 100)
    keys = chain.keys[0]
    b = mint_block(keys[:2], chain.tree, chain.tip)
    payload = b.signing_payload()
    outsider = Keypair.derive("outsider")
    padded = replace(b, committee_sigs=b.committee_sigs + (b.committee_sigs[0], (outsider.public, outsider.sign(payload))))
    assert light_verify(client_at(chain, 1), [padded]).reason is RejectReason.BAD_QUORUM


def test_honest_segment_with_rotation_accepted():
    chain = rotating_chain(10, 4)
    v = light_verify(client_at(chain, 0), segment(chain, 0))
    assert v.accepted and v.client.trusted_block == chain.tip
    assert v.client.epoch == chain.block().epoch == 2


def test_link_and_height_errors():
    chain = rotating_chain(6, 100)
    blocks = segment(chain, 0)
    client = client_at(chain, 0)
    assert light_verify(client, blocks[1:]).reason is RejectReason.BAD_LINK
    assert light_verify(client, [blocks[0], blocks[2]]).reason is RejectReason.BAD_LINK
    bad_height = replace(blocks[0], height=5)
    assert light_verify(client, [bad_height]).reason is RejectReason.BAD_HEIGHT
    assert light_verify(client, []).accepted


def test_forged_transition_rejected():
    chain = rotating_chain(3, 100)
    outsiders = [Keypair.derive(f"outsider-{k}") for k in range(4)]
    new = committee_of(1, outsiders)
    forged = register_transition(chain.committees[0], new, outsiders, strict=False)
    b = mint_block(chain.keys[0][:3], chain.tree, chain.tip, transition=forged)
    v = light_verify(client_at(chain, 3), [b])
    assert v.reason is RejectReason.BAD_TRANSITION
    with pytest.raises(BadQuorum):
        register_transition(chain.committees[0], new, outsiders)
    # skipping an epoch number is also a bad transition
    skip = register_transition(chain.committees[0], committee_of(2, outsiders), chain.keys[0])
    b = mint_block(chain.keys[0][:3], chain.tree, chain.tip, transition=skip)
    assert light_verify(client_at(chain, 3), [b]).reason is RejectReason.BAD_TRANSITION


def test_old_committee_cannot_sign_after_rotation():
    chain = rotating_chain(5, 5)
    assert chain.block().transition is not None
    stale = mint_block(chain.keys[0], chain.tree, chain.tip)
    stale = replace(stale, epoch=0)
    stale = replace(stale, committee_sigs=tuple(sorted((k.public, k.sign(stale.signing_payload())) for k in chain.keys[0])))
    assert light_verify(client_at(chain, 5), [stale]).reason is RejectReason.BAD_TRANSITION


def test_state_roots_are_not_checked():
    chain = rotating_chain(2, 100)
    b = mint_block(chain.keys[0][:3], chain.tree, chain.tip, state_root=b"\x42" * 32)
    assert light_verify(client_at(chain, 2), [b]).accepted


def test_posterior_corruption_fools_stale_client_only():
    chain = rotating_chain(30, 5)  # epochs 0..6
    keys = leak_keys(chain, 2)
    fork_height = 6
    fork = chain.at_height(fork_height)
    side = build_side_chain(chain.tree, fork, keys, SideChainPlan(30, DbState(), rotate_every=4, seed=3))
    stale = client_at(chain, fork_height)
    assert light_verify(stale, side.blocks).accepted
    current = client_at(chain, chain.height)
    assert light_verify(current, side.blocks).reason is RejectReason.BAD_LINK


def test_recent_epochs_are_out_of_reach():
    rng = random.Random(3)
    for _ in range(5):
        chain = random_history(rng)
        keys = leak_keys(chain, 2)
        current = chain.epoch_of_child()
        for h in range(chain.height + 1):
            bid = chain.at_height(h)
            epoch = chain.epoch_of_child(bid)
            if epoch > current - 2:
                with pytest.raises(InsufficientKeys):
                    build_side_chain(chain.tree, bid, keys, SideChainPlan(1, DbState()))
