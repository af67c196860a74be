"""Epoch committees, quorum-signed blocks and the light-client verifier.

Committee changes ride inside blocks: a block carrying a
``TransitionRecord`` hands signing authority to the new committee from its
child onwards.  The light client checks linkage, heights, quorums and
transitions; it never executes transactions or recomputes state roots.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .blocktree import Block, BlockId, BlockTree
from .crypto import ZERO_DIGEST, Hasher, Keypair, sha256
from .records import Committee, SignedTxn, TransitionRecord

ValidatorKeypair = Keypair


class BadQuorum(Exception):
    pass


def committee_of(epoch: int, keys: Sequence[Keypair]) -> Committee:
    return Committee.of(epoch, [k.public for k in keys])


def register_transition(
    parent: Committee, new: Committee, keys: Iterable[Keypair], *, strict: bool = True
) -> TransitionRecord:
    """Sign the hand-over to ``new`` with ``keys``.

    With ``strict`` the keys must form a quorum of ``parent``; adversaries
    pass ``strict=False`` to forge whatever they can.
    """
    record = TransitionRecord(new)
    sigs = tuple(sorted((k.public, k.sign(record.payload())) for k in keys))
    record = replace(record, sigs=sigs)
    if strict and parent.count_valid(record.payload(), sigs) < parent.threshold:
        raise BadQuorum(f"transition to epoch {new.epoch} lacks a quorum of epoch {parent.epoch}")
    return record


def next_epoch(parent: Block) -> int:
    return parent.epoch + 1 if parent.transition is not None else parent.epoch


def mint_block(
    keys: Iterable[Keypair],
    tree: BlockTree,
    parent: BlockId,
    txs: Sequence[SignedTxn] = (),
    state_root: bytes = ZERO_DIGEST,
    fork_id: bytes | None = None,
    transition: TransitionRecord | None = None,
) -> Block:
    """A child of ``parent`` signed by every key supplied.  No validity checks."""
    pb = tree.get(parent)
    block = Block(
        parent=parent,
        height=pb.height + 1,
        epoch=next_epoch(pb),
        fork_id=pb.fork_id if fork_id is None else fork_id,
        txs=tuple(txs),
        state_root=state_root,
        transition=transition,
    )
    payload = block.signing_payload()
    return replace(block, committee_sigs=tuple(sorted((k.public, k.sign(payload)) for k in keys)))


class RejectReason(Enum):
    BAD_LINK = "BadLink"
    BAD_QUORUM = "BadQuorum"
    BAD_TRANSITION = "BadTransition"
    BAD_HEIGHT = "BadHeight"


@dataclass(frozen=True)
class LightClientState:
    """What a light client trusts: one block and the committee that signs its children.

    ``pending`` is set when the trusted block itself announced a new
    committee.  ``recent_window`` is how many of the latest committee
    elections count as recent (and therefore uncompromised).
    """

    trusted_block: BlockId
    trusted_height: int
    trusted_committee: Committee
    pending: Committee | None = None
    recent_window: int = 2

    @classmethod
    def trusting(
        cls, block: Block, committee: Committee, hasher: Hasher = sha256, recent_window: int = 2
    ) -> "LightClientState":
        if committee.epoch != block.epoch:
            raise ValueError("trusted committee must belong to the trusted block's epoch")
        pending = block.transition.new_committee if block.transition else None
        return cls(block.block_id(hasher), block.height, committee, pending, recent_window)

    @property
    def epoch(self) -> int:
        return self.trusted_committee.epoch


@dataclass(frozen=True)
class LightVerdict:
    accepted: bool
    client: LightClientState
    reason: RejectReason | None = None
    at_index: int | None = None

    def __str__(self) -> str:
        return "Accept" if self.accepted else f"Reject({self.reason.value})"


def light_verify(
    client: LightClientState, segment: Sequence[Block], hasher: Hasher = sha256
) -> LightVerdict:
    """Check a chain segment extending the client's trusted block."""
    cur = client

    def reject(reason: RejectReason, idx: int) -> LightVerdict:
        return LightVerdict(False, client, reason, idx)

    for idx, block in enumerate(segment):
        if block.parent != cur.trusted_block:
            return reject(RejectReason.BAD_LINK, idx)
        if block.height != cur.trusted_height + 1:
            return reject(RejectReason.BAD_HEIGHT, idx)
        committee = cur.pending or cur.trusted_committee
        if block.epoch != committee.epoch:
            return reject(RejectReason.BAD_TRANSITION, idx)
        if committee.count_valid(block.signing_payload(), block.committee_sigs) < committee.threshold:
            return reject(RejectReason.BAD_QUORUM, idx)
        pending = None
        if block.transition is not None:
            rec = block.transition
            if rec.new_committee.epoch != block.epoch + 1:
                return reject(RejectReason.BAD_TRANSITION, idx)
            if committee.count_valid(rec.payload(), rec.sigs) < committee.threshold:
                return reject(RejectReason.BAD_TRANSITION, idx)
            pending = rec.new_committee
        cur = LightClientState(
            block.block_id(hasher), block.height, committee, pending, client.recent_window
        )
    return LightVerdict(True, cur)
