"""Content-addressed block store forming a tree rooted at genesis.

Block byte layout (version 1), all integers big-endian::

    "SLB" 0x01
    parent        0x00 | 0x01 + 32-byte id
    height        u64
    epoch         u64
    fork_id       32 bytes
    state_root    32 bytes
    txs           u32 count, then u32-length-prefixed SignedTxn encodings
    transition    0x00 | 0x01 + TransitionRecord encoding
    -- end of the pre-signature serialization --
    committee_sigs  u32 count, then (32-byte public key, u32-prefixed signature)
                    sorted by public key

A block's id is ``hasher(serialize(block))`` for the tree's hasher.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .crypto import DIGEST_SIZE, ZERO_DIGEST, Hasher, sha256
from .encoding import Reader, lp, opt, u32, u64
from .records import SignedTxn, TransitionRecord, encode_sigs, read_sigs

BlockId = bytes

MAGIC = b"SLB\x01"
BLOCK_SIG_DOMAIN = b"shortleash-block-v1"


class BlockTreeError(Exception):
    pass


class MissingParent(BlockTreeError):
    pass


class HeightMismatch(BlockTreeError):
    pass


class GenesisConflict(BlockTreeError):
    pass


class UnknownBlock(BlockTreeError, KeyError):
    pass


class PastRoot(BlockTreeError):
    pass


@dataclass(frozen=True)
class Block:
    parent: BlockId | None
    height: int
    epoch: int = 0
    fork_id: bytes = ZERO_DIGEST
    txs: tuple[SignedTxn, ...] = ()
    state_root: bytes = ZERO_DIGEST
    transition: TransitionRecord | None = None
    committee_sigs: tuple[tuple[bytes, bytes], ...] = field(default=())

    def __post_init__(self):
        if (self.parent is None) != (self.height == 0):
            raise HeightMismatch("parent is absent iff height == 0")
        if self.parent is not None and len(self.parent) != DIGEST_SIZE:
            raise ValueError("parent id must be 32 bytes")
        if len(self.fork_id) != DIGEST_SIZE or len(self.state_root) != DIGEST_SIZE:
            raise ValueError("fork_id and state_root must be 32 bytes")
        if list(self.committee_sigs) != sorted(self.committee_sigs):
            object.__setattr__(self, "committee_sigs", tuple(sorted(self.committee_sigs)))

    def presig_bytes(self) -> bytes:
        return b"".join([
            MAGIC,
            opt(self.parent),
            u64(self.height),
            u64(self.epoch),
            self.fork_id,
            self.state_root,
            u32(len(self.txs)),
            *(lp(tx.encode()) for tx in self.txs),
            opt(self.transition.encode() if self.transition else None),
        ])

    def signing_payload(self) -> bytes:
        return BLOCK_SIG_DOMAIN + self.presig_bytes()

    def serialize(self) -> bytes:
        return self.presig_bytes() + encode_sigs(self.committee_sigs)

    @classmethod
    def deserialize(cls, data: bytes) -> "Block":
        r = Reader(data)
        block = cls.read(r)
        r.done()
        return block

    @classmethod
    def read(cls, r: Reader) -> "Block":
        r.expect(MAGIC)
        parent = r.take(32) if r.flag() else None
        height, epoch = r.u64(), r.u64()
        fork_id, state_root = r.take(32), r.take(32)
        txs = []
        for _ in range(r.u32()):
            tr = Reader(r.lp())
            txs.append(SignedTxn.read(tr))
            tr.done()
        transition = TransitionRecord.read(r) if r.flag() else None
        sigs = read_sigs(r)
        return cls(parent, height, epoch, fork_id, tuple(txs), state_root, transition, sigs)

    def block_id(self, hasher: Hasher = sha256) -> BlockId:
        return hasher(self.serialize())


class BlockTree:
    """Block store keyed by content hash under ``hasher``.

    Blocks are immutable once inserted; the tree only grows.
    """

    def __init__(self, hasher: Hasher = sha256):
        self.hasher = hasher
        self.genesis: BlockId | None = None
        self._store: dict[BlockId, Block] = {}
        self._depth: dict[BlockId, int] = {}

    def __contains__(self, bid: BlockId) -> bool:
        return bid in self._store

    def __len__(self) -> int:
        return len(self._store)

    def __iter__(self) -> Iterator[BlockId]:
        return iter(self._store)

    def id_of(self, block: Block) -> BlockId:
        return block.block_id(self.hasher)

    def get(self, bid: BlockId) -> Block:
        try:
            return self._store[bid]
        except KeyError:
            raise UnknownBlock(bid.hex()) from None

    def insert(self, block: Block) -> BlockId:
        bid = self.id_of(block)
        if bid in self._store:
            return bid
        if block.parent is None:
            if self.genesis is not None:
                raise GenesisConflict(f"tree already rooted at {self.genesis.hex()[:16]}")
            self.genesis = bid
            depth = 0
        else:
            if block.parent not in self._store:
                raise MissingParent(block.parent.hex())
            parent = self._store[block.parent]
            if block.height != parent.height + 1:
                raise HeightMismatch(
                    f"height {block.height} under parent of height {parent.height}"
                )
            depth = self._depth[block.parent] + 1
        self._store[bid] = block
        self._depth[bid] = depth
        return bid

    def parent_of(self, bid: BlockId) -> BlockId | None:
        return self.get(bid).parent

    def depth(self, bid: BlockId) -> int:
        """Number of parent edges from ``bid`` to the root."""
        self.get(bid)
        return self._depth[bid]

    def up(self, bid: BlockId, k: int) -> BlockId:
        """The ancestor ``k`` hops above ``bid``."""
        if k < 0:
            raise ValueError("k must be non-negative")
        if k > self.depth(bid):
            raise PastRoot(f"cannot go {k} hops above a block at depth {self.depth(bid)}")
        for _ in range(k):
            bid = self._store[bid].parent
        return bid

    def is_ancestor_of(self, n1: BlockId, n2: BlockId) -> bool:
        """True iff ``n1`` lies on the path from ``n2`` to the root (reflexive)."""
        d1, d2 = self.depth(n1), self.depth(n2)
        return d1 <= d2 and self.up(n2, d2 - d1) == n1

    def lowest_common_ancestor(self, n1: BlockId, n2: BlockId) -> BlockId:
        d1, d2 = self.depth(n1), self.depth(n2)
        if d1 > d2:
            n1 = self.up(n1, d1 - d2)
        elif d2 > d1:
            n2 = self.up(n2, d2 - d1)
        while n1 != n2:
            n1, n2 = self._store[n1].parent, self._store[n2].parent
        return n1

    def dist(self, n1: BlockId, n2: BlockId) -> int:
        """Edge count of the tree path between two nodes (through their LCA)."""
        lca = self.lowest_common_ancestor(n1, n2)
        d = self.depth(lca)
        return self.depth(n1) - d + self.depth(n2) - d

    def path_from_genesis(self, bid: BlockId) -> list[BlockId]:
        path = [bid]
        while (p := self.get(path[-1]).parent) is not None:
            path.append(p)
        return path[::-1]

    def check_integrity(self) -> None:
        """Re-hash every block and re-walk every parent chain."""
        for bid, block in self._store.items():
            if self.id_of(block) != bid:
                raise BlockTreeError(f"content address mismatch at {bid.hex()}")
            if block.parent is not None and block.parent not in self._store:
                raise MissingParent(block.parent.hex())
            if len(self.path_from_genesis(bid)) != self._depth[bid] + 1:
                raise BlockTreeError(f"depth cache disagrees with walk at {bid.hex()}")


@dataclass(frozen=True)
class BlockCtx:
    """Where a transaction executes: as part of a new child of ``parent``."""

    tree: BlockTree
    parent: BlockId
    fork_id: bytes = ZERO_DIGEST
    window: int = 256

    @property
    def height(self) -> int:
        return self.tree.depth(self.parent) + 1

    def ancestor_at(self, k: int) -> BlockId | None:
        """Id of the ancestor at height ``k`` of the block under construction."""
        d = self.tree.depth(self.parent)
        if not 0 <= k <= d:
            return None
        return self.tree.up(self.parent, d - k)

    def blockhash(self, k: int, full_domain: bool = False) -> bytes:
        """Windowed (``W`` most recent blocks) or full-domain ancestor hash; zero if unavailable."""
        if not full_domain and self.height - k > self.window:
            return ZERO_DIGEST
        bid = self.ancestor_at(k)
        return bid if bid is not None else ZERO_DIGEST
