"""An honest full node: executes blocks and keeps every post-state."""

from __future__ import annotations

from typing import Sequence

from .blocktree import Block, BlockCtx, BlockId, BlockTree
from .consensus import committee_of, mint_block, next_epoch, register_transition
from .crypto import ZERO_DIGEST, Hasher, Keypair, sha256
from .records import Committee, SignedTxn
from .state import DbState
from .vm import VM, Receipt


class Chain:
    """A linear consensus chain (plus whatever else lands in its tree).

    ``committees`` and ``keys`` are indexed by epoch.  The genesis
    committee is bootstrapped out of band.
    """

    def __init__(
        self,
        genesis_state: DbState,
        genesis_keys: Sequence[Keypair],
        *,
        fork_id: bytes = ZERO_DIGEST,
        vm: VM | None = None,
        window: int = 256,
        hasher: Hasher = sha256,
    ):
        self.vm = vm or VM()
        self.window = window
        self.tree = BlockTree(hasher)
        self.keys: dict[int, list[Keypair]] = {0: list(genesis_keys)}
        self.committees: dict[int, Committee] = {0: committee_of(0, genesis_keys)}
        genesis = Block(None, 0, epoch=0, fork_id=fork_id, state_root=genesis_state.root)
        self.genesis = self.tree.insert(genesis)
        self.states: dict[BlockId, DbState] = {self.genesis: genesis_state}
        self.receipts: dict[BlockId, list[Receipt]] = {self.genesis: []}
        self.tip = self.genesis

    @classmethod
    def from_parts(
        cls,
        tree: BlockTree,
        tip: BlockId,
        states: dict[BlockId, DbState],
        receipts: dict[BlockId, list[Receipt]],
        keys: dict[int, list[Keypair]],
        committees: dict[int, Committee],
        *,
        vm: VM,
        window: int = 256,
    ) -> "Chain":
        """Assemble a chain from an already-populated tree (used by replay)."""
        self = cls.__new__(cls)
        self.vm, self.window, self.tree = vm, window, tree
        self.keys, self.committees = keys, committees
        self.states, self.receipts = states, receipts
        self.genesis = tree.genesis
        self.tip = tip
        return self

    @property
    def height(self) -> int:
        return self.tree.depth(self.tip)

    def state(self, bid: BlockId | None = None) -> DbState:
        return self.states[self.tip if bid is None else bid]

    def block(self, bid: BlockId | None = None) -> Block:
        return self.tree.get(self.tip if bid is None else bid)

    def ctx(self, parent: BlockId | None = None, fork_id: bytes | None = None) -> BlockCtx:
        parent = self.tip if parent is None else parent
        if fork_id is None:
            fork_id = self.tree.get(parent).fork_id
        return BlockCtx(self.tree, parent, fork_id, self.window)

    def at_height(self, height: int, tip: BlockId | None = None) -> BlockId:
        tip = self.tip if tip is None else tip
        return self.tree.up(tip, self.tree.depth(tip) - height)

    def path(self, tip: BlockId | None = None) -> list[BlockId]:
        return self.tree.path_from_genesis(self.tip if tip is None else tip)

    def extend(
        self,
        txns: Sequence[SignedTxn] = (),
        *,
        rotate_to: Sequence[Keypair] | None = None,
        fork_id: bytes | None = None,
    ) -> BlockId:
        """Execute ``txns`` on the tip and append the resulting block.

        Transactions after the first unsequenceable one are left out of the
        block.  ``rotate_to`` announces the committee for the next epoch.
        """
        parent = self.tip
        epoch = next_epoch(self.tree.get(parent))
        if fork_id is None:
            fork_id = self.tree.get(parent).fork_id
        ctx = BlockCtx(self.tree, parent, fork_id, self.window)
        result = self.vm.apply_sequence(self.states[parent], txns, ctx)
        included = list(txns)[:len(result.receipts)]
        transition = None
        if rotate_to is not None:
            new = committee_of(epoch + 1, rotate_to)
            transition = register_transition(self.committees[epoch], new, self.keys[epoch])
            self.committees[epoch + 1] = new
            self.keys[epoch + 1] = list(rotate_to)
        block = mint_block(
            self.keys[epoch][: self.committees[epoch].threshold],
            self.tree, parent, included, result.db.root, fork_id, transition,
        )
        bid = self.tree.insert(block)
        self.states[bid] = result.db
        self.receipts[bid] = result.receipts
        self.tip = bid
        return bid

    def epoch_of_child(self, parent: BlockId | None = None) -> int:
        return next_epoch(self.block(parent))
