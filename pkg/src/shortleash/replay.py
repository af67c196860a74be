"""Checkpoint/replay after a bug fix, with a hash swizzler keeping block ids stable.

Replaying blocks ``z..n`` under amended VM semantics yields blocks ``B'_j``
that differ from ``B_j`` in their state roots (and in the committee
signatures over them).  The swizzler ``g`` swaps each pair
``{h(B_j), h(B'_j)}`` and fixes every other digest, so under
``h' = g . h`` the forked blocks hash to the old ids.  Parent pointers,
leash anchors and BLOCKHASH results therefore keep their old values.

``h'`` is collision resistant iff ``h`` is: a collision ``h'(x) = h'(y)``
means ``g(h(x)) = g(h(y))``, and since ``g`` is a bijection, ``h(x) = h(y)``;
the converse runs the same way with ``g`` applied to both sides.
``collision_check`` is only an empirical guard on top of that argument.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Protocol, Sequence

from .blocktree import Block, BlockCtx, BlockTree
from .contracts import blockhash_recorder, counter, points, ticket_office, well_known, words
from .crypto import DIGEST_SIZE, Hasher, Keypair, sha256
from .leash import anchor_at, wrap_metadata
from .node import Chain
from .records import Call, Transfer, make_txn
from .state import DbState
from .vm import VM, VMConfig, fund, install_contract

log = logging.getLogger(__name__)


class SwizzleError(ValueError):
    pass


class NoSemanticChange(UserWarning):
    """A replay reproduced every original block; the swizzle map is empty."""


class IndexOutOfRange(IndexError):
    pass


class CollisionFound(AssertionError):
    pass


class Permutation(Protocol):
    def apply(self, x: bytes) -> bytes: ...


class SwizzleMap:
    """The involution ``g``: swaps each stored pair, fixes everything else.

    Pairs are kept as (original, replacement) for reporting; ``apply`` works
    in both directions, so ``g(g(x)) == x`` by construction.
    """

    def __init__(self, pairs: Iterable[tuple[bytes, bytes]] = ()):
        self._partner: dict[bytes, bytes] = {}
        self.pairs: list[tuple[bytes, bytes]] = []
        for a, b in pairs:
            self.add(a, b)

    def add(self, original: bytes, replacement: bytes) -> None:
        if len(original) != DIGEST_SIZE or len(replacement) != DIGEST_SIZE:
            raise SwizzleError("swizzled values must be 32-byte digests")
        if original == replacement:
            raise SwizzleError("cannot swizzle a digest with itself")
        for d in (original, replacement):
            if d in self._partner:
                raise SwizzleError(f"digest {d.hex()[:16]}.. already swizzled")
        self._partner[original] = replacement
        self._partner[replacement] = original
        self.pairs.append((original, replacement))

    def apply(self, x: bytes) -> bytes:
        return self._partner.get(x, x)

    __call__ = apply

    def digests(self) -> set[bytes]:
        return set(self._partner)

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, x: bytes) -> bool:
        return x in self._partner

    def to_dict(self) -> dict:
        return {"format": "shortleash-swizzle/1", "pairs": [[a.hex(), b.hex()] for a, b in self.pairs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "SwizzleMap":
        if data.get("format") != "shortleash-swizzle/1":
            raise SwizzleError(f"unsupported swizzle format {data.get('format')!r}")
        return cls((bytes.fromhex(a), bytes.fromhex(b)) for a, b in data["pairs"])


def swizzle_apply(g: Permutation, x: bytes) -> bytes:
    return g.apply(x)


@dataclass(frozen=True)
class ComposedSwizzle:
    """``outer . inner``; a permutation but in general no longer an involution."""

    outer: Permutation
    inner: Permutation

    def apply(self, x: bytes) -> bytes:
        return self.outer.apply(self.inner.apply(x))

    __call__ = apply

    def inverse(self, y: bytes) -> bytes:
        # both factors are involutions (or compositions of them)
        return _inverse(self.inner, _inverse(self.outer, y))

    def digests(self) -> set[bytes]:
        return self.outer.digests() | self.inner.digests()


def _inverse(g: Permutation, y: bytes) -> bytes:
    if isinstance(g, ComposedSwizzle):
        return g.inverse(y)
    return g.apply(y)


def compose_swizzles(outer: Permutation, inner: Permutation) -> ComposedSwizzle:
    return ComposedSwizzle(outer, inner)


@dataclass(frozen=True)
class ForkedHash:
    """``h'(x) = g(h(x))``; usable anywhere a ``Hasher`` is expected."""

    base: Hasher
    swizzle: Permutation

    def __call__(self, data: bytes) -> bytes:
        return self.swizzle.apply(self.base(data))


@dataclass
class ReplayResult:
    original: Chain
    forked: Chain
    z: int
    swizzle: SwizzleMap
    hasher: ForkedHash

    @property
    def degenerate(self) -> bool:
        return len(self.swizzle) == 0

    def pointer_table(self) -> list[dict]:
        """One row per replayed height: old id, new id under h', and whether pointers held."""
        rows = []
        old_path, new_path = self.original.path(), self.forked.path()
        h, h2 = self.original.tree.hasher, self.hasher
        for j in range(self.z, len(old_path)):
            old, new = self.original.tree.get(old_path[j]), self.forked.tree.get(new_path[j])
            before, after = h(old.serialize()), h2(new.serialize())
            rows.append({
                "height": j,
                "original": before.hex(),
                "forked": after.hex(),
                "root_changed": old.state_root != new.state_root,
                "parent_stable": old.parent == new.parent,
                "stable": before == after and old.parent == new.parent,
            })
        return rows

    def table(self) -> str:
        lines = [f"{'height':>6}  {'h(B_j)':<18} {'hp(Bp_j)':<18} {'root':<9} status"]
        for r in self.pointer_table():
            lines.append(
                f"{r['height']:>6}  {r['original'][:16]:<18} {r['forked'][:16]:<18} "
                f"{'changed' if r['root_changed'] else 'same':<9} {'stable' if r['stable'] else 'BROKEN'}"
            )
        return "\n".join(lines) + "\n"


def replay_from(chain: Chain, z: int, amended_vm: VM) -> ReplayResult:
    """Re-execute blocks ``z..n`` of ``chain`` under ``amended_vm``.

    The checkpoint is the stored post-state of block ``z - 1``.  The result
    shares nothing mutable with ``chain``.
    """
    old_tree = chain.tree
    path = chain.path()
    n = len(path) - 1
    if not 0 < z <= n:
        raise IndexOutOfRange(f"z must satisfy 0 < z <= {n}, got {z}")
    g = SwizzleMap()
    h2 = ForkedHash(old_tree.hasher, g)
    tree = BlockTree(h2)
    states, receipts = {}, {}
    for j in range(z):
        bid = tree.insert(old_tree.get(path[j]))
        assert bid == path[j]
        states[bid] = chain.states[bid]
        receipts[bid] = chain.receipts.get(bid, [])
    db = chain.states[path[z - 1]]
    for j in range(z, n + 1):
        old = old_tree.get(path[j])
        ctx = BlockCtx(tree, old.parent, old.fork_id, chain.window)
        result = amended_vm.apply_sequence(db, old.txs, ctx)
        if result.halted is not None:
            log.warning("replay of height %d halted early: %r", j, result.halted)
        db = result.db
        new = old
        if db.root != old.state_root:
            signers = chain.keys[old.epoch][: chain.committees[old.epoch].threshold]
            new = _resign(replace(old, state_root=db.root), signers)
            g.add(old_tree.hasher(old.serialize()), old_tree.hasher(new.serialize()))
        bid = tree.insert(new)
        assert bid == path[j], "swizzled id drifted"
        states[bid] = db
        receipts[bid] = result.receipts
    if not g:
        warnings.warn(f"replay from {z} changed no state root", NoSemanticChange, stacklevel=2)
    forked = Chain.from_parts(
        tree, path[n], states, receipts,
        {e: list(k) for e, k in chain.keys.items()}, dict(chain.committees),
        vm=amended_vm, window=chain.window,
    )
    return ReplayResult(chain, forked, z, g, h2)


def _resign(block: Block, keys: Sequence[Keypair]) -> Block:
    payload = block.signing_payload()
    return replace(block, committee_sigs=tuple(sorted((k.public, k.sign(payload)) for k in keys)))


@dataclass
class CollisionReport:
    checked: int
    distinct_inputs: int

    def __str__(self) -> str:
        return f"{self.distinct_inputs} distinct inputs, no collisions"


def collision_check(hasher: Hasher, corpus: Iterable[bytes]) -> CollisionReport:
    seen: dict[bytes, bytes] = {}
    count = 0
    for x in corpus:
        count += 1
        d = hasher(x)
        prev = seen.setdefault(d, x)
        if prev != x:
            raise CollisionFound(f"{prev[:8].hex()}.. and {x[:8].hex()}.. both hash to {d.hex()[:16]}..")
    return CollisionReport(count, len(seen))


def random_corpus(count: int, seed: int = 0, max_len: int = 96) -> list[bytes]:
    """Deterministic pseudo-random byte strings (hash-counter stream)."""
    out = []
    for k in range(count):
        d = sha256(f"corpus:{seed}:{k}".encode())
        n = d[0] % max_len
        out.append((d * (max_len // DIGEST_SIZE + 1))[:n])
    return out


def is_injective_on(g: Permutation, domain: Iterable[bytes]) -> bool:
    domain = list(domain)
    return len({g.apply(x) for x in domain}) == len(set(domain))


# ---------------------------------------------------------------------------
# the demo chain: two historical bugs, a leashed transaction and a recorder

TICKETS = well_known("tickets")
POINTS = well_known("points")
COUNTER = well_known("counter")
RECORDER = well_known("recorder")

BUGGY = VMConfig(wrapping_sub=True, wrapping_mul=True)
SUB_FIXED = VMConfig(wrapping_mul=True)
ALL_FIXED = VMConfig()

SUB_BUG_HEIGHT = 5
MUL_BUG_HEIGHT = 12
LEASHED_HEIGHT = 9
LEASH_ANCHOR = 7


@dataclass
class DemoChain:
    chain: Chain
    users: dict[str, Keypair] = field(default_factory=dict)


def build_demo_chain(blocks: int = 20, seed: int = 0, committee_size: int = 4, epoch_length: int = 6) -> DemoChain:
    """A chain executed by a VM with wrapping SUB and MUL.

    Every block records an old block hash; block 5 claims a ticket from an
    empty office (SUB underflows), block 12 multiplies past 2**256, and
    block 9 carries a metadata-leashed call anchored at block 7.
    """
    users = {name: Keypair.derive(name, seed) for name in ("ann", "ben", "cat")}
    db = fund(DbState(), {k.account: 10_000 for k in users.values()})
    for acct, script in ((TICKETS, ticket_office()), (POINTS, points()),
                         (COUNTER, counter()), (RECORDER, blockhash_recorder())):
        db = install_contract(db, acct, script)

    def validators(epoch):
        return [Keypair.derive(f"demo-validator-{epoch}-{k}", seed) for k in range(committee_size)]

    chain = Chain(db, validators(0), vm=VM(BUGGY))
    nonces = {name: 0 for name in users}

    def txn(name, body, leash=None):
        k = make_txn(users[name], nonces[name], body)
        if leash is not None:
            k = wrap_metadata(k, leash, users[name])
        nonces[name] += 1
        return k

    for h in range(1, blocks + 1):
        txs = [txn("ann", Call(RECORDER, words(max(0, h - 3)))),
               txn("ben", Transfer(users["cat"].account, h))]
        if h == SUB_BUG_HEIGHT:
            txs.append(txn("cat", Call(TICKETS, b"")))
        if h == MUL_BUG_HEIGHT:
            txs.append(txn("cat", Call(POINTS, words(2**250 + h))))
        if h == LEASHED_HEIGHT:
            params = anchor_at(chain.tree, chain.at_height(LEASH_ANCHOR), 8, chain.block().fork_id)
            txs.append(txn("ben", Call(COUNTER, b""), leash=params))
        rotate = validators(chain.epoch_of_child() + 1) if h % epoch_length == 0 else None
        chain.extend(txs, rotate_to=rotate)
    return DemoChain(chain, users)


def demo_double_fork(blocks: int = 20, z1: int = SUB_BUG_HEIGHT, z2: int = MUL_BUG_HEIGHT, seed: int = 0):
    """Fix SUB at ``z1``, then (on the forked chain) MUL at ``z2``."""
    demo = build_demo_chain(blocks, seed)
    first = replay_from(demo.chain, z1, VM(SUB_FIXED))
    second = replay_from(first.forked, z2, VM(ALL_FIXED))
    return demo, first, second
