"""Ledger state and its Merkle commitment.

The commitment is a binary Merkle tree over the state's leaves sorted by
key.  There are two leaf kinds, told apart by a one-byte tag on the key:

* account leaf  ``00 || account``            -> ``nonce || balance || code digest?``
* storage leaf  ``01 || account || address`` -> ``value``  (zero values are never stored)

An unpaired node at the end of a level is promoted unchanged.  The root
also commits to the leaf count, which is what lets absence proofs check
adjacency at the edges.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping, NamedTuple

from .crypto import ZERO_DIGEST, sha256
from .encoding import DecodeError, Reader, lp, opt, u32, u64, u256
from .script import Script

ACCOUNT_TAG = b"\x00"
STORAGE_TAG = b"\x01"
STATE_MAGIC = b"SLD\x01"


class StateError(Exception):
    pass


class UnknownAccount(StateError, KeyError):
    pass


class NotAContract(StateError):
    pass


class UnknownAddress(StateError, KeyError):
    pass


@dataclass(frozen=True)
class AccountState:
    nonce: int = 0
    balance: int = 0
    code: Script | None = None
    storage: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        store = {k: v for k, v in self.storage.items() if v}
        if store and self.code is None:
            raise StateError("an account without code cannot hold contract storage")
        object.__setattr__(self, "storage", MappingProxyType(store))

    @property
    def is_contract(self) -> bool:
        return self.code is not None

    def summary(self) -> "AccountSummary":
        return AccountSummary(self.nonce, self.balance, self.code.digest() if self.code else None)


class AccountSummary(NamedTuple):
    """The committed value of an account leaf."""

    nonce: int
    balance: int
    code_digest: bytes | None

    def encode(self) -> bytes:
        return u256(self.nonce) + u256(self.balance) + opt(self.code_digest)


EMPTY_ACCOUNT = AccountState()


@dataclass(frozen=True)
class DbState:
    """Immutable snapshot: account number -> AccountState."""

    accounts: Mapping[int, AccountState] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "accounts", MappingProxyType(dict(self.accounts)))

    def __contains__(self, account: int) -> bool:
        return account in self.accounts

    def get(self, account: int) -> AccountState:
        return self.accounts.get(account, EMPTY_ACCOUNT)

    def balance(self, account: int) -> int:
        return self.get(account).balance

    def nonce(self, account: int) -> int:
        return self.get(account).nonce

    def load(self, account: int, address: int) -> int:
        return self.get(account).storage.get(address, 0)

    def with_accounts(self, updates: Mapping[int, AccountState]) -> "DbState":
        merged = dict(self.accounts)
        merged.update(updates)
        return DbState(merged)

    def total_supply(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    def contract_states(self) -> dict[int, dict[int, int]]:
        """Projection onto contract storage only."""
        return {k: dict(a.storage) for k, a in self.accounts.items() if a.is_contract}

    def leaves(self) -> list[tuple[bytes, bytes]]:
        out = []
        for acct, st in self.accounts.items():
            out.append((ACCOUNT_TAG + u256(acct), st.summary().encode()))
            for addr, val in st.storage.items():
                out.append((STORAGE_TAG + u256(acct) + u256(addr), u256(val)))
        out.sort()
        return out

    @cached_property
    def _commitment(self) -> "MerkleCommitment":
        return MerkleCommitment(self.leaves())

    @property
    def root(self) -> bytes:
        return self._commitment.root

    def encode(self) -> bytes:
        parts = [STATE_MAGIC, u32(len(self.accounts))]
        for acct in sorted(self.accounts):
            st = self.accounts[acct]
            parts += [
                u256(acct), u256(st.nonce), u256(st.balance),
                opt(lp(st.code.encode()) if st.code else None),
                u32(len(st.storage)),
            ]
            parts += [u256(k) + u256(st.storage[k]) for k in sorted(st.storage)]
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> "DbState":
        r = Reader(data)
        r.expect(STATE_MAGIC)
        accounts = {}
        for _ in range(r.u32()):
            acct, nonce, balance = r.u256(), r.u256(), r.u256()
            code = Script.decode(r.lp()) if r.flag() else None
            storage = {r.u256(): r.u256() for _ in range(r.u32())}
            if acct in accounts:
                raise DecodeError("duplicate account")
            accounts[acct] = AccountState(nonce, balance, code, storage)
        r.done()
        return cls(accounts)


def leaf_hash(key: bytes, value: bytes) -> bytes:
    return sha256(b"\x00" + lp(key) + lp(value))


def node_hash(left: bytes, right: bytes) -> bytes:
    return sha256(b"\x01" + left + right)


def seal(count: int, top: bytes) -> bytes:
    return sha256(b"\x02" + u64(count) + top)


EMPTY_ROOT = seal(0, ZERO_DIGEST)


def _directions(index: int, count: int) -> list[bool | None]:
    """Per level: True if the sibling is on the left, False if right, None if promoted."""
    out = []
    while count > 1:
        if index % 2 == 1:
            out.append(True)
        elif index + 1 < count:
            out.append(False)
        else:
            out.append(None)
        index //= 2
        count = (count + 1) // 2
    return out


@dataclass(frozen=True)
class StateProof:
    """Inclusion proof: leaf position plus the (sibling, sibling_is_left) path.

    Promoted levels contribute no step to ``path``.
    """

    leaf_index: int
    leaf_count: int
    path: tuple[tuple[bytes, bool], ...]

    def to_dict(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "leaf_count": self.leaf_count,
            "path": [[sib.hex(), "L" if left else "R"] for sib, left in self.path],
        }

    def fold(self, leaf: bytes) -> bytes | None:
        """Recompute the root from ``leaf``; None if the proof is malformed."""
        if not 0 <= self.leaf_index < self.leaf_count:
            return None
        expected = [d for d in _directions(self.leaf_index, self.leaf_count) if d is not None]
        if len(expected) != len(self.path):
            return None
        acc = leaf
        for (sib, is_left), want in zip(self.path, expected):
            if is_left is not want or len(sib) != 32:
                return None
            acc = node_hash(sib, acc) if is_left else node_hash(acc, sib)
        return seal(self.leaf_count, acc)


class MerkleCommitment:
    def __init__(self, leaves: list[tuple[bytes, bytes]]):
        self.leaves = leaves
        self.index = {k: i for i, (k, _) in enumerate(leaves)}
        level = [leaf_hash(k, v) for k, v in leaves]
        self.levels = [level]
        while len(level) > 1:
            nxt = [node_hash(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
            if len(level) % 2:
                nxt.append(level[-1])
            self.levels.append(nxt)
            level = nxt
        self.root = seal(len(leaves), level[0]) if leaves else EMPTY_ROOT

    def prove_index(self, index: int) -> StateProof:
        path = []
        i = index
        for level in self.levels[:-1]:
            if i % 2 == 1:
                path.append((level[i - 1], True))
            elif i + 1 < len(level):
                path.append((level[i + 1], False))
            i //= 2
        return StateProof(index, len(self.leaves), tuple(path))


def state_root(db: DbState) -> bytes:
    return db.root


def _key(account: int, address: int | None) -> bytes:
    if address is None:
        return ACCOUNT_TAG + u256(account)
    return STORAGE_TAG + u256(account) + u256(address)


def _value_bytes(address: int | None, value) -> bytes:
    if address is None:
        return value.encode()
    return u256(value)


def prove(db: DbState, account: int, address: int | None = None):
    """Return ``(value, proof)`` for an account leaf or a storage slot.

    The value is an ``AccountSummary`` for account leaves and an int for
    storage slots.
    """
    if account not in db:
        raise UnknownAccount(hex(account))
    st = db.get(account)
    if address is None:
        value = st.summary()
    else:
        if not st.is_contract:
            raise NotAContract(hex(account))
        if address not in st.storage:
            raise UnknownAddress(hex(address))
        value = st.storage[address]
    com = db._commitment
    return value, com.prove_index(com.index[_key(account, address)])


def verify(root: bytes, account: int, address: int | None, value, proof: StateProof) -> bool:
    try:
        leaf = leaf_hash(_key(account, address), _value_bytes(address, value))
        return proof.fold(leaf) == root
    except (ValueError, TypeError, AttributeError, OverflowError):
        return False


@dataclass(frozen=True)
class AbsenceProof:
    """Two adjacent leaves bracketing the missing key (either may be absent at an edge)."""

    left: tuple[bytes, bytes, StateProof] | None
    right: tuple[bytes, bytes, StateProof] | None
    leaf_count: int


def prove_absent(db: DbState, account: int, address: int | None = None) -> AbsenceProof:
    key = _key(account, address)
    com = db._commitment
    if key in com.index:
        raise StateError("key is present; use prove()")
    keys = [k for k, _ in com.leaves]
    pos = bisect.bisect_left(keys, key)
    left = right = None
    if pos > 0:
        k, v = com.leaves[pos - 1]
        left = (k, v, com.prove_index(pos - 1))
    if pos < len(keys):
        k, v = com.leaves[pos]
        right = (k, v, com.prove_index(pos))
    return AbsenceProof(left, right, len(keys))


def verify_absent(root: bytes, account: int, address: int | None, proof: AbsenceProof) -> bool:
    key = _key(account, address)
    n = proof.leaf_count
    if n == 0:
        return proof.left is None and proof.right is None and root == EMPTY_ROOT
    for side in (proof.left, proof.right):
        if side is not None:
            k, v, p = side
            if p.leaf_count != n or p.fold(leaf_hash(k, v)) != root:
                return False
    if proof.left is None and proof.right is None:
        return False
    if proof.left is not None and not proof.left[0] < key:
        return False
    if proof.right is not None and not key < proof.right[0]:
        return False
    li = proof.left[2].leaf_index if proof.left else -1
    ri = proof.right[2].leaf_index if proof.right else n
    return ri == li + 1
