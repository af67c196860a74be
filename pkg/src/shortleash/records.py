"""Signed wire records: transactions, leash parameters, committee records.

These are the payload items that live inside blocks.  Each has a canonical
encoding (``encode``/``read``) and nothing here knows about execution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

from .crypto import DIGEST_SIZE, ZERO_DIGEST, Keypair, account_of, verify_signature
from .encoding import MAX_U256, DecodeError, Reader, lp, opt, u8, u32, u64, u256
from .script import Script

TXN_DOMAIN = b"shortleash-txn-v1"
TRANSITION_DOMAIN = b"shortleash-transition-v1"


@dataclass(frozen=True)
class LeashParams:
    """Scope restriction carried by a transaction.

    The transaction is only valid in a block whose parent descends from the
    block at height ``anchor_height`` with id ``anchor_hash``, no more than
    ``length - 1`` blocks later, on the chain identified by ``fork_id``.
    """

    anchor_height: int
    anchor_hash: bytes
    length: int
    fork_id: bytes

    def __post_init__(self):
        if len(self.anchor_hash) != DIGEST_SIZE or len(self.fork_id) != DIGEST_SIZE:
            raise ValueError("anchor_hash and fork_id must be 32 bytes")
        if not (0 <= self.anchor_height <= MAX_U256 and 0 <= self.length <= MAX_U256):
            raise ValueError("leash integers must fit in 256 bits")

    @property
    def well_formed(self) -> bool:
        return self.anchor_height + self.length <= MAX_U256

    def encode(self) -> bytes:
        return (
            u256(self.anchor_height) + self.anchor_hash + u256(self.length) + self.fork_id
        )

    @classmethod
    def read(cls, r: Reader) -> "LeashParams":
        return cls(r.u256(), r.take(32), r.u256(), r.take(32))


@dataclass(frozen=True)
class Transfer:
    to: int
    amount: int

    def encode(self) -> bytes:
        return u8(1) + u256(self.to) + u256(self.amount)


@dataclass(frozen=True)
class Call:
    contract: int
    calldata: bytes = b""

    def encode(self) -> bytes:
        return u8(2) + u256(self.contract) + lp(self.calldata)


@dataclass(frozen=True)
class Deploy:
    script: Script
    endowment: int = 0

    def encode(self) -> bytes:
        return u8(3) + lp(self.script.encode()) + u256(self.endowment)


TxnBody = Union[Transfer, Call, Deploy]


def read_body(r: Reader) -> TxnBody:
    tag = r.u8()
    if tag == 1:
        return Transfer(r.u256(), r.u256())
    if tag == 2:
        return Call(r.u256(), r.lp())
    if tag == 3:
        return Deploy(Script.decode(r.lp()), r.u256())
    raise DecodeError(f"unknown transaction body tag {tag}")


@dataclass(frozen=True)
class SignedTxn:
    """A transaction proposal.  The signature covers every other field."""

    sender: int
    nonce: int
    body: TxnBody
    fork_id: bytes
    public_key: bytes
    max_fee: int
    leash: LeashParams | None = None
    signature: bytes = b""

    def signing_payload(self) -> bytes:
        return TXN_DOMAIN + (
            u256(self.sender)
            + u256(self.nonce)
            + self.body.encode()
            + opt(self.leash.encode() if self.leash else None)
            + self.fork_id
            + u256(self.max_fee)
            + self.public_key
        )

    def signed_by(self, key: Keypair) -> "SignedTxn":
        unsigned = replace(self, public_key=key.public, signature=b"")
        return replace(unsigned, signature=key.sign(unsigned.signing_payload()))

    def signature_ok(self) -> bool:
        return account_of(self.public_key) == self.sender and verify_signature(
            self.public_key, self.signing_payload(), self.signature
        )

    def encode(self) -> bytes:
        return self.signing_payload()[len(TXN_DOMAIN):] + lp(self.signature)

    @classmethod
    def read(cls, r: Reader) -> "SignedTxn":
        sender, nonce = r.u256(), r.u256()
        body = read_body(r)
        leash = LeashParams.read(r) if r.flag() else None
        fork_id = r.take(32)
        max_fee = r.u256()
        public_key = r.take(32)
        signature = r.lp()
        return cls(sender, nonce, body, fork_id, public_key, max_fee, leash, signature)


def make_txn(
    key: Keypair,
    nonce: int,
    body: TxnBody,
    *,
    fork_id: bytes = ZERO_DIGEST,
    max_fee: int = 1_000,
    leash: LeashParams | None = None,
) -> SignedTxn:
    """Build and sign a transaction from ``key``'s account."""
    txn = SignedTxn(key.account, nonce, body, fork_id, key.public, max_fee, leash)
    return txn.signed_by(key)


@dataclass(frozen=True)
class Committee:
    epoch: int
    members: tuple[bytes, ...]
    threshold: int

    def __post_init__(self):
        if not self.members:
            raise ValueError("committee must be non-empty")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate committee member")
        if not (3 * self.threshold > 2 * len(self.members) and self.threshold <= len(self.members)):
            raise ValueError(
                f"threshold {self.threshold} is not a BFT quorum of {len(self.members)}"
            )

    @classmethod
    def of(cls, epoch: int, members) -> "Committee":
        members = tuple(members)
        return cls(epoch, members, 2 * len(members) // 3 + 1)

    def encode(self) -> bytes:
        return u64(self.epoch) + u32(len(self.members)) + b"".join(self.members) + u32(self.threshold)

    @classmethod
    def read(cls, r: Reader) -> "Committee":
        epoch = r.u64()
        members = tuple(r.take(32) for _ in range(r.u32()))
        return cls(epoch, members, r.u32())

    def count_valid(self, message: bytes, sigs) -> int:
        """Number of distinct members with a valid signature in ``sigs``."""
        seen = set()
        for pub, sig in sigs:
            if pub in self.members and pub not in seen and verify_signature(pub, message, sig):
                seen.add(pub)
        return len(seen)


def encode_sigs(sigs: tuple[tuple[bytes, bytes], ...]) -> bytes:
    return u32(len(sigs)) + b"".join(pub + lp(sig) for pub, sig in sigs)


def read_sigs(r: Reader) -> tuple[tuple[bytes, bytes], ...]:
    return tuple((r.take(32), r.lp()) for _ in range(r.u32()))


@dataclass(frozen=True)
class TransitionRecord:
    """Hands signing authority to ``new_committee`` from the next block on."""

    new_committee: Committee
    sigs: tuple[tuple[bytes, bytes], ...] = field(default=())

    def payload(self) -> bytes:
        return TRANSITION_DOMAIN + self.new_committee.encode()

    def encode(self) -> bytes:
        return self.new_committee.encode() + encode_sigs(self.sigs)

    @classmethod
    def read(cls, r: Reader) -> "TransitionRecord":
        return cls(Committee.read(r), read_sigs(r))
