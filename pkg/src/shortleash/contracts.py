"""Reference contracts used by scenarios, demos and tests."""

from __future__ import annotations

from .crypto import sha256
from .encoding import u256
from .script import Script, assemble

PARITY_PAYOUT = 1_000_000


def counter() -> Script:
    """Increment slot 0 and return the new value.  Ignores the caller."""
    return assemble("""
    PUSH 0
    SLOAD
    PUSH 1
    ADD
    DUP 1
    PUSH 0
    SSTORE
    EMIT
    RETURN
""")


def echo_caller() -> Script:
    return assemble("""
    CALLER
    EMIT
    RETURN
""")


def parity_payout(payout: int = PARITY_PAYOUT) -> Script:
    """Owner-only payout whose size depends on the contract balance's parity.

    Slot 0 holds the owner.  Calldata word 0 is the recipient.  An even
    balance pays ``payout`` base units, an odd balance pays one.
    """
    return assemble(f"""
    CALLER
    PUSH 0
    SLOAD
    EQ
    JUMPI owner
    REVERT
owner:
    SELFBALANCE
    PUSH 2
    MOD
    JUMPI odd
    PUSH {payout}
    JUMP pay
odd:
    PUSH 1
pay:
    PUSH 0
    CALLDATALOAD
    TRANSFER
    STOP
""")


def pledge_registry() -> Script:
    """Record ``storage[word0] = word1``: a public registry of pledges by beneficiary."""
    return assemble("""
    PUSH 32
    CALLDATALOAD
    PUSH 0
    CALLDATALOAD
    SSTORE
""")


def ticket_office() -> Script:
    """Hand out one ticket: decrement slot 0 (remaining), credit the caller."""
    return assemble("""
    PUSH 0
    SLOAD
    PUSH 1
    SUB
    PUSH 0
    SSTORE
    CALLER
    SLOAD
    PUSH 1
    ADD
    CALLER
    SSTORE
""")


def points() -> Script:
    """Store ``word0 * 1000`` in slot 1."""
    return assemble("""
    PUSH 0
    CALLDATALOAD
    PUSH 1000
    MUL
    PUSH 1
    SSTORE
""")


def blockhash_recorder() -> Script:
    """Store ``BLOCKHASH_FD(word0)`` under the current block number."""
    return assemble("""
    PUSH 0
    CALLDATALOAD
    BLOCKHASH_FD
    NUMBER
    SSTORE
""")


def words(*values: int) -> bytes:
    return b"".join(u256(v) for v in values)


def well_known(name: str) -> int:
    """Deterministic account number for a named system contract."""
    return int.from_bytes(sha256(b"shortleash/" + name.encode()), "big")
