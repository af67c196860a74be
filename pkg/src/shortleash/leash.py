"""Short leashes: binding a transaction to a neighbourhood of the block tree.

A leashed transaction carries ``(i, v, l, fork)`` and only takes effect in a
block whose parent ``p`` satisfies

    fork == chain fork id,  i <= depth(p) < i + l,  id(up(p, depth(p) - i)) == v

Three enforcement modes share that predicate:

* metadata: the VM checks ``SignedTxn.leash`` before loading any code;
* wrapper: ``wrap_script`` emits a contract that checks constants and then
  calls the target;
* gateway: a single well-known contract reads the parameters from a
  224-byte calldata prefix and forwards the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum

from .blocktree import BlockCtx, BlockId, BlockTree
from .crypto import Keypair, sha256
from .encoding import u256, word_to_int
from .records import LeashParams, SignedTxn
from .script import Script, assemble

__all__ = [
    "LeashParams", "LeashReason", "LeashVerdict", "leash_check", "anchor_at",
    "wrap_metadata", "wrap_script", "gateway_encode", "gateway_decode",
    "gateway_contract", "GATEWAY_ACCOUNT", "PREFIX_SIZE", "STATUS_PREFIX_SIZE",
    "GatewayFault", "script_verdict", "MalformedParams", "CalldataTooLong",
]


class LeashReason(IntEnum):
    """Revert reasons; the values double as in-script revert codes."""

    FORK_MISMATCH = 1
    ANCHOR_IN_FUTURE = 2
    LEASH_EXPIRED = 3
    ANCHOR_HASH_MISMATCH = 4
    MALFORMED = 5


class GatewayFault(IntEnum):
    BAD_FORMAT = 16
    NO_TARGET = 17
    INNER_FAILED = 18


class MalformedParams(ValueError):
    pass


class CalldataTooLong(ValueError):
    pass


@dataclass(frozen=True)
class LeashVerdict:
    passed: bool
    reason: LeashReason | GatewayFault | None = None

    def __str__(self) -> str:
        return "Pass" if self.passed else f"Revert({self.reason.name if self.reason else 'fault'})"


PASS = LeashVerdict(True)


def leash_check(params: LeashParams, ctx: BlockCtx) -> LeashVerdict:
    if params.fork_id != ctx.fork_id:
        return LeashVerdict(False, LeashReason.FORK_MISMATCH)
    if not params.well_formed:
        return LeashVerdict(False, LeashReason.MALFORMED)
    # the block being built cannot already be known, so l == 0 never passes
    if params.length == 0:
        return LeashVerdict(False, LeashReason.LEASH_EXPIRED)
    d = ctx.tree.depth(ctx.parent)
    i = params.anchor_height
    if d < i:
        return LeashVerdict(False, LeashReason.ANCHOR_IN_FUTURE)
    if d >= i + params.length:
        return LeashVerdict(False, LeashReason.LEASH_EXPIRED)
    if ctx.tree.up(ctx.parent, d - i) != params.anchor_hash:
        return LeashVerdict(False, LeashReason.ANCHOR_HASH_MISMATCH)
    return PASS


def anchor_at(tree: BlockTree, bid: BlockId, length: int, fork_id: bytes) -> LeashParams:
    """Leash parameters anchored at block ``bid`` as seen in ``tree``."""
    return LeashParams(tree.depth(bid), bid, length, fork_id)


def wrap_metadata(txn: SignedTxn, params: LeashParams, key: Keypair) -> SignedTxn:
    """Attach ``params`` as transaction metadata and (re-)sign."""
    if not params.well_formed:
        raise MalformedParams("anchor_height + length overflows 256 bits")
    return replace(txn, leash=params).signed_by(key)


_CHECK_TAIL = """\
    LT
    JUMPI in_range
expired:
    REVERT 3
future:
    REVERT 2
in_range:
"""


def wrap_script(target: int, params: LeashParams, full_domain: bool = True) -> Script:
    """A wrapper contract enforcing ``params`` and then calling ``target``.

    The caller's calldata is forwarded unchanged.  With ``full_domain=False``
    the anchor lookup uses the windowed ``BLOCKHASH`` and stops working once
    the anchor falls out of the window.
    """
    i, l = params.anchor_height, params.length
    lookup = "BLOCKHASH_FD" if full_domain else "BLOCKHASH"
    return assemble(f"""
    CHAINID
    PUSH 0x{params.fork_id.hex()}
    EQ
    JUMPI fork_ok
    REVERT 1
fork_ok:
    PUSH {l}
    ISZERO
    JUMPI expired
    NUMBER
    PUSH 1
    SUB
    DUP 1
    PUSH {i}
    LT
    JUMPI future
    PUSH {i}
    PUSH {l}
    ADD
{_CHECK_TAIL}
    PUSH {i}
    {lookup}
    PUSH 0x{params.anchor_hash.hex()}
    EQ
    JUMPI anchored
    REVERT 4
anchored:
    PUSH {target}
    PUSH 0
    CALLDATASIZE
    CALL
    JUMPI forward
    REVERT 18
forward:
    EMITRET
    RETURN
""")


# Gateway calldata prefix: seven 32-byte words, then the inner calldata.
#   0 format version | 1 fork id | 2 anchor height i | 3 anchor hash v
#   4 length l       | 5 target (left-padded) | 6 reserved (zero)
GATEWAY_FORMAT_VERSION = 1
PREFIX_WORDS = 7
PREFIX_SIZE = 32 * PREFIX_WORDS
STATUS_PREFIX_SIZE = 96
STATUS_OK = 1
GATEWAY_ACCOUNT = int.from_bytes(sha256(b"shortleash/leash-gateway"), "big")
DEFAULT_MAX_CALLDATA = 4096


@dataclass(frozen=True)
class GatewayCall:
    params: LeashParams
    target: int
    inner: bytes
    version: int = GATEWAY_FORMAT_VERSION


def gateway_encode(
    params: LeashParams, target: int, inner_calldata: bytes, max_calldata: int = DEFAULT_MAX_CALLDATA
) -> bytes:
    if PREFIX_SIZE + len(inner_calldata) > max_calldata:
        raise CalldataTooLong(f"{PREFIX_SIZE + len(inner_calldata)} > {max_calldata}")
    return b"".join([
        u256(GATEWAY_FORMAT_VERSION),
        params.fork_id,
        u256(params.anchor_height),
        params.anchor_hash,
        u256(params.length),
        u256(target),
        u256(0),
        inner_calldata,
    ])


def gateway_decode(calldata: bytes) -> GatewayCall:
    if len(calldata) < PREFIX_SIZE:
        raise ValueError("calldata shorter than the leash prefix")
    w = [calldata[32 * k:32 * k + 32] for k in range(PREFIX_WORDS)]
    if word_to_int(w[0]) != GATEWAY_FORMAT_VERSION or word_to_int(w[6]) != 0:
        raise ValueError("unsupported gateway prefix")
    params = LeashParams(word_to_int(w[2]), w[3], word_to_int(w[4]), w[1])
    return GatewayCall(params, word_to_int(w[5]), calldata[PREFIX_SIZE:])


def gateway_result(return_data: bytes) -> tuple[int, bytes]:
    """Split gateway return data into ``(status, inner return bytes)``."""
    if len(return_data) < STATUS_PREFIX_SIZE:
        raise ValueError("return data shorter than the status prefix")
    status = word_to_int(return_data[:32])
    offset = word_to_int(return_data[32:64])
    length = word_to_int(return_data[64:96])
    return status, return_data[offset:offset + length]


_GATEWAY_ASM = f"""
    CALLDATASIZE
    PUSH {PREFIX_SIZE}
    LT
    JUMPI bad_format
    PUSH 0
    CALLDATALOAD
    PUSH {GATEWAY_FORMAT_VERSION}
    EQ
    ISZERO
    JUMPI bad_format
    PUSH 192
    CALLDATALOAD
    JUMPI bad_format
    PUSH 32
    CALLDATALOAD
    CHAINID
    EQ
    JUMPI fork_ok
    REVERT 1
fork_ok:
    PUSH 128
    CALLDATALOAD
    ISZERO
    JUMPI expired
    NUMBER
    PUSH 1
    SUB
    DUP 1
    PUSH 64
    CALLDATALOAD
    LT
    JUMPI future
    PUSH 64
    CALLDATALOAD
    PUSH 128
    CALLDATALOAD
    ADD
{_CHECK_TAIL}
    PUSH 64
    CALLDATALOAD
    BLOCKHASH_FD
    PUSH 96
    CALLDATALOAD
    EQ
    JUMPI anchored
    REVERT 4
anchored:
    PUSH 160
    CALLDATALOAD
    ISCONTRACT
    JUMPI target_ok
    REVERT {GatewayFault.NO_TARGET}
target_ok:
    PUSH 160
    CALLDATALOAD
    PUSH {PREFIX_SIZE}
    CALLDATASIZE
    PUSH {PREFIX_SIZE}
    SUB
    CALL
    JUMPI forward
    REVERT {GatewayFault.INNER_FAILED}
forward:
    PUSH {STATUS_OK}
    EMIT
    PUSH {STATUS_PREFIX_SIZE}
    EMIT
    RETURNDATASIZE
    EMIT
    EMITRET
    RETURN
bad_format:
    REVERT {GatewayFault.BAD_FORMAT}
"""


def gateway_contract() -> Script:
    """The generic gateway: check the prefix's leash, then forward the rest."""
    return assemble(_GATEWAY_ASM)


def script_verdict(receipt) -> LeashVerdict:
    """Leash verdict of a wrapper/gateway call, decoded from its receipt."""
    if receipt.committed:
        return PASS
    data = receipt.return_data
    if len(data) == 32:
        code = word_to_int(data)
        for enum in (LeashReason, GatewayFault):
            try:
                return LeashVerdict(False, enum(code))
            except ValueError:
                pass
    return LeashVerdict(False, None)
