"""Transaction semantics and the contract interpreter.

A transaction either is *not sequenced* (bad signature, nonce or fee; the
state is untouched and ``TxnRejected`` is raised) or is sequenced, in which
case the sender's nonce goes up by one and the flat base fee moves to the
fee sink whatever happens next.  A sequenced transaction then commits or
reverts; a revert leaves everything else exactly as it was.

Metadata leashes are checked after sequencing and before any code is
loaded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Sequence

from .blocktree import BlockCtx
from .crypto import sha256
from .encoding import MAX_U256, u256
from .leash import LeashReason, leash_check
from .records import Call, Deploy, SignedTxn, Transfer
from .script import Op, Script
from .state import AccountState, DbState

log = logging.getLogger(__name__)

FEE_SINK = int.from_bytes(sha256(b"shortleash/fee-sink"), "big")
WORD = 1 << 256


@dataclass(frozen=True)
class VMConfig:
    base_fee: int = 10
    step_limit: int = 10_000
    max_call_depth: int = 8
    max_calldata: int = 4096
    max_stack: int = 1024
    fee_sink: int = FEE_SINK
    # Historical defects that a replay may patch out.  Both default to the
    # correct, checked behaviour.
    wrapping_sub: bool = False
    wrapping_mul: bool = False


class TxnRejected(Exception):
    """The transaction cannot be sequenced at all."""


class BadSignature(TxnRejected):
    pass


class BadNonce(TxnRejected):
    pass


class InsufficientFee(TxnRejected):
    pass


class OversizedCalldata(TxnRejected):
    pass


class Status(Enum):
    COMMITTED = "Committed"
    REVERTED = "Reverted"


class LeashOutcome(Enum):
    NOT_LEASHED = "NotLeashed"
    PASSED = "Passed"
    REVERTED_BY_LEASH = "RevertedByLeash"


Transfer3 = tuple[int, int, int]


@dataclass(frozen=True)
class Receipt:
    status: Status
    gas_used: int = 0
    return_data: bytes = b""
    leash_outcome: LeashOutcome = LeashOutcome.NOT_LEASHED
    leash_reason: LeashReason | None = None
    error: str | None = None
    transfers: tuple[Transfer3, ...] = ()

    @property
    def committed(self) -> bool:
        return self.status is Status.COMMITTED

    def describe(self) -> str:
        if self.committed:
            return "Committed"
        if self.leash_reason is not None:
            return f"Reverted({_camel(self.leash_reason.name)})"
        return f"Reverted({self.error})"

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "outcome": self.describe(),
            "gas_used": self.gas_used,
            "return_data": self.return_data.hex(),
            "leash_outcome": self.leash_outcome.value,
            "transfers": [[hex(s), hex(d), a] for s, d, a in self.transfers],
        }


def _camel(name: str) -> str:
    return "".join(part.capitalize() for part in name.split("_"))


class SequenceResult(NamedTuple):
    db: DbState
    receipts: list[Receipt]
    halted: TxnRejected | None = None


@dataclass
class ExecResult:
    ok: bool
    db: DbState
    return_data: bytes
    steps: int
    transfers: list[Transfer3] = field(default_factory=list)
    error: str | None = None


class _Fault(Exception):
    """Abort the current frame with no payload."""


class _Revert(Exception):
    def __init__(self, code: int):
        super().__init__(code)
        self.payload = u256(code) if code else b""


def contract_address(creator: int, nonce: int) -> int:
    return int.from_bytes(sha256(b"contract" + u256(creator) + u256(nonce)), "big")


class _World:
    """Copy-on-write overlay of accounts over a base snapshot."""

    def __init__(self, base: DbState):
        self.base = base
        self.overlay: dict[int, AccountState] = {}
        self.transfers: list[Transfer3] = []

    def get(self, acct: int) -> AccountState:
        if acct in self.overlay:
            return self.overlay[acct]
        return self.base.get(acct)

    def put(self, acct: int, st: AccountState) -> None:
        self.overlay[acct] = st

    def snapshot(self):
        return dict(self.overlay), len(self.transfers)

    def restore(self, snap) -> None:
        self.overlay, n = dict(snap[0]), snap[1]
        del self.transfers[n:]

    def move(self, src: int, dst: int, amount: int) -> None:
        s = self.get(src)
        if s.balance < amount:
            raise _Fault("InsufficientBalance")
        self.put(src, replace(s, balance=s.balance - amount))
        d = self.get(dst)
        if d.balance + amount > MAX_U256:
            raise _Fault("ArithmeticOverflow")
        self.put(dst, replace(d, balance=d.balance + amount))
        if amount:
            self.transfers.append((src, dst, amount))

    def commit(self) -> DbState:
        return self.base.with_accounts(self.overlay)


class VM:
    def __init__(self, config: VMConfig | None = None):
        self.config = config or VMConfig()

    def __repr__(self) -> str:
        return f"VM({self.config})"

    # -- transactions ---------------------------------------------------

    def check_sequencing(self, db: DbState, txn: SignedTxn) -> None:
        if not txn.signature_ok():
            raise BadSignature(hex(txn.sender))
        sender = db.get(txn.sender)
        if txn.nonce != sender.nonce:
            raise BadNonce(f"expected nonce {sender.nonce}, got {txn.nonce}")
        fee = self.config.base_fee
        if txn.max_fee < fee or sender.balance < fee:
            raise InsufficientFee(hex(txn.sender))
        if isinstance(txn.body, Call) and len(txn.body.calldata) > self.config.max_calldata:
            raise OversizedCalldata(f"{len(txn.body.calldata)} bytes")

    def apply_txn(self, db: DbState, txn: SignedTxn, ctx: BlockCtx) -> tuple[DbState, Receipt]:
        self.check_sequencing(db, txn)
        cfg = self.config
        sender = db.get(txn.sender)
        charged = {txn.sender: replace(sender, nonce=sender.nonce + 1, balance=sender.balance - cfg.base_fee)}
        sink = charged.get(cfg.fee_sink, db.get(cfg.fee_sink))
        charged[cfg.fee_sink] = replace(sink, balance=sink.balance + cfg.base_fee)
        base = db.with_accounts(charged)

        outcome = LeashOutcome.NOT_LEASHED
        if txn.leash is not None:
            verdict = leash_check(txn.leash, ctx)
            if not verdict.passed:
                return base, Receipt(
                    Status.REVERTED,
                    leash_outcome=LeashOutcome.REVERTED_BY_LEASH,
                    leash_reason=verdict.reason,
                    error="Leash",
                )
            outcome = LeashOutcome.PASSED

        res = self._run_body(base, txn, ctx)
        if res.ok:
            return res.db, Receipt(
                Status.COMMITTED, res.steps, res.return_data, outcome, transfers=tuple(res.transfers)
            )
        return base, Receipt(Status.REVERTED, res.steps, res.return_data, outcome, error=res.error)

    def _run_body(self, db: DbState, txn: SignedTxn, ctx: BlockCtx) -> ExecResult:
        body = txn.body
        world = _World(db)
        try:
            if isinstance(body, Transfer):
                world.move(txn.sender, body.to, body.amount)
                return ExecResult(True, world.commit(), b"", 0, world.transfers)
            if isinstance(body, Deploy):
                addr = contract_address(txn.sender, txn.nonce)
                if addr in db:
                    raise _Fault("AddressInUse")
                world.put(addr, AccountState(code=body.script))
                world.move(txn.sender, addr, body.endowment)
                return ExecResult(True, world.commit(), u256(addr), 0, world.transfers)
            if isinstance(body, Call):
                return self.execute_script(
                    db, body.contract, body.calldata, ctx, txn.sender, origin=txn.sender
                )
        except _Fault as e:
            return ExecResult(False, db, b"", 0, error=str(e))
        raise TypeError(f"unknown transaction body {body!r}")

    def apply_sequence(self, db: DbState, txns: Sequence[SignedTxn], ctx: BlockCtx) -> SequenceResult:
        """Fold ``apply_txn`` left to right; stop at the first unsequenceable transaction."""
        receipts = []
        for txn in txns:
            try:
                db, receipt = self.apply_txn(db, txn, ctx)
            except TxnRejected as e:
                log.debug("sequence halted: %r", e)
                return SequenceResult(db, receipts, e)
            receipts.append(receipt)
        return SequenceResult(db, receipts, None)

    # -- interpreter ----------------------------------------------------

    def execute_script(
        self,
        db: DbState,
        contract: int,
        calldata: bytes,
        ctx: BlockCtx,
        caller: int,
        origin: int | None = None,
    ) -> ExecResult:
        """Run ``contract`` against ``db``; on failure the returned state is ``db``."""
        world = _World(db)
        run = _Run(self.config, world, ctx, caller if origin is None else origin)
        if not world.get(contract).is_contract:
            return ExecResult(False, db, b"", 0, error="NoCode")
        try:
            data = run.frame(contract, calldata, caller, 0)
        except _Revert as e:
            return ExecResult(False, db, e.payload, run.steps, error="Revert")
        except _Fault as e:
            return ExecResult(False, db, b"", run.steps, error=str(e) or "Fault")
        return ExecResult(True, world.commit(), data, run.steps, world.transfers)


class _Run:
    def __init__(self, cfg: VMConfig, world: _World, ctx: BlockCtx, origin: int):
        self.cfg = cfg
        self.world = world
        self.ctx = ctx
        self.origin = origin
        self.steps = 0

    def frame(self, contract: int, calldata: bytes, caller: int, depth: int) -> bytes:
        cfg, world, ctx = self.cfg, self.world, self.ctx
        script: Script = world.get(contract).code
        code = script.code
        stack: list[int] = []
        out = bytearray()
        last_ret = b""
        pc = 0

        def pop() -> int:
            if not stack:
                raise _Fault("StackUnderflow")
            return stack.pop()

        def push(v: int) -> None:
            if len(stack) >= cfg.max_stack:
                raise _Fault("StackOverflow")
            stack.append(v)

        while pc < len(code):
            self.steps += 1
            if self.steps > cfg.step_limit:
                raise _Fault("OutOfGas")
            op, arg = code[pc].op, code[pc].arg
            pc += 1

            if op is Op.PUSH:
                push(arg)
            elif op is Op.POP:
                pop()
            elif op is Op.DUP:
                if arg > len(stack):
                    raise _Fault("StackUnderflow")
                push(stack[-arg])
            elif op is Op.SWAP:
                if arg >= len(stack):
                    raise _Fault("StackUnderflow")
                stack[-1], stack[-1 - arg] = stack[-1 - arg], stack[-1]
            elif Op.ADD <= op <= Op.GT:
                a = pop()
                b = pop()
                push(self._binary(op, b, a))
            elif op is Op.ISZERO:
                push(int(pop() == 0))
            elif op is Op.SLOAD:
                push(world.get(contract).storage.get(pop(), 0))
            elif op is Op.SSTORE:
                key, val = pop(), pop()
                st = world.get(contract)
                store = dict(st.storage)
                store[key] = val
                world.put(contract, replace(st, storage=store))
            elif op is Op.CALLER:
                push(caller)
            elif op is Op.ORIGIN:
                push(self.origin)
            elif op is Op.ADDRESS:
                push(contract)
            elif op is Op.SELFBALANCE:
                push(world.get(contract).balance)
            elif op is Op.BALANCE:
                push(world.get(pop()).balance)
            elif op is Op.ISCONTRACT:
                push(int(world.get(pop()).is_contract))
            elif op is Op.CALLDATALOAD:
                off = pop()
                word = calldata[off:off + 32] if off < len(calldata) else b""
                push(int.from_bytes(word.ljust(32, b"\x00"), "big"))
            elif op is Op.CALLDATASIZE:
                push(len(calldata))
            elif op is Op.RETURNDATASIZE:
                push(len(last_ret))
            elif op is Op.NUMBER:
                push(ctx.height)
            elif op is Op.BLOCKHASH:
                push(int.from_bytes(ctx.blockhash(pop(), full_domain=False), "big"))
            elif op is Op.BLOCKHASH_FD:
                push(int.from_bytes(ctx.blockhash(pop(), full_domain=True), "big"))
            elif op is Op.CHAINID:
                push(int.from_bytes(ctx.fork_id, "big"))
            elif op is Op.TRANSFER:
                to, amount = pop(), pop()
                world.move(contract, to, amount)
            elif op is Op.CALL:
                length, offset, target = pop(), pop(), pop()
                if offset + length > len(calldata):
                    raise _Fault("CalldataOutOfRange")
                ok, last_ret = self._call(contract, target, calldata[offset:offset + length], depth)
                push(int(ok))
            elif op is Op.JUMP:
                pc = arg
            elif op is Op.JUMPI:
                if pop():
                    pc = arg
            elif op is Op.EMIT:
                out += u256(pop())
            elif op is Op.EMITRET:
                out += last_ret
            elif op is Op.RETURN:
                return bytes(out)
            elif op is Op.REVERT:
                raise _Revert(arg)
            elif op is Op.STOP:
                return b""
            else:  # pragma: no cover - Op is closed
                raise _Fault(f"BadOpcode {op}")
        return b""

    def _binary(self, op: Op, b: int, a: int) -> int:
        cfg = self.cfg
        if op is Op.ADD:
            r = b + a
        elif op is Op.SUB:
            r = b - a
            if r < 0 and cfg.wrapping_sub:
                r %= WORD
        elif op is Op.MUL:
            r = b * a
            if r > MAX_U256 and cfg.wrapping_mul:
                r %= WORD
        elif op in (Op.DIV, Op.MOD):
            if a == 0:
                raise _Fault("DivisionByZero")
            r = b // a if op is Op.DIV else b % a
        elif op is Op.EQ:
            r = int(b == a)
        elif op is Op.LT:
            r = int(b < a)
        else:
            r = int(b > a)
        if not 0 <= r <= MAX_U256:
            raise _Fault("ArithmeticOverflow")
        return r

    def _call(self, caller: int, target: int, calldata: bytes, depth: int) -> tuple[bool, bytes]:
        if depth + 1 > self.cfg.max_call_depth:
            return False, b""
        if not self.world.get(target).is_contract:
            return True, b""
        snap = self.world.snapshot()
        try:
            return True, self.frame(target, calldata, caller, depth + 1)
        except _Revert as e:
            self.world.restore(snap)
            return False, e.payload
        except _Fault as e:
            if str(e) == "OutOfGas":
                raise
            self.world.restore(snap)
            return False, b""


DEFAULT_VM = VM()


def apply_txn(db: DbState, txn: SignedTxn, ctx: BlockCtx) -> tuple[DbState, Receipt]:
    return DEFAULT_VM.apply_txn(db, txn, ctx)


def apply_sequence(db: DbState, txns: Sequence[SignedTxn], ctx: BlockCtx) -> SequenceResult:
    return DEFAULT_VM.apply_sequence(db, txns, ctx)


def execute_script(db, contract, calldata, ctx, caller, origin=None) -> ExecResult:
    return DEFAULT_VM.execute_script(db, contract, calldata, ctx, caller, origin)


def install_contract(
    db: DbState, account: int, script: Script, balance: int = 0, storage: dict | None = None
) -> DbState:
    """Place a contract directly into a state (genesis fixtures)."""
    return db.with_accounts({account: AccountState(0, balance, script, storage or {})})


def fund(db: DbState, balances: dict[int, int]) -> DbState:
    return db.with_accounts({a: replace(db.get(a), balance=b) for a, b in balances.items()})
