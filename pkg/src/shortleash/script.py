"""Instruction set and assembly format for the contract VM.

A script is a finite list of instructions for a stack machine over
256-bit words.  Binary operators pop the right operand first, so
``PUSH 7 / PUSH 2 / SUB`` leaves 5.  Instructions that take an immediate:

    PUSH <word>     DUP <n>    SWAP <n>
    JUMP <label>    JUMPI <label>     REVERT [<code>]

Assembly text has one instruction per line; ``name:`` defines a label and
``;`` starts a comment.  Integers may be decimal or ``0x`` hex.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .crypto import sha256
from .encoding import MAX_U256, DecodeError, Reader, u8, u32, u256


class Op(IntEnum):
    STOP = 0x00
    PUSH = 0x01
    POP = 0x02
    DUP = 0x03
    SWAP = 0x04
    ADD = 0x10
    SUB = 0x11
    MUL = 0x12
    DIV = 0x13
    MOD = 0x14
    EQ = 0x15
    LT = 0x16
    GT = 0x17
    ISZERO = 0x18
    SLOAD = 0x20
    SSTORE = 0x21
    CALLER = 0x30
    ORIGIN = 0x31
    ADDRESS = 0x32
    SELFBALANCE = 0x33
    BALANCE = 0x34
    ISCONTRACT = 0x35
    CALLDATALOAD = 0x36
    CALLDATASIZE = 0x37
    RETURNDATASIZE = 0x38
    NUMBER = 0x40
    BLOCKHASH = 0x41
    BLOCKHASH_FD = 0x42
    CHAINID = 0x43
    TRANSFER = 0x50
    CALL = 0x51
    JUMP = 0x60
    JUMPI = 0x61
    EMIT = 0x70
    EMITRET = 0x71
    RETURN = 0x72
    REVERT = 0x73


IMMEDIATE_OPS = frozenset({Op.PUSH, Op.DUP, Op.SWAP, Op.JUMP, Op.JUMPI, Op.REVERT})
JUMP_OPS = frozenset({Op.JUMP, Op.JUMPI})
MAGIC = b"SLS\x01"


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class Instr:
    op: Op
    arg: int = 0

    def __str__(self) -> str:
        if self.op in IMMEDIATE_OPS:
            return f"{self.op.name} {self.arg}"
        return self.op.name


@dataclass(frozen=True)
class Script:
    code: tuple[Instr, ...]

    def __post_init__(self):
        for ins in self.code:
            if not 0 <= ins.arg <= MAX_U256:
                raise AssemblyError(f"immediate out of range: {ins.arg}")
            if ins.op in JUMP_OPS and not 0 <= ins.arg <= len(self.code):
                raise AssemblyError(f"jump target {ins.arg} outside script")
            if ins.op in (Op.DUP, Op.SWAP) and ins.arg < 1:
                raise AssemblyError(f"{ins.op.name} needs a positive depth")

    def __len__(self) -> int:
        return len(self.code)

    def encode(self) -> bytes:
        out = [MAGIC, u32(len(self.code))]
        for ins in self.code:
            out.append(u8(ins.op))
            if ins.op in IMMEDIATE_OPS:
                out.append(u256(ins.arg))
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "Script":
        r = Reader(data)
        script = cls.read(r)
        r.done()
        return script

    @classmethod
    def read(cls, r: Reader) -> "Script":
        r.expect(MAGIC)
        code = []
        for _ in range(r.u32()):
            raw = r.u8()
            try:
                op = Op(raw)
            except ValueError:
                raise DecodeError(f"unknown opcode 0x{raw:02x}") from None
            arg = r.u256() if op in IMMEDIATE_OPS else 0
            code.append(Instr(op, arg))
        return cls(tuple(code))

    def digest(self) -> bytes:
        return sha256(self.encode())

    @classmethod
    def from_asm(cls, text: str) -> "Script":
        return assemble(text)

    def to_asm(self) -> str:
        targets = sorted({ins.arg for ins in self.code if ins.op in JUMP_OPS})
        names = {t: f"L{t}" for t in targets}
        lines = []
        for idx, ins in enumerate(self.code):
            if idx in names:
                lines.append(f"{names[idx]}:")
            if ins.op in JUMP_OPS:
                lines.append(f"    {ins.op.name} {names[ins.arg]}")
            elif ins.op is Op.PUSH and ins.arg >= 1 << 64:
                lines.append(f"    PUSH 0x{ins.arg:x}")
            else:
                lines.append(f"    {ins}")
        if len(self.code) in names:
            lines.append(f"{names[len(self.code)]}:")
        return "\n".join(lines) + "\n"


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise AssemblyError(f"line {lineno}: bad integer {tok!r}") from None


def assemble(text: str) -> Script:
    """Two-pass assembler: collect labels, then resolve jump targets."""
    pending: list[tuple[Op, str | None, int]] = []
    labels: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.endswith(":"):
            name = line[:-1].strip()
            if not name or name in labels:
                raise AssemblyError(f"line {lineno}: bad or duplicate label {name!r}")
            labels[name] = len(pending)
            continue
        parts = line.split()
        try:
            op = Op[parts[0].upper()]
        except KeyError:
            raise AssemblyError(f"line {lineno}: unknown instruction {parts[0]!r}") from None
        if len(parts) > 2:
            raise AssemblyError(f"line {lineno}: too many operands")
        operand = parts[1] if len(parts) == 2 else None
        if operand is not None and op not in IMMEDIATE_OPS:
            raise AssemblyError(f"line {lineno}: {op.name} takes no operand")
        if operand is None and op in IMMEDIATE_OPS and op is not Op.REVERT:
            raise AssemblyError(f"line {lineno}: {op.name} needs an operand")
        pending.append((op, operand, lineno))

    code = []
    for op, operand, lineno in pending:
        if operand is None:
            code.append(Instr(op))
        elif op in JUMP_OPS:
            if operand not in labels:
                raise AssemblyError(f"line {lineno}: undefined label {operand!r}")
            code.append(Instr(op, labels[operand]))
        else:
            code.append(Instr(op, _parse_int(operand, lineno)))
    return Script(tuple(code))
