"""Acceptable transaction schedules and what an adversary can move with them.

Given a base sequence ``T``, a schedule is any sequence of transactions from
``T`` in which each sender's transactions form a prefix of that sender's
transactions in ``T`` (in nonce order).  The empty schedule counts.

For one sender there are ``k + 1`` schedules (the prefixes).  For ``k``
distinct senders with one transaction each, a schedule is an ordered
selection of ``j`` of them for some ``j``, giving ``sum_i k!/i!`` in total,
which is below ``k! e``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Iterator, Sequence

from .blocktree import Block, BlockCtx, BlockTree
from .contracts import parity_payout, well_known, words
from .crypto import Keypair
from .records import Call, SignedTxn, Transfer, make_txn
from .state import DbState
from .vm import VM, SequenceResult, fund, install_contract

SINGLE = "single"
INDEPENDENT = "independent"
SHAPES = (SINGLE, INDEPENDENT)
DEFAULT_K_LIMIT = 7
COUNT_K_LIMIT = 500


class NonceGap(ValueError):
    """A sender's nonces in ``T`` are not consecutive and increasing."""


class TooLarge(ValueError):
    pass


class CountOverflow(OverflowError):
    pass


Schedule = tuple[SignedTxn, ...]


def _by_sender(txns: Sequence[SignedTxn]) -> dict[int, list[SignedTxn]]:
    groups: dict[int, list[SignedTxn]] = {}
    for t in txns:
        groups.setdefault(t.sender, []).append(t)
    for sender, ts in groups.items():
        for a, b in zip(ts, ts[1:]):
            if b.nonce != a.nonce + 1:
                raise NonceGap(f"sender {hex(sender)[:10]}..: nonce {a.nonce} followed by {b.nonce}")
    return groups


@dataclass
class ScheduleSet:
    """All acceptable schedules of ``base``, enumerated lazily in depth-first order."""

    base: tuple[SignedTxn, ...]
    queues: list[list[SignedTxn]] = field(init=False, repr=False)

    def __post_init__(self):
        self.base = tuple(self.base)
        self.queues = list(_by_sender(self.base).values())

    def __iter__(self) -> Iterator[Schedule]:
        pos = [0] * len(self.queues)
        prefix: list[SignedTxn] = []

        def walk() -> Iterator[Schedule]:
            yield tuple(prefix)
            for q, queue in enumerate(self.queues):
                if pos[q] < len(queue):
                    prefix.append(queue[pos[q]])
                    pos[q] += 1
                    yield from walk()
                    pos[q] -= 1
                    prefix.pop()

        return walk()

    def count(self) -> int:
        """Size of the set without enumerating it: sum of multinomials over prefix lengths."""
        # ways[n] = number of interleavings using n transactions from the queues seen so far
        ways = [1]
        for queue in self.queues:
            nxt = [0] * (len(ways) + len(queue))
            for n, w in enumerate(ways):
                for a in range(len(queue) + 1):
                    nxt[n + a] += w * comb(n + a, a)
            ways = nxt
        return sum(ways)

    def __len__(self) -> int:
        return self.count()


def acceptable_schedules(txns: Sequence[SignedTxn]) -> ScheduleSet:
    return ScheduleSet(tuple(txns))


def count_closed_form(k: int, shape: str = INDEPENDENT, *, k_limit: int = COUNT_K_LIMIT) -> int:
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > k_limit:
        raise CountOverflow(f"k = {k} exceeds the limit {k_limit}")
    if shape == SINGLE:
        count = k + 1
    elif shape == INDEPENDENT:
        count = sum(factorial(k) // factorial(i) for i in range(k + 1))
    else:
        raise ValueError(f"shape must be one of {SHAPES}")
    lo, _ = kfact_e_bounds(k)
    assert count < lo, "count must stay below k!e"
    return count


def kfact_e_bounds(k: int) -> tuple[Fraction, Fraction]:
    """Rational bounds ``lo < k! e < hi``.

    ``e`` lies strictly between ``S_m = sum_{i<=m} 1/i!`` and
    ``S_m + 1/(m! m)``; we take ``m = k + 2``.
    """
    m = k + 2
    s = sum(Fraction(1, factorial(i)) for i in range(m + 1))
    kf = factorial(k)
    return kf * s, kf * (s + Fraction(1, factorial(m) * m))


def ceil_kfact_e(k: int) -> int:
    # k! e is irrational, so its ceiling is floor + 1 once both bounds share a floor
    lo, hi = kfact_e_bounds(k)
    f = lo.numerator // lo.denominator
    if hi >= f + 1:
        raise ArithmeticError(f"bounds on {k}! e straddle an integer")
    return f + 1


# ---------------------------------------------------------------------------
# adversary amounts


@dataclass(frozen=True)
class AdversaryAmounts:
    sent: int
    received: int
    adversary_accounts: frozenset[int]
    halted: bool = False


def solo_ctx() -> BlockCtx:
    """A context on a fresh one-block tree, for analysing schedules off-chain."""
    tree = BlockTree()
    return BlockCtx(tree, tree.insert(Block(None, 0)))


def adversary_amounts(
    schedule: Sequence[SignedTxn],
    db: DbState,
    adversary_accounts: Iterable[int],
    ctx: BlockCtx | None = None,
    vm: VM | None = None,
) -> AdversaryAmounts:
    """``W_S`` and ``W_R``: what adversary accounts send and receive when ``schedule`` runs on ``db``."""
    accounts = frozenset(adversary_accounts)
    result: SequenceResult = (vm or VM()).apply_sequence(db, schedule, ctx or solo_ctx())
    sent = received = 0
    for receipt in result.receipts:
        for src, dst, amount in receipt.transfers:
            if src in accounts:
                sent += amount
            if dst in accounts:
                received += amount
    return AdversaryAmounts(sent, received, accounts, result.halted is not None)


@dataclass(frozen=True)
class AmountExtremes:
    schedules: int
    min_received: int
    max_received: int
    min_sent: int
    max_sent: int
    argmax_received: Schedule

    def to_dict(self) -> dict:
        return {
            "schedules": self.schedules,
            "W_R": {"min": self.min_received, "max": self.max_received},
            "W_S": {"min": self.min_sent, "max": self.max_sent},
            "argmax_W_R_length": len(self.argmax_received),
        }


def amounts_over_all_schedules(
    txns: Sequence[SignedTxn],
    db: DbState,
    adversary_accounts: Iterable[int],
    k_limit: int = DEFAULT_K_LIMIT,
    ctx: BlockCtx | None = None,
    vm: VM | None = None,
) -> AmountExtremes:
    """Brute force over every acceptable schedule of ``txns``."""
    if len(txns) > k_limit:
        raise TooLarge(f"{len(txns)} transactions exceed k_limit = {k_limit}")
    accounts = frozenset(adversary_accounts)
    ctx = ctx or solo_ctx()
    vm = vm or VM()
    results = [(s, adversary_amounts(s, db, accounts, ctx, vm)) for s in acceptable_schedules(txns)]
    best = max(results, key=lambda r: r[1].received)
    return AmountExtremes(
        schedules=len(results),
        min_received=min(a.received for _, a in results),
        max_received=best[1].received,
        min_sent=min(a.sent for _, a in results),
        max_sent=max(a.sent for _, a in results),
        argmax_received=best[0],
    )


# ---------------------------------------------------------------------------
# the parity counterexample

PARITY_CONTRACT = well_known("parity")
PARITY_BALANCE = 2_000_000


@dataclass
class ParityFixture:
    db: DbState
    t1: SignedTxn  # Bob deposits an odd amount into the contract
    t2: SignedTxn  # Alice (the owner) triggers the payout to Cobb
    adversary: frozenset[int]
    keys: dict[str, Keypair]

    @property
    def base(self) -> tuple[SignedTxn, SignedTxn]:
        return (self.t1, self.t2)


def parity_fixture(seed: int = 0, deposit: int = 3, balance: int = PARITY_BALANCE) -> ParityFixture:
    keys = {name: Keypair.derive(name, seed) for name in ("alice", "bob", "cobb")}
    db = fund(DbState(), {keys["alice"].account: 1_000, keys["bob"].account: 1_000})
    db = install_contract(db, PARITY_CONTRACT, parity_payout(), balance=balance,
                          storage={0: keys["alice"].account})
    t1 = make_txn(keys["bob"], 0, Transfer(PARITY_CONTRACT, deposit))
    t2 = make_txn(keys["alice"], 0, Call(PARITY_CONTRACT, words(keys["cobb"].account)))
    return ParityFixture(db, t1, t2, frozenset({keys["cobb"].account}), keys)


def count_table(max_k: int, shape: str) -> list[tuple[int, int, int]]:
    """Rows ``(k, count, ceil(k! e))``."""
    return [(k, count_closed_form(k, shape), ceil_kfact_e(k)) for k in range(max_k + 1)]
