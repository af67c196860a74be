"""Long-range attacks on an eclipsed light client, and what a leash does about them.

Cast: Alice (the victim) slept after some block and wakes up eclipsed; every
block and proof she sees comes from Cobb.  Cobb holds validator keys of old
committees (and a sub-quorum of the recent ones).  He shows Alice a fake
history in which he pledged her something, she pays him, and the payment is
submitted to the real chain.  The harm is Cobb's balance gain there.

A scenario runs once per *arm*: ``leashed`` (Alice's payment carries a
metadata leash anchored at the tip she saw) and ``unleashed``.
"""

from __future__ import annotations

import gc
import json
import random
import types
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Iterable, Mapping, Sequence

from .blocktree import Block, BlockId, BlockTree
from .consensus import (
    LightClientState,
    LightVerdict,
    committee_of,
    light_verify,
    mint_block,
    next_epoch,
    register_transition,
)
from .contracts import pledge_registry, well_known, words
from .crypto import ZERO_DIGEST, Keypair, sha256
from .leash import anchor_at, wrap_metadata
from .node import Chain
from .records import Call, Committee, SignedTxn, Transfer, make_txn
from .state import (
    AbsenceProof,
    DbState,
    StateProof,
    UnknownAddress,
    prove,
    prove_absent,
    verify,
    verify_absent,
)
from .vm import VM, VMConfig, Receipt, fund, install_contract

SCENARIO_FORMAT = "shortleash-scenario/1"
REPORT_FORMAT = "shortleash-report/1"

VARIANTS = ("side_chain", "stale", "skip_verification")
FORK_MODES = ("none", "hidden_real", "bogus_adversarial")
ARMS = ("leashed", "unleashed")
PEOPLE = ("alice", "bob", "cobb", "carol", "dave")
REGISTRY = well_known("pledges")
MAIN_FORK = ZERO_DIGEST
REAL_FORK = sha256(b"shortleash/fork/1")
BOGUS_FORK = sha256(b"shortleash/fork/cobb")


class ScenarioError(ValueError):
    """The scenario config is inconsistent; raised before anything runs."""


class InsufficientKeys(Exception):
    pass


class ProofRejected(Exception):
    pass


class EclipseViolation(AssertionError):
    pass


class ScenarioAssertion(AssertionError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    variant: str = "side_chain"
    fork_mode: str = "none"
    committee_size: int = 4
    epoch_length: int = 5
    honest_blocks: int = 30
    recent_window: int = 2
    background_txns: int = 2
    sleep_height: int = 6
    fork_height: int | None = None  # defaults to sleep_height
    side_length: int | None = None  # defaults to matching the honest tip
    stale_height: int | None = None  # defaults to sleep_height
    hard_fork_height: int | None = None
    pledges: tuple[tuple[int, int], ...] = ()  # real (height, amount) pledges by Cobb to Alice
    bogus_pledge: int = 5_000
    payment: int = 5_000
    leash_length: int = 16
    verify_proofs: bool = True
    mimic_txs: bool = True
    bogus_rotation_every: int = 0
    rounds: int = 1
    round_blocks: int = 2
    window: int = 256
    arms: tuple[str, ...] = ARMS
    balances: tuple[tuple[str, int], ...] = (
        ("alice", 100_000), ("bob", 50_000), ("carol", 50_000), ("cobb", 1_000), ("dave", 50_000),
    )
    expect: Mapping[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        data = dict(data)
        fmt = data.pop("format", SCENARIO_FORMAT)
        if fmt != SCENARIO_FORMAT:
            raise ScenarioError(f"unsupported scenario format {fmt!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        if "pledges" in data:
            data["pledges"] = tuple((int(h), int(a)) for h, a in data["pledges"])
        if "arms" in data:
            data["arms"] = tuple(data["arms"])
        if "balances" in data:
            data["balances"] = tuple(sorted(dict(data["balances"]).items()))
        try:
            s = cls(**data)
        except TypeError as e:
            raise ScenarioError(str(e)) from None
        s.validate()
        return s

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise ScenarioError(f"bad scenario JSON: {e}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pledges"] = [list(p) for p in self.pledges]
        d["arms"] = list(self.arms)
        d["balances"] = dict(self.balances)
        d["expect"] = dict(self.expect)
        d["format"] = SCENARIO_FORMAT
        return d

    # derived heights -------------------------------------------------------

    @property
    def fork_at(self) -> int:
        return self.sleep_height if self.fork_height is None else self.fork_height

    @property
    def stale_at(self) -> int:
        return self.sleep_height if self.stale_height is None else self.stale_height

    @property
    def side_len(self) -> int:
        if self.side_length is not None:
            return self.side_length
        return max(1, self.honest_blocks - self.fork_at)

    def child_epoch(self, height: int) -> int:
        """Epoch of any child of the honest block at ``height``."""
        return height // self.epoch_length

    def current_epoch(self, tip_height: int) -> int:
        return self.child_epoch(tip_height)

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ScenarioError(f"{self.name}: {msg}")

        need(self.variant in VARIANTS, f"variant must be one of {VARIANTS}")
        need(self.fork_mode in FORK_MODES, f"fork_mode must be one of {FORK_MODES}")
        need(self.committee_size >= 1, "committee_size must be positive")
        need(self.epoch_length >= 1, "epoch_length must be positive")
        need(self.recent_window >= 1, "recent_window must be at least 1")
        need(0 <= self.sleep_height < self.honest_blocks, "sleep_height must precede the honest tip")
        need(set(self.arms) <= set(ARMS) and self.arms, f"arms must be a non-empty subset of {ARMS}")
        need(self.rounds >= 1 and self.round_blocks >= 1, "rounds and round_blocks must be positive")
        need(self.leash_length >= 0 and self.payment >= 0, "amounts must be non-negative")
        names = dict(self.balances)
        need(set(names) <= set(PEOPLE), f"balances may only name {PEOPLE}")
        for h, a in self.pledges:
            need(1 <= h <= self.honest_blocks and a >= 0, f"bad pledge ({h}, {a})")
        if self.variant == "side_chain":
            need(self.sleep_height <= self.fork_at < self.honest_blocks,
                 "the side chain must branch at or after the sleep point")
            need(self.side_len >= 1, "side chain needs at least one block")
            last_leaked = self.current_epoch(self.honest_blocks) - self.recent_window
            need(self.child_epoch(self.fork_at) <= last_leaked,
                 f"fork at height {self.fork_at} needs keys of epoch "
                 f"{self.child_epoch(self.fork_at)}, but only epochs <= {last_leaked} leaked")
        if self.variant == "stale":
            need(self.sleep_height <= self.stale_at <= self.honest_blocks, "stale_height out of range")
        if self.fork_mode != "none":
            need(self.variant == "side_chain", "hard-fork scenarios use the side_chain variant")
        if self.fork_mode == "hidden_real":
            hf = self.hard_fork_height
            need(hf is not None and self.fork_at < hf <= self.honest_blocks,
                 "hidden_real needs fork_height < hard_fork_height <= honest_blocks")


# ---------------------------------------------------------------------------
# the adversary's tools


@dataclass
class AdversaryKeys:
    """Cobb's key store: what he knows (every committee) and what he holds."""

    committees: dict[int, Committee]
    keys: dict[int, list[Keypair]]

    def quorum(self, epoch: int) -> list[Keypair] | None:
        committee = self.committees.get(epoch)
        held = self.keys.get(epoch, [])
        if committee is None or len(held) < committee.threshold:
            return None
        return held


def leak_keys(chain: Chain, recent_window: int) -> AdversaryKeys:
    """Posterior corruption: every old committee's keys, a sub-quorum of each recent one."""
    current = chain.epoch_of_child()
    keys = {}
    for epoch, ks in chain.keys.items():
        if epoch <= current - recent_window:
            keys[epoch] = list(ks)
        else:
            byzantine = len(ks) - chain.committees[epoch].threshold
            keys[epoch] = list(ks[:byzantine])
    return AdversaryKeys(dict(chain.committees), keys)


@dataclass(frozen=True)
class SideChainPlan:
    length: int
    state: DbState  # the bogus state every side block commits to
    fork_id: bytes | None = None  # None: inherit from the fork point
    txs: Sequence[Sequence[SignedTxn]] = ()  # per-block decoys
    rotate_every: int = 0  # forge a committee hand-over every n blocks
    seed: int = 0


@dataclass
class SideChain:
    blocks: list[Block]
    ids: list[BlockId]
    state: DbState

    @property
    def tip(self) -> BlockId:
        return self.ids[-1]


def build_side_chain(
    tree: BlockTree, fork_point: BlockId, keys: AdversaryKeys, plan: SideChainPlan
) -> SideChain:
    """Forge ``plan.length`` blocks on top of ``fork_point`` and insert them in ``tree``.

    Each block is signed by every key Cobb holds for its epoch.  With
    ``rotate_every`` he hands the chain to committees of his own keys,
    which ``keys`` records as he goes.
    """
    blocks, ids = [], []
    parent = fork_point
    for n in range(plan.length):
        epoch = next_epoch(tree.get(parent))
        signers = keys.quorum(epoch)
        if signers is None:
            raise InsufficientKeys(f"no quorum for epoch {epoch}")
        transition = None
        if plan.rotate_every and (n + 1) % plan.rotate_every == 0:
            size = len(keys.committees[epoch].members)
            forged = [Keypair.derive(f"cobb-validator-{epoch + 1}-{k}", plan.seed) for k in range(size)]
            new = committee_of(epoch + 1, forged)
            transition = register_transition(keys.committees[epoch], new, signers)
            keys.committees[epoch + 1] = new
            keys.keys[epoch + 1] = forged
        txs = plan.txs[n] if n < len(plan.txs) else ()
        block = mint_block(signers, tree, parent, txs, plan.state.root, plan.fork_id, transition)
        parent = tree.insert(block)
        blocks.append(block)
        ids.append(parent)
    return SideChain(blocks, ids, plan.state)


# ---------------------------------------------------------------------------
# the victim

Evidence = tuple[int, StateProof | AbsenceProof]


def victim_inspect(
    tip: Block, account: int, address: int | None, evidence: Evidence, *, check: bool = True
) -> int:
    """The value Alice accepts for ``(account, address)`` at ``tip``.

    ``evidence`` is what Cobb hands over.  With ``check=False`` she skips the
    Merkle verification and believes anything.
    """
    value, proof = evidence
    if not check:
        return value
    if isinstance(proof, AbsenceProof):
        ok = value == 0 and verify_absent(tip.state_root, account, address, proof)
    else:
        ok = verify(tip.state_root, account, address, value, proof)
    if not ok:
        raise ProofRejected(f"proof for {hex(account)[:10]}.. does not match the state root")
    return value


def evidence_for(db: DbState, account: int, address: int | None) -> Evidence:
    try:
        return prove(db, account, address)
    except UnknownAddress:
        return 0, prove_absent(db, account, address)


class Victim:
    """Alice's wallet: her own block tree, light client and signing key.

    She only ever learns about the world through ``receive``.
    """

    def __init__(self, key: Keypair, pre_sleep: Sequence[Block], client: LightClientState, nonce: int):
        self.key = key
        self.tree = BlockTree()
        for b in pre_sleep:
            self.tree.insert(b)
        self.client = client
        self.tip = client.trusted_block
        self.nonce = nonce

    def receive(self, segment: Sequence[Block]) -> LightVerdict:
        verdict = light_verify(self.client, segment)
        if verdict.accepted:
            for b in segment:
                self.tip = self.tree.insert(b)
            self.client = verdict.client
        return verdict

    @property
    def tip_block(self) -> Block:
        return self.tree.get(self.tip)

    def inspect(self, account: int, address: int | None, evidence: Evidence, check: bool = True) -> int:
        return victim_inspect(self.tip_block, account, address, evidence, check=check)

    def pay(self, to: int, amount: int, leash_length: int | None) -> SignedTxn:
        fork_id = self.tip_block.fork_id
        txn = make_txn(self.key, self.nonce, Transfer(to, amount), fork_id=fork_id)
        if leash_length is not None:
            txn = wrap_metadata(txn, anchor_at(self.tree, self.tip, leash_length, fork_id), self.key)
        self.nonce += 1
        return txn


_OPAQUE = (type, types.ModuleType, types.FunctionType, types.BuiltinFunctionType, types.MethodType)


def assert_isolated(root: object, forbidden: Iterable[object]) -> None:
    """Raise ``EclipseViolation`` if ``root`` can reach any ``forbidden`` object.

    Walks instance data only; classes, modules and functions are not
    followed, so shared code does not count as a channel.
    """
    bad = {id(o) for o in forbidden}
    seen = set()
    stack = [root]
    while stack:
        obj = stack.pop()
        if id(obj) in seen or isinstance(obj, _OPAQUE):
            continue
        seen.add(id(obj))
        if id(obj) in bad:
            raise EclipseViolation(f"victim reaches {type(obj).__name__} of the honest chain")
        stack.extend(gc.get_referents(obj))
        slots = getattr(type(obj), "__slots__", ())
        for name in (slots,) if isinstance(slots, str) else slots:
            if hasattr(obj, name):
                stack.append(getattr(obj, name))


# ---------------------------------------------------------------------------
# running a scenario


@dataclass
class RoundRecord:
    round: int
    light_verify: str
    view_height: int
    view_tip: str
    view_fork_id: str
    segment: int
    cobb_saw: str | None = None  # Cobb's view of the previous round's receipt
    inspected: int | None = None
    inspection: str = "ok"
    proposal: dict | None = None
    receipt: dict | None = None
    outcome: str = "NoProposal"
    adversary_delta: int = 0
    victim_delta: int = 0


@dataclass
class ArmResult:
    arm: str
    rounds: list[RoundRecord]

    @property
    def harm(self) -> int:
        return sum(r.adversary_delta for r in self.rounds)

    @property
    def victim_loss(self) -> int:
        return -sum(r.victim_delta for r in self.rounds)

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "harm": self.harm,
            "victim_loss": self.victim_loss,
            "rounds": [asdict(r) for r in self.rounds],
        }


@dataclass
class ScenarioReport:
    scenario: Scenario
    arms: dict[str, ArmResult]
    honest_roots: list[str]
    side_roots: list[str]
    checks: dict[str, str]
    base_fee: int

    def outcome(self, arm: str, round: int = 0) -> str:
        return self.arms[arm].rounds[round].outcome

    def harm(self, arm: str) -> int:
        return self.arms[arm].harm

    def victim_loss(self, arm: str) -> int:
        return self.arms[arm].victim_loss

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "scenario": self.scenario.to_dict(),
            "base_fee": self.base_fee,
            "arms": {k: v.to_dict() for k, v in self.arms.items()},
            "state_roots": {"honest": self.honest_roots, "side": self.side_roots},
            "checks": self.checks,
            "note": "proof-of-work histories are not simulated; the eclipse is a message filter",
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary(self) -> str:
        s = self.scenario
        lines = [
            f"scenario {s.name} (seed {s.seed}, variant {s.variant}, fork {s.fork_mode})",
            f"{'arm':<10} {'round':>5}  {'light_verify':<22} {'seen':>6}  {'outcome':<32} {'harm':>8} {'loss':>8}",
        ]
        for arm in self.arms.values():
            for r in arm.rounds:
                seen = "-" if r.inspected is None else str(r.inspected)
                lines.append(
                    f"{arm.arm:<10} {r.round:>5}  {r.light_verify:<22} {seen:>6}  "
                    f"{r.outcome:<32} {r.adversary_delta:>8} {-r.victim_delta:>8}"
                )
        for arm in self.arms.values():
            lines.append(f"total {arm.arm}: harm {arm.harm}, victim loss {arm.victim_loss}")
        return "\n".join(lines) + "\n"

    def check_expectations(self) -> list[str]:
        """Compare against ``scenario.expect``; returns the failures."""
        failures = []
        for arm, want in self.scenario.expect.items():
            if arm not in self.arms:
                failures.append(f"{arm}: arm not run")
                continue
            got = self.arms[arm]
            if "outcome" in want and got.rounds[0].outcome != want["outcome"]:
                failures.append(f"{arm}: outcome {got.rounds[0].outcome} != {want['outcome']}")
            if "harm" in want and got.harm != want["harm"]:
                failures.append(f"{arm}: harm {got.harm} != {want['harm']}")
            if want.get("harm_positive") and got.harm <= 0:
                failures.append(f"{arm}: expected positive harm, got {got.harm}")
            if "victim_loss" in want:
                loss = want["victim_loss"]
                if loss == "base_fee":
                    loss = self.base_fee
                if got.victim_loss != loss:
                    failures.append(f"{arm}: victim loss {got.victim_loss} != {loss}")
        return failures


class _World:
    """The honest network plus Cobb; Alice lives in a separate ``Victim``."""

    def __init__(self, s: Scenario, vm: VM):
        self.s = s
        self.rng = random.Random(s.seed)
        self.people = {p: Keypair.derive(p, s.seed) for p in PEOPLE}
        balances = dict(s.balances)
        db = fund(DbState(), {self.people[p].account: balances.get(p, 0) for p in PEOPLE})
        db = install_contract(db, REGISTRY, pledge_registry())
        self.chain = Chain(db, self.validators(0), vm=vm, window=s.window)
        self.background = ["bob", "carol", "dave"]

    def validators(self, epoch: int) -> list[Keypair]:
        return [Keypair.derive(f"validator-{epoch}-{k}", self.s.seed) for k in range(self.s.committee_size)]

    def nonce(self, who: str) -> int:
        return self.chain.state().nonce(self.people[who].account)

    def grow(self, count: int, extra: Sequence[SignedTxn] = ()) -> None:
        """Append ``count`` honest blocks; ``extra`` goes into the first one."""
        s = self.s
        for n in range(count):
            h = self.chain.height + 1
            txns = list(extra) if n == 0 else []
            nonces = {}
            for _ in range(s.background_txns):
                src, dst = self.rng.sample(self.background, 2)
                k = nonces.setdefault(src, self.nonce(src))
                nonces[src] = k + 1
                fid = self._fork_id(h)
                txns.append(make_txn(self.people[src], k, Transfer(self.people[dst].account,
                                     self.rng.randint(1, 100)), fork_id=fid))
            for ph, amount in s.pledges:
                if ph == h:
                    cobb = self.people["cobb"]
                    k = nonces.setdefault("cobb", self.nonce("cobb"))
                    nonces["cobb"] = k + 1
                    body = Call(REGISTRY, words(self.people["alice"].account, amount))
                    txns.append(make_txn(cobb, k, body, fork_id=self._fork_id(h)))
            rotate = self.validators(self.chain.epoch_of_child() + 1) if h % s.epoch_length == 0 else None
            self.chain.extend(txns, rotate_to=rotate, fork_id=self._fork_id(h))

    def _fork_id(self, height: int) -> bytes:
        s = self.s
        if s.fork_mode == "hidden_real" and height >= s.hard_fork_height:
            return REAL_FORK
        return MAIN_FORK


def _hex(b: bytes) -> str:
    return b.hex()


def _run_arm(s: Scenario, arm: str, vm: VM) -> tuple[ArmResult, list[str], list[str], dict[str, str]]:
    world = _World(s, vm)
    chain = world.chain
    world.grow(s.sleep_height)
    alice_key = world.people["alice"]
    sleep_block = chain.block()
    committee = chain.committees[sleep_block.epoch]
    client = LightClientState.trusting(sleep_block, committee, recent_window=s.recent_window)
    pre_sleep = [chain.tree.get(b) for b in chain.path()]
    alice = Victim(alice_key, pre_sleep, client, chain.state().nonce(alice_key.account))

    world.grow(s.honest_blocks - s.sleep_height)

    honest_ok = light_verify(
        LightClientState.trusting(chain.block(chain.genesis), chain.committees[0]),
        [chain.tree.get(b) for b in chain.path()[1:]],
    )
    if not honest_ok.accepted:
        raise ScenarioAssertion(f"honest chain rejected by the light client: {honest_ok}")

    cobb = world.people["cobb"]
    side_roots: list[str] = []
    side: SideChain | None = None
    keys: AdversaryKeys | None = None
    shown = 0  # honest blocks already forwarded (stale / skip variants)
    rounds = []
    for rnd in range(s.rounds):
        if rnd:
            world.grow(s.round_blocks)
        segment = _cobb_segment(s, world, shown)
        if s.variant == "side_chain":
            if side is None:
                keys = leak_keys(chain, s.recent_window)
            side = _extend_side(s, world, keys, side, rnd)
            if rnd == 0:
                # real blocks between Alice's last block and the fork point, then the forgery
                bridge = chain.path()[s.sleep_height + 1:s.fork_at + 1]
                segment = [chain.tree.get(b) for b in bridge] + side.blocks
            else:
                segment = side.blocks[-s.round_blocks:]
            side_roots = [_hex(side.state.root)] * len(side.blocks)
        else:
            shown += len(segment)
        verdict = alice.receive(segment)
        rec = RoundRecord(
            round=rnd,
            light_verify=str(verdict) if verdict.accepted else f"{verdict} at {verdict.at_index}",
            view_height=alice.tree.depth(alice.tip),
            view_tip=_hex(alice.tip),
            view_fork_id=_hex(alice.tip_block.fork_id),
            segment=len(segment),
            cobb_saw=rounds[-1].outcome if rounds else None,
        )
        rounds.append(rec)
        if not verdict.accepted:
            continue
        evidence = _cobb_evidence(s, world, side)
        try:
            seen = alice.inspect(REGISTRY, alice_key.account, evidence, check=s.verify_proofs)
        except ProofRejected as e:
            rec.inspection = f"ProofRejected: {e}"
            continue
        rec.inspected = seen
        if seen < s.payment:
            rec.inspection = "pledge too small; no payment"
            continue
        txn = alice.pay(cobb.account, s.payment, s.leash_length if arm == "leashed" else None)
        rec.proposal = {
            "nonce": txn.nonce,
            "amount": s.payment,
            "fork_id": _hex(txn.fork_id),
            "leash": None if txn.leash is None else {
                "anchor_height": txn.leash.anchor_height,
                "anchor_hash": _hex(txn.leash.anchor_hash),
                "length": txn.leash.length,
                "fork_id": _hex(txn.leash.fork_id),
            },
        }
        before = chain.state()
        world.grow(1, extra=[txn])
        after = chain.state()
        receipts = chain.receipts[chain.tip]
        if receipts:
            receipt: Receipt = receipts[0]
            rec.receipt = receipt.to_dict()
            rec.outcome = receipt.describe()
        else:
            rec.outcome = "NotSequenced"
        rec.adversary_delta = after.balance(cobb.account) - before.balance(cobb.account)
        rec.victim_delta = after.balance(alice_key.account) - before.balance(alice_key.account)

    assert_isolated(alice, [chain, chain.tree, chain.states, chain.receipts, world])
    honest_roots = [_hex(chain.tree.get(b).state_root) for b in chain.path()]
    checks = {"honest_chain_light_verified": "ok", "eclipse_guard": "ok"}
    return ArmResult(arm, rounds), honest_roots, side_roots, checks


def _cobb_segment(s: Scenario, world: _World, shown: int) -> list[Block]:
    """Real blocks Cobb forwards in the stale and skip variants."""
    chain = world.chain
    path = chain.path()
    start = s.sleep_height + 1 + shown
    if s.variant == "stale":
        stop = s.stale_at + 1
    elif s.variant == "skip_verification":
        stop = len(path)
    else:
        return []
    return [chain.tree.get(b) for b in path[start:stop]]


def _extend_side(s: Scenario, world: _World, keys: AdversaryKeys, side: SideChain | None, rnd: int) -> SideChain:
    chain = world.chain
    if side is None:
        fork_point = chain.at_height(s.fork_at)
        bogus = _bogus_state(chain.states[fork_point], world.people["alice"].account, s.bogus_pledge)
        length = s.side_len
        first = s.fork_at + 1
    else:
        fork_point = side.tip
        bogus = side.state
        length = s.round_blocks
        first = chain.tree.depth(side.tip) + 1
    decoys = []
    if s.mimic_txs:
        path = chain.path()
        decoys = [chain.tree.get(path[h]).txs if h < len(path) else () for h in range(first, first + length)]
    plan = SideChainPlan(
        length=length,
        state=bogus,
        fork_id=BOGUS_FORK if s.fork_mode == "bogus_adversarial" else None,
        txs=decoys,
        rotate_every=s.bogus_rotation_every,
        seed=s.seed,
    )
    more = build_side_chain(chain.tree, fork_point, keys, plan)
    if side is None:
        return more
    return SideChain(side.blocks + more.blocks, side.ids + more.ids, bogus)


def _bogus_state(real: DbState, alice: int, pledge: int) -> DbState:
    reg = real.get(REGISTRY)
    storage = dict(reg.storage)
    storage[alice] = pledge
    return real.with_accounts({REGISTRY: replace(reg, storage=storage)})


def _cobb_evidence(s: Scenario, world: _World, side: SideChain | None) -> Evidence:
    chain = world.chain
    acct = world.people["alice"].account
    if s.variant == "side_chain":
        return evidence_for(side.state, REGISTRY, acct)
    if s.variant == "stale":
        return evidence_for(chain.states[chain.at_height(s.stale_at)], REGISTRY, acct)
    # skip_verification: real blocks, fabricated value
    fake = _bogus_state(chain.state(), acct, s.bogus_pledge)
    return evidence_for(fake, REGISTRY, acct)


def run_scenario(s: Scenario, vm: VM | None = None) -> ScenarioReport:
    """Run every arm of ``s`` from scratch and collect the report."""
    s.validate()
    vm = vm or VM(VMConfig())
    arms = {}
    honest_roots = side_roots = None
    checks = {}
    for arm in s.arms:
        result, honest_roots, side_roots, checks = _run_arm(s, arm, vm)
        arms[arm] = result
    return ScenarioReport(s, arms, honest_roots, side_roots, checks, vm.config.base_fee)


def run_hard_fork_scenario(s: Scenario, vm: VM | None = None) -> ScenarioReport:
    """``run_scenario`` for the governance-fork family; checks ``fork_mode`` is set sensibly."""
    if s.fork_mode == "hidden_real" and s.hard_fork_height is None:
        raise ScenarioError("hidden_real needs hard_fork_height")
    return run_scenario(s, vm)


def random_lra(rng: random.Random, **overrides) -> Scenario:
    """A random long-range attack from the canonical family."""
    epoch_length = rng.randint(2, 5)
    recent = rng.randint(1, 2)
    honest = rng.randint(4, 8) * epoch_length
    last_leaked = honest // epoch_length - recent
    max_fork = (last_leaked + 1) * epoch_length - 1
    sleep = rng.randint(0, max(0, max_fork - 1))
    fork = rng.randint(sleep, max_fork)
    side = rng.randint(1, honest - fork + 3)
    payment = rng.randint(1, 900)
    params = dict(
        name=f"random-lra-{rng.getrandbits(32):08x}",
        seed=rng.getrandbits(32),
        committee_size=rng.randint(1, 7),
        epoch_length=epoch_length,
        honest_blocks=honest,
        recent_window=recent,
        background_txns=rng.randint(0, 2),
        sleep_height=sleep,
        fork_height=fork,
        side_length=side,
        bogus_pledge=payment + rng.randint(0, 50),
        payment=payment,
        leash_length=rng.randint(1, 3 * honest),
        bogus_rotation_every=rng.choice([0, 0, 1, 3]),
        mimic_txs=rng.random() < 0.5,
        rounds=rng.randint(1, 2),
    )
    params.update(overrides)
    s = Scenario(**params)
    s.validate()
    return s
