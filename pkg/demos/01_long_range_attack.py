"""A long-range attack on a sleeping light client, with and without a leash.

Alice goes offline at height 6.  While she sleeps the chain grows to 30 and
the committees that signed the early blocks retire.  Cobb buys their old keys,
forks from height 6 and shows Alice a side chain in which he has pledged her
5000 units.  She checks the pledge with a Merkle proof and pays him.
"""

from shortleash.adversary import (
    REGISTRY, Scenario, SideChainPlan, Victim, build_side_chain, evidence_for, leak_keys, run_scenario,
)
from shortleash.consensus import LightClientState
from shortleash.contracts import pledge_registry
from shortleash.crypto import Keypair
from shortleash.node import Chain
from shortleash.state import DbState
from shortleash.vm import fund, install_contract

# The whole pipeline in one call: both arms, one report.
scenario = Scenario(name="demo", seed=7, sleep_height=6, fork_height=6)
report = run_scenario(scenario)
print(report.summary())

# The same story by hand.
alice, cobb = Keypair.derive("alice"), Keypair.derive("cobb")
genesis = fund(DbState(), {alice.account: 100_000, cobb.account: 1_000})
genesis = install_contract(genesis, REGISTRY, pledge_registry())


def committee(epoch):
    return [Keypair.derive(f"validator-{epoch}-{k}") for k in range(4)]


chain = Chain(genesis, committee(0))
for h in range(1, 31):
    rotate = committee(chain.epoch_of_child() + 1) if h % 5 == 0 else None
    chain.extend(rotate_to=rotate)
print(f"honest chain: height {chain.height}, next epoch {chain.epoch_of_child()}")

# Alice's last view: the block at height 6 and the committee that signs its children.
sleep = chain.block(chain.at_height(6))
client = LightClientState.trusting(sleep, chain.committees[sleep.epoch])
victim = Victim(alice, [chain.block(b) for b in chain.path()[:7]], client, nonce=0)

# Cobb holds every retired committee's keys but only a minority of the recent ones.
keys = leak_keys(chain, recent_window=2)
print("epochs with a full quorum of leaked keys:", sorted(e for e in keys.keys if keys.quorum(e)))

bogus = install_contract(genesis, REGISTRY, pledge_registry(), storage={alice.account: 5000})
side = build_side_chain(chain.tree, chain.at_height(6), keys, SideChainPlan(24, bogus))
print("Alice's light client says:", victim.receive(side.blocks))

seen = victim.inspect(REGISTRY, alice.account, evidence_for(bogus, REGISTRY, alice.account))
print("pledge Alice sees, proof checked against the side-chain root:", seen)

# Leashed to her current tip, the payment only works on that tip's descendants.
txn = victim.pay(cobb.account, 5000, leash_length=16)
print("leash:", txn.leash.anchor_height, txn.leash.anchor_hash.hex()[:16], "...")
chain.extend([txn])
receipt = chain.receipts[chain.tip][0]
print("on the real chain:", receipt.describe())
print("Cobb's balance:", chain.state().balance(cobb.account))
