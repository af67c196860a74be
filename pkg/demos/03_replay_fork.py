"""Fixing a VM bug after the fact without breaking parent pointers.

The demo chain ran 20 blocks on a VM whose SUB and MUL silently wrapped.
Replaying from height 5 with SUB fixed changes state roots from there on;
the swizzler pairs each old block hash with its replacement so the forked
chain hashes, under h' = g . h, to exactly the ids its children point at.
"""

from shortleash.crypto import sha256
from shortleash.replay import LEASHED_HEIGHT, RECORDER, demo_double_fork

demo, first, second = demo_double_fork()
print(f"first fork: {len(first.swizzle)} swizzled pairs")
print(first.table())
print(f"second fork (MUL fixed from height {second.z}): {len(second.swizzle)} pairs")
print(second.table())

old_tip = demo.chain.block()
new_tip = second.forked.block()
print("state roots differ:", old_tip.state_root != new_tip.state_root)
print("tip ids agree under h'':", demo.chain.tip == second.forked.tip)
print("plain sha256 of the new tip matches the old id:", sha256(new_tip.serialize()) == demo.chain.tip)

# The recorder stored BLOCKHASH values during the original run; replays see the same values.
same = demo.chain.state().get(RECORDER).storage == second.forked.state().get(RECORDER).storage
print("recorded block hashes unchanged:", same)
receipts = second.forked.receipts[second.forked.at_height(LEASHED_HEIGHT)]
print("leashed call at height", LEASHED_HEIGHT, "after both forks:", [r.leash_outcome.value for r in receipts])
