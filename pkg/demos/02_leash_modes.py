"""The same leash enforced three ways: transaction metadata, a wrapper contract, and the gateway."""

from shortleash.blocktree import Block, BlockCtx, BlockTree
from shortleash.contracts import counter, well_known
from shortleash.crypto import Keypair, ZERO_DIGEST, sha256
from shortleash.leash import (
    GATEWAY_ACCOUNT, PREFIX_SIZE, anchor_at, gateway_contract, gateway_encode, gateway_result, script_verdict,
    wrap_script,
)
from shortleash.records import Call, make_txn
from shortleash.state import DbState
from shortleash.vm import VM, fund, install_contract

# A bare tree: 40 main blocks and a 5-block side branch off height 20.
tree = BlockTree()
main = [tree.insert(Block(None, 0))]
for h in range(1, 40):
    main.append(tree.insert(Block(main[-1], h, state_root=sha256(b"main%d" % h))))
side = [main[20]]
for h in range(21, 26):
    side.append(tree.insert(Block(side[-1], h, state_root=sha256(b"side%d" % h))))

alice = Keypair.derive("alice")
COUNTER, WRAPPER = well_known("counter"), well_known("wrapper")
vm = VM()

for label, anchor in (("main-chain anchor", main[30]), ("side-branch anchor", side[-1])):
    params = anchor_at(tree, anchor, 16, ZERO_DIGEST)
    db = fund(DbState(), {alice.account: 10_000})
    db = install_contract(db, COUNTER, counter())
    db = install_contract(db, GATEWAY_ACCOUNT, gateway_contract())
    db = install_contract(db, WRAPPER, wrap_script(COUNTER, params))
    ctx = BlockCtx(tree, main[35])  # executing in block 36 of the main chain

    txns = {
        "metadata": make_txn(alice, 0, Call(COUNTER, b""), leash=params),
        "wrapper": make_txn(alice, 0, Call(WRAPPER, b"")),
        "gateway": make_txn(alice, 0, Call(GATEWAY_ACCOUNT, gateway_encode(params, COUNTER, b""))),
    }
    print(label)
    for mode, txn in txns.items():
        post, receipt = vm.apply_txn(db, txn, ctx)
        if mode == "metadata":
            verdict = "Pass" if receipt.leash_reason is None else f"Revert({receipt.leash_reason.name})"
        else:
            verdict = str(script_verdict(receipt))
        print(f"  {mode:<9} {verdict:<30} counter={post.load(COUNTER, 0)} root={post.root.hex()[:12]}")
        if mode == "gateway" and receipt.committed:
            status, inner = gateway_result(receipt.return_data)
            print(f"  gateway status word {status}, inner return {int.from_bytes(inner, 'big')}")

print(f"gateway calldata prefix: {PREFIX_SIZE} bytes")
