"""Short-leash transaction scoping on a simulated proof-of-stake block tree."""

from .blocktree import Block, BlockCtx, BlockTree
from .crypto import Keypair, sha256
from .leash import LeashReason, LeashVerdict, leash_check, wrap_metadata, wrap_script
from .node import Chain
from .records import Call, Committee, Deploy, LeashParams, SignedTxn, Transfer, make_txn
from .state import DbState, prove, state_root, verify
from .vm import VM, Receipt, VMConfig

__version__ = "0.1.0"

__all__ = [
    "Block", "BlockCtx", "BlockTree", "Call", "Chain", "Committee", "DbState", "Deploy",
    "Keypair", "LeashParams", "LeashReason", "LeashVerdict", "Receipt", "SignedTxn",
    "Transfer", "VM", "VMConfig", "leash_check", "make_txn", "prove", "sha256",
    "state_root", "verify", "wrap_metadata", "wrap_script",
]
