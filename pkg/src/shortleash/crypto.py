"""Hashing interface point and signing keys.

Every content hash in the package goes through a ``Hasher`` (a plain
``bytes -> bytes`` callable producing 32 bytes).  ``sha256`` is the default;
the replay module swaps in a swizzled variant without any other module
noticing.

Signatures are Ed25519, which is deterministic, so a key derived from a
seed label always produces the same signatures.  Key *leakage* is modelled
by handing the ``Keypair`` object to the adversary.
"""

from __future__ import annotations

import hashlib
from typing import Callable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

Hasher = Callable[[bytes], bytes]

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def account_of(public_key: bytes) -> int:
    """EOA account number: the 256-bit hash of the public key."""
    return int.from_bytes(sha256(b"eoa" + public_key), "big")


class Keypair:
    """An Ed25519 signing key with a deterministic derivation from a label."""

    __slots__ = ("label", "_sk", "public")

    def __init__(self, label: str, seed: bytes):
        self.label = label
        self._sk = Ed25519PrivateKey.from_private_bytes(seed)
        self.public = self._sk.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    @classmethod
    def derive(cls, label: str, seed: int = 0) -> "Keypair":
        return cls(label, sha256(f"shortleash-key:{seed}:{label}".encode()))

    @property
    def account(self) -> int:
        return account_of(self.public)

    def sign(self, message: bytes) -> bytes:
        return self._sk.sign(message)

    def __repr__(self) -> str:
        return f"Keypair({self.label!r}, {self.public[:4].hex()}..)"


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True
