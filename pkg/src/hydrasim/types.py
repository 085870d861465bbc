"""Protocol value types, labels, canonical serialization and Merkle roots.

Byte layout (all integers unsigned, big-endian, fixed width):

    transaction  = sender:32 | recipient:32 | value:8 | nonce:8 | signature:32   (112 bytes)
    header       = n_chains:4 | parent_hashes:32*N | txset_roots:32*N | nonce:8

The block height is not part of the hashed header preimage: a miner only
learns which chain (and therefore which height) the block belongs to after
the hash is known.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

HASH_NAME = "sha256"
HASH_SIZE = 32

ACCOUNT_BYTES = 32
VALUE_BYTES = 8
NONCE_BYTES = 8
TX_BYTES = 2 * ACCOUNT_BYTES + VALUE_BYTES + NONCE_BYTES + ACCOUNT_BYTES

MAX_NONCE = 2 ** (8 * NONCE_BYTES) - 1

AccountId = int
ChainLabel = int


def hash_bytes(data: bytes) -> bytes:
    return hashlib.new(HASH_NAME, data).digest()


def _u(value: int, width: int) -> bytes:
    return value.to_bytes(width, "big")


def label_of_account(account: AccountId, n_chains: int) -> ChainLabel:
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    return account % n_chains


@dataclass(frozen=True)
class Transaction:
    """Transfer of ``value`` units from ``sender`` to ``recipient``.

    Identity is (sender, recipient, value, nonce); the signature is an opaque
    token that authenticates iff it equals the sender account.
    """

    sender: AccountId
    recipient: AccountId
    value: int
    nonce: int = 0
    signature: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("transaction value must be positive")
        for name in ("sender", "recipient", "nonce"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.signature is None:
            object.__setattr__(self, "signature", self.sender)

    def label(self, n_chains: int) -> ChainLabel:
        return label_of_account(self.sender, n_chains)

    @property
    def authentic(self) -> bool:
        return self.signature == self.sender

    def serialize(self) -> bytes:
        return (
            _u(self.sender, ACCOUNT_BYTES)
            + _u(self.recipient, ACCOUNT_BYTES)
            + _u(self.value, VALUE_BYTES)
            + _u(self.nonce, NONCE_BYTES)
            + _u(self.signature, ACCOUNT_BYTES)
        )

    @classmethod
    def deserialize(cls, data: bytes) -> "Transaction":
        if len(data) != TX_BYTES:
            raise ValueError(f"expected {TX_BYTES} bytes, got {len(data)}")
        pos = 0
        fields = []
        for width in (ACCOUNT_BYTES, ACCOUNT_BYTES, VALUE_BYTES, NONCE_BYTES, ACCOUNT_BYTES):
            fields.append(int.from_bytes(data[pos:pos + width], "big"))
            pos += width
        return cls(*fields)

    @property
    def txid(self) -> bytes:
        return hash_bytes(self.serialize()[: TX_BYTES - ACCOUNT_BYTES])

    def __str__(self):
        return f"tx({self.sender}->{self.recipient},{self.value})"


def merkle_root(txs: Sequence[Transaction]) -> bytes:
    """Binary Merkle root over canonical tx bytes; odd levels repeat the last node."""
    if not txs:
        return hash_bytes(b"")
    level = [hash_bytes(tx.serialize()) for tx in txs]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hash_bytes(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


EMPTY_ROOT = merkle_root(())


@dataclass(frozen=True)
class BlockHeader:
    parent_hashes: tuple[bytes, ...]
    txset_roots: tuple[bytes, ...]
    nonce: int = 0
    height: int = 0

    def __post_init__(self):
        object.__setattr__(self, "parent_hashes", tuple(self.parent_hashes))
        object.__setattr__(self, "txset_roots", tuple(self.txset_roots))
        if len(self.parent_hashes) != len(self.txset_roots):
            raise ValueError("parent_hashes and txset_roots must both have N entries")
        if not self.parent_hashes:
            raise ValueError("header needs at least one chain")
        if any(len(h) != HASH_SIZE for h in self.parent_hashes + self.txset_roots):
            raise ValueError("header hashes must be 32 bytes")
        if not 0 <= self.nonce <= MAX_NONCE:
            raise ValueError("nonce out of range")

    @property
    def n_chains(self) -> int:
        return len(self.parent_hashes)

    def preimage(self) -> bytes:
        return (
            _u(self.n_chains, 4)
            + b"".join(self.parent_hashes)
            + b"".join(self.txset_roots)
            + _u(self.nonce, NONCE_BYTES)
        )

    @classmethod
    def from_preimage(cls, data: bytes, height: int = 0) -> "BlockHeader":
        n = int.from_bytes(data[:4], "big")
        expected = 4 + 2 * n * HASH_SIZE + NONCE_BYTES
        if n < 1 or len(data) != expected:
            raise ValueError("malformed header bytes")
        hashes = [data[4 + i * HASH_SIZE: 4 + (i + 1) * HASH_SIZE] for i in range(2 * n)]
        nonce = int.from_bytes(data[-NONCE_BYTES:], "big")
        return cls(tuple(hashes[:n]), tuple(hashes[n:]), nonce, height)

    @property
    def hash(self) -> bytes:
        return hash_bytes(self.preimage())

    @property
    def hash_int(self) -> int:
        return int.from_bytes(self.hash, "big")

    def with_nonce(self, nonce: int) -> "BlockHeader":
        return BlockHeader(self.parent_hashes, self.txset_roots, nonce, self.height)

    def with_height(self, height: int) -> "BlockHeader":
        return BlockHeader(self.parent_hashes, self.txset_roots, self.nonce, height)


def label_of_block(header: BlockHeader, n_chains: int | None = None) -> ChainLabel:
    n = header.n_chains if n_chains is None else n_chains
    if n < 1:
        raise ValueError("n_chains must be >= 1")
    return header.hash_int % n


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    body: tuple[Transaction, ...] = ()
    # Genesis blocks carry a forced label instead of a hash-derived one.
    forced_label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    @property
    def hash(self) -> bytes:
        return self.header.hash

    @property
    def height(self) -> int:
        return self.header.height

    @property
    def label(self) -> ChainLabel:
        if self.forced_label is not None:
            return self.forced_label
        return label_of_block(self.header)

    @property
    def is_genesis(self) -> bool:
        return self.forced_label is not None

    @property
    def parent_hash(self) -> bytes | None:
        if self.is_genesis:
            return None
        return self.header.parent_hashes[self.label]


def genesis_block(chain: int, n_chains: int) -> Block:
    # The nonce carries the chain index so every genesis hash is distinct.
    header = BlockHeader(
        parent_hashes=(b"\x00" * HASH_SIZE,) * n_chains,
        txset_roots=(EMPTY_ROOT,) * n_chains,
        nonce=chain,
        height=0,
    )
    return Block(header, (), forced_label=chain)
