"""N block trees with longest-branch head selection and reorg reporting."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .errors import HeightMismatch, InvalidBlock, LabelMismatch, MerkleMismatch, UnknownParent
from .types import TX_BYTES, Block, BlockHeader, Transaction, genesis_block, hash_bytes, merkle_root


@dataclass(frozen=True)
class ReorgEvent:
    chain: int
    old_branch_suffix: tuple[Block, ...]
    new_branch_suffix: tuple[Block, ...]
    fork_height: int

    @property
    def depth(self) -> int:
        return len(self.old_branch_suffix)


class ChainSet:
    """One rooted block tree per chain; heads follow the longest branch, first seen wins ties.

    Single writer. ``snapshot()`` hands out an independent copy for readers.
    """

    def __init__(self, n_chains: int):
        if n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        self.n_chains = n_chains
        self._blocks: list[dict[bytes, Block]] = []
        self._active: list[list[Block]] = []
        self._order: list[bytes] = []
        for i in range(n_chains):
            g = genesis_block(i, n_chains)
            self._blocks.append({g.hash: g})
            self._active.append([g])

    # -- queries -----------------------------------------------------------

    def head(self, chain: int) -> Block:
        return self._active[chain][-1]

    @property
    def heads(self) -> list[Block]:
        return [branch[-1] for branch in self._active]

    def head_hashes(self) -> tuple[bytes, ...]:
        return tuple(b.hash for b in self.heads)

    def height(self, chain: int) -> int:
        return len(self._active[chain]) - 1

    def heights(self) -> list[int]:
        return [len(branch) - 1 for branch in self._active]

    def min_height(self) -> int:
        return min(self.heights())

    def active_branch(self, chain: int) -> list[Block]:
        """Genesis-to-head path of ``chain`` in ascending height."""
        if not 0 <= chain < self.n_chains:
            raise IndexError(f"chain {chain} out of range")
        return list(self._active[chain])

    def block_at(self, chain: int, height: int) -> Block:
        return self._active[chain][height]

    def get(self, chain: int, block_hash: bytes) -> Block | None:
        return self._blocks[chain].get(block_hash)

    def find(self, block_hash: bytes) -> Block | None:
        for tree in self._blocks:
            if block_hash in tree:
                return tree[block_hash]
        return None

    def __contains__(self, block_hash: bytes) -> bool:
        return self.find(block_hash) is not None

    def tree(self, chain: int) -> list[Block]:
        return list(self._blocks[chain].values())

    def branch_to(self, chain: int, block_hash: bytes) -> list[Block]:
        """Genesis-to-``block_hash`` path inside tree ``chain``."""
        tree = self._blocks[chain]
        block = tree.get(block_hash)
        if block is None:
            raise UnknownParent(f"block {block_hash.hex()[:16]} not in chain {chain}")
        active = self._active[chain]
        path = []
        while not (block.height < len(active) and active[block.height].hash == block.hash):
            path.append(block)
            block = tree[block.parent_hash]
        return active[: block.height + 1] + path[::-1]

    def on_active_branch(self, chain: int, block: Block) -> bool:
        active = self._active[chain]
        return block.height < len(active) and active[block.height].hash == block.hash

    # -- validation & mutation --------------------------------------------

    def check_block(self, block: Block) -> Block:
        """Structural validation; returns the parent block."""
        header = block.header
        if block.is_genesis:
            raise InvalidBlock("genesis blocks cannot be appended")
        if header.n_chains != self.n_chains:
            raise InvalidBlock(f"header commits to {header.n_chains} chains, ledger has {self.n_chains}")
        label = block.label
        parent = self._blocks[label].get(header.parent_hashes[label])
        if parent is None:
            raise UnknownParent(f"parent of block for chain {label} is unknown")
        if header.height != parent.height + 1:
            raise HeightMismatch(f"height {header.height} does not follow parent height {parent.height}")
        for tx in block.body:
            if tx.label(self.n_chains) != label:
                raise LabelMismatch(f"{tx} has label {tx.label(self.n_chains)}, block has {label}")
        if merkle_root(block.body) != header.txset_roots[label]:
            raise MerkleMismatch(f"body root does not match txset_roots[{label}]")
        return parent

    def divergence_height(self, chain: int, block_hash: bytes) -> int | None:
        """Height at which a child of ``block_hash`` would leave the active branch.

        None when ``block_hash`` is the current head, so a child simply extends it.
        """
        tree = self._blocks[chain]
        block = tree.get(block_hash)
        if block is None:
            raise UnknownParent(f"block {block_hash.hex()[:16]} not in chain {chain}")
        if block.hash == self.head(chain).hash:
            return None
        while not self.on_active_branch(chain, block):
            block = tree[block.parent_hash]
        return block.height + 1

    def fork_point(self, block: Block) -> int | None:
        """Fork height of the reorg that appending ``block`` would cause, if any."""
        self.check_block(block)
        label = block.label
        if block.height <= self.height(label):
            return None
        return self.divergence_height(label, block.header.parent_hashes[label])

    def append_block(self, block: Block) -> ReorgEvent | None:
        parent = self.check_block(block)
        label = block.label
        tree = self._blocks[label]
        if block.hash in tree:
            return None
        tree[block.hash] = block
        self._order.append(block.hash)

        active = self._active[label]
        if block.height < len(active):
            return None
        if parent.hash == active[-1].hash:
            active.append(block)
            return None
        new_branch = self.branch_to(label, parent.hash) + [block]
        fork = 0
        while active[fork].hash == new_branch[fork].hash:
            fork += 1
        event = ReorgEvent(label, tuple(active[fork:]), tuple(new_branch[fork:]), fork)
        self._active[label] = new_branch
        return event

    def extend(self, blocks: Iterable[Block]) -> list[ReorgEvent]:
        events = []
        for block in blocks:
            event = self.append_block(block)
            if event is not None:
                events.append(event)
        return events

    def snapshot(self) -> "ChainSet":
        clone = copy.copy(self)
        clone._blocks = [dict(t) for t in self._blocks]
        clone._active = [list(a) for a in self._active]
        clone._order = list(self._order)
        return clone

    def blocks_in_order(self) -> list[Block]:
        return [self.find(h) for h in self._order]

    def state_digest(self) -> bytes:
        """Hash of insertion order and heads; equal for identical replays."""
        parts = [self.n_chains.to_bytes(4, "big")]
        parts.extend(self._order)
        parts.append(b"|")
        parts.extend(self.head_hashes())
        return hash_bytes(b"".join(parts))


# -- line-delimited record export -------------------------------------------
#
# One appended block per line, genesis omitted:
#     <block hash hex> <height> <header preimage hex> <body hex or ->
# The body is the concatenation of canonical 112-byte transactions.


def block_to_record(block: Block) -> str:
    body = b"".join(tx.serialize() for tx in block.body)
    return " ".join((block.hash.hex(), str(block.height), block.header.preimage().hex(), body.hex() or "-"))


def block_from_record(line: str) -> Block:
    digest, height, header_hex, body_hex = line.split()
    header = BlockHeader.from_preimage(bytes.fromhex(header_hex), int(height))
    raw = b"" if body_hex == "-" else bytes.fromhex(body_hex)
    if len(raw) % TX_BYTES:
        raise ValueError("body length is not a multiple of the transaction size")
    body = tuple(Transaction.deserialize(raw[i:i + TX_BYTES]) for i in range(0, len(raw), TX_BYTES))
    block = Block(header, body)
    if block.hash.hex() != digest:
        raise ValueError(f"record digest mismatch for block at height {height}")
    return block


def export_records(cs: ChainSet) -> Iterator[str]:
    for block in cs.blocks_in_order():
        yield block_to_record(block)


def dump(cs: ChainSet, fp: IO[str]) -> None:
    for line in export_records(cs):
        fp.write(line + "\n")


def load(fp: IO[str], n_chains: int) -> ChainSet:
    cs = ChainSet(n_chains)
    for line in fp:
        line = line.strip()
        if line and not line.startswith("#"):
            cs.append_block(block_from_record(line))
    return cs
