"""Candidate construction with one transaction set per label, and proof-of-work."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

from .accounts import AccountTree, spends_above
from .errors import Exhausted, UnknownParent
from .ledger import ChainSet
from .types import MAX_NONCE, Block, BlockHeader, Transaction, merkle_root

MAX_TARGET = 2 ** 256 - 1


class Mempool:
    """FIFO queue per label; a transaction is queued at most once."""

    def __init__(self, n_chains: int):
        self.n_chains = n_chains
        self.queues: list[deque[Transaction]] = [deque() for _ in range(n_chains)]
        self._seen: set[Transaction] = set()

    def add(self, tx: Transaction) -> bool:
        if tx in self._seen:
            return False
        self._seen.add(tx)
        self.queues[tx.label(self.n_chains)].append(tx)
        return True

    def extend(self, txs: Iterable[Transaction]) -> int:
        return sum(self.add(tx) for tx in txs)

    def remove(self, txs: Iterable[Transaction]) -> None:
        gone = set(txs) & self._seen
        if not gone:
            return
        self._seen -= gone
        for i, queue in enumerate(self.queues):
            if any(tx in gone for tx in queue):
                self.queues[i] = deque(tx for tx in queue if tx not in gone)

    def __contains__(self, tx: Transaction) -> bool:
        return tx in self._seen

    def __len__(self) -> int:
        return len(self._seen)

    def pending(self) -> list[Transaction]:
        return [tx for queue in self.queues for tx in queue]


@dataclass(frozen=True)
class MiningConfig:
    target: int = MAX_TARGET
    max_block_txs: int = 1000
    mode: str = "simulated"
    max_nonce_tries: int = 1 << 20

    def __post_init__(self):
        if not 0 < self.target <= MAX_TARGET:
            raise ValueError("target must be in (0, 2^256 - 1]")
        if self.max_block_txs < 1:
            raise ValueError("max_block_txs must be positive")
        if self.mode not in ("real", "simulated"):
            raise ValueError("mode must be 'real' or 'simulated'")


@dataclass(frozen=True)
class Candidate:
    """Header template (nonce/height unset) and the N transaction sets it commits to."""

    header: BlockHeader
    txsets: tuple[tuple[Transaction, ...], ...]
    parent_heights: tuple[int, ...]


@dataclass(frozen=True)
class MinedBlock:
    block: Block
    returned: tuple[Transaction, ...]


def build_candidate(cs: ChainSet, f: AccountTree, mp: Mempool, cfg: MiningConfig | None = None,
                    parents: Mapping[int, bytes] | None = None) -> Candidate:
    """Select up to ``max_block_txs`` strictly valid transactions per label, FIFO.

    ``parents`` overrides the parent for chosen chains (used to script forks);
    every other chain builds on its current head.
    """
    cfg = cfg or MiningConfig()
    parents = dict(parents or {})
    parent_hashes, parent_heights, txsets = [], [], []
    for i in range(cs.n_chains):
        tip = parents.get(i)
        parent = cs.head(i) if tip is None else cs.get(i, tip)
        if parent is None:
            raise UnknownParent(f"unknown parent override for chain {i}")
        parent_hashes.append(parent.hash)
        parent_heights.append(parent.height)

        spent = spends_above(cs, f, i, tip)
        chosen = []
        for tx in mp.queues[i]:
            if len(chosen) >= cfg.max_block_txs:
                break
            if tx.authentic and f[tx.sender] - spent[tx.sender] > tx.value:
                spent[tx.sender] += tx.value
                chosen.append(tx)
        txsets.append(tuple(chosen))
    header = BlockHeader(tuple(parent_hashes), tuple(merkle_root(s) for s in txsets))
    return Candidate(header, tuple(txsets), tuple(parent_heights))


def finalize(candidate: Candidate, nonce: int) -> MinedBlock:
    header = candidate.header.with_nonce(nonce)
    label = header.hash_int % header.n_chains
    header = header.with_height(candidate.parent_heights[label] + 1)
    returned = tuple(tx for i, s in enumerate(candidate.txsets) if i != label for tx in s)
    return MinedBlock(Block(header, candidate.txsets[label]), returned)


def mine(candidate: Candidate, cfg: MiningConfig | None = None, rng: random.Random | None = None,
         start_nonce: int = 0) -> MinedBlock:
    """Find a nonce and move the transaction set of the resulting label into the body.

    Real mode scans nonces upward from ``start_nonce`` until the header hash
    is below the target. Simulated mode draws the winning nonce from ``rng``
    (or uses ``start_nonce``); the label still comes from the header hash.
    """
    cfg = cfg or MiningConfig()
    if cfg.mode == "simulated":
        nonce = rng.getrandbits(64) if rng is not None else start_nonce
        return finalize(candidate, nonce)
    stop = min(start_nonce + cfg.max_nonce_tries, MAX_NONCE + 1)
    for nonce in range(start_nonce, stop):
        if candidate.header.with_nonce(nonce).hash_int < cfg.target:
            return finalize(candidate, nonce)
    raise Exhausted(f"no nonce in [{start_nonce}, {stop}) meets the target")


def mine_for_label(candidate: Candidate, label: int, start_nonce: int = 0,
                   max_tries: int = 1 << 16, target: int = MAX_TARGET) -> MinedBlock:
    """Scan nonces until the header hash is below ``target`` and lands on ``label``.

    Used to script scenarios where a block must end up on a given chain.
    """
    n = candidate.header.n_chains
    for nonce in range(start_nonce, min(start_nonce + max_tries, MAX_NONCE + 1)):
        h = candidate.header.with_nonce(nonce).hash_int
        if h < target and h % n == label:
            return finalize(candidate, nonce)
    raise Exhausted(f"no nonce yields label {label} within {max_tries} tries")
