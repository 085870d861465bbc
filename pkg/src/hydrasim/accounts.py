"""Lagged account tree, strict validity and tree advancement.

The tree ``F`` records balances after every block up to height ``F.height``
on the active branch of every chain. It only moves forward once all chains
are more than ``lag`` blocks above it, so a fork above ``F.height`` touches a
single chain and never the shared account state.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from .errors import DeepReorg, InvalidTransactions, NegativeBalance
from .ledger import ChainSet, ReorgEvent
from .types import AccountId, Block, Transaction, label_of_account

DEFAULT_LAG = 5


@dataclass(frozen=True)
class AccountTree:
    height: int = 0
    balances: Mapping[AccountId, int] = field(default_factory=dict)
    lag: int = DEFAULT_LAG

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("lag must be >= 1")
        if any(v < 0 for v in self.balances.values()):
            raise ValueError("balances must be non-negative")
        object.__setattr__(self, "balances", dict(self.balances))

    def __getitem__(self, account: AccountId) -> int:
        return self.balances.get(account, 0)

    @classmethod
    def genesis(cls, allocations: Mapping[AccountId, int] | None = None, lag: int = DEFAULT_LAG):
        return cls(0, {a: v for a, v in (allocations or {}).items() if v}, lag)

    @property
    def total(self) -> int:
        return sum(self.balances.values())


def _branch(cs: ChainSet, chain: int, tip: bytes | None) -> list[Block]:
    if tip is None:
        return cs.active_branch(chain)
    return cs.branch_to(chain, tip)


def pending_spend(cs: ChainSet, f: AccountTree, account: AccountId, tip: bytes | None = None) -> int:
    """S(a): value sent by ``account`` in blocks above ``f.height``.

    Counted on the active branch of the account's chain, or on the branch
    ending at ``tip`` when given.
    """
    chain = label_of_account(account, cs.n_chains)
    return sum(
        tx.value
        for block in _branch(cs, chain, tip)[f.height + 1:]
        for tx in block.body
        if tx.sender == account
    )


def spends_above(cs: ChainSet, f: AccountTree, chain: int, tip: bytes | None) -> Counter:
    spent: Counter = Counter()
    for block in _branch(cs, chain, tip)[f.height + 1:]:
        for tx in block.body:
            spent[tx.sender] += tx.value
    return spent


def is_strictly_valid(cs: ChainSet, f: AccountTree, tx: Transaction, tip: bytes | None = None) -> bool:
    return f[tx.sender] - pending_spend(cs, f, tx.sender, tip) > tx.value


def validate_transactions(
    cs: ChainSet, f: AccountTree, chain: int, txs: Sequence[Transaction], tip: bytes | None = None
) -> bool:
    spent = spends_above(cs, f, chain, tip)
    for tx in txs:
        if not tx.authentic or tx.label(cs.n_chains) != chain:
            return False
        if not f[tx.sender] - spent[tx.sender] > tx.value:
            return False
        spent[tx.sender] += tx.value
    return True


def validate_block_transactions(cs: ChainSet, f: AccountTree, block: Block) -> bool:
    """Every body tx passes strict validity, with S(a) grown as the body is applied.

    Pending spends are measured on the branch the block extends, which is the
    active branch whenever the block builds on the current head.
    """
    label = block.label
    return validate_transactions(cs, f, label, block.body, block.header.parent_hashes[label])


def apply_blocks(balances: dict, blocks: Iterable[Block], height: int) -> None:
    for block in blocks:
        for tx in block.body:
            left = balances.get(tx.sender, 0) - tx.value
            if left < 0:
                raise NegativeBalance(tx.sender, left, height)
            balances[tx.sender] = left
            balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.value


def advance_tree(cs: ChainSet, f: AccountTree, order: Sequence[int] | None = None) -> AccountTree:
    """Advance ``f`` while every chain is more than ``f.lag`` blocks above it.

    Returns a new tree; ``f`` itself is never modified, so a NegativeBalance
    leaves the caller holding the last consistent state.
    """
    order = range(cs.n_chains) if order is None else order
    balances = dict(f.balances)
    height = f.height
    while cs.min_height() - height > f.lag:
        height += 1
        apply_blocks(balances, (cs.block_at(i, height) for i in order), height)
    if height == f.height:
        return f
    return AccountTree(height, {a: v for a, v in balances.items() if v}, f.lag)


class HydraState:
    """A node's ledger plus account tree, maintained after every accepted block."""

    def __init__(self, n_chains: int, allocations: Mapping[AccountId, int] | None = None,
                 lag: int = DEFAULT_LAG):
        self.chains = ChainSet(n_chains)
        self.allocations = dict(allocations or {})
        self.tree = AccountTree.genesis(allocations, lag)

    @property
    def n_chains(self) -> int:
        return self.chains.n_chains

    @property
    def lag(self) -> int:
        return self.tree.lag

    def check(self, block: Block) -> None:
        self.chains.check_block(block)
        label = block.label
        fork = self.chains.divergence_height(label, block.header.parent_hashes[label])
        if fork is not None and fork <= self.tree.height:
            raise DeepReorg(label, fork, self.tree.height)
        if not validate_block_transactions(self.chains, self.tree, block):
            raise InvalidTransactions(f"block for chain {label} fails strict validity")

    def submit_block(self, block: Block) -> ReorgEvent | None:
        self.check(block)
        event = self.chains.append_block(block)
        self.tree = advance_tree(self.chains, self.tree)
        return event

    def is_strictly_valid(self, tx: Transaction) -> bool:
        return tx.authentic and is_strictly_valid(self.chains, self.tree, tx)

    def spendable(self, account: AccountId) -> int:
        return self.tree[account] - pending_spend(self.chains, self.tree, account)


def load_genesis(fp: IO[str]) -> dict[AccountId, int]:
    """Parse ``<account> <balance>`` records; blank lines and ``#`` comments skipped."""
    allocations: dict[AccountId, int] = {}
    for lineno, line in enumerate(fp, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<account> <balance>'")
        account, balance = int(parts[0]), int(parts[1])
        if account < 0 or balance < 0:
            raise ValueError(f"line {lineno}: negative account or balance")
        allocations[account] = allocations.get(account, 0) + balance
    return allocations


def dump_balances_csv(f: AccountTree, fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["account", "balance"])
    for account in sorted(f.balances):
        writer.writerow([account, f.balances[account]])
