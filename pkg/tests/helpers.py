"""Builders and a randomized protocol driver shared by the test modules."""

from __future__ import annotations

import random
from dataclasses import dataclass

from hydrasim.accounts import HydraState
from hydrasim.errors import DeepReorg
from hydrasim.ledger import ChainSet
from hydrasim.miner import Mempool, MiningConfig, build_candidate, mine_for_label
from hydrasim.types import EMPTY_ROOT, Block, BlockHeader, Transaction, merkle_root


def make_block(cs: ChainSet, chain: int, parent: Block | None = None, txs=(), salt: int = 0) -> Block:
    """A block that hashes onto ``chain`` and extends ``parent`` (default: the head)."""
    parent = parent or cs.head(chain)
    heads = list(cs.head_hashes())
    heads[chain] = parent.hash
    roots = [EMPTY_ROOT] * cs.n_chains
    roots[chain] = merkle_root(txs)
    header = BlockHeader(tuple(heads), tuple(roots), 0, parent.height + 1)
    nonce = salt * 1_000_003
    while header.with_nonce(nonce).hash_int % cs.n_chains != chain:
        nonce += 1
    return Block(header.with_nonce(nonce), tuple(txs))


@dataclass
class RunStats:
    blocks: int = 0
    reorgs: int = 0
    rejected_forks: int = 0
    advances: int = 0
    checks: int = 0


def replay_tree_from_genesis(state: HydraState) -> dict:
    balances = dict(state.allocations)
    for h in range(1, state.tree.height + 1):
        for i in range(state.n_chains):
            for tx in state.chains.block_at(i, h).body:
                balances[tx.sender] = balances.get(tx.sender, 0) - tx.value
                balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.value
    return {a: v for a, v in balances.items() if v}


def random_run(seed: int, n_chains: int, lag: int, steps: int = 60, check=None) -> RunStats:
    """Drive a node with random payments, head mining and competing branches.

    ``check(state, before, event, order_trees)`` runs after every accepted block.
    """
    rng = random.Random(seed)
    accounts = list(range(3 * n_chains))
    alloc = {a: rng.randint(5, 40) for a in accounts}
    state = HydraState(n_chains, alloc, lag)
    mempool = Mempool(n_chains)
    cfg = MiningConfig(max_block_txs=4)
    stats = RunStats()
    nonce = 0

    def submit(candidate, chain):
        before = (state.chains.snapshot(), state.tree)
        block = mine_for_label(candidate, chain, rng.getrandbits(40)).block
        event = state.submit_block(block)
        mempool.remove(block.body)
        if event is not None:
            stats.reorgs += 1
            kept = {tx for b in event.new_branch_suffix for tx in b.body}
            mempool.extend(tx for b in event.old_branch_suffix for tx in b.body if tx not in kept)
            mempool.remove(kept)
        stats.blocks += 1
        if state.tree.height != before[1].height:
            stats.advances += 1
        if check is not None:
            check(state, before, event, rng)
            stats.checks += 1
        return block

    for _ in range(steps):
        action = rng.random()
        if action < 0.45:
            for _ in range(rng.randint(1, 3)):
                nonce += 1
                sender, recipient = rng.sample(accounts, 2)
                tx = Transaction(sender, recipient, rng.randint(1, 15), nonce)
                if state.is_strictly_valid(tx):
                    mempool.add(tx)
        elif action < 0.85:
            chain = rng.randrange(n_chains)
            submit(build_candidate(state.chains, state.tree, mempool, cfg), chain)
        else:
            chain = rng.randrange(n_chains)
            branch = state.chains.active_branch(chain)
            parent = rng.choice(branch[state.tree.height:])
            for _ in range(rng.randint(1, 3)):
                candidate = build_candidate(state.chains, state.tree, mempool, cfg, {chain: parent.hash})
                try:
                    parent = submit(candidate, chain)
                except DeepReorg:
                    stats.rejected_forks += 1
                    break
    return stats
