import random
from collections import Counter

import pytest
from scipy import stats

from hydrasim.accounts import AccountTree, HydraState
from hydrasim.errors import Exhausted, UnknownParent
from hydrasim.ledger import ChainSet
from hydrasim.miner import (
    MAX_TARGET,
    Mempool,
    MiningConfig,
    build_candidate,
    finalize,
    mine,
    mine_for_label,
)
from hydrasim.types import EMPTY_ROOT, Transaction, merkle_root


def test_empty_mempool_gives_empty_roots():
    cs = ChainSet(3)
    cand = build_candidate(cs, AccountTree.genesis({}), Mempool(3))
    assert cand.txsets == ((), (), ())
    assert cand.header.txset_roots == (EMPTY_ROOT,) * 3
    assert cand.header.parent_hashes == cs.head_hashes()


def test_transaction_goes_to_its_label_slot():
    cs = ChainSet(4)
    f = AccountTree.genesis({6: 100})
    mp = Mempool(4)
    tx = Transaction(6, 1, 10)
    mp.add(tx)
    cand = build_candidate(cs, f, mp)
    assert cand.txsets[2] == (tx,)
    assert cand.header.txset_roots[2] == merkle_root([tx])
    assert all(cand.txsets[i] == () for i in (0, 1, 3))


def test_overdraft_and_forgery_are_skipped():
    cs = ChainSet(2)
    f = AccountTree.genesis({0: 10})
    mp = Mempool(2)
    first, overdraft, after = Transaction(0, 1, 6, 1), Transaction(0, 1, 4, 2), Transaction(0, 1, 3, 3)
    forged = Transaction(0, 1, 1, 4, signature=7)
    mp.extend([first, overdraft, forged, after])
    cand = build_candidate(cs, f, mp)
    # FIFO: 10 - 6 = 4 is not > 4, but 4 > 3
    assert cand.txsets[0] == (first, after)


def test_max_block_txs_caps_each_slot():
    cs = ChainSet(1)
    f = AccountTree.genesis({0: 1000})
    mp = Mempool(1)
    mp.extend(Transaction(0, 1, 1, k) for k in range(10))
    cand = build_candidate(cs, f, mp, MiningConfig(max_block_txs=3))
    assert [tx.nonce for tx in cand.txsets[0]] == [0, 1, 2]


def test_unknown_parent_override():
    cs = ChainSet(2)
    with pytest.raises(UnknownParent):
        build_candidate(cs, AccountTree.genesis({}), Mempool(2), parents={0: b"\x01" * 32})


def test_vacuous_target_accepts_first_nonce():
    cand = build_candidate(ChainSet(2), AccountTree.genesis({}), Mempool(2))
    mined = mine(cand, MiningConfig(mode="real"), start_nonce=41)
    assert mined.block.header.nonce == 41


def test_real_mining_meets_target():
    cand = build_candidate(ChainSet(2), AccountTree.genesis({}), Mempool(2))
    target = MAX_TARGET >> 8
    mined = mine(cand, MiningConfig(target=target, mode="real"))
    assert mined.block.header.hash_int < target


def test_real_mining_exhausts():
    cand = build_candidate(ChainSet(2), AccountTree.genesis({}), Mempool(2))
    with pytest.raises(Exhausted):
        mine(cand, MiningConfig(target=1, mode="real", max_nonce_tries=200))
    with pytest.raises(Exhausted):
        mine_for_label(cand, 0, max_tries=50, target=1)


def test_label_is_hash_mod_n_and_other_sets_return():
    cs = ChainSet(4)
    f = AccountTree.genesis({a: 50 for a in range(8)})
    mp = Mempool(4)
    txs = [Transaction(a, (a + 1) % 8, 5) for a in range(8)]
    mp.extend(txs)
    cand = build_candidate(cs, f, mp)
    mined = mine(cand, rng=random.Random(3))
    block = mined.block
    assert block.label == block.header.hash_int % 4
    assert block.height == 1
    assert set(block.body) | set(mined.returned) == set(txs)
    assert not set(block.body) & set(mined.returned)
    assert all(tx.label(4) == block.label for tx in block.body)


def test_mined_blocks_are_accepted():
    state = HydraState(3, {a: 30 for a in range(9)}, lag=2)
    mp = Mempool(3)
    rng = random.Random(1)
    for k in range(40):
        mp.add(Transaction(rng.randrange(9), rng.randrange(9, 12), rng.randint(1, 4), k))
        mined = mine(build_candidate(state.chains, state.tree, mp), rng=rng)
        state.submit_block(mined.block)
        mp.remove(mined.block.body)
    assert sum(state.chains.heights()) == 40
    assert state.tree.total == 270


def test_finalize_matches_mine_for_label():
    cand = build_candidate(ChainSet(4), AccountTree.genesis({}), Mempool(4))
    mined = mine_for_label(cand, 3, start_nonce=10)
    again = finalize(cand, mined.block.header.nonce)
    assert again.block == mined.block and again.block.label == 3


def test_labels_are_uniform():
    n, blocks = 4, 10_000
    cand = build_candidate(ChainSet(n), AccountTree.genesis({}), Mempool(n))
    rng = random.Random(2024)
    counts = Counter(mine(cand, rng=rng).block.label for _ in range(blocks))
    observed = [counts[i] for i in range(n)]
    assert sum(observed) == blocks
    assert stats.chisquare(observed).pvalue > 0.001
