"""Line-oriented protocol scenarios and their deterministic replay.

Format (``#`` starts a comment)::

    chains 2                      # number of chains N
    lag 2                         # account-tree lag
    seed 7                        # seeds nonces of unnamed randomizers
    pow simulated                 # or: pow real <target as hex or int>
    max-block-txs 100
    alloc 10 10                   # genesis allocation: account balance
    at 1.0 tx 10 11 5 [nonce=0] [as=t1]
    at 2.0 mine [as=b1] [chain=0] [parent=<block name>|genesis] [miner=m] [randomizer=17]

Events run in timestamp order, ties in file order. A ``mine`` event builds
a candidate from the mempool on the current heads (``parent`` overrides the
parent on ``chain``) and mines it. Without ``chain`` the label is whatever
the header hash gives; with ``chain`` nonces are scanned from the
randomizer until the hash lands there.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import IO

from .accounts import DEFAULT_LAG, HydraState, pending_spend
from .errors import HydraError
from .miner import MAX_TARGET, Mempool, MiningConfig, build_candidate, mine, mine_for_label
from .types import Transaction


class ScenarioError(HydraError):
    """Malformed scenario text."""


class ScenarioViolation(HydraError):
    """Replay hit a protocol violation (e.g. a reorg below the account tree)."""


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    args: tuple[str, ...]
    options: dict
    line: int


@dataclass
class Scenario:
    n_chains: int = 2
    lag: int = DEFAULT_LAG
    seed: int = 0
    allocations: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    mining: MiningConfig = field(default_factory=MiningConfig)

    def referenced_accounts(self) -> set:
        return {int(e.args[0]) for e in self.events if e.kind == "tx"}


def _options(tokens, lineno):
    args, opts = [], {}
    for tok in tokens:
        if "=" in tok:
            key, value = tok.split("=", 1)
            opts[key] = value
        elif opts:
            raise ScenarioError(f"line {lineno}: positional argument after options")
        else:
            args.append(tok)
    return tuple(args), opts


def parse(text: str) -> Scenario:
    sc = Scenario()
    target, mode, max_txs = MAX_TARGET, "simulated", 1000
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        head, rest = tokens[0], tokens[1:]
        try:
            if head == "chains":
                sc.n_chains = int(rest[0])
            elif head == "lag":
                sc.lag = int(rest[0])
            elif head == "seed":
                sc.seed = int(rest[0])
            elif head == "max-block-txs":
                max_txs = int(rest[0])
            elif head == "pow":
                mode = rest[0]
                if mode == "real":
                    target = int(rest[1], 0) if rest[1].startswith("0x") else int(rest[1])
            elif head == "alloc":
                account, balance = int(rest[0]), int(rest[1])
                sc.allocations[account] = sc.allocations.get(account, 0) + balance
            elif head == "at":
                args, opts = _options(rest[2:], lineno)
                kind = rest[1]
                if kind == "tx" and len(args) != 3:
                    raise ScenarioError(f"line {lineno}: tx needs <from> <to> <value>")
                if kind not in ("tx", "mine"):
                    raise ScenarioError(f"line {lineno}: unknown event {kind!r}")
                sc.events.append(Event(float(rest[0]), kind, args, opts, lineno))
            else:
                raise ScenarioError(f"line {lineno}: unknown directive {head!r}")
        except (IndexError, ValueError) as exc:
            raise ScenarioError(f"line {lineno}: {exc or 'missing argument'}") from None
    if sc.n_chains < 1 or sc.lag < 1:
        raise ScenarioError("chains and lag must be positive")
    try:
        sc.mining = MiningConfig(target=target, max_block_txs=max_txs, mode=mode)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    sc.events.sort(key=lambda e: (e.time, e.line))
    funded = set(sc.allocations)
    for event in sc.events:
        if event.kind == "tx":
            sender, recipient = int(event.args[0]), int(event.args[1])
            if sender not in funded:
                raise ScenarioError(f"line {event.line}: account {sender} has no allocation or prior credit")
            funded.add(recipient)
    return sc


def load(fp: IO[str]) -> Scenario:
    return parse(fp.read())


def _tx_record(tx: Transaction) -> dict:
    return {"from": tx.sender, "to": tx.recipient, "value": tx.value, "nonce": tx.nonce}


def _start_nonce(seed: int, event: Event, rng: random.Random) -> int:
    if "randomizer" in event.options:
        return int(event.options["randomizer"])
    if "miner" in event.options:
        digest = hashlib.sha256(f"{seed}:{event.options['miner']}:{event.line}".encode()).digest()
        return int.from_bytes(digest[:6], "big")
    return rng.getrandbits(48)


def replay(sc: Scenario) -> tuple[HydraState, dict]:
    """Run the scenario; returns the final state and a JSON-ready report.

    Raises ScenarioViolation on protocol violations, with the partial report
    attached as ``exc.report``.
    """
    state = HydraState(sc.n_chains, sc.allocations, sc.lag)
    mempool = Mempool(sc.n_chains)
    rng = random.Random(sc.seed)
    names = {"genesis": None}
    report = {"blocks": [], "reorgs": [], "rejected": []}

    def fail(event, message):
        report["violation"] = {"time": event.time, "line": event.line, "message": message}
        _finish(report, state, mempool)
        exc = ScenarioViolation(f"line {event.line}: {message}")
        exc.report = report
        return exc

    for event in sc.events:
        if event.kind == "tx":
            sender, recipient, value = map(int, event.args)
            tx = Transaction(sender, recipient, value, int(event.options.get("nonce", 0)))
            if tx in mempool or not state.is_strictly_valid(tx):
                spendable = state.spendable(sender)
                reason = "duplicate" if tx in mempool else f"strict validity: F[a]-S(a)={spendable} is not > {value}"
                report["rejected"].append({"time": event.time, "tx": _tx_record(tx), "reason": reason})
            else:
                mempool.add(tx)
            continue

        chain = event.options.get("chain")
        chain = None if chain is None else int(chain)
        parents = {}
        if "parent" in event.options:
            if chain is None:
                raise fail(event, "parent= requires chain=")
            name = event.options["parent"]
            if name not in names:
                raise fail(event, f"unknown block name {name!r}")
            parents[chain] = names[name] or state.chains.active_branch(chain)[0].hash
        if chain is not None and not 0 <= chain < sc.n_chains:
            raise fail(event, f"chain {chain} out of range")
        try:
            candidate = build_candidate(state.chains, state.tree, mempool, sc.mining, parents)
            start = _start_nonce(sc.seed, event, rng)
            if chain is None:
                mined = mine(candidate, sc.mining, start_nonce=start)
            else:
                mined = mine_for_label(candidate, chain, start, target=sc.mining.target)
            block = mined.block
            reorg = state.submit_block(block)
        except HydraError as exc:
            raise fail(event, str(exc)) from None

        mempool.remove(block.body)
        if "as" in event.options:
            names[event.options["as"]] = block.hash
        report["blocks"].append({
            "time": event.time, "name": event.options.get("as"), "chain": block.label,
            "height": block.height, "hash": block.hash.hex(), "txs": [_tx_record(t) for t in block.body],
        })
        if reorg is not None:
            kept = {tx for b in reorg.new_branch_suffix for tx in b.body}
            dropped = [tx for b in reorg.old_branch_suffix for tx in b.body if tx not in kept]
            mempool.extend(dropped)
            mempool.remove(kept)
            report["reorgs"].append({
                "time": event.time, "chain": reorg.chain, "fork_height": reorg.fork_height,
                "old": [b.hash.hex() for b in reorg.old_branch_suffix],
                "new": [b.hash.hex() for b in reorg.new_branch_suffix],
                "returned_to_mempool": [_tx_record(t) for t in dropped],
            })
    _finish(report, state, mempool)
    return state, report


def _finish(report: dict, state: HydraState, mempool: Mempool) -> None:
    cs, tree = state.chains, state.tree
    report["chains"] = [
        {"chain": i, "height": cs.height(i), "head": cs.head(i).hash.hex()} for i in range(cs.n_chains)
    ]
    report["tree_height"] = tree.height
    report["lag"] = tree.lag
    report["balances"] = {str(a): v for a, v in sorted(tree.balances.items())}
    report["pending"] = {
        str(a): pending_spend(cs, tree, a)
        for a in sorted({tx.sender for b in cs.blocks_in_order() for tx in b.body})
    }
    report["mempool"] = [_tx_record(tx) for tx in mempool.pending()]
    report["state_digest"] = cs.state_digest().hex()


def format_report(report: dict) -> str:
    lines = ["chains:"]
    for c in report["chains"]:
        lines.append(f"  chain {c['chain']}: height {c['height']} head {c['head'][:16]}")
    lines.append(f"account tree: height {report['tree_height']} (lag {report['lag']})")
    for account, balance in report["balances"].items():
        lines.append(f"  {account}: {balance}")
    lines.append(f"reorgs: {len(report['reorgs'])}")
    for r in report["reorgs"]:
        lines.append(
            f"  t={r['time']:g} chain {r['chain']} fork at height {r['fork_height']}: "
            f"{len(r['old'])} block(s) replaced by {len(r['new'])}"
        )
    lines.append(f"rejected transactions: {len(report['rejected'])}")
    for r in report["rejected"]:
        t = r["tx"]
        lines.append(f"  t={r['time']:g} tx({t['from']}->{t['to']},{t['value']}): {r['reason']}")
    lines.append(f"mempool: {len(report['mempool'])} pending")
    if "violation" in report:
        v = report["violation"]
        lines.append(f"VIOLATION at t={v['time']:g} (line {v['line']}): {v['message']}")
    lines.append(f"state digest: {report['state_digest']}")
    return "\n".join(lines)
