"""Stochastic oracle for the double-spend race, independent of the integral.

Each trial plays out the arrival streams directly: every chain's honest
stream runs until its w-th block, the tipping point X is the last of those,
honest blocks keep arriving until X, and the attacker's blocks are counted on
[0, X]. Chains where the attacker is not yet ahead continue as a +1/-1 walk
(honest/attacker next block) until the attacker leads or the honest lead
passes ``walk_cutoff_deficit``; beyond the cutoff the rest of the race is
settled by one Bernoulli draw with the exact catch-up probability.

Trials run in fixed-size batches. Batch ``k`` draws from the ``k``-th child
of ``SeedSequence(seed)``, so results do not depend on how batches are
scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .analytics import AttackParams

DEFAULT_CUTOFF = 60
BATCH_TRIALS = 4096
WALK_CHUNK = 32


@dataclass(frozen=True)
class SimConfig:
    params: AttackParams
    trials: int = 100_000
    seed: int = 0
    walk_cutoff_deficit: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.walk_cutoff_deficit < 1:
            raise ValueError("walk_cutoff_deficit must be >= 1")


@dataclass(frozen=True)
class SimResult:
    successes: int
    trials: int

    @property
    def point_estimate(self) -> float:
        return self.successes / self.trials

    @property
    def std_error(self) -> float:
        p = self.point_estimate
        return math.sqrt(p * (1.0 - p) / self.trials)

    def agrees_with(self, value: float, sigmas: float = 3.0) -> bool:
        return abs(self.point_estimate - value) <= sigmas * self.std_error


@dataclass(frozen=True)
class FixedXResult:
    short: SimResult
    other: SimResult


def batch_rngs(seed: int, trials: int, batch: int = BATCH_TRIALS):
    """Yield (size, Generator) per batch from independent spawned streams."""
    n_batches = -(-trials // batch)
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        yield min(batch, trials - k * batch), np.random.Generator(np.random.PCG64(child))


def race_from(deficit: np.ndarray, q: float, cutoff: int, rng: np.random.Generator) -> np.ndarray:
    """True where an attacker starting ``deficit`` behind (deficit >= 0) ever leads.

    Walks the race one block at a time; a walk whose deficit exceeds
    ``cutoff`` is resolved by a Bernoulli((q/p)^(deficit+1)) draw.
    """
    d = np.array(deficit, dtype=np.int64)
    won = np.zeros(d.shape, dtype=bool)
    if q <= 0:
        return won
    ratio = q / (1.0 - q)
    active = np.flatnonzero(d <= cutoff)
    far = np.flatnonzero(d > cutoff)
    won[far] = rng.random(far.size) < ratio ** (d[far] + 1.0)
    pos = d[active].astype(np.int16)
    while active.size:
        # Advance all live walks WALK_CHUNK steps at once and settle each at its first exit.
        down = rng.random((active.size, WALK_CHUNK)) < q
        path = pos[:, None] + np.cumsum(1 - 2 * down.view(np.int8), axis=1, dtype=np.int16)
        exits = (path < 0) | (path > cutoff)
        done = exits.any(axis=1)
        first = np.argmax(exits, axis=1)[done]
        at_exit = path[done, first]
        idx = active[done]
        escaped = at_exit > cutoff
        won[idx[~escaped]] = True
        won[idx[escaped]] = rng.random(int(escaped.sum())) < ratio ** (at_exit[escaped] + 1.0)
        active, pos = active[~done], path[~done, -1]
    return won


def _trial_batch(params: AttackParams, size: int, cutoff: int, rng: np.random.Generator) -> int:
    n, w, lam, mu, q = params.n_chains, params.w, params.lam, params.mu, params.q
    # w honest inter-arrival gaps per chain; the sum is that chain's w-th block time.
    reach = rng.exponential(1.0 / lam, size=(size, n, w)).sum(axis=2)
    tipping = reach.max(axis=1, keepdims=True)
    # Poisson streams are memoryless: arrivals after reaching w up to X.
    honest = w + rng.poisson(lam * (tipping - reach))
    attacker = rng.poisson(mu * np.broadcast_to(tipping, reach.shape)) if q > 0 else np.zeros_like(honest)
    deficit = honest - attacker
    success = (deficit < 0).any(axis=1)
    pending = ~success[:, None] & (deficit >= 0)
    rows, _ = np.nonzero(pending)
    if rows.size:
        won = race_from(deficit[pending], q, cutoff, rng)
        success[np.unique(rows[won])] = True
    return int(success.sum())


def simulate_attack(cfg: SimConfig) -> SimResult:
    successes = sum(
        _trial_batch(cfg.params, size, cfg.walk_cutoff_deficit, rng)
        for size, rng in batch_rngs(cfg.seed, cfg.trials)
    )
    return SimResult(successes, cfg.trials)


def simulate_tipping_times(params: AttackParams, trials: int, seed: int = 0) -> np.ndarray:
    out = []
    for size, rng in batch_rngs(seed, trials):
        reach = rng.exponential(1.0 / params.lam, size=(size, params.n_chains, params.w)).sum(axis=2)
        out.append(reach.max(axis=1))
    return np.concatenate(out)


def simulate_fixed_x(params: AttackParams, x: float, trials: int, seed: int = 0,
                     cutoff: int = DEFAULT_CUTOFF) -> FixedXResult:
    """Estimate the short-chain and other-chain take-over chances at X = x.

    Short chain: exactly w honest blocks. Other chain: honest count drawn from
    Poisson(x lam) and redrawn until it is at least w.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    w, q = params.w, params.q
    short_wins = other_wins = 0
    for size, rng in batch_rngs(seed, trials):
        attacker = rng.poisson(params.mu * x, size)
        deficit = w - attacker
        won = deficit < 0
        won[~won] = race_from(deficit[~won], q, cutoff, rng)
        short_wins += int(won.sum())

        honest = np.empty(size, dtype=np.int64)
        need = np.arange(size)
        for _ in range(10_000):
            if not need.size:
                break
            draw = rng.poisson(params.lam * x, need.size)
            ok = draw >= w
            honest[need[ok]] = draw[ok]
            need = need[~ok]
        else:
            raise ValueError(f"P[honest >= {w}] too small at x = {x:g} for rejection sampling")
        deficit = honest - rng.poisson(params.mu * x, size)
        won = deficit < 0
        won[~won] = race_from(deficit[~won], q, cutoff, rng)
        other_wins += int(won.sum())
    return FixedXResult(SimResult(short_wins, trials), SimResult(other_wins, trials))


def write_csv(rows: Iterable[tuple[AttackParams, SimResult]], fp: IO[str]) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(["q", "N", "w", "probability", "std_error", "successes", "trials"])
    for params, result in rows:
        writer.writerow([params.q, params.n_chains, params.w, f"{result.point_estimate:.6g}",
                         f"{result.std_error:.3g}", result.successes, result.trials])
