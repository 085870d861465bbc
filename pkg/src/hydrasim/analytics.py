"""Double-spend probability for N parallel chains.

Model: honest blocks arrive on every chain as a Poisson process with rate
``lam = p/(T0*N)``, the attacker's blocks with ``mu = q/(T0*N)``. The tipping
point X is the first time every chain holds ``w`` honest blocks, i.e. the
maximum of N Erlang(w, lam) times. At X the attacker wins a chain if it is
already ahead, or later with the gambler's-ruin probability (q/p)^(d+1)
from deficit d. The attack succeeds if any chain is taken over.

All Poisson weights are evaluated in log space. Infinite sums are cut where
the remaining Poisson tail mass (the summands are bounded by 1) drops below
``series_tail_epsilon``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal, special

from .errors import ConvergenceFailure, DegenerateConditioning

DEFAULT_T0 = 18.0

# Below this P[honest >= w] the conditional on the other chains is meaningless.
_MIN_CONDITIONING = 1e-280


@dataclass(frozen=True)
class AttackParams:
    q: float
    n_chains: int
    w: int
    t0: float = DEFAULT_T0

    def __post_init__(self):
        if not 0 <= self.q < 0.5:
            raise ValueError("attacker share q must lie in [0, 0.5)")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.w < 1:
            raise ValueError("w must be >= 1")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")

    @property
    def p(self) -> float:
        return 1.0 - self.q

    @property
    def ratio(self) -> float:
        return self.q / self.p

    @property
    def lam(self) -> float:
        return self.p / (self.t0 * self.n_chains)

    @property
    def mu(self) -> float:
        return self.q / (self.t0 * self.n_chains)


@dataclass(frozen=True)
class NumericsConfig:
    series_tail_epsilon: float = 1e-12
    quad_rel_tol: float = 1e-10
    quad_abs_tol: float = 1e-11
    x_max_quantile: float = 1.0 - 1e-12
    max_subdivisions: int = 500

    def __post_init__(self):
        if min(self.series_tail_epsilon, self.quad_rel_tol, self.quad_abs_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.x_max_quantile < 1:
            raise ValueError("x_max_quantile must lie in (0, 1)")
        if self.max_subdivisions < 2:
            raise ValueError("max_subdivisions must be at least 2 (the median is a breakpoint)")

    @property
    def survivor_mass(self) -> float:
        return min(1.0 - self.x_max_quantile, self.quad_abs_tol)

    @property
    def combined_tolerance(self) -> float:
        return max(self.series_tail_epsilon, self.quad_rel_tol, self.quad_abs_tol, self.survivor_mass)


DEFAULT_NUMERICS = NumericsConfig()


@dataclass(frozen=True)
class AttackResult:
    probability: float
    error_bound: float
    params: AttackParams

    def __float__(self):
        return self.probability


# -- Poisson helpers ---------------------------------------------------------


def poisson_pmf(k, mean: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if mean <= 0:
        return (k == 0).astype(float)
    return np.exp(k * math.log(mean) - mean - special.gammaln(k + 1))


def poisson_sf(k, mean: float):
    """P[Poisson(mean) > k]."""
    if mean <= 0:
        return np.zeros_like(np.asarray(k, dtype=float))
    return special.pdtrc(k, mean)


def poisson_cutoff(mean: float, eps: float, start: int = 0) -> int:
    """Smallest n >= start with P[Poisson(mean) > n] <= eps."""
    if mean <= 0:
        return start
    n = max(start, int(mean + 6.0 * math.sqrt(mean) + 10))
    while poisson_sf(n, mean) > eps:
        n = int(n * 1.25) + 10
    lo = start
    while lo < n:
        mid = (lo + n) // 2
        if poisson_sf(mid, mean) <= eps:
            n = mid
        else:
            lo = mid + 1
    return n


def erlang_cdf(w: int, rate: float, x: float) -> float:
    """P[sum of w Exp(rate) <= x] = 1 - e^{-rate x} sum_{k<w} (rate x)^k / k!."""
    return float(special.gammainc(w, rate * x)) if x > 0 else 0.0


# -- model pieces ------------------------------------------------------------


def catchup_probability(q: float, deficit: int) -> float:
    """Chance an attacker ``deficit`` blocks behind ever gets one block ahead."""
    if deficit < 0:
        raise ValueError("deficit must be >= 0")
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    if q >= 0.5:
        return 1.0
    return min((q / (1.0 - q)) ** (deficit + 1), 1.0)


def p_takeover_short(params: AttackParams, x: float) -> float:
    """P[take-over on the chain that reaches w blocks last | X = x].

    That chain holds exactly w honest blocks; the attacker holds Poisson(x mu).
    The i > w part is the Poisson upper tail in closed form.
    """
    w, r = params.w, params.ratio
    m = x * params.mu
    i = np.arange(w + 1)
    finite = float(np.sum(r ** (w - i + 1) * poisson_pmf(i, m)))
    return min(finite + float(poisson_sf(w, m)), 1.0)


def p_takeover_other(params: AttackParams, x: float, eps: float = DEFAULT_NUMERICS.series_tail_epsilon) -> float:
    """P[take-over on one of the other N-1 chains | X = x].

    Honest count n ~ Poisson(x lam) conditioned on n >= w, attacker a ~
    Poisson(x mu), deficit z = n - a. Evaluated as the two z-indexed double
    sums: z >= 0 weighted by (q/p)^(z+1), and the attacker-lead part z >= 1
    with weight 1.
    """
    w, r = params.w, params.ratio
    mh, ma = x * params.lam, x * params.mu
    denom = erlang_cdf(w, params.lam, x)
    if denom < _MIN_CONDITIONING:
        raise DegenerateConditioning(f"P[honest >= {w}] = {denom:g} at x = {x:g}")

    n_hi = poisson_cutoff(mh, eps * denom, w)
    n = np.arange(w, n_hi + 1)
    ph = poisson_pmf(n, mh) / denom

    head_start = 0.0
    if r > 0:
        z_hi = max(0, math.ceil(math.log(eps) / math.log(r)) - 1)
        z = np.arange(0, min(z_hi, n_hi) + 1)
        a = n[:, None] - z[None, :]
        pa = np.where(a >= 0, poisson_pmf(np.maximum(a, 0), ma), 0.0)
        head_start = float(np.sum(r ** (z + 1) * np.sum(ph[:, None] * pa, axis=0)))

    lead = 0.0
    if ma > 0:
        z_hi = max(1, poisson_cutoff(ma, eps, w) - w)
        z = np.arange(1, z_hi + 1)
        pa = poisson_pmf(n[:, None] + z[None, :], ma)
        lead = float(np.sum(ph[:, None] * pa))

    return min(max(head_start + lead, 0.0), 1.0)


def tipping_cdf(params: AttackParams, x: float) -> float:
    """P[X <= x] for X the max of N Erlang(w, lam) completion times."""
    return erlang_cdf(params.w, params.lam, x) ** params.n_chains


def tipping_density(params: AttackParams, x: float) -> float:
    if x < 0:
        return 0.0
    lam, w, n = params.lam, params.w, params.n_chains
    erlang_pdf = lam * float(poisson_pmf(w - 1, lam * x))
    return n * erlang_pdf * erlang_cdf(w, lam, x) ** (n - 1)


def tipping_quantile(params: AttackParams, survivor: float) -> float:
    """x with P[X > x] = survivor."""
    # F_X = F_i^N, so the per-chain survivor is 1 - (1 - s)^(1/N).
    per_chain = -math.expm1(math.log1p(-survivor) / params.n_chains)
    return float(special.gammainccinv(params.w, per_chain)) / params.lam


# -- the integral --------------------------------------------------------------


def _unconditional_other(params: AttackParams, x: float, eps: float) -> float:
    """P[honest >= w and the attacker takes over], unconditioned.

    Summed over honest counts n: for each n the head-start part
    g(n) = sum_{a<=n} (q/p)^(n-a+1) P[A=a] obeys g(n) = r (g(n-1) + P[A=n]),
    and the attacker-lead part is P[A > n].
    """
    w, r = params.w, params.ratio
    mh, ma = x * params.lam, x * params.mu
    n_hi = poisson_cutoff(mh, eps, w)
    ph = poisson_pmf(np.arange(w, n_hi + 1), mh)
    pa = poisson_pmf(np.arange(n_hi + 1), ma)
    g = signal.lfilter([r], [1.0, -r], pa)[w:] if r > 0 else np.zeros(len(ph))
    lead = poisson_sf(np.arange(w, n_hi + 1), ma)
    return float(np.sum(ph * (g + lead)))


def _integrand(params: AttackParams, x: float, eps: float) -> float:
    w, r, n = params.w, params.ratio, params.n_chains
    if x <= 0:
        return 0.0
    i = np.arange(w + 1)
    short_safe = float(np.sum((1.0 - r ** (w - i + 1)) * poisson_pmf(i, x * params.mu)))
    others_safe = 1.0
    if n > 1:
        others_safe = max(erlang_cdf(w, params.lam, x) - _unconditional_other(params, x, eps), 0.0) ** (n - 1)
    erlang_pdf = params.lam * float(poisson_pmf(w - 1, params.lam * x))
    return short_safe * others_safe * n * erlang_pdf


def _composed_integrand(params: AttackParams, x: float, eps: float) -> float:
    density = tipping_density(params, x)
    if density == 0.0:
        return 0.0
    short_safe = 1.0 - p_takeover_short(params, x)
    others_safe = 1.0
    if params.n_chains > 1:
        try:
            others_safe = (1.0 - p_takeover_other(params, x, eps)) ** (params.n_chains - 1)
        except DegenerateConditioning:
            return 0.0
    return short_safe * others_safe * density


def _integrate(params: AttackParams, cfg: NumericsConfig, integrand) -> AttackResult:
    survivor = cfg.survivor_mass
    x_max = tipping_quantile(params, survivor)
    x_mid = tipping_quantile(params, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            integrand, 0.0, x_max, epsabs=cfg.quad_abs_tol, epsrel=cfg.quad_rel_tol,
            limit=cfg.max_subdivisions, points=[x_mid], full_output=1,
        )
    value, abserr = out[0], out[1]
    # with full_output, quad appends a message only when it gave up early
    if len(out) > 3 and abserr > max(cfg.quad_abs_tol, cfg.quad_rel_tol * abs(value)):
        raise ConvergenceFailure(
            f"quadrature stopped with error estimate {abserr:.3g} for {params}: {out[3]}"
        )
    probability = min(max(1.0 - value, 0.0), 1.0)
    bound = abserr + survivor + params.n_chains * cfg.series_tail_epsilon
    return AttackResult(probability, bound, params)


def attack_probability(params: AttackParams, cfg: NumericsConfig = DEFAULT_NUMERICS) -> AttackResult:
    """1 - integral of P[no take-over | X=x] f_X(x) dx, in the simplified product form.

    The conditioning denominators cancel against f_X here, so the N-1 other
    chains enter as (F_i(x) - P[honest >= w, take-over])^(N-1).
    """
    eps = cfg.series_tail_epsilon
    return _integrate(params, cfg, lambda x: _integrand(params, x, eps))


def attack_probability_composed(params: AttackParams, cfg: NumericsConfig = DEFAULT_NUMERICS) -> AttackResult:
    """Same probability assembled from the conditional pieces without simplification."""
    eps = cfg.series_tail_epsilon
    return _integrate(params, cfg, lambda x: _composed_integrand(params, x, eps))


def throughput_estimate(block_size_bytes: float, tx_size_bytes: float, block_interval_seconds: float) -> float:
    """Transactions per second: (block size / tx size) / block interval."""
    if min(block_size_bytes, tx_size_bytes, block_interval_seconds) <= 0:
        raise ValueError("all inputs must be positive")
    return block_size_bytes / tx_size_bytes / block_interval_seconds
