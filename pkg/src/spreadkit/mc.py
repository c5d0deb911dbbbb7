"""Monte Carlo reference pricer on the canonical basket form.

Terminal log-prices are sampled exactly through a rank-revealing pivoted
Cholesky factor of the integrated covariance, so no time discretization
error enters; the only error is statistical, reported as a standard error
from batch means.

Randomness is counter-based: normal draw ``q`` of the stream is a pure
function of ``(seed, q)`` (Philox words mapped through the inverse normal
cdf), and path ``p`` consumes a fixed window of draws.  Results are
therefore bit-reproducible for a given configuration and independent of
how paths are split into batches.

A raw-path simulator for averaging payoffs (sampling every observation
date of every asset) is included so the Asian-to-basket reduction can be
validated end to end against the unreduced payoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.linalg.lapack import dpstrf
from scipy.special import ndtri

from .errors import ValidationError
from .market import (
    BasketSpreadInstrument,
    MarketModel,
    ReducedMarket,
    apply_fixings,
    integrated_product,
)
from .proxy import ExpansionInputs

__all__ = [
    "McConfig",
    "McResult",
    "mc_price",
    "mc_price_ladder",
    "mc_identity_lhs",
    "mc_identity_suite",
    "mc_price_asian_raw",
]

_CHOL_TOL = 1e-12


@dataclass(frozen=True)
class McConfig:
    """Simulation size and reproducibility knobs.

    ``paths`` counts payoff evaluations; with ``antithetic`` half of them
    are mirrored draws.  ``batches`` independent blocks feed the standard
    error estimate, so ``paths`` must split evenly across them (and pairs).
    """

    paths: int = 4_000_000
    seed: int = 0
    antithetic: bool = True
    batches: int = 32

    def __post_init__(self) -> None:
        group = self.batches * (2 if self.antithetic else 1)
        if self.paths < 2 * self.batches:
            raise ValidationError("need paths >= 2 * batches")
        if self.paths % group:
            raise ValidationError(f"paths must be a multiple of {group} for this configuration")
        if self.batches < 2:
            raise ValidationError("need at least 2 batches for a standard error")


@dataclass(frozen=True)
class McResult:
    price: float
    std_error: float
    paths_used: int


def _factor(cov: np.ndarray) -> np.ndarray:
    """Rank-revealing factor ``C`` (n x rank) with ``C @ C.T == cov``.

    Pivoted Cholesky with pivot truncation at ``1e-12`` (scaled by the
    largest variance); handles the rank-deficient matrices produced by the
    Asian reductions and zero-variance pseudo-assets.
    """
    n = cov.shape[0]
    scale = float(np.max(np.diag(cov), initial=0.0))
    if scale == 0.0:
        return np.zeros((n, 0))
    c, piv, rank, info = dpstrf(cov, tol=_CHOL_TOL * scale, lower=1)
    if info < 0:
        raise ValidationError(f"covariance factorization failed (lapack info {info})")
    factor = np.tril(c)[:, :rank]
    out = np.empty((n, rank))
    out[piv - 1, :] = factor
    err = np.abs(out @ out.T - cov).max()
    if err > 1e-8 * max(1.0, scale):
        raise ValidationError(f"covariance not factorizable within tolerance (residual {err:.2e})")
    return out


def _normal_words(seed: int, start: int, count: int) -> np.ndarray:
    """Standard normals for draw indices ``[start, start + count)`` of the stream."""
    bg = Philox(key=seed)
    blocks, offset = divmod(start, 4)
    bg.advance(blocks)
    words = bg.random_raw(offset + count)[offset:]
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _batch_plan(config: McConfig) -> tuple[int, int]:
    """(draw paths per batch, payoff multiplicity)."""
    mult = 2 if config.antithetic else 1
    return config.paths // (config.batches * mult), mult


def _run_batches(config: McConfig, words_per_path: int, evaluate) -> tuple[np.ndarray, int]:
    """Feed per-batch normal matrices to ``evaluate`` and collect batch means.

    ``evaluate(z)`` maps draws ``(batch_size, words_per_path)`` to a payoff
    vector; with antithetic sampling it is called on ``z`` and ``-z`` and
    the pair average forms the batch sample.
    """
    per_batch, mult = _batch_plan(config)
    means = np.empty(config.batches)
    for b in range(config.batches):
        start = b * per_batch * words_per_path
        z = _normal_words(config.seed, start, per_batch * words_per_path)
        z = z.reshape(per_batch, words_per_path) if words_per_path else np.zeros((per_batch, 0))
        pay = evaluate(z)
        if config.antithetic:
            pay = 0.5 * (pay + evaluate(-z))
        means[b] = pay.mean()
    return means, config.batches * per_batch * mult


def _collect(means: np.ndarray, paths_used: int, discount: float) -> McResult:
    price = discount * float(means.mean())
    se = discount * float(means.std(ddof=1) / math.sqrt(means.shape[0]))
    return McResult(price, se, paths_used)


def mc_price_ladder(
    ladder: list[BasketSpreadInstrument], market: ReducedMarket, config: McConfig
) -> list[McResult]:
    """Price several payoffs over the same market on shared draws.

    All instruments must be canonical (non-averaging) and share the asset
    set; only weights, strikes, multiplicative strikes or direction may
    differ.  One simulation pass serves the whole ladder.
    """
    if not ladder:
        raise ValidationError("empty ladder")
    effs = []
    for instr in ladder:
        if instr.asian is not None:
            raise ValidationError("reduce averaging instruments first (or use mc_price_asian_raw)")
        weights = np.asarray(instr.weights)
        if weights.shape[0] != market.n_assets:
            raise ValidationError("instrument weights must match the market")
        effs.append(np.where(weights < 0, weights * instr.mult_strike, weights))
    eff_matrix = np.column_stack(effs)
    etas = np.array([float(i.direction) for i in ladder])
    strikes = np.array([i.strike for i in ladder])
    cov = market.covariance.entries
    factor = _factor(cov)
    drift = np.log(market.forwards) - 0.5 * np.diag(cov)

    per_batch, mult = _batch_plan(config)
    wpp = factor.shape[1]
    means = np.empty((config.batches, len(ladder)))
    for b in range(config.batches):
        start = b * per_batch * wpp
        z = _normal_words(config.seed, start, per_batch * wpp).reshape(per_batch, wpp)
        draws = [z, -z] if config.antithetic else [z]
        pay = np.zeros(len(ladder))
        for zz in draws:
            prices = np.exp(drift + zz @ factor.T)
            values = prices @ eff_matrix - strikes
            pay = pay + np.maximum(etas * values, 0.0).mean(axis=0)
        means[b] = pay / len(draws)
    used = config.batches * per_batch * mult
    return [_collect(means[:, idx], used, market.discount_factor) for idx in range(len(ladder))]


def mc_price(instr: BasketSpreadInstrument, market: ReducedMarket, config: McConfig) -> McResult:
    """Price a basket spread payoff by exact terminal sampling.

    Works on any canonical (non-averaging) instrument: the additive strike
    and the multiplicative strike are applied inside the payoff, so folded
    and unfolded representations price identically on the shared draws.
    """
    return mc_price_ladder([instr], market, config)[0]


def _proxy_context(inputs: ExpansionInputs, xi: np.ndarray) -> dict[str, np.ndarray]:
    """Per-path proxy quantities shared by every identity integrand."""
    a_pos = inputs.a[inputs.pos]
    a_neg = -inputs.a[inputs.neg]  # exponents of the negative-leg proxy are positive
    log_gp = -0.5 * inputs.nu2_p + xi[:, inputs.pos] @ a_pos
    log_gn = -0.5 * inputs.nu2_n + xi[:, inputs.neg] @ a_neg
    ratio = np.exp(log_gp - log_gn)
    h = np.maximum(float(inputs.direction) * (ratio - inputs.kappa_star), 0.0)
    return {"xi": xi, "log_gp": log_gp, "log_gn": log_gn, "ratio": ratio, "h": h}


def _identity_integrand(
    identity_id: int,
    indices: tuple[int, int, int],
    ctx: dict[str, np.ndarray],
    variances: np.ndarray,
) -> np.ndarray:
    i, j, k = indices
    xi, log_gp, log_gn, ratio = ctx["xi"], ctx["log_gp"], ctx["log_gn"], ctx["ratio"]

    def asset(q: int) -> np.ndarray:
        return np.exp(-0.5 * variances[q] + xi[:, q])

    if identity_id == 1:
        f = np.exp(log_gn)
    elif identity_id == 2:
        f = np.exp(log_gp)
    elif identity_id == 3:
        f = asset(i)
    elif identity_id == 4:
        f = np.exp(log_gp) * ratio
    elif identity_id == 5:
        f = asset(i) * ratio
    elif identity_id == 6:
        f = asset(i) * asset(j) * np.exp(-log_gn)
    elif identity_id == 7:
        f = np.exp(log_gp) * ratio**2
    elif identity_id == 8:
        f = asset(i) * ratio**2
    elif identity_id == 9:
        f = asset(i) * asset(j) * np.exp(log_gp - 2.0 * log_gn)
    else:
        f = asset(i) * asset(j) * asset(k) * np.exp(-2.0 * log_gn)
    return f * ctx["h"]


def mc_identity_suite(
    inputs: ExpansionInputs,
    config: McConfig,
    requests: list[tuple[int, tuple[int, int, int]]],
) -> dict[tuple[int, tuple[int, int, int]], McResult]:
    """Monte Carlo estimates of many building-block expectations on shared draws.

    One simulation pass serves every requested ``(identity_id, indices)``
    pair; estimates share paths (fine for bias, and each standard error is
    computed from its own batch means).
    """
    m = inputs.n_assets
    for identity_id, indices in requests:
        if identity_id not in range(1, 11):
            raise ValidationError("identity_id must be in 1..10")
        if not all(0 <= q < m for q in indices):
            raise ValidationError("asset index out of range")

    factor = _factor(inputs.cov)
    variances = np.diag(inputs.cov)
    per_batch, mult = _batch_plan(config)
    wpp = factor.shape[1]
    means = {req: np.empty(config.batches) for req in requests}
    for b in range(config.batches):
        start = b * per_batch * wpp
        z = _normal_words(config.seed, start, per_batch * wpp).reshape(per_batch, wpp)
        contexts = [_proxy_context(inputs, z @ factor.T)]
        if config.antithetic:
            contexts.append(_proxy_context(inputs, -z @ factor.T))
        for req in requests:
            vals = [_identity_integrand(req[0], req[1], ctx, variances) for ctx in contexts]
            means[req][b] = np.mean(vals)
    used = config.batches * per_batch * mult
    return {req: _collect(means[req], used, inputs.discount) for req in requests}


def mc_identity_lhs(
    identity_id: int,
    inputs: ExpansionInputs,
    config: McConfig,
    indices: tuple[int, int, int] = (0, 0, 0),
) -> McResult:
    """Monte Carlo estimate of one building-block expectation's left-hand side.

    Simulates the normalized assets, forms the unit-mean leg proxies and
    evaluates the integrand named by ``identity_id`` (see
    :data:`spreadkit.expansion.IDENTITY_LABELS`); the closed forms from
    :func:`spreadkit.expansion.identity_values` are the matching targets.
    """
    return mc_identity_suite(inputs, config, [(identity_id, tuple(indices))])[
        (identity_id, tuple(indices))
    ]


def mc_price_asian_raw(
    instr: BasketSpreadInstrument, model: MarketModel, config: McConfig
) -> McResult:
    """Price an averaging payoff by simulating every observation date.

    No reduction is used: each asset's path is sampled at each (stochastic)
    observation with exact per-interval integrated covariances, fixings are
    folded into the strike first, and the raw payoff is averaged.  This is
    the independent end-to-end check of the reduction pipeline.
    """
    if instr.asian is None:
        raise ValidationError("instrument has no averaging schedule")
    instr, _ = apply_fixings(instr, model)
    spec = instr.asian
    if spec is None:
        raise ValidationError("payoff is fully fixed; nothing to simulate")

    m = len(model.assets)
    times = spec.obs_times
    n = len(times)
    weights = np.asarray(instr.weights)
    u = np.outer(weights, spec.weights)  # (asset, observation) effective weights
    u = np.where(u < 0, u * instr.mult_strike, u)

    # per-interval factors and cumulative drifts
    step_factors = []
    cum_cov = np.zeros((m, m))
    log_fwd = np.empty((m, n))
    half_var = np.empty((m, n))
    for idx, t in enumerate(times):
        step = np.empty((m, m))
        for p in range(m):
            for q in range(p, m):
                full = model.correlation[p, q] * integrated_product(
                    model.assets[p].vol, model.assets[q].vol, t
                )
                step[p, q] = step[q, p] = full - cum_cov[p, q]
        cum_cov += step
        step_factors.append(_factor(step))
        for p in range(m):
            log_fwd[p, idx] = math.log(model.assets[p].forward_at(t, instr.maturity))
            half_var[p, idx] = 0.5 * cum_cov[p, p]
    ranks = [f.shape[1] for f in step_factors]
    words_per_path = sum(ranks)
    eta, strike = float(instr.direction), instr.strike

    def evaluate(z: np.ndarray) -> np.ndarray:
        total = np.zeros(z.shape[0])
        walk = np.zeros((z.shape[0], m))
        offset = 0
        for idx in range(n):
            r = ranks[idx]
            walk = walk + z[:, offset : offset + r] @ step_factors[idx].T
            offset += r
            prices = np.exp(log_fwd[:, idx] - half_var[:, idx] + walk)
            total += prices @ u[:, idx]
        return np.maximum(eta * (total - strike), 0.0)

    means, used = _run_batches(config, words_per_path, evaluate)
    return _collect(means, used, model.discount_factor)
