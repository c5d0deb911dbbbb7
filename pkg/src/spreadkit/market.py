"""Market and instrument data, and the reductions to a canonical basket form.

Everything downstream of this module consumes one canonical object: a
:class:`ReducedMarket` holding per-asset forwards and the matrix of
integrated covariances ``v[i, j] = rho_ij * int_0^T sigma_i(s) sigma_j(s) ds``.
Working on integrated covariances (rather than vols plus correlations)
keeps zero-variance pseudo-assets first-class: strike folding appends an
asset with a zero covariance row and no division by a per-asset vol ever
occurs.

Reductions provided here:

* Asian (single asset, one observation schedule) -> basket of pseudo-assets,
  one per observation, covariance ``v[i, k] = int_0^{t_i ^ t_k} sigma^2``.
* Asian basket (m assets sharing a schedule) -> n*m pseudo-assets with
  covariance ``rho_jl * int_0^{t_i ^ t_k} sigma_j sigma_l``.
* Strike folding: an additive strike becomes a zero-variance pseudo-asset.
* Seasoned schedules: known fixings leave the stochastic spec and fold
  into the additive strike.

All types are frozen dataclasses carrying read-only arrays; operations are
pure, so concurrent reads are safe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import SchemaError, ValidationError

__all__ = [
    "VolCurve",
    "Asset",
    "MarketModel",
    "CovarianceMatrix",
    "ReducedMarket",
    "AsianSpec",
    "BasketSpreadInstrument",
    "canonical_covariance",
    "reduce_market",
    "reduce_asian",
    "reduce_asian_basket",
    "apply_fixings",
    "absorb_mult_strike",
    "fold_strike",
    "prepare",
    "instrument_from_dict",
    "instrument_to_dict",
    "load_pricing_problem",
]

#: PSD tolerance on the smallest eigenvalue of correlation/covariance matrices.
PSD_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _check_psd(matrix: np.ndarray, name: str) -> None:
    min_eig = float(np.linalg.eigvalsh(matrix).min()) if matrix.size else 0.0
    if min_eig < -PSD_TOL:
        raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {min_eig:.3e})")


# ---------------------------------------------------------------------------
# Term structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VolCurve:
    """Piecewise-constant instantaneous volatility.

    ``segments[k] = (end_time, vol)`` means ``vol`` applies on
    ``(end_{k-1}, end_k]`` with ``end_{-1} = 0``; the last vol extends
    beyond the final end time.
    """

    segments: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValidationError("vol curve needs at least one segment")
        ends = [t for t, _ in self.segments]
        if any(t <= 0 for t in ends) or any(b <= a for a, b in zip(ends, ends[1:])):
            raise ValidationError("segment end times must be positive and strictly increasing")
        if any(v < 0 for _, v in self.segments):
            raise ValidationError("vols must be nonnegative")
        object.__setattr__(self, "segments", tuple((float(t), float(v)) for t, v in self.segments))

    @staticmethod
    def flat(vol: float) -> "VolCurve":
        return VolCurve(((1.0, vol),))

    def total_variance(self, t: float) -> float:
        """``int_0^t sigma^2(s) ds``."""
        return integrated_product(self, self, t)


def _vol_on(curve: VolCurve, hi: float) -> float:
    """Vol applying on an interval ending at ``hi`` that contains no breakpoint."""
    for end, vol in curve.segments:
        if hi <= end:
            return vol
    return curve.segments[-1][1]  # last segment extends


def integrated_product(a: VolCurve, b: VolCurve, t: float) -> float:
    """Exact ``int_0^t sigma_a(s) sigma_b(s) ds`` for piecewise-constant curves."""
    if t < 0:
        raise ValidationError("integration horizon must be nonnegative")
    breaks = sorted(
        {end for end, _ in a.segments if end < t}
        | {end for end, _ in b.segments if end < t}
        | {t}
    )
    total = 0.0
    prev = 0.0
    for end in breaks:
        total += _vol_on(a, end) * _vol_on(b, end) * (end - prev)
        prev = end
    return total


# ---------------------------------------------------------------------------
# Market model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Asset:
    """One underlying: forward to the pricing maturity plus its vol curve.

    ``growth`` is the flat carry rate ``r - q`` used to place forwards at
    intermediate observation dates, ``F(0, t) = forward * exp(-growth * (T - t))``.
    Forwards are primary inputs; :meth:`from_spot` is the convenience
    constructor for flat-rate setups.
    """

    forward: float
    vol: VolCurve
    growth: float = 0.0

    def __post_init__(self) -> None:
        if self.forward <= 0:
            raise ValidationError("forward must be positive")

    @staticmethod
    def from_spot(spot: float, vol: VolCurve, rate: float, maturity: float, dividend_yield: float = 0.0) -> "Asset":
        g = rate - dividend_yield
        return Asset(forward=spot * float(np.exp(g * maturity)), vol=vol, growth=g)

    def forward_at(self, t: float, maturity: float) -> float:
        return self.forward * float(np.exp(-self.growth * (maturity - t)))


@dataclass(frozen=True)
class MarketModel:
    """Assets, their correlation matrix and the discount factor to payment."""

    assets: tuple[Asset, ...]
    correlation: np.ndarray
    discount_factor: float = 1.0

    def __post_init__(self) -> None:
        corr = _readonly(self.correlation)
        m = len(self.assets)
        if m == 0:
            raise ValidationError("need at least one asset")
        if corr.shape != (m, m):
            raise ValidationError(f"correlation must be {m}x{m}, got {corr.shape}")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValidationError("correlation must be symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ValidationError("correlation diagonal must be 1")
        if np.any(np.abs(corr) > 1.0 + 1e-12):
            raise ValidationError("correlation entries must lie in [-1, 1]")
        _check_psd(corr, "correlation")
        if not 0.0 < self.discount_factor <= 1.0:
            raise ValidationError("discount factor must lie in (0, 1]")
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "correlation", corr)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Integrated covariances ``v[i, j] = rho_ij int_0^T sigma_i sigma_j`` to ``maturity``."""

    entries: np.ndarray
    maturity: float

    def __post_init__(self) -> None:
        v = _readonly(self.entries)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("covariance must be square")
        if not np.allclose(v, v.T, atol=1e-12 * max(1.0, float(np.abs(v).max(initial=0.0)))):
            raise ValidationError("covariance must be symmetric")
        if np.any(np.diag(v) < 0):
            raise ValidationError("total variances must be nonnegative")
        _check_psd(v, "covariance")
        object.__setattr__(self, "entries", v)

    @property
    def n_assets(self) -> int:
        return self.entries.shape[0]

    def total_variances(self) -> np.ndarray:
        return np.diag(self.entries)


@dataclass(frozen=True)
class ReducedMarket:
    """Canonical pricing form: forwards, integrated covariances, discounting."""

    forwards: np.ndarray
    covariance: CovarianceMatrix
    discount_factor: float

    def __post_init__(self) -> None:
        f = _readonly(self.forwards)
        if f.ndim != 1 or f.shape[0] != self.covariance.n_assets:
            raise ValidationError("forwards must be a vector matching the covariance size")
        if np.any(f <= 0):
            raise ValidationError("forwards must be positive")
        if not 0.0 < self.discount_factor <= 1.0:
            raise ValidationError("discount factor must lie in (0, 1]")
        object.__setattr__(self, "forwards", f)

    @property
    def n_assets(self) -> int:
        return self.forwards.shape[0]


# ---------------------------------------------------------------------------
# Instruments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AsianSpec:
    """Observation schedule for averaging payoffs.

    ``weights[j]`` multiplies the observation at ``obs_times[j]``; signs are
    free, so a single-asset Asian spread (two schedules with opposite sign)
    is one spec.  Valuation time is 0: observation times at or before 0 are
    in the past and must be covered by ``fixings`` (one value per asset and
    past observation) before the spec can be reduced.
    """

    obs_times: tuple[float, ...]
    weights: tuple[float, ...]
    fixings: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.obs_times)
        weights = tuple(float(w) for w in self.weights)
        if len(times) == 0:
            raise ValidationError("need at least one observation")
        if len(weights) != len(times):
            raise ValidationError("weights must align with obs_times")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("observation times must be strictly increasing")
        fixings = tuple(tuple(float(x) for x in row) for row in self.fixings)
        if len(fixings) > len(times):
            raise ValidationError("more fixings than observations")
        object.__setattr__(self, "obs_times", times)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "fixings", fixings)

    @property
    def n_obs(self) -> int:
        return len(self.obs_times)

    @property
    def n_fixed(self) -> int:
        return len(self.fixings)


@dataclass(frozen=True)
class BasketSpreadInstrument:
    """Spread payoff ``max(eta * (sum_pos w_i X_i + mult_strike * sum_neg w_i X_i - strike), 0)``.

    ``X_i`` is the terminal asset price, or the weighted average over the
    ``asian`` schedule when one is attached.  ``mult_strike`` multiplies the
    negatively-weighted components only, never the additive ``strike``.
    """

    weights: tuple[float, ...]
    maturity: float
    strike: float = 0.0
    mult_strike: float = 1.0
    direction: int = 1
    asian: AsianSpec | None = None

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.weights)
        if not weights or all(w == 0.0 for w in weights):
            raise ValidationError("need at least one nonzero weight")
        if self.direction not in (1, -1):
            raise ValidationError("direction must be +1 (call) or -1 (put)")
        if self.maturity <= 0:
            raise ValidationError("maturity must be positive")
        if self.asian is not None and max(self.asian.obs_times) > self.maturity + 1e-12:
            raise ValidationError("observation times must not exceed maturity")
        object.__setattr__(self, "weights", weights)


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------


def canonical_covariance(model: MarketModel, maturity: float) -> CovarianceMatrix:
    """Integrate the term structures into the covariance matrix to ``maturity``."""
    if maturity <= 0:
        raise ValidationError("maturity must be positive")
    m = len(model.assets)
    v = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            rho = model.correlation[i, j]
            v[i, j] = v[j, i] = rho * integrated_product(model.assets[i].vol, model.assets[j].vol, maturity)
    return CovarianceMatrix(v, maturity)


def reduce_market(model: MarketModel, maturity: float) -> ReducedMarket:
    """Canonical form of a plain (non-Asian) market."""
    cov = canonical_covariance(model, maturity)
    forwards = np.array([a.forward for a in model.assets])
    return ReducedMarket(forwards, cov, model.discount_factor)


# ---------------------------------------------------------------------------
# Fixings
# ---------------------------------------------------------------------------


def apply_fixings(
    instr: BasketSpreadInstrument, model: MarketModel
) -> tuple[BasketSpreadInstrument, float]:
    """Move known observations out of the stochastic spec and into the strike.

    Each fixed observation contributes ``basket_weight * asian_weight * fixing``
    (scaled by ``mult_strike`` when the product of weights is negative) to the
    payoff; the sum of those contributions is subtracted from the additive
    strike.  Returns the stripped instrument and the strike adjustment
    (``new_strike = strike - adjustment``).
    """
    spec = instr.asian
    if spec is None:
        raise ValidationError("instrument has no averaging schedule")
    m = len(model.assets)
    if len(instr.weights) != m:
        raise ValidationError("instrument weights must match the model's assets")
    if spec.n_fixed == 0:
        if any(t <= 0 for t in spec.obs_times):
            raise ValidationError("past observations need fixings")
        return instr, 0.0

    n_fixed = spec.n_fixed
    for row in spec.fixings:
        if len(row) != m:
            raise ValidationError(f"each fixing row needs {m} values (one per asset)")
    if any(t > 0 for t in spec.obs_times[:n_fixed]):
        raise ValidationError("fixing supplied for a future observation time")
    if any(t <= 0 for t in spec.obs_times[n_fixed:]):
        raise ValidationError("past observations need fixings")

    adjustment = 0.0
    for j in range(n_fixed):
        wa = spec.weights[j]
        for i in range(m):
            u = instr.weights[i] * wa
            scale = instr.mult_strike if u < 0 else 1.0
            adjustment += scale * u * spec.fixings[j][i]

    if n_fixed == spec.n_obs:
        stripped = None
    else:
        stripped = AsianSpec(spec.obs_times[n_fixed:], spec.weights[n_fixed:], ())
    instr2 = replace(instr, asian=stripped, strike=instr.strike - adjustment)
    return instr2, adjustment


# ---------------------------------------------------------------------------
# Asian reductions
# ---------------------------------------------------------------------------


def reduce_asian_basket(
    instr: BasketSpreadInstrument, model: MarketModel
) -> tuple[BasketSpreadInstrument, ReducedMarket]:
    """Rewrite an averaging basket spread as a plain basket spread.

    Produces one pseudo-asset per (asset, observation) pair, ordered
    asset-major.  Pseudo-asset (j, i) carries forward ``F_j(0, t_i)``,
    weight ``w_j * wA_i``, and covariance
    ``cov[(j,i), (l,k)] = rho_jl * int_0^{t_i ^ t_k} sigma_j sigma_l``.
    Fixings must already have been applied.
    """
    spec = instr.asian
    if spec is None:
        raise ValidationError("instrument has no averaging schedule")
    if spec.n_fixed:
        raise ValidationError("apply fixings before reducing")
    if any(t <= 0 for t in spec.obs_times):
        raise ValidationError("past observations need fixings")
    m = len(model.assets)
    if len(instr.weights) != m:
        raise ValidationError("instrument weights must match the model's assets")

    n = spec.n_obs
    times = spec.obs_times
    size = n * m
    forwards = np.empty(size)
    weights = np.empty(size)
    cov = np.empty((size, size))
    # cumulative cross-integrals per asset pair at each observation time
    for j in range(m):
        block = slice(j * n, (j + 1) * n)
        forwards[block] = [model.assets[j].forward_at(t, instr.maturity) for t in times]
        weights[block] = [instr.weights[j] * wa for wa in spec.weights]
    for j in range(m):
        for l in range(j, m):
            rho = model.correlation[j, l]
            cum = [rho * integrated_product(model.assets[j].vol, model.assets[l].vol, t) for t in times]
            blk = np.empty((n, n))
            for i in range(n):
                for k in range(n):
                    blk[i, k] = cum[min(i, k)]
            cov[j * n : (j + 1) * n, l * n : (l + 1) * n] = blk
            if l != j:
                cov[l * n : (l + 1) * n, j * n : (j + 1) * n] = blk.T

    reduced = ReducedMarket(forwards, CovarianceMatrix(cov, instr.maturity), model.discount_factor)
    flat = replace(instr, weights=tuple(weights), asian=None)
    return flat, reduced


def reduce_asian(
    instr: BasketSpreadInstrument, model: MarketModel
) -> tuple[BasketSpreadInstrument, ReducedMarket]:
    """Single-asset specialization of :func:`reduce_asian_basket`.

    The pseudo-asset covariance collapses to the running total variance at
    the earlier observation, ``cov[i, k] = int_0^{t_i ^ t_k} sigma^2``.
    """
    if len(model.assets) != 1:
        raise ValidationError("reduce_asian expects a single-asset model")
    return reduce_asian_basket(instr, model)


# ---------------------------------------------------------------------------
# Strike handling
# ---------------------------------------------------------------------------


def absorb_mult_strike(instr: BasketSpreadInstrument) -> BasketSpreadInstrument:
    """Scale the negatively-weighted leg by ``mult_strike`` and reset it to 1."""
    if instr.mult_strike == 1.0:
        return instr
    if instr.asian is not None:
        raise ValidationError("reduce the averaging schedule before absorbing the multiplicative strike")
    weights = tuple(w * instr.mult_strike if w < 0 else w for w in instr.weights)
    return replace(instr, weights=weights, mult_strike=1.0)


def fold_strike(
    instr: BasketSpreadInstrument, market: ReducedMarket
) -> tuple[BasketSpreadInstrument, ReducedMarket]:
    """Fold the additive strike into the basket as a zero-variance pseudo-asset.

    A positive strike joins the negative leg (weight -1, forward ``strike``);
    a negative strike joins the positive leg (weight +1, forward ``-strike``);
    zero is a no-op.  Requires ``mult_strike`` already absorbed so the new
    pseudo-asset is not scaled.  Zero-weight assets are dropped.  Errors if
    the positive leg ends up empty.
    """
    if instr.asian is not None:
        raise ValidationError("reduce the averaging schedule before folding")
    if instr.mult_strike != 1.0:
        raise ValidationError("absorb mult_strike before folding")
    if len(instr.weights) != market.n_assets:
        raise ValidationError("instrument weights must match the market")

    weights = list(instr.weights)
    forwards = list(market.forwards)
    cov = market.covariance.entries
    k = instr.strike
    if k != 0.0:
        weights.append(-1.0 if k > 0 else 1.0)
        forwards.append(abs(k))
        m = cov.shape[0]
        grown = np.zeros((m + 1, m + 1))
        grown[:m, :m] = cov
        cov = grown

    keep = [i for i, w in enumerate(weights) if w != 0.0]
    weights = [weights[i] for i in keep]
    forwards = [forwards[i] for i in keep]
    cov = cov[np.ix_(keep, keep)]

    if not any(w > 0 for w in weights):
        raise ValidationError("degenerate positive leg: no positively-weighted component")

    folded = replace(instr, weights=tuple(weights), strike=0.0)
    reduced = ReducedMarket(np.array(forwards), CovarianceMatrix(cov, market.covariance.maturity), market.discount_factor)
    return folded, reduced


def prepare(
    instr: BasketSpreadInstrument, model: MarketModel
) -> tuple[BasketSpreadInstrument, ReducedMarket]:
    """Full reduction pipeline: fixings, Asian reduction, strike absorption and folding.

    The fully-fixed degenerate case (every observation known) has a
    deterministic payoff and no basket representation; callers must price
    it directly from the strike adjustment of :func:`apply_fixings`.
    """
    if instr.asian is not None:
        if instr.asian.n_fixed or any(t <= 0 for t in instr.asian.obs_times):
            instr, _ = apply_fixings(instr, model)
        if instr.asian is None:
            raise ValidationError("fully-fixed payoff is deterministic; no basket form exists")
        instr, market = reduce_asian_basket(instr, model)
    else:
        if len(instr.weights) != len(model.assets):
            raise ValidationError("instrument weights must match the model's assets")
        market = reduce_market(model, instr.maturity)
    instr = absorb_mult_strike(instr)
    return fold_strike(instr, market)


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------


def _require(d: dict, key: str, kind, where: str):
    if key not in d:
        raise SchemaError(f"missing field '{key}' in {where}")
    value = d[key]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is list and isinstance(value, list):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise SchemaError(f"field '{key}' in {where} must be a {kind.__name__}")


def instrument_from_dict(data: dict) -> tuple[BasketSpreadInstrument, MarketModel]:
    """Parse the pricing-problem schema into an instrument and market model.

    Schema: ``{assets: [{forward, vol_segments: [[t, vol], ...], growth?}],
    correlation: [[...]], discount_factor, weights: [...], strike,
    mult_strike, maturity, direction, asian?: {obs_times, asian_weights,
    fixings?}}``.  Times are year fractions; ``direction`` is "call" or
    "put"; ``growth`` defaults to 0; ``fixings`` is a list of per-asset rows
    aligned with the leading observation times (a flat list is accepted for
    a single asset).
    """
    if not isinstance(data, dict):
        raise SchemaError("pricing problem must be a JSON object")
    assets_raw = _require(data, "assets", list, "pricing problem")
    if not assets_raw:
        raise SchemaError("assets must be nonempty")
    assets = []
    for idx, a in enumerate(assets_raw):
        if not isinstance(a, dict):
            raise SchemaError(f"assets[{idx}] must be an object")
        where = f"assets[{idx}]"
        fwd = _require(a, "forward", float, where)
        segs = _require(a, "vol_segments", list, where)
        try:
            curve = VolCurve(tuple((float(t), float(v)) for t, v in segs))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad vol_segments in {where}: {exc}") from exc
        growth = float(a.get("growth", 0.0))
        try:
            assets.append(Asset(fwd, curve, growth))
        except ValidationError as exc:
            raise SchemaError(f"bad asset in {where}: {exc}") from exc

    corr = _require(data, "correlation", list, "pricing problem")
    disc = _require(data, "discount_factor", float, "pricing problem")
    direction_s = _require(data, "direction", str, "pricing problem")
    if direction_s not in ("call", "put"):
        raise SchemaError("direction must be 'call' or 'put'")
    weights = _require(data, "weights", list, "pricing problem")
    maturity = _require(data, "maturity", float, "pricing problem")
    strike = _require(data, "strike", float, "pricing problem") if "strike" in data else 0.0
    mult_strike = float(data.get("mult_strike", 1.0))

    asian = None
    if data.get("asian") is not None:
        araw = data["asian"]
        if not isinstance(araw, dict):
            raise SchemaError("asian must be an object")
        times = _require(araw, "obs_times", list, "asian")
        aw = _require(araw, "asian_weights", list, "asian")
        fix_raw = araw.get("fixings", [])
        if fix_raw and not isinstance(fix_raw[0], list):
            fix_raw = [[x] for x in fix_raw]  # single-asset shorthand
        try:
            asian = AsianSpec(tuple(times), tuple(aw), tuple(tuple(r) for r in fix_raw))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad asian block: {exc}") from exc

    try:
        model = MarketModel(tuple(assets), np.array(corr, dtype=float), disc)
        instr = BasketSpreadInstrument(
            weights=tuple(float(w) for w in weights),
            maturity=maturity,
            strike=strike,
            mult_strike=mult_strike,
            direction=1 if direction_s == "call" else -1,
            asian=asian,
        )
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc
    if instr.asian is None and len(instr.weights) != len(model.assets):
        raise SchemaError("weights must have one entry per asset")
    return instr, model


def instrument_to_dict(instr: BasketSpreadInstrument, model: MarketModel) -> dict:
    """Inverse of :func:`instrument_from_dict`."""
    out = {
        "assets": [
            {
                "forward": a.forward,
                "vol_segments": [[t, v] for t, v in a.vol.segments],
                "growth": a.growth,
            }
            for a in model.assets
        ],
        "correlation": model.correlation.tolist(),
        "discount_factor": model.discount_factor,
        "weights": list(instr.weights),
        "strike": instr.strike,
        "mult_strike": instr.mult_strike,
        "maturity": instr.maturity,
        "direction": "call" if instr.direction == 1 else "put",
    }
    if instr.asian is not None:
        out["asian"] = {
            "obs_times": list(instr.asian.obs_times),
            "asian_weights": list(instr.asian.weights),
            "fixings": [list(r) for r in instr.asian.fixings],
        }
    return out


def load_pricing_problem(path) -> tuple[BasketSpreadInstrument, MarketModel]:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
    return instrument_from_dict(data)
