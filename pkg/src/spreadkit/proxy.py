"""Lognormal proxy for the two legs of a spread and the scalars it induces.

Each leg's arithmetic, forward-weighted average is replaced by a geometric
average of the normalized assets, rescaled to unit mean.  The ratio of the
two proxies is lognormal, so the leading-order price is a single Black-76
call on that ratio; every higher-order correction consumes only the
scalars assembled here.

Two exponent choices are supported:

* ``geometric``: exponents equal the forward weights (mean matched per leg
  through the unit-mean rescaling).
* ``levy``: exponents rescaled per leg so the log-variance of the proxy
  matches the exact second moment of the arithmetic average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .black76 import black
from .errors import InfeasibleError, ValidationError
from .market import BasketSpreadInstrument, ReducedMarket

__all__ = ["ExpansionInputs", "build_inputs", "price_vg0"]

#: tolerance for the leg-variance decomposition identity check at build time
_DECOMP_TOL = 1e-12


@dataclass(frozen=True)
class ExpansionInputs:
    """Precomputed scalars feeding the order-0..3 pricing formulas.

    Index conventions: ``pos``/``neg`` are index arrays of the positively and
    negatively weighted assets.  Exponents ``a`` are signed (negative on the
    negative leg) so that mixed sums like ``vbar = cov @ a`` need no
    case-splitting.  ``a_tilde_star`` equals ``a_tilde`` on the positive leg
    and ``kappa_star * a_tilde`` on the negative leg.
    """

    a_p: float
    a_n: float
    kappa_star: float
    pos: np.ndarray
    neg: np.ndarray
    a_tilde: np.ndarray
    a_tilde_star: np.ndarray
    a: np.ndarray
    nu2: float
    nu2_p: float
    nu2_n: float
    nu2_np: float
    vbar: np.ndarray
    vbar_neg: np.ndarray
    cov: np.ndarray
    log_alpha: float
    log_beta: float
    maturity: float
    direction: int
    discount: float
    proxy: str

    @property
    def n_assets(self) -> int:
        return self.a.shape[0]

    @property
    def deterministic_ratio(self) -> bool:
        """True when the proxy ratio carries no variance (intrinsic pricing)."""
        return self.nu2 == 0.0


def _leg_scale(a_tilde: np.ndarray, cov: np.ndarray, idx: np.ndarray) -> float:
    """Levy rescaling factor for one leg: matched log-vol over geometric log-vol.

    The matched variance is ``log E[A^2] / E[A]^2`` of the leg's unit-mean
    arithmetic average.  Returns 1 for a zero-variance leg (both variances
    vanish; the geometric proxy is already exact there).
    """
    w = a_tilde[idx]
    sub = cov[np.ix_(idx, idx)]
    geo2 = float(w @ sub @ w)
    second_moment = float(np.abs(w) @ np.exp(sub) @ np.abs(w))
    if second_moment <= 0.0:
        raise InfeasibleError("levy moment matching infeasible: nonpositive second moment")
    matched2 = math.log(second_moment)
    if geo2 <= 0.0:
        return 1.0
    if matched2 < 0.0:
        # E[A^2] >= E[A]^2 = 1, so only roundoff can land here
        matched2 = 0.0
    return math.sqrt(matched2 / geo2)


def build_inputs(
    instr: BasketSpreadInstrument,
    market: ReducedMarket,
    proxy: str = "geometric",
) -> ExpansionInputs:
    """Assemble all expansion scalars from a folded instrument.

    Requires a folded instrument (additive strike 0, ``mult_strike`` 1) with
    at least one asset in each leg; the one-sided case has a deterministic
    leg equal to zero and is priced directly by the caller.
    """
    if proxy not in ("geometric", "levy"):
        raise ValidationError(f"unknown proxy kind {proxy!r}")
    if instr.strike != 0.0 or instr.mult_strike != 1.0 or instr.asian is not None:
        raise ValidationError("instrument must be reduced and folded first")
    weights = np.asarray(instr.weights)
    if weights.shape[0] != market.n_assets:
        raise ValidationError("instrument weights must match the market")
    pos = np.flatnonzero(weights > 0)
    neg = np.flatnonzero(weights < 0)
    if pos.size == 0:
        raise ValidationError("degenerate positive leg: no positively-weighted component")
    if neg.size == 0:
        raise ValidationError("negative leg is empty; price the one-sided case directly")

    forwards = market.forwards
    cov = market.covariance.entries
    wf = weights * forwards
    a_p = float(wf[pos].sum())
    a_n = float(-wf[neg].sum())
    if a_p <= 0 or a_n <= 0:
        raise ValidationError("leg expectations must be positive")
    kappa_star = a_n / a_p

    a_tilde = np.empty_like(wf)
    a_tilde[pos] = wf[pos] / a_p
    a_tilde[neg] = wf[neg] / a_n
    a_tilde_star = a_tilde.copy()
    a_tilde_star[neg] *= kappa_star

    a = a_tilde.copy()
    if proxy == "levy":
        a[pos] *= _leg_scale(a_tilde, cov, pos)
        a[neg] *= _leg_scale(a_tilde, cov, neg)

    nu2_p = float(a[pos] @ cov[np.ix_(pos, pos)] @ a[pos])
    nu2_n = float(a[neg] @ cov[np.ix_(neg, neg)] @ a[neg])
    nu2_np = float(-a[neg] @ cov[np.ix_(neg, pos)] @ a[pos])
    nu2 = float(a @ cov @ a)
    if abs(nu2 - (nu2_p + nu2_n - 2.0 * nu2_np)) > _DECOMP_TOL * max(1.0, nu2):
        raise ValidationError("leg variance decomposition violated beyond tolerance")
    nu2 = max(nu2, 0.0)

    variances = np.diag(cov)
    vbar = cov @ a
    vbar_neg = cov[:, neg] @ a[neg]
    log_alpha = 0.5 * float(a[pos] @ variances[pos]) - 0.5 * nu2_p
    log_beta = 0.5 * float(-a[neg] @ variances[neg]) - 0.5 * nu2_n

    def ro(x: np.ndarray) -> np.ndarray:
        x.setflags(write=False)
        return x

    return ExpansionInputs(
        a_p=a_p,
        a_n=a_n,
        kappa_star=kappa_star,
        pos=ro(pos),
        neg=ro(neg),
        a_tilde=ro(a_tilde),
        a_tilde_star=ro(a_tilde_star),
        a=ro(a),
        nu2=nu2,
        nu2_p=nu2_p,
        nu2_n=nu2_n,
        nu2_np=nu2_np,
        vbar=ro(vbar),
        vbar_neg=ro(vbar_neg),
        cov=cov,
        log_alpha=log_alpha,
        log_beta=log_beta,
        maturity=instr.maturity,
        direction=instr.direction,
        discount=market.discount_factor,
        proxy=proxy,
    )


def price_vg0(inputs: ExpansionInputs) -> float:
    """Order-0 price: Black-76 on the unit-forward proxy ratio.

    ``a_p * Black(1, kappa_star, nu2, T)``; degrades to the discounted
    intrinsic value when the ratio is deterministic.
    """
    return inputs.a_p * black(
        1.0,
        inputs.kappa_star,
        inputs.nu2,
        inputs.maturity,
        inputs.direction,
        inputs.discount,
    )
