"""One-call pricing front end tying the pipeline together.

``price`` runs fixings, reductions, strike folding and the expansion, and
also resolves the degenerate payoffs (fully fixed schedules, one-sided
spreads, zero overall variance) that the expansion formulas deliberately
do not cover.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .expansion import OrderedPrice, TermContribution, price_all
from .market import (
    BasketSpreadInstrument,
    MarketModel,
    ReducedMarket,
    apply_fixings,
    prepare,
)
from .proxy import build_inputs

__all__ = ["PriceResult", "price", "basket_skewness"]


@dataclass(frozen=True)
class PriceResult:
    """Prices per order with the term decomposition and proxy diagnostics.

    ``kappa_star``/``nu2`` are the effective strike and total variance of
    the proxy ratio; ``skewness`` is the lognormal-basket skewness of the
    payoff's stochastic part (None when it is deterministic).
    """

    orders: OrderedPrice
    proxy: str
    kappa_star: float
    nu2: float
    skewness: float | None

    @property
    def vg0(self) -> float:
        return self.orders.vg0

    @property
    def vg1(self) -> float:
        return self.orders.vg1

    @property
    def vg2(self) -> float:
        return self.orders.vg2

    @property
    def vg3(self) -> float:
        return self.orders.vg3

    @property
    def terms(self) -> tuple[TermContribution, ...]:
        return self.orders.terms


def basket_skewness(weights, market: ReducedMarket) -> float:
    """Skewness of ``sum_i w_i S_i(T)`` under the joint lognormal model.

    Closed form from the lognormal moments ``E[S_i S_j] = F_i F_j e^{v_ij}``
    and ``E[S_i S_j S_k] = F_i F_j F_k e^{v_ij + v_ik + v_jk}``.  Raises for
    a zero-variance basket.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape[0] != market.n_assets:
        raise ValidationError("weights must match the market")
    wf = w * market.forwards
    v = market.covariance.entries
    ev = np.exp(v)
    mean = float(wf.sum())
    second = float(wf @ ev @ wf)
    var = second - mean * mean
    if var <= 0.0:
        raise ValidationError("basket variance is zero; skewness undefined")
    third = 0.0
    for k in range(w.shape[0]):
        third += wf[k] * float(wf @ (ev * np.outer(ev[:, k], ev[k, :])) @ wf)
    central3 = third - 3.0 * second * mean + 2.0 * mean**3
    return central3 / var**1.5


def _flat_result(value: float, proxy: str, kappa_star: float = 0.0) -> PriceResult:
    orders = OrderedPrice(value, value, value, value, ())
    return PriceResult(orders, proxy, kappa_star, 0.0, None)


def price(
    instr: BasketSpreadInstrument,
    model: MarketModel,
    proxy: str = "geometric",
    max_order: int = 3,
) -> PriceResult:
    """Price an instrument end to end.

    Degenerate cases resolved here rather than in the expansion:

    * fully fixed schedule: discounted intrinsic on the known value;
    * no negative-leg component left (after folding and scaling): the payoff
      is one-sided, worth the discounted positive leg for a call and 0 for
      a put;
    * deterministic proxy ratio: intrinsic at every order (inside
      ``price_all``).
    """
    eta = instr.direction
    b = model.discount_factor

    if instr.asian is not None:
        stripped, _ = apply_fixings(instr, model)
        if stripped.asian is None:  # everything known: payoff is a constant
            value = b * max(eta * (0.0 - stripped.strike), 0.0)
            return _flat_result(value, proxy)

    folded, market = prepare(instr, model)
    weights = np.asarray(folded.weights)
    if not np.any(weights < 0):
        # one-sided payoff: E[max(eta * positive_leg, 0)] is the forward leg value
        a_p = float((weights * market.forwards).sum())
        value = b * a_p if eta > 0 else 0.0
        return _flat_result(value, proxy)

    inputs = build_inputs(folded, market, proxy)
    orders = price_all(inputs, max_order)
    try:
        mu3 = basket_skewness(folded.weights, market)
    except ValidationError:
        mu3 = None
    return PriceResult(orders, proxy, inputs.kappa_star, inputs.nu2, mu3)
