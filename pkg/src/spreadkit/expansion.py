"""Correction terms of orders 1-3 on top of the lognormal proxy price.

Each order adds a sum of Black-76 strike derivatives evaluated at shifted
forwards; the shifts are products of the covariance scalars prepared by
:mod:`spreadkit.proxy`.  Double and triple sums over assets are evaluated
in symmetry-reduced form (diagonal plus ordered tuples) which cuts kernel
evaluations roughly by 2 and 6; a naive reference evaluator is kept for
equivalence checking.

Terms of a given order alternate in sign and cancel heavily, so every
term list is totalled with ``math.fsum`` (exactly rounded summation) in a
fixed order, making results deterministic and tolerances reliable.

The module also exposes the closed forms of the measure-change
expectations that the corrections are assembled from (ten of them); each
is a plain Black-76 value times an explicit exponential factor, and each
can be checked against a Monte Carlo estimate of the defining expectation
(see :func:`spreadkit.mc.mc_identity_lhs`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .black76 import black, black_d2k, black_d3k, black_dk
from .errors import ValidationError
from .proxy import ExpansionInputs, price_vg0

__all__ = [
    "TermContribution",
    "OrderedPrice",
    "price_vg1",
    "price_vg2",
    "price_vg3",
    "price_all",
    "identity_values",
    "IDENTITY_LABELS",
    "sum_symmetry_check",
]


@dataclass(frozen=True)
class TermContribution:
    """One labelled summand of a correction order (already scaled by the leg value)."""

    order: int
    label: str
    value: float


@dataclass(frozen=True)
class OrderedPrice:
    """Prices per expansion order plus the term decomposition."""

    vg0: float
    vg1: float
    vg2: float
    vg3: float
    terms: tuple[TermContribution, ...]

    def by_order(self, order: int) -> float:
        return (self.vg0, self.vg1, self.vg2, self.vg3)[order]

    def correction(self, order: int) -> float:
        """Total contribution added at ``order`` (sum of its terms)."""
        return math.fsum(t.value for t in self.terms if t.order == order)


def _kernels(inputs: ExpansionInputs):
    """Strike-derivative kernels as functions of the forward argument only."""
    k, v, t = inputs.kappa_star, inputs.nu2, inputs.maturity
    eta, b = inputs.direction, inputs.discount

    def dk(f):
        return black_dk(f, k, v, t, eta, b)

    def d2k(f):
        return black_d2k(f, k, v, t, eta, b)

    def d3k(f):
        return black_d3k(f, k, v, t, eta, b)

    return dk, d2k, d3k


def _fsum(values) -> float:
    arr = np.asarray(values, dtype=float)
    return math.fsum(arr.ravel().tolist())


# ---------------------------------------------------------------------------
# Symmetric sum evaluators
# ---------------------------------------------------------------------------


def _double_sum(c: np.ndarray, coupling: np.ndarray, x: np.ndarray, kernel) -> float:
    """``sum_{i,j} c_i c_j exp(coupling_ij) kernel(exp(x_i + x_j))`` via symmetry.

    Diagonal plus twice the strict lower triangle.
    """
    m = c.shape[0]
    diag = c * c * np.exp(np.diag(coupling)) * kernel(np.exp(2.0 * x))
    i, j = np.tril_indices(m, -1)
    if i.size:
        off = c[i] * c[j] * np.exp(coupling[i, j]) * kernel(np.exp(x[i] + x[j]))
        return _fsum(diag) + 2.0 * _fsum(off)
    return _fsum(diag)


def _double_sum_naive(c: np.ndarray, coupling: np.ndarray, x: np.ndarray, kernel) -> float:
    vals = np.outer(c, c) * np.exp(coupling) * kernel(np.exp(np.add.outer(x, x)))
    return _fsum(vals)


def _triple_sum(c: np.ndarray, coupling: np.ndarray, x: np.ndarray, kernel) -> float:
    """``sum_{i,j,l} c_i c_j c_l exp(coupling_ij + coupling_il + coupling_jl) *
    kernel(exp(x_i + x_j + x_l))`` via full permutation symmetry.

    Strictly ordered triples count 6 times, pairs with one repeated index 3
    times (both orderings handled by running over ordered pairs twice), and
    the diagonal once.
    """
    m = c.shape[0]
    total = []

    diag = c**3 * np.exp(3.0 * np.diag(coupling)) * kernel(np.exp(3.0 * x))
    total.append(_fsum(diag))

    i, j = np.tril_indices(m, -1)
    if i.size:
        vii = np.diag(coupling)
        # repeated first index (i, i, j) and repeated second (i, j, j)
        rep_i = c[i] ** 2 * c[j] * np.exp(2.0 * coupling[i, j] + vii[i]) * kernel(np.exp(2.0 * x[i] + x[j]))
        rep_j = c[i] * c[j] ** 2 * np.exp(2.0 * coupling[i, j] + vii[j]) * kernel(np.exp(x[i] + 2.0 * x[j]))
        total.append(3.0 * _fsum(rep_i))
        total.append(3.0 * _fsum(rep_j))

    if m >= 3:
        tri = np.array(list(combinations(range(m), 3)))
        ti, tj, tl = tri[:, 0], tri[:, 1], tri[:, 2]
        strict = (
            c[ti]
            * c[tj]
            * c[tl]
            * np.exp(coupling[ti, tj] + coupling[ti, tl] + coupling[tj, tl])
            * kernel(np.exp(x[ti] + x[tj] + x[tl]))
        )
        total.append(6.0 * _fsum(strict))

    return math.fsum(total)


def _triple_sum_naive(c: np.ndarray, coupling: np.ndarray, x: np.ndarray, kernel) -> float:
    m = c.shape[0]
    pair = np.add.outer(x, x)
    vals = []
    for l in range(m):
        arg = np.exp(pair + x[l])
        w = np.outer(c, c) * c[l] * np.exp(coupling + coupling[:, l][:, None] + coupling[l, :][None, :])
        vals.append(_fsum(w * kernel(arg)))
    return math.fsum(vals)


# ---------------------------------------------------------------------------
# Correction terms per order
# ---------------------------------------------------------------------------


def _drift0(inputs: ExpansionInputs) -> float:
    """Log-mean of the proxy ratio (its forward is ``exp(_drift0)``)."""
    return -0.5 * (inputs.nu2_p - inputs.nu2_n - inputs.nu2)


def _order1_terms(inputs: ExpansionInputs) -> list[TermContribution]:
    dk, _, _ = _kernels(inputs)
    ap, ks = inputs.a_p, inputs.kappa_star
    shift = _drift0(inputs) + inputs.vbar
    singles = inputs.a_tilde_star * dk(np.exp(shift))
    return [
        TermContribution(1, "pos_proxy_gain", ap * dk(math.exp(inputs.nu2))),
        TermContribution(1, "neg_proxy_gain", -ks * ap * dk(1.0)),
        TermContribution(1, "asset_replacement", -ap * _fsum(singles)),
    ]


def _order2_terms(inputs: ExpansionInputs) -> list[TermContribution]:
    _, d2k, _ = _kernels(inputs)
    ap, ks = inputs.a_p, inputs.kappa_star
    nu2, nu2n, nu2np = inputs.nu2, inputs.nu2_n, inputs.nu2_np
    ats, vbar, vbneg = inputs.a_tilde_star, inputs.vbar, inputs.vbar_neg

    ratio_shift = nu2n - nu2np + vbar
    t4 = ats * np.exp(ratio_shift) * d2k(np.exp(nu2 + ratio_shift))
    t5 = ats * d2k(np.exp(_drift0(inputs) + vbar))
    pair = _double_sum(
        ats * np.exp(vbneg),
        inputs.cov,
        vbar,
        lambda f: d2k(f * math.exp(2.0 * nu2n - 2.0 * nu2np)),
    )
    return [
        TermContribution(2, "pos_proxy_sq", 0.5 * ap * math.exp(nu2) * d2k(math.exp(2.0 * nu2))),
        TermContribution(2, "neg_proxy_sq", 0.5 * ks * ks * ap * d2k(1.0)),
        TermContribution(2, "cross_proxies", -ks * ap * d2k(math.exp(nu2))),
        TermContribution(2, "asset_times_ratio", -ap * _fsum(t4)),
        TermContribution(2, "asset_times_neg", ks * ap * _fsum(t5)),
        TermContribution(2, "asset_pairs", 0.5 * ap * math.exp(nu2n) * pair),
    ]


def _order3_terms(inputs: ExpansionInputs) -> list[TermContribution]:
    _, _, d3k = _kernels(inputs)
    ap, ks = inputs.a_p, inputs.kappa_star
    nu2, nu2n, nu2np = inputs.nu2, inputs.nu2_n, inputs.nu2_np
    ats, vbar, vbneg = inputs.a_tilde_star, inputs.vbar, inputs.vbar_neg

    ratio_shift = nu2n - nu2np + vbar
    t5 = ats * np.exp(nu2 + 2.0 * ratio_shift) * d3k(np.exp(2.0 * nu2 + ratio_shift))
    t6 = ats * d3k(np.exp(_drift0(inputs) + vbar))
    t7 = ats * np.exp(ratio_shift) * d3k(np.exp(nu2 + ratio_shift))
    pair_ratio = _double_sum(
        ats * np.exp(vbar + vbneg),
        inputs.cov,
        vbar,
        lambda f: d3k(f * math.exp(nu2 + 2.0 * nu2n - 2.0 * nu2np)),
    )
    pair_plain = _double_sum(
        ats * np.exp(vbneg),
        inputs.cov,
        vbar,
        lambda f: d3k(f * math.exp(2.0 * nu2n - 2.0 * nu2np)),
    )
    triple = _triple_sum(
        ats * np.exp(2.0 * vbneg),
        inputs.cov,
        vbar,
        lambda f: d3k(f * math.exp(3.0 * nu2n - 3.0 * nu2np)),
    )
    return [
        TermContribution(3, "pos_proxy_cube", ap / 6.0 * math.exp(3.0 * nu2) * d3k(math.exp(3.0 * nu2))),
        TermContribution(3, "cross_sq_pos", -0.5 * ks * ap * math.exp(nu2) * d3k(math.exp(2.0 * nu2))),
        TermContribution(3, "cross_sq_neg", 0.5 * ks * ks * ap * d3k(math.exp(nu2))),
        TermContribution(3, "neg_proxy_cube", -(ks**3) * ap / 6.0 * d3k(1.0)),
        TermContribution(3, "asset_times_ratio_sq", -0.5 * ap * _fsum(t5)),
        TermContribution(3, "asset_times_neg_sq", -0.5 * ks * ks * ap * _fsum(t6)),
        TermContribution(3, "asset_times_cross", ks * ap * _fsum(t7)),
        TermContribution(3, "asset_pairs_ratio", 0.5 * ap * math.exp(3.0 * nu2n - 2.0 * nu2np) * pair_ratio),
        TermContribution(3, "asset_pairs_plain", -0.5 * ks * ap * math.exp(nu2n) * pair_plain),
        TermContribution(3, "asset_triples", -ap / 6.0 * math.exp(3.0 * nu2n) * triple),
    ]


def price_all(inputs: ExpansionInputs, max_order: int = 3) -> OrderedPrice:
    """Prices for orders 0..``max_order`` with the full term decomposition.

    A deterministic proxy ratio short-circuits to the intrinsic value at
    every order (the derivative kernels have no meaning at zero variance).
    """
    if not 0 <= max_order <= 3:
        raise ValidationError("max_order must be in 0..3")
    vg0 = price_vg0(inputs)
    if inputs.deterministic_ratio or max_order == 0:
        return OrderedPrice(vg0, vg0, vg0, vg0, ())

    terms: list[TermContribution] = []
    prices = [vg0]
    for order, builder in ((1, _order1_terms), (2, _order2_terms), (3, _order3_terms)):
        if order > max_order:
            prices.append(prices[-1])
            continue
        new = builder(inputs)
        terms.extend(new)
        prices.append(prices[-1] + math.fsum(t.value for t in new))
    return OrderedPrice(prices[0], prices[1], prices[2], prices[3], tuple(terms))


def price_vg1(inputs: ExpansionInputs) -> float:
    """Order-1 price."""
    return price_all(inputs, 1).vg1


def price_vg2(inputs: ExpansionInputs) -> float:
    """Order-2 price."""
    return price_all(inputs, 2).vg2


def price_vg3(inputs: ExpansionInputs) -> float:
    """Order-3 price."""
    return price_all(inputs, 3).vg3


# ---------------------------------------------------------------------------
# Measure-change expectation closed forms
# ---------------------------------------------------------------------------

#: integrand of each expectation, in terms of the unit-mean leg proxies
#: ``Gp``/``Gn``, their ratio ``R = Gp/Gn``, normalized assets ``Si``, and the
#: kink function ``h(x) = max(direction * x, 0)`` applied to ``R - kappa_star``;
#: the discount factor multiplies every expectation.
IDENTITY_LABELS: dict[int, str] = {
    1: "Gn h",
    2: "Gp h",
    3: "Si h",
    4: "Gp R h",
    5: "Si R h",
    6: "Si Sj / Gn h",
    7: "Gp R^2 h",
    8: "Si R^2 h",
    9: "Si Sj Gp / Gn^2 h",
    10: "Si Sj Sk / Gn^2 h",
}


def identity_values(
    inputs: ExpansionInputs, indices: tuple[int, int, int] = (0, 0, 0)
) -> dict[int, float]:
    """Closed-form values of the ten building-block expectations.

    ``indices = (i, j, k)`` selects the assets entering the single-, double-
    and triple-asset cases; identities that use fewer indices ignore the
    rest.  Every value is an explicit exponential factor times a Black-76
    price at strike ``kappa_star`` and variance ``nu2``.
    """
    i, j, k = indices
    m = inputs.n_assets
    if not all(0 <= q < m for q in (i, j, k)):
        raise ValidationError("asset index out of range")
    ks, v, t = inputs.kappa_star, inputs.nu2, inputs.maturity
    eta, b = inputs.direction, inputs.discount
    nu2n, nu2np = inputs.nu2_n, inputs.nu2_np
    vbar, vbneg, cov = inputs.vbar, inputs.vbar_neg, inputs.cov

    def bl(forward: float) -> float:
        return black(forward, ks, v, t, eta, b)

    d0 = _drift0(inputs)
    return {
        1: bl(1.0),
        2: bl(math.exp(v)),
        3: bl(math.exp(d0 + vbar[i])),
        4: math.exp(v) * bl(math.exp(2.0 * v)),
        5: math.exp(nu2n - nu2np + vbar[i]) * bl(math.exp(v + nu2n - nu2np + vbar[i])),
        6: math.exp(nu2n + cov[i, j] + vbneg[i] + vbneg[j])
        * bl(math.exp(vbar[i] + vbar[j] - 2.0 * nu2np + 2.0 * nu2n)),
        7: math.exp(3.0 * v) * bl(math.exp(3.0 * v)),
        8: math.exp(v + 2.0 * nu2n - 2.0 * nu2np + 2.0 * vbar[i])
        * bl(math.exp(2.0 * v + nu2n - nu2np + vbar[i])),
        9: math.exp(3.0 * nu2n - 2.0 * nu2np + vbar[i] + vbar[j] + cov[i, j] + vbneg[i] + vbneg[j])
        * bl(math.exp(vbar[i] + vbar[j] + v - 2.0 * nu2np + 2.0 * nu2n)),
        10: math.exp(
            cov[i, j]
            + cov[k, i]
            + cov[k, j]
            + 2.0 * (vbneg[i] + vbneg[j] + vbneg[k])
            + 3.0 * nu2n
        )
        * bl(math.exp(vbar[i] + vbar[j] + vbar[k] - 3.0 * nu2np + 3.0 * nu2n)),
    }


# ---------------------------------------------------------------------------
# Symmetry equivalence
# ---------------------------------------------------------------------------


def sum_symmetry_check(inputs: ExpansionInputs, tol: float = 1e-12) -> bool:
    """Compare reduced against naive double/triple sums on this instance.

    Uses the actual order-2 pair sum and order-3 triple sum data.  Intended
    for moderate sizes (the naive triple sum is cubic).
    """
    if inputs.deterministic_ratio:
        return True
    _, d2k, d3k = _kernels(inputs)
    ats, vbar, vbneg = inputs.a_tilde_star, inputs.vbar, inputs.vbar_neg
    scale = math.exp(2.0 * inputs.nu2_n - 2.0 * inputs.nu2_np)

    c2 = ats * np.exp(vbneg)
    kern2 = lambda f: d2k(f * scale)
    pair_fast = _double_sum(c2, inputs.cov, vbar, kern2)
    pair_slow = _double_sum_naive(c2, inputs.cov, vbar, kern2)

    c3 = ats * np.exp(2.0 * vbneg)
    scale3 = math.exp(3.0 * inputs.nu2_n - 3.0 * inputs.nu2_np)
    kern3 = lambda f: d3k(f * scale3)
    trip_fast = _triple_sum(c3, inputs.cov, vbar, kern3)
    trip_slow = _triple_sum_naive(c3, inputs.cov, vbar, kern3)

    def close(x: float, y: float) -> bool:
        return abs(x - y) <= tol * max(1.0, abs(x), abs(y))

    return close(pair_fast, pair_slow) and close(trip_fast, trip_slow)
