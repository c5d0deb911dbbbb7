"""Closed-form pricing of Asian basket spread options with a Monte Carlo oracle.

The library reduces averaging and spread payoffs to one canonical basket
form, prices it with a lognormal proxy plus correction terms of orders
1-3 built from Black-76 strike derivatives, and ships a counter-based
Monte Carlo reference pricer plus a table harness for validation.
"""

from .api import PriceResult, basket_skewness, price
from .black76 import black, black_d2k, black_d3k, black_dk, norm_cdf, norm_pdf
from .errors import InfeasibleError, SchemaError, ValidationError
from .expansion import (
    IDENTITY_LABELS,
    OrderedPrice,
    TermContribution,
    identity_values,
    price_all,
    price_vg1,
    price_vg2,
    price_vg3,
    sum_symmetry_check,
)
from .market import (
    Asset,
    AsianSpec,
    BasketSpreadInstrument,
    CovarianceMatrix,
    MarketModel,
    ReducedMarket,
    VolCurve,
    absorb_mult_strike,
    apply_fixings,
    canonical_covariance,
    fold_strike,
    instrument_from_dict,
    instrument_to_dict,
    load_pricing_problem,
    prepare,
    reduce_asian,
    reduce_asian_basket,
    reduce_market,
)
from .harness import (
    ErrorStats,
    IdentityCheck,
    IdentityReport,
    TableReport,
    TableSpec,
    case_instrument,
    case_skewness,
    list_cases,
    load_case,
    printed_column_stats,
    random_spread_instance,
    run_identity_suite,
    run_table,
)
from .mc import McConfig, McResult, mc_identity_lhs, mc_identity_suite, mc_price, mc_price_asian_raw
from .proxy import ExpansionInputs, build_inputs, price_vg0

__version__ = "0.1.0"

__all__ = [
    "Asset",
    "AsianSpec",
    "BasketSpreadInstrument",
    "CovarianceMatrix",
    "ErrorStats",
    "ExpansionInputs",
    "IDENTITY_LABELS",
    "IdentityCheck",
    "IdentityReport",
    "InfeasibleError",
    "MarketModel",
    "McConfig",
    "McResult",
    "OrderedPrice",
    "PriceResult",
    "ReducedMarket",
    "SchemaError",
    "TableReport",
    "TableSpec",
    "TermContribution",
    "ValidationError",
    "VolCurve",
    "absorb_mult_strike",
    "apply_fixings",
    "basket_skewness",
    "black",
    "black_d2k",
    "black_d3k",
    "black_dk",
    "build_inputs",
    "canonical_covariance",
    "case_instrument",
    "case_skewness",
    "fold_strike",
    "identity_values",
    "instrument_from_dict",
    "instrument_to_dict",
    "list_cases",
    "load_case",
    "load_pricing_problem",
    "mc_identity_lhs",
    "mc_identity_suite",
    "mc_price",
    "mc_price_asian_raw",
    "norm_cdf",
    "norm_pdf",
    "prepare",
    "price",
    "price_all",
    "price_vg0",
    "price_vg1",
    "price_vg2",
    "price_vg3",
    "printed_column_stats",
    "random_spread_instance",
    "reduce_asian",
    "reduce_asian_basket",
    "reduce_market",
    "run_identity_suite",
    "run_table",
    "sum_symmetry_check",
]
