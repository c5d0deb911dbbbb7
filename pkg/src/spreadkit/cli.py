"""Command-line front end.

Subcommands:

* ``price``    price one instrument from a JSON problem file;
* ``tables``   reproduce the bundled validation tables, write reports;
* ``validate`` check the closed-form expectations against Monte Carlo.

Exit codes: 0 success / all checks pass, 1 tolerance breach, 2 bad input
or configuration, 3 numerical infeasibility.  Output is byte-deterministic
for fixed inputs, flags and seed.  ``SPREADKIT_THREADS`` caps the worker
threads used to run table cases concurrently.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .api import price
from .errors import InfeasibleError, SchemaError, ValidationError
from .harness import list_cases, load_case, run_identity_suite, run_table
from .market import load_pricing_problem, prepare
from .mc import McConfig, mc_price

EXIT_OK = 0
EXIT_BREACH = 1
EXIT_BAD_INPUT = 2
EXIT_INFEASIBLE = 3


def _thread_cap() -> int:
    raw = os.environ.get("SPREADKIT_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return min(4, os.cpu_count() or 1)
    return max(1, n)


def _mc_config(args, default_paths: int = 4_000_000) -> McConfig:
    paths = args.paths if args.paths is not None else default_paths
    return McConfig(paths=paths, seed=args.seed, antithetic=True, batches=args.batches)


# ---------------------------------------------------------------------------
# price
# ---------------------------------------------------------------------------


def _cmd_price(args) -> int:
    instr, model = load_pricing_problem(args.input)
    max_order = 3 if args.order == "all" else int(args.order)
    result = price(instr, model, proxy=args.proxy, max_order=max_order)

    doc = {
        "proxy": args.proxy,
        "order": args.order,
        "prices": {f"vg{k}": result.orders.by_order(k) for k in range(max_order + 1)},
        "kappa_star": result.kappa_star,
        "nu2": result.nu2,
        "skewness": result.skewness,
        "terms": [
            {"order": t.order, "label": t.label, "value": t.value}
            for t in result.terms
            if t.order <= max_order
        ],
    }
    if args.mc:
        folded, market = prepare(instr, model)
        res = mc_price(folded, market, _mc_config(args))
        doc["mc"] = {"price": res.price, "std_error": res.std_error, "paths": res.paths_used}
    print(json.dumps(doc, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


def _cmd_tables(args) -> int:
    if not args.all and args.case is None:
        print("tables: give --case ID or --all", file=sys.stderr)
        return EXIT_BAD_INPUT
    case_ids = list_cases() if args.all else [args.case]
    try:
        specs = [load_case(cid) for cid in case_ids]
    except ValidationError as exc:
        print(f"tables: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT

    mc_config = _mc_config(args) if args.oracle == "mc" else None

    def run(spec):
        return run_table(spec, oracle=args.oracle, proxy=args.proxy, mc_config=mc_config)

    if len(specs) > 1:
        with ThreadPoolExecutor(max_workers=min(_thread_cap(), len(specs))) as pool:
            reports = list(pool.map(run, specs))
    else:
        reports = [run(specs[0])]
    reports.sort(key=lambda r: r.case_id)

    all_pass = True
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        if rep.oracle == "paper" and not rep.body_reliable:
            status = "SKIP (printed body unreliable; use --oracle mc)"
        note = f"vg3 rmse {rep.stats['vg3'].rmse:.{rep.decimals}f}"
        print(f"{rep.case_id:11s} oracle={rep.oracle:5s} {note}  {status}")
        for breach in rep.breaches:
            print(f"    breach: {breach}")
        all_pass = all_pass and rep.passed
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            base = os.path.join(args.out, rep.case_id)
            with open(base + ".csv", "w") as fh:
                fh.write(rep.to_csv())
            with open(base + ".json", "w") as fh:
                json.dump(rep.to_json_dict(), fh, indent=2)
                fh.write("\n")
    return EXIT_OK if all_pass else EXIT_BREACH


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    report = run_identity_suite(
        seed=args.seed,
        paths=args.paths if args.paths is not None else 4_000_000,
        instances=args.instances,
        full=args.full,
    )
    n_pass = 0
    by_id = report.by_identity()
    for identity_id in sorted(by_id):
        checks = by_id[identity_id]
        worst = max(checks, key=lambda c: c.deviation)
        ok = all(c.passed for c in checks)
        n_pass += ok
        print(
            f"identity {identity_id:2d} [{worst.label:20s}] "
            f"checks={len(checks):2d} worst |mc-closed|/se={worst.deviation:5.2f}  "
            f"{'PASS' if ok else 'FAIL'}"
        )
    print(f"identities passed: {n_pass}/{len(by_id)}")
    return EXIT_OK if report.passed else EXIT_BREACH


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spreadkit",
        description="Closed-form Asian basket spread option pricing with Monte Carlo validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price an instrument from a JSON problem file")
    p.add_argument("--input", required=True, help="pricing problem JSON file")
    p.add_argument("--order", choices=["0", "1", "2", "3", "all"], default="all")
    p.add_argument("--proxy", choices=["geometric", "levy"], default="geometric")
    p.add_argument("--mc", action="store_true", help="also run the Monte Carlo oracle")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=32)
    p.set_defaults(func=_cmd_price)

    p = sub.add_parser("tables", help="reproduce the bundled validation tables")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--case", help="single case id (see --all for the list)")
    group.add_argument("--all", action="store_true", help="run every bundled case")
    p.add_argument("--oracle", choices=["paper", "mc"], default="paper")
    p.add_argument("--proxy", choices=["geometric", "levy"], default="geometric")
    p.add_argument("--out", help="directory for CSV/JSON reports")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batches", type=int, default=32)
    p.set_defaults(func=_cmd_tables)

    p = sub.add_parser("validate", help="check closed-form expectations against Monte Carlo")
    p.add_argument("--identities", action="store_true", help="run the identity suite (default)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--instances", type=int, default=3)
    p.add_argument("--full", action="store_true", help="sweep every asset index combination")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except InfeasibleError as exc:
        print(f"numerical infeasibility: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
