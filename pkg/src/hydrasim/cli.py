"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 scenario violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import analytics, ledger, montecarlo, reference, scenario
from .accounts import dump_balances_csv
from .errors import ConvergenceFailure

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_SCENARIO = 0, 1, 2, 3


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _attacker_share(text: str) -> float:
    q = float(text)
    if not 0 < q < 0.5:
        raise argparse.ArgumentTypeError(f"q must satisfy 0 < q < 0.5, got {text}")
    return q


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _numerics(args) -> analytics.NumericsConfig:
    return analytics.NumericsConfig(quad_rel_tol=args.tol_rel, quad_abs_tol=args.tol_abs)


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)


def cmd_analytic(args) -> int:
    params = analytics.AttackParams(args.q, args.N, args.w, args.t0)
    fn = analytics.attack_probability_composed if args.composed else analytics.attack_probability
    result = fn(params, _numerics(args))
    payload = {"q": args.q, "N": args.N, "w": args.w, "t0": args.t0,
               "probability": result.probability, "error_bound": result.error_bound}
    _emit(args, payload, f"P[take-over] = {result.probability:.4f}  (error bound {result.error_bound:.1e})")
    return EXIT_OK


def table1_cells(t0: float, cfg: analytics.NumericsConfig, n_chains: int = 32):
    for q in reference.QS:
        for w in reference.WS:
            params = analytics.AttackParams(q, n_chains, w, t0)
            try:
                result = analytics.attack_probability(params, cfg)
                yield q, w, result.probability, result.error_bound, None
            except ConvergenceFailure as exc:
                yield q, w, None, None, str(exc)


def cmd_table1(args) -> int:
    cells = []
    for q, w, prob, bound, error in table1_cells(args.t0, _numerics(args)):
        cell = {"q": q, "w": w, "probability": prob, "error_bound": bound,
                "published": reference.published(q, w), "bitcoin": reference.published(q, w, reference.BITCOIN)}
        if error:
            cell["error"] = error
        note = reference.SUSPECT_CELLS.get((q, w))
        if note:
            cell["note"] = note
            if args.trials:
                sim = montecarlo.simulate_attack(montecarlo.SimConfig(
                    analytics.AttackParams(q, 32, w, args.t0), args.trials, args.seed))
                cell["simulated"] = sim.point_estimate
                cell["simulated_std_error"] = sim.std_error
        cells.append(cell)

    if args.json:
        print(json.dumps({"N": 32, "cells": cells}, indent=2))
    else:
        header = "q    source    " + " ".join(f"{'w=' + str(w):>7}" for w in reference.WS)
        lines = [header, "-" * len(header)]
        by_q = {}
        for c in cells:
            by_q.setdefault(c["q"], []).append(c)
        for q, row in by_q.items():
            fmt = lambda v: f"{v:7.4f}" if v is not None else "    ERR"
            lines.append(f"{q:<5} bitcoin  " + " ".join(fmt(c["bitcoin"]) for c in row))
            lines.append(f"{'':<5} published" + " ".join(fmt(c["published"]) for c in row))
            lines.append(f"{'':<5} computed " + " ".join(fmt(c["probability"]) for c in row))
        for c in cells:
            if "note" in c:
                line = f"* q={c['q']}, w={c['w']}: computed {c['probability']:.4f}; {c['note']}"
                if "simulated" in c:
                    line += f"; simulation gives {c['simulated']:.4f} +/- {c['simulated_std_error']:.4f}"
                lines.append(line)
            if "error" in c:
                lines.append(f"! q={c['q']}, w={c['w']}: {c['error']}")
        print("\n".join(lines))
    return EXIT_NUMERIC if any("error" in c for c in cells) else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _numerics(args)
    rows, status = [], EXIT_OK
    for q in args.q:
        for n in args.N:
            for w in args.w:
                try:
                    r = analytics.attack_probability(analytics.AttackParams(q, n, w, args.t0), cfg)
                    rows.append({"q": q, "N": n, "w": w, "probability": r.probability, "error_bound": r.error_bound})
                except ConvergenceFailure as exc:
                    print(f"q={q} N={n} w={w}: {exc}", file=sys.stderr)
                    status = EXIT_NUMERIC
    if args.json:
        print(json.dumps({"cells": rows}, indent=2))
        return status
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["q", "N", "w", "probability", "error_bound"])
    for r in rows:
        writer.writerow([r["q"], r["N"], r["w"], f"{r['probability']:.10g}", f"{r['error_bound']:.3g}"])
    return status


def cmd_montecarlo(args) -> int:
    params = analytics.AttackParams(args.q, args.N, args.w, args.t0)
    result = montecarlo.simulate_attack(montecarlo.SimConfig(params, args.trials, args.seed, args.cutoff))
    payload = {"q": args.q, "N": args.N, "w": args.w, "trials": result.trials, "successes": result.successes,
               "probability": result.point_estimate, "std_error": result.std_error}
    _emit(args, payload, f"P[take-over] ~ {result.point_estimate:.4f} +/- {result.std_error:.4f} "
                         f"({result.successes}/{result.trials})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        with open(args.scenario) as fp:
            sc = scenario.load(fp)
    except (OSError, scenario.ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.delta is not None:
        sc.lag = args.delta
    if args.seed is not None:
        sc.seed = args.seed
    status = EXIT_OK
    try:
        state, report = scenario.replay(sc)
    except scenario.ScenarioViolation as exc:
        print(f"scenario violation: {exc}", file=sys.stderr)
        report, state, status = exc.report, None, EXIT_SCENARIO
    _emit(args, report, scenario.format_report(report))
    if state is not None and args.export:
        with open(args.export, "w") as fp:
            ledger.dump(state.chains, fp)
    if state is not None and args.balances:
        with open(args.balances, "w") as fp:
            dump_balances_csv(state.tree, fp)
    return status


def cmd_throughput(args) -> int:
    tps = analytics.throughput_estimate(args.block_size, args.tx_size, args.interval)
    payload = {"block_size": args.block_size, "tx_size": args.tx_size, "interval": args.interval, "tps": tps}
    _emit(args, payload, f"{tps:.2f} tps")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="hydrasim", description="Multi-chain ledger simulator and double-spend calculator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    def numeric(p):
        p.add_argument("--t0", type=_positive_float, default=analytics.DEFAULT_T0, help="expected block interval")
        p.add_argument("--tol-rel", type=_positive_float, default=analytics.DEFAULT_NUMERICS.quad_rel_tol)
        p.add_argument("--tol-abs", type=_positive_float, default=analytics.DEFAULT_NUMERICS.quad_abs_tol)
        p.add_argument("--json", action="store_true")

    def attack(p):
        p.add_argument("-q", type=_attacker_share, required=True, help="attacker share of mining power")
        p.add_argument("-N", type=_positive_int, required=True, help="number of chains")
        p.add_argument("-w", type=_positive_int, required=True, help="tipping point in blocks per chain")

    p = sub.add_parser("analytic", help="take-over probability from the integral")
    attack(p)
    numeric(p)
    p.add_argument("--composed", action="store_true", help="use the unsimplified composition")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("table1", help="N=32 grid next to the published and Bitcoin values")
    numeric(p)
    p.add_argument("--trials", type=int, default=20_000, help="simulation trials for flagged cells (0 skips)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("sweep", help="CSV of probabilities over a parameter grid")
    p.add_argument("-q", type=lambda s: [_attacker_share(x) for x in s.split(",")], required=True)
    p.add_argument("-N", type=_int_list, required=True)
    p.add_argument("-w", type=_int_list, required=True)
    numeric(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("montecarlo", help="simulated take-over frequency")
    attack(p)
    p.add_argument("--t0", type=_positive_float, default=analytics.DEFAULT_T0)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cutoff", type=_positive_int, default=montecarlo.DEFAULT_CUTOFF)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("simulate", help="replay a protocol scenario file")
    p.add_argument("scenario")
    p.add_argument("--delta", type=_positive_int, help="override the scenario's lag")
    p.add_argument("--seed", type=int)
    p.add_argument("--export", help="write chain records to this file")
    p.add_argument("--balances", help="write account balances CSV to this file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("throughput", help="transactions per second for a block size and interval")
    p.add_argument("--block-size", type=_positive_float, default=1_000_000, help="bytes")
    p.add_argument("--tx-size", type=_positive_float, default=240, help="bytes")
    p.add_argument("--interval", type=_positive_float, default=18, help="seconds")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_throughput)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
