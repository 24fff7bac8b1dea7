"""Command-line interface.

Subcommands: verify (fixed radius), search (certified-radius binary search),
volume-bench (Activation+MaxPool block volumes) and check-soundness (search
followed by sampling falsification at the certified radius).

Reports go to --out or stdout; diagnostics go to stderr only. When a report
path is given, a companion .png figure is rendered next to it for the search
and volume-bench commands.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

from . import __version__, report as report_mod
from .certify import DEFAULT_EPS0, batch_certify, binary_search, verify_at
from .model import ModelFormatError, load_model, load_queries
from .oracle import DEFAULT_VOLUME_TRIALS, falsify, volume_benchmark
from .pooling import PoolRule

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_ERROR = 2

_NORMS = {"1": 1.0, "2": 2.0, "inf": math.inf}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poolcert",
                                     description="certified-robustness verifier for "
                                                 "small MaxPool networks")
    parser.add_argument("--version", action="version", version=f"poolcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("--model", required=True, help="model manifest (JSON)")
            p.add_argument("--inputs", required=True,
                           help="query file (JSON or CSV with trailing label)")
            p.add_argument("--norm", choices=sorted(_NORMS), default="inf")
            p.add_argument("--maxpool-rule", choices=[r.value for r in PoolRule],
                           default=PoolRule.MAXLIN.value)
            p.add_argument("--unsafe-slack", type=float, default=0.0,
                           help="test-only fault injection: shifts final lower "
                                "bounds up by this amount, breaking soundness")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("verify", help="fixed-radius verification")
    common(p)
    p.add_argument("--eps", type=float, required=True)

    p = sub.add_parser("search", help="binary search for the certified radius")
    common(p)
    p.add_argument("--eps0", type=float, default=DEFAULT_EPS0,
                   help="initial search radius")
    p.add_argument("--search", action="store_true",
                   help="explicit search-mode marker (the default for this command)")

    p = sub.add_parser("volume-bench", help="Activation+MaxPool block volume benchmark")
    common(p, model=False)
    p.add_argument("--trials", type=int, default=DEFAULT_VOLUME_TRIALS)
    p.add_argument("--window", type=int, default=4, help="pool window size")

    p = sub.add_parser("check-soundness",
                       help="search, then falsify at the certified radius")
    common(p)
    p.add_argument("--eps0", type=float, default=DEFAULT_EPS0)
    p.add_argument("--samples", type=int, default=10_000)

    return parser


def _emit(args, report: dict, figure_fn=None) -> None:
    if args.format == "csv":
        payload = report_mod.report_to_csv(report)
    else:
        payload = report_mod.report_to_json(report)
    if args.out:
        Path(args.out).write_text(payload)
        if figure_fn is not None:
            from . import plotting
            figure_fn(plotting.figure_path_for(args.out))
    else:
        sys.stdout.write(payload)


def _base_config(args, **extra) -> dict:
    config = {"seed": args.seed, "workers": args.workers, "format": args.format}
    for name in ("model", "inputs", "norm", "maxpool_rule", "unsafe_slack"):
        if hasattr(args, name):
            config[name] = getattr(args, name)
    config.update(extra)
    return config


def cmd_verify(args) -> int:
    start = time.perf_counter()
    net = load_model(args.model)
    queries = load_queries(args.inputs, _NORMS[args.norm], eps=args.eps)
    rule = PoolRule(args.maxpool_rule)
    records = []
    all_certified = True
    for i, query in enumerate(queries):
        verdict = verify_at(net, query, rule, unsafe_slack=args.unsafe_slack)
        _log(f"query {i}: {verdict.verdict} (margin {verdict.margin:.6g})")
        records.append(report_mod.verify_query_record(i, query.label, verdict))
        all_certified &= verdict.certified
    report = report_mod.build_report("verify", _base_config(args, eps=args.eps),
                                     records, None, time.perf_counter() - start)
    _emit(args, report)
    return EXIT_OK if all_certified else EXIT_NOT_CERTIFIED


def cmd_search(args) -> int:
    start = time.perf_counter()
    net = load_model(args.model)
    queries = load_queries(args.inputs, _NORMS[args.norm])
    rule = PoolRule(args.maxpool_rule)
    results, aggregates = batch_certify(net, queries, rule, workers=args.workers,
                                        eps0=args.eps0, unsafe_slack=args.unsafe_slack)
    records = []
    for i, (query, result) in enumerate(zip(queries, results)):
        note = "misclassified center" if result.misclassified else \
            f"radius {result.certified_radius:.6g}"
        _log(f"query {i}: {note} ({result.wall_time:.3f}s)")
        records.append(report_mod.search_query_record(i, query.label, result))
    report = report_mod.build_report("search", _base_config(args, eps0=args.eps0),
                                     records, aggregates, time.perf_counter() - start)
    _emit(args, report, figure_fn=lambda p: _radius_figure(report, p))
    return EXIT_OK


def _radius_figure(report, path):
    from . import plotting
    plotting.save_radius_figure(report, path)
    _log(f"figure written to {path}")


def cmd_volume_bench(args) -> int:
    reports = volume_benchmark(trials=args.trials, seed=args.seed, window=args.window)
    for r in reports:
        _log(f"{r.activation:>14s} {r.rule.value:<9s} mean volume {r.mean_volume:.6g}")
    payload = report_mod.volume_report_to_csv(reports)
    if args.out:
        Path(args.out).write_text(payload)
        from . import plotting
        figure = plotting.save_volume_figure(reports, plotting.figure_path_for(args.out))
        _log(f"figure written to {figure}")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def cmd_check_soundness(args) -> int:
    start = time.perf_counter()
    net = load_model(args.model)
    queries = load_queries(args.inputs, _NORMS[args.norm])
    rule = PoolRule(args.maxpool_rule)
    records = []
    total_violations = 0
    for i, query in enumerate(queries):
        result = binary_search(net, query, rule, eps0=args.eps0,
                               unsafe_slack=args.unsafe_slack)
        record = report_mod.search_query_record(i, query.label, result)
        if result.misclassified:
            # no certificate was issued, so there is nothing to falsify
            _log(f"query {i}: misclassified center, nothing to falsify")
            record["violations"] = 0
            record["samples"] = 0
        else:
            fals = falsify(net, query, result.certified_radius,
                           samples=args.samples, seed=args.seed + i)
            total_violations += fals.violations
            _log(f"query {i}: radius {result.certified_radius:.6g}, "
                 f"{fals.violations} violations / {fals.samples_drawn} samples")
            record["violations"] = fals.violations
            record["samples"] = fals.samples_drawn
            if fals.violations:
                record["witnesses"] = fals.witnesses.tolist()
        records.append(record)
    report = report_mod.build_report(
        "check-soundness", _base_config(args, eps0=args.eps0, samples=args.samples),
        records, None, time.perf_counter() - start)
    _emit(args, report)
    return EXIT_OK if total_violations == 0 else EXIT_NOT_CERTIFIED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "verify": cmd_verify,
        "search": cmd_search,
        "volume-bench": cmd_volume_bench,
        "check-soundness": cmd_check_soundness,
    }
    try:
        return handlers[args.command](args)
    except (ModelFormatError, OSError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
