"""Command line entry point: ``hypertn <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from typing import Iterator, Sequence, TextIO

import numpy as np

from .blocks import IntegrityError
from .correlations import RealnessError, central_charge_bound
from .experiments import (
    SPECTRAL_COLUMNS,
    THREE_POINT_COLUMNS,
    ConfigError,
    ScanConfig,
    checks_report,
    resolve_threads,
    run_random_scan,
    run_sweep,
    run_three_point,
    run_verify,
    write_csv,
    write_jsonl,
)
from .network import build_network

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def parse_grid(text: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """``N`` (N points on [0,1] for both axes), ``NAxNB``, or ``a1,a2,..;b1,b2,..``."""
    try:
        if ";" in text:
            a_part, b_part = text.split(";")
            return tuple(float(x) for x in a_part.split(",")), tuple(float(x) for x in b_part.split(","))
        if "x" in text:
            na, nb = (int(x) for x in text.split("x"))
        else:
            na = nb = int(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}") from exc
    if na < 1 or nb < 1:
        raise ConfigError("grid sizes must be positive")
    return _unit_axis(na), _unit_axis(nb)


def _unit_axis(n: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(0.0, 1.0, n)) if n > 1 else (0.0,)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed for stochastic modes")
    common.add_argument("--samples", type=int, default=None, help="number of samples")
    common.add_argument("--grid", default=None, help="grid: N, NAxNB or 'a1,a2;b1,b2'")
    common.add_argument("--tol", type=float, default=1e-9, help="verification tolerance")
    common.add_argument("--out", default="-", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "jsonl", "json"), default=None)
    common.add_argument("--threads", type=int, default=None, help="worker processes (env HYPERTN_THREADS overrides)")

    parser = argparse.ArgumentParser(prog="hypertn", description="Hyperinvariant tensor network experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    p.add_argument("--inject-fault", choices=("cnot-frame", "haar-frame"), default=None)

    p = sub.add_parser("sweep", parents=[common], help="two-parameter family sweep")
    p.add_argument("--family", choices=("f1", "f2"), default="f1")
    p.add_argument("--turn", choices=("right", "left", "both"), default="right")

    p = sub.add_parser("scan", parents=[common], help="random dual-unitary / Haar entangler scan")
    p.add_argument("--turn", choices=("right", "left", "both"), default="right")
    p.add_argument("--summary", default=None, help="write the JSON summary here as well")

    p = sub.add_parser("three-point", parents=[common], help="three-point coefficient over bulk draws")
    p.add_argument("--family", choices=("f1", "f2"), default="f1")
    p.add_argument("-a", type=float, default=0.302)
    p.add_argument("-b", type=float, default=0.817)
    p.add_argument("--bulk", choices=("wishart", "mixed"), default="wishart")
    p.add_argument("--ports", default="0,2,4", help="three unresolved slots of the intersection tile")

    sub.add_parser("central-charge", parents=[common], help="print the central charge upper bound")

    p = sub.add_parser("net-dump", parents=[common], help="export the tiling")
    p.add_argument("--layers", type=int, default=2)
    return parser


@contextmanager
def _open_out(path: str) -> Iterator[TextIO]:
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _turns(value: str) -> tuple[str, ...]:
    return ("right", "left") if value == "both" else (value,)


def _emit(records, path: str, fmt: str, columns) -> None:
    with _open_out(path) as fh:
        if fmt == "csv":
            write_csv(records, fh, columns)
        else:
            write_jsonl(records, fh)


def _main(args: argparse.Namespace) -> int:
    threads = resolve_threads(args.threads)
    cmd = args.command
    if cmd == "central-charge":
        with _open_out(args.out) as fh:
            if args.format in ("json", "jsonl"):
                fh.write(json.dumps({"central_charge_bound": central_charge_bound()}) + "\n")
            else:
                fh.write(f"{central_charge_bound():.6f}\n")
        return EXIT_OK

    if cmd == "verify":
        report = checks_report(run_verify(args.tol, args.inject_fault))
        with _open_out(args.out) as fh:
            fh.write(json.dumps(report, indent=2) + "\n")
        if not report["passed"]:
            f = report["first_failure"]
            sys.stderr.write(f"verification failed: {f['suite']}.{f['name']} residual {f['residual']:.3e}\n")
            return EXIT_VERIFY
        return EXIT_OK

    if cmd == "net-dump":
        if args.layers < 0:
            raise ConfigError("layers must be non-negative")
        net = build_network(args.layers)
        with _open_out(args.out) as fh:
            fh.write(net.edge_list() if args.format == "csv" else net.to_json() + "\n")
        return EXIT_OK

    if cmd == "sweep":
        grid = parse_grid(args.grid or "11")
        cfg = ScanConfig("sweep", samples=1, grid=grid, family=args.family, turns=_turns(args.turn), threads=threads)
        _emit(run_sweep(cfg), args.out, args.format or "csv", SPECTRAL_COLUMNS)
        return EXIT_OK

    if cmd == "scan":
        if args.seed is None:
            raise ConfigError("scan needs --seed")
        cfg = ScanConfig("random_scan", seed=args.seed, samples=args.samples or 100, turns=_turns(args.turn), threads=threads)
        records, summary = run_random_scan(cfg)
        _emit(records, args.out, args.format or "csv", SPECTRAL_COLUMNS)
        text = json.dumps(summary.to_dict(), indent=2) + "\n"
        if args.summary:
            with open(args.summary, "w") as fh:
                fh.write(text)
        sys.stderr.write(text)
        return EXIT_OK

    if cmd == "three-point":
        if args.seed is None:
            raise ConfigError("three-point needs --seed")
        try:
            ports = tuple(int(x) for x in args.ports.split(","))
        except ValueError as exc:
            raise ConfigError("ports must be three comma-separated slot indices") from exc
        if len(ports) != 3 or len(set(ports)) != 3 or not all(0 <= p < 5 for p in ports):
            raise ConfigError("ports must be three distinct slots in 0..4")
        cfg = ScanConfig(
            "three_point",
            seed=args.seed,
            samples=args.samples or 1000,
            family=args.family,
            params={"a": args.a, "b": args.b, "bulk": args.bulk, "ports": list(ports)},
        )
        if not (0 <= args.a <= 1 and 0 <= args.b <= 1):
            raise ConfigError("a and b must lie in [0, 1]")
        records, summary = run_three_point(cfg)
        _emit(records, args.out, args.format or "csv", THREE_POINT_COLUMNS)
        sys.stderr.write(json.dumps(summary) + "\n")
        return EXIT_OK
    raise ConfigError(f"unknown command {cmd!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _main(args)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (IntegrityError, RealnessError) as exc:
        sys.stderr.write(f"numeric integrity error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
