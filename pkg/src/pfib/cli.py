"""Command line front end.

Subcommands: forward, extend-left, reversed, green-tao, verify-bfile.
Exit codes: 0 success, 2 usage or input error, 3 bound or search-limit
exhaustion, 4 verification mismatch.  `--format records` emits one JSON
record per line with every potentially large integer as a decimal string.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import seqcore
from .arith import ensure_odd_prime
from .seqcore import (
    ForwardStatus,
    PrimeAp,
    ReversedStatus,
    Seed,
    BoundExhaustedError,
)

__all__ = ["main", "parse_bfile", "BFileError"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EXHAUSTED = 3
EXIT_MISMATCH = 4

WORKERS_ENV = "PFIB_WORKERS"


class BFileError(Exception):
    """Raised for unparseable OEIS b-files; carries the offending line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_bfile(lines) -> list[tuple[int, int]]:
    """Parse OEIS b-file lines into (index, value) pairs.

    Blank lines and '#' comments are skipped; data lines carry exactly two
    integers with strictly increasing indices and non-negative values.
    """
    entries: list[tuple[int, int]] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise BFileError(line_no, f"expected 'index value', got {line!r}")
        try:
            index, value = int(fields[0]), int(fields[1])
        except ValueError:
            raise BFileError(line_no, f"non-integer field in {line!r}") from None
        if entries and index <= entries[-1][0]:
            raise BFileError(
                line_no, f"index {index} not above previous {entries[-1][0]}"
            )
        if value < 0:
            raise BFileError(line_no, f"negative value {value}")
        entries.append((index, value))
    return entries


def _error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _emit(record: dict) -> None:
    print(json.dumps(record, separators=(",", ":")), flush=True)


def _parse_odd_prime(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"{text!r} is not an integer") from None
    return ensure_odd_prime(value)


def _resolve_workers(cli_value: int | None) -> int:
    if cli_value is not None:
        if cli_value < 1:
            raise ValueError(f"workers must be positive, got {cli_value}")
        return cli_value
    env = os.environ.get(WORKERS_ENV)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"{WORKERS_ENV} must be positive, got {env!r}")
        return value
    return os.cpu_count() or 1


def _forward_suffix(seq) -> str:
    if seq.status is ForwardStatus.TERMINATED:
        return f"terminated: {seq.final_sum}"
    if seq.status is ForwardStatus.CONSTANT:
        return "constant"
    return f"truncated: {seq.limit}"


def _forward_result(seq) -> dict:
    result = {"terms": [str(t) for t in seq.terms], "status": seq.status.value}
    if seq.final_sum is not None:
        result["final_sum"] = str(seq.final_sum)
    if seq.limit is not None:
        result["limit"] = str(seq.limit)
    return result


def cmd_forward(args) -> int:
    try:
        seed = Seed(_parse_odd_prime(args.p1), _parse_odd_prime(args.p2))
    except ValueError as exc:
        return _error(str(exc))
    started = time.perf_counter()
    seq = seqcore.generate_forward(seed, args.max_terms)
    elapsed = time.perf_counter() - started
    if args.format == "records":
        _emit(
            {
                "command": "forward",
                "inputs": {
                    "p1": str(seed.p1),
                    "p2": str(seed.p2),
                    "max_terms": str(args.max_terms),
                },
                "result": _forward_result(seq),
                "timing": elapsed,
            }
        )
    else:
        print(f"{' '.join(str(t) for t in seq.terms)} | {_forward_suffix(seq)}")
    return EXIT_OK


def cmd_extend_left(args) -> int:
    try:
        p1, p2 = _parse_odd_prime(args.p1), _parse_odd_prime(args.p2)
    except ValueError as exc:
        return _error(str(exc))
    started = time.perf_counter()
    inputs = {"p1": str(p1), "p2": str(p2), "method": args.method}
    if args.method == "crt":
        inputs["max_steps"] = str(args.max_steps)
        try:
            p0, system = seqcore.extend_left_crt(p1, p2, args.max_steps)
        except ValueError as exc:
            return _error(str(exc))
        except BoundExhaustedError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_EXHAUSTED
        elapsed = time.perf_counter() - started
        index = (p0 - system.solution) // system.combined_modulus
        if args.format == "records":
            _emit(
                {
                    "command": "extend-left",
                    "inputs": inputs,
                    "result": {
                        "p0": str(p0),
                        "system": [
                            {"residue": str(r), "modulus": str(m)}
                            for r, m in system.congruences
                        ],
                        "solution": str(system.solution),
                        "combined_modulus": str(system.combined_modulus),
                        "progression_index": index,
                    },
                    "timing": elapsed,
                }
            )
        else:
            print(p0)
            print(
                "system: "
                + ", ".join(f"{r} mod {m}" for r, m in system.congruences)
            )
            print(f"solution: {system.solution} mod {system.combined_modulus}")
            print(f"progression index: {index}")
        return EXIT_OK
    inputs["bound"] = str(args.bound)
    try:
        p0 = seqcore.extend_left_minimal(p1, p2, args.bound)
    except ValueError as exc:
        return _error(str(exc))
    elapsed = time.perf_counter() - started
    if p0 is None:
        if args.format == "records":
            _emit(
                {
                    "command": "extend-left",
                    "inputs": inputs,
                    "result": {
                        "p0": None,
                        "status": "bound_exhausted",
                        "bound": str(args.bound),
                    },
                    "timing": elapsed,
                }
            )
        else:
            print(f"no candidate <= {args.bound}")
        return EXIT_EXHAUSTED
    if args.format == "records":
        _emit(
            {
                "command": "extend-left",
                "inputs": inputs,
                "result": {"p0": str(p0)},
                "timing": elapsed,
            }
        )
    else:
        print(p0)
    return EXIT_OK


def cmd_reversed(args) -> int:
    try:
        seed = Seed(_parse_odd_prime(args.p), _parse_odd_prime(args.q))
        workers = _resolve_workers(args.workers)
    except ValueError as exc:
        return _error(str(exc))
    if args.terms < 2:
        return _error(f"--terms must be at least 2, got {args.terms}")
    if args.bound < 1:
        return _error(f"--bound must be positive, got {args.bound}")
    records = args.format == "records"
    stream = sys.stdout

    def on_term(index: int, value: int) -> None:
        if records:
            _emit(
                {
                    "command": "reversed",
                    "event": "term",
                    "index": index + 1,
                    "value": str(value),
                }
            )
        else:
            stream.write(f"{value} " if index + 1 < args.terms else f"{value}")
            stream.flush()

    started = time.perf_counter()
    try:
        seq = seqcore.generate_reversed(
            seed,
            args.terms,
            args.bound,
            workers=workers,
            checkpoint_path=args.checkpoint,
            on_term=on_term,
        )
    except KeyboardInterrupt:
        stream.write("\n")
        print("interrupted; checkpoint written if one was requested", file=sys.stderr)
        return 130
    elapsed = time.perf_counter() - started
    exhausted = seq.status is ReversedStatus.BOUND_EXHAUSTED
    if records:
        result = {
            "terms": [str(t) for t in seq.terms],
            "status": seq.status.value,
        }
        if exhausted:
            result["at_term"] = seq.at_index + 1
            result["bound"] = str(seq.bound)
        _emit(
            {
                "command": "reversed",
                "inputs": {
                    "p": str(seed.p1),
                    "q": str(seed.p2),
                    "terms": str(args.terms),
                    "bound": str(args.bound),
                    "workers": str(workers),
                },
                "result": result,
                "timing": elapsed,
            }
        )
    else:
        stream.write("\n")
        stream.flush()
        if exhausted:
            print(f"term {seq.at_index + 1}: no candidate <= {seq.bound}")
    return EXIT_EXHAUSTED if exhausted else EXIT_OK


def cmd_green_tao(args) -> int:
    if args.k < 3:
        return _error(f"--k must be at least 3, got {args.k}")
    needed = (1 << (args.k - 2)) + 1
    started = time.perf_counter()
    if args.ap is not None:
        fields = args.ap.split(",")
        if len(fields) != 3:
            return _error(f"--ap takes first,difference,length, got {args.ap!r}")
        try:
            first, difference, length = (int(f) for f in fields)
            ap = PrimeAp(first, difference, length)
        except ValueError as exc:
            return _error(str(exc))
    else:
        ap = seqcore.find_prime_ap(needed, args.search_limit)
        if ap is None:
            print(
                f"no prime progression of length {needed} with first term "
                f"<= {args.search_limit}",
                file=sys.stderr,
            )
            return EXIT_EXHAUSTED
    try:
        seq = seqcore.green_tao_sequence(args.k, ap)
    except ValueError as exc:
        return _error(str(exc))
    elapsed = time.perf_counter() - started
    indices = seqcore.index_recurrence(args.k)
    if args.format == "records":
        _emit(
            {
                "command": "green-tao",
                "inputs": {
                    "k": str(args.k),
                    "ap": args.ap,
                    "search_limit": str(args.search_limit),
                },
                "result": {
                    "ap": {
                        "first": str(ap.first),
                        "difference": str(ap.difference),
                        "length": ap.length,
                    },
                    "indices": indices,
                    "terms": [str(t) for t in seq.terms],
                    "status": seq.status.value,
                    "final_sum": None if seq.final_sum is None else str(seq.final_sum),
                    "length": len(seq.terms),
                },
                "timing": elapsed,
            }
        )
    else:
        print(f"ap: first={ap.first} difference={ap.difference} length={ap.length}")
        print(f"indices: {' '.join(str(b) for b in indices)}")
        print(f"sequence: {' '.join(str(t) for t in seq.terms)} | {_forward_suffix(seq)}")
        print(f"length: {len(seq.terms)} (required >= {args.k})")
    return EXIT_OK


def cmd_verify_bfile(args) -> int:
    try:
        seed = Seed(_parse_odd_prime(args.p), _parse_odd_prime(args.q))
    except ValueError as exc:
        return _error(str(exc))
    try:
        with open(args.path, "r", encoding="ascii") as handle:
            entries = parse_bfile(handle)
    except OSError as exc:
        return _error(f"cannot read {args.path}: {exc}")
    except BFileError as exc:
        return _error(f"{args.path}: {exc}")
    if not entries:
        return _error(f"{args.path}: no entries")
    started = time.perf_counter()
    bound = 2 * max(value for _, value in entries) + 1000
    seq = seqcore.generate_reversed(seed, len(entries), bound)
    elapsed = time.perf_counter() - started
    mismatch = None
    for position, (index, value) in enumerate(entries):
        if position >= len(seq.terms):
            mismatch = (index, value, None)
            break
        if seq.terms[position] != value:
            mismatch = (index, value, seq.terms[position])
            break
    if args.format == "records":
        result = {"entries": len(entries), "status": "match"}
        if mismatch is not None:
            index, expected, got = mismatch
            result = {
                "entries": len(entries),
                "status": "mismatch",
                "index": index,
                "expected": str(expected),
                "got": None if got is None else str(got),
            }
        _emit(
            {
                "command": "verify-bfile",
                "inputs": {"p": str(seed.p1), "q": str(seed.p2), "path": args.path},
                "result": result,
                "timing": elapsed,
            }
        )
    else:
        if mismatch is None:
            print(f"ok: {len(entries)} terms match")
        else:
            index, expected, got = mismatch
            got_text = f"no candidate <= {bound}" if got is None else str(got)
            print(f"index {index}: expected {expected}, got {got_text}")
    return EXIT_OK if mismatch is None else EXIT_MISMATCH


def _int_arg(text: str) -> int:
    # int() already accepts 2_000_000_000 style separators
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfib", description="prime Fibonacci sequence toolkit"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format",
        choices=("plain", "records"),
        default="plain",
        help="plain text or one JSON record per line",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", parents=[common], help="run the forward recurrence")
    p.add_argument("p1")
    p.add_argument("p2")
    p.add_argument("--max-terms", type=_int_arg, default=1000)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser(
        "extend-left", parents=[common], help="find a left extension of a prime pair"
    )
    p.add_argument("p1")
    p.add_argument("p2")
    p.add_argument("--method", choices=("minimal", "crt"), default="minimal")
    p.add_argument("--bound", type=_int_arg, default=10**6)
    p.add_argument("--max-steps", type=_int_arg, default=seqcore.DEFAULT_DIRICHLET_STEPS)
    p.set_defaults(func=cmd_extend_left)

    p = sub.add_parser(
        "reversed", parents=[common], help="generate the reversed sequence"
    )
    p.add_argument("p")
    p.add_argument("q")
    p.add_argument("--terms", type=_int_arg, required=True)
    p.add_argument("--bound", type=_int_arg, default=10**7)
    p.add_argument("--workers", type=_int_arg, default=None)
    p.add_argument("--checkpoint", default=None, metavar="PATH")
    p.set_defaults(func=cmd_reversed)

    p = sub.add_parser(
        "green-tao", parents=[common], help="build a length-k sequence from a prime AP"
    )
    p.add_argument("--k", type=_int_arg, required=True)
    p.add_argument("--ap", default=None, metavar="FIRST,DIFF,LEN")
    p.add_argument("--search-limit", type=_int_arg, default=1000)
    p.set_defaults(func=cmd_green_tao)

    p = sub.add_parser(
        "verify-bfile", parents=[common], help="check a b-file against the generator"
    )
    p.add_argument("p")
    p.add_argument("q")
    p.add_argument("path")
    p.set_defaults(func=cmd_verify_bfile)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
