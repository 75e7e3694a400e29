"""Command-line entry point: ``generate``, ``convert``, ``join`` and ``bench``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from . import _backend
from .bench import AXES, BenchSettings, sweep
from .counters import CostCounters
from .datagen import DEFAULT_SPECTRA_DIMS, SpectraFormatError, SyntheticSpec, convert_spectra, generate
from .dataset import DEFAULT_PAGE_SIZE, DatasetError, read_header
from .join import JoinConfig, block_nested_loops_join, write_results_tsv
from .kernels import KERNELS
from .vectors import InvalidVectorError

EXIT_USAGE = 1
EXIT_DATA = 2

log = logging.getLogger("sparseknn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if not 0 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}")
    return lo, hi


def _float_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if not 0 <= lo < hi:
        raise argparse.ArgumentTypeError(f"invalid weight range {text!r}")
    return lo, hi


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _global_options(parser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--page-size", type=_positive_int, default=default(DEFAULT_PAGE_SIZE),
                        help="buffer page size in bytes (default 8192)")
    parser.add_argument("--threads", type=_positive_int, default=default(1),
                        help="worker threads over outer blocks (default 1)")
    parser.add_argument("--backend", choices=_backend.available(), default=default(None),
                        help="kernel backend (default: compiled when available)")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparseknn", description=__doc__.splitlines()[0])
    _global_options(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--dims", type=_positive_int, default=10000)
    g.add_argument("--features", type=_int_range, default=(80, 120), metavar="LO:HI")
    g.add_argument("--weights", type=_float_range, default=(0.0, 1.0), metavar="LO:HI",
                   help="weights drawn from (LO, HI] (default 0:1)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--first-id", type=int, default=0)
    g.add_argument("--out", required=True)

    c = sub.add_parser("convert", parents=[common], help="convert spectra text to a dataset")
    c.add_argument("--in", dest="source", required=True, help="spectra text file or '-'")
    c.add_argument("--out", required=True)
    c.add_argument("--dims", type=_positive_int, default=DEFAULT_SPECTRA_DIMS)
    c.add_argument("--renumber", action="store_true",
                   help="number vectors by record position instead of parsing ids")

    j = sub.add_parser("join", parents=[common], help="KNN join of R against S")
    j.add_argument("r_path")
    j.add_argument("s_path")
    j.add_argument("-k", "--k", type=int, default=5)
    j.add_argument("--algo", choices=sorted(KERNELS), default="iiib")
    size = j.add_mutually_exclusive_group()
    size.add_argument("--buffer-pct", type=float, default=50.0,
                      help="buffer as a percentage of the combined input size (default 50)")
    size.add_argument("--buffer-pages", type=int)
    j.add_argument("--r-fraction", type=float, default=0.8)
    j.add_argument("--out", help="result TSV (default stdout)")
    j.add_argument("--report", help="append the JSON report line here (default stderr)")

    b = sub.add_parser("bench", parents=[common], help="sweep one experiment axis")
    b.add_argument("--axis", choices=AXES, required=True)
    b.add_argument("--values", help="comma-separated axis values (default: the standard sweep)")
    b.add_argument("--algos", default="bf,iib,iiib")
    b.add_argument("--repeat", type=_positive_int, default=1)
    b.add_argument("--count", type=_positive_int, default=10000, help="|R| = |S| when not swept")
    b.add_argument("--r-count", type=_positive_int, default=10000, help="fixed |R| for relative-size")
    b.add_argument("--dims", type=_positive_int, default=10000)
    b.add_argument("--features", type=_int_range, default=(80, 120), metavar="LO:HI")
    b.add_argument("--weights", type=_float_range, default=(0.0, 1.0), metavar="LO:HI")
    b.add_argument("--seed", type=int, default=7)
    b.add_argument("-k", "--k", type=_positive_int, default=5)
    b.add_argument("--buffer-pct", type=float, default=50.0)
    b.add_argument("--r-fraction", type=float, default=0.8)
    b.add_argument("--workdir", default="bench-data")
    b.add_argument("--out", help="JSON-lines report (default stdout)")
    return parser


@contextmanager
def _text_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def cmd_generate(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        spec = SyntheticSpec(args.count, args.dims, args.features, args.weights, args.seed, args.first_id)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    header = generate(spec, args.out)
    print(f"{args.out}: D={header.dimensionality} vectors={header.vector_count}")
    return 0


def cmd_convert(args) -> int:
    if args.source == "-":
        header, stats = convert_spectra(sys.stdin, args.out, args.dims, args.renumber)
    else:
        with open(args.source) as fh:
            header, stats = convert_spectra(fh, args.out, args.dims, args.renumber)
    print(f"{args.out}: D={header.dimensionality} vectors={header.vector_count} "
          f"peaks={stats.peaks} dropped={stats.dropped} collisions={stats.collisions}")
    return 0


def cmd_join(args) -> int:
    for p in (args.r_path, args.s_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such dataset: {p}")
    try:
        common = dict(k=args.k, r_fraction=args.r_fraction, algorithm=args.algo,
                      page_size=args.page_size, threads=args.threads)
        if args.buffer_pages is not None:
            config = JoinConfig(buffer_pages=args.buffer_pages, **common)
        else:
            config = JoinConfig.for_inputs(args.r_path, args.s_path, buffer_pct=args.buffer_pct, **common)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    counters = CostCounters()
    t0 = time.perf_counter()
    with _text_out(args.out) as out:
        rows = write_results_tsv(block_nested_loops_join(args.r_path, args.s_path, config, counters), out)
    wall = time.perf_counter() - t0
    r_head, s_head = read_header(args.r_path), read_header(args.s_path)
    report = {
        "command": "join",
        "algorithm": config.algorithm,
        "r_path": str(args.r_path),
        "s_path": str(args.s_path),
        "r_count": r_head.vector_count,
        "s_count": s_head.vector_count,
        "dims": r_head.dimensionality,
        "k": config.k,
        "page_size": config.page_size,
        "buffer_pct": None if args.buffer_pages is not None else args.buffer_pct,
        "buffer_pages": config.buffer_pages,
        "r_pages": config.r_pages,
        "s_pages": config.s_pages,
        "r_fraction": config.r_fraction,
        "threads": config.threads,
        "backend": _backend.name(),
        **counters.as_dict(),
        "wall_time": wall,
        "result_rows": rows,
    }
    line = json.dumps(report)
    if args.report:
        with open(args.report, "a") as fh:
            fh.write(line + "\n")
    else:
        print(line, file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    algos = [a.strip().lower() for a in args.algos.split(",") if a.strip()]
    unknown = [a for a in algos if a not in KERNELS]
    if unknown or not algos:
        raise UsageError(f"unknown algorithms {unknown}; choose from {sorted(KERNELS)}")
    values = None
    if args.values:
        cast = float if args.axis == "buffer" else int
        try:
            values = [cast(v) for v in args.values.split(",")]
        except ValueError:
            raise UsageError(f"bad --values {args.values!r}") from None
    try:
        base = BenchSettings(
            count=args.count, r_count=args.r_count, dims=args.dims, features=args.features,
            weights=args.weights, seed=args.seed, k=args.k, buffer_pct=args.buffer_pct,
            r_fraction=args.r_fraction, page_size=args.page_size, threads=args.threads,
        )
        SyntheticSpec(0, base.dims, base.features, base.weights)
        JoinConfig(k=base.k, r_fraction=base.r_fraction)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with _text_out(args.out) as out:
        for record in sweep(args.axis, values, algos, base, args.workdir, args.repeat):
            out.write(json.dumps(record) + "\n")
            out.flush()
    return 0


COMMANDS = {"generate": cmd_generate, "convert": cmd_convert, "join": cmd_join, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.backend:
        _backend.set_backend(args.backend)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sparseknn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, InvalidVectorError, SpectraFormatError, OSError, ValueError) as exc:
        print(f"sparseknn: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
