"""Command line front end: convert, inspect, stats, tables, selftest.

Exit codes: 0 ok, 1 usage or contract error, 2 I/O failure, 3 malformed container.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import container
from .core import (
    BLOCK_SIZE,
    ConversionPolicy,
    FormatId,
    SignMode,
    SpecialPolicy,
    format_params,
    fp32_decode,
)
from .dequant import ErrorStats, block_error_stats, dequantize_block
from .oracle import PRINTED_TABLES, implemented_table, table_report

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_MALFORMED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_words(path: Path, csv: bool = False) -> np.ndarray:
    if csv:
        text = path.read_text()
        try:
            values = [float(line) for line in text.split() if line]
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from None
        return np.asarray(values, dtype=np.float32).view(np.uint32)
    data = path.read_bytes()
    if len(data) % 4:
        raise UsageError(f"{path}: {len(data)} bytes is not a whole number of binary32 words")
    return np.frombuffer(data, dtype="<u4").astype(np.uint32)


def convert_file(src: Path, dst: Path, format_id: FormatId, policy: ConversionPolicy,
                 packed: bool = False, csv: bool = False) -> str:
    words = read_words(src, csv)
    data = container.encode(words, format_id, policy, packed)
    dst.write_bytes(data)
    n_blocks = -(-len(words) // BLOCK_SIZE)
    return (f"{src} -> {dst}: {len(words)} elements, {n_blocks} blocks, "
            f"{format_id.name}, {len(data)} bytes")


def _load(path: Path):
    return container.decode(path.read_bytes())


def inspect_file(path: Path, out=print) -> None:
    header, arrays = _load(path)
    desc = format_params(header.format_id)
    pol = header.policy
    out(f"format={desc.name} mode={pol.sign_mode.value} specials={pol.special_policy.value} "
        f"packed={int(header.packed)} elements={header.element_count} blocks={header.n_blocks}")
    for i in range(len(arrays)):
        block = arrays.block(i)
        valid = min(BLOCK_SIZE, header.element_count - i * BLOCK_SIZE)
        out(f"block {i}: {block.x}")
        decoded = dequantize_block(block)
        for j in range(valid):
            out(f"  P{j + 1}={block.codes[j].fields(desc)}  {decoded[j]}")


def _combine(stats: list[ErrorStats]) -> ErrorStats:
    n = sum(s.compared_count for s in stats)
    sq = sum(s.rmse ** 2 * s.compared_count for s in stats)
    return ErrorStats(
        max((s.max_abs_error for s in stats), default=0.0),
        max((s.max_rel_error for s in stats), default=0.0),
        math.sqrt(sq / n) if n else 0.0,
        sum(s.flushed_count for s in stats),
        sum(s.saturated_count for s in stats),
        sum(s.special_count for s in stats),
        n,
        max((s.max_rel_error_in_range for s in stats), default=0.0),
    )


def stats_files(original: Path, mx: Path, csv: bool = False, out=print) -> ErrorStats:
    words = read_words(original, csv)
    header, arrays = _load(mx)
    if len(words) != header.element_count:
        raise UsageError(f"{original} holds {len(words)} elements, {mx} holds "
                         f"{header.element_count}")
    per_block = []
    for i in range(len(arrays)):
        chunk = words[i * BLOCK_SIZE:(i + 1) * BLOCK_SIZE]
        block = arrays.block(i)
        orig = [fp32_decode(int(w)) for w in chunk]
        s = block_error_stats(orig, dequantize_block(block)[:len(orig)], block)
        per_block.append(s)
        out(f"block {i}: {s}")
    total = _combine(per_block)
    out(f"total: {total}")
    return total


def emit_tables(format_id: FormatId, out=print) -> None:
    desc = format_params(format_id)
    rows = implemented_table(desc)
    out(f"{desc.name}: {desc.prefix_bits}-bit mantissa prefix -> {desc.R}-bit mantissa")
    out(f"{'prefix':>22}  mr{' ' * max(desc.R - 2, 0)}  carry")
    for row in rows:
        carry = "-" if row.clamp else str(row.carry)
        out(f"{row.label:>22}  {row.mr:<{max(desc.R, 2)}}  {carry}")
    if desc.format_id not in PRINTED_TABLES:
        out("no printed table for this format")
        return
    report = table_report(desc)
    name = PRINTED_TABLES[desc.format_id][0]
    n = len(report.mismatches)
    line = f"{n} deviation{'' if n == 1 else 's'} from {name}"
    if n:
        labels = ", ".join(m[0] for m in report.mismatches)
        line += f" (row{'' if n == 1 else 's'} {labels})"
    out(line)
    for label, got, printed in report.mismatches:
        out(f"  row {label}: implemented {got}, printed {printed}")


def build_parser() -> argparse.ArgumentParser:
    formats = [f.name.lower() for f in FormatId]
    p = _Parser(prog="mxconv", description="FP32 to MX block format conversion")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("convert", help="convert a raw binary32 stream to an MX container")
    c.add_argument("--format", required=True, choices=formats)
    c.add_argument("--mode", choices=["corrected", "paper"], default="corrected")
    c.add_argument("--specials", choices=["ignore", "propagate"], default="ignore")
    c.add_argument("--packed", action="store_true")
    c.add_argument("--csv", action="store_true", help="input is one decimal per line")
    c.add_argument("--in", dest="src", required=True, type=Path)
    c.add_argument("--out", dest="dst", required=True, type=Path)

    i = sub.add_parser("inspect", help="dump a container")
    i.add_argument("--in", dest="src", required=True, type=Path)

    s = sub.add_parser("stats", help="round-trip error of a container against its source")
    s.add_argument("--original", required=True, type=Path)
    s.add_argument("--mx", required=True, type=Path)
    s.add_argument("--csv", action="store_true")

    t = sub.add_parser("tables", help="print the rounding table of a format")
    t.add_argument("--format", required=True, choices=formats)

    st = sub.add_parser("selftest", help="golden vectors and oracle sweeps")
    st.add_argument("--blocks", type=int, default=20_000)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        if args.command == "convert":
            policy = ConversionPolicy(SignMode(args.mode), SpecialPolicy(args.specials))
            print(convert_file(args.src, args.dst, FormatId.parse(args.format), policy,
                               args.packed, args.csv))
        elif args.command == "inspect":
            inspect_file(args.src)
        elif args.command == "stats":
            stats_files(args.original, args.mx, args.csv)
        elif args.command == "tables":
            emit_tables(FormatId.parse(args.format))
        elif args.command == "selftest":
            from .selftest import selftest
            return selftest(args.blocks)
    except UsageError as exc:
        print(f"mxconv: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except container.MalformedContainer as exc:
        print(f"mxconv: malformed container: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except OSError as exc:
        print(f"mxconv: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
