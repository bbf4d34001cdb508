"""Command-line tool over the on-disk formats.

Exit codes: 0 success, 1 semantic findings (validation errors, differences,
unknown series, bad arguments), 2 I/O or parse failures, 3 missing external
layout tool.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .diffing import compute_diff, load_run, render_json, render_text
from .errors import (
    ExportError,
    InvalidArgumentError,
    InvalidDocumentError,
    NotFoundError,
    ParseError,
    ProvTrackError,
)
from .exports import export_metric_csv, plot_metrics
from .graph import to_dot, to_svg
from .merge import merge_documents
from .prov.jsonio import parse, serialize, validate
from .records import Context

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_IO = 2
EXIT_NO_TOOL = 3


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_document(path: Path):
    return parse(path.read_bytes())


def cmd_validate(args) -> int:
    try:
        doc = _load_document(args.path)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    except ParseError as exc:
        return _fail(f"{args.path}: {exc}", EXIT_IO)
    report = validate(doc)
    for line in report.render_lines():
        print(line)
    if report.errors:
        return EXIT_FINDINGS
    print(f"{args.path}: OK ({len(doc.records)} records, {len(doc.relations)} relations)")
    return EXIT_OK


def cmd_merge(args) -> int:
    docs = []
    for path in args.inputs:
        try:
            doc = _load_document(path)
        except OSError as exc:
            return _fail(str(exc), EXIT_IO)
        except ParseError as exc:
            return _fail(f"{path}: {exc}", EXIT_IO)
        report = validate(doc)
        if report.errors:
            for line in report.render_lines():
                print(f"{path}: {line}", file=sys.stderr)
            return EXIT_FINDINGS
        docs.append(doc)
    try:
        merged = merge_documents(docs, args.collection_id)
    except InvalidArgumentError as exc:
        return _fail(str(exc), EXIT_FINDINGS)
    try:
        args.output.write_bytes(serialize(merged))
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    except InvalidDocumentError as exc:
        return _fail(f"merged document invalid: {exc}", EXIT_FINDINGS)
    print(
        f"merged {len(docs)} document(s) into {args.output} "
        f"({len(merged.records)} records, {len(merged.relations)} relations)"
    )
    return EXIT_OK


def cmd_diff(args) -> int:
    try:
        left = load_run(args.left)
        right = load_run(args.right)
        diff = compute_diff(left, right, full_series=args.full_series)
    except (NotFoundError, OSError) as exc:
        return _fail(str(exc), EXIT_IO)
    except ParseError as exc:
        return _fail(str(exc), EXIT_IO)
    sys.stdout.write(render_json(diff) if args.json else render_text(diff))
    return EXIT_OK if diff.empty() else EXIT_FINDINGS


def cmd_convert(args) -> int:
    try:
        doc = _load_document(args.path)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    except ParseError as exc:
        return _fail(f"{args.path}: {exc}", EXIT_IO)
    report = validate(doc)
    if report.errors:
        for line in report.render_lines():
            print(line, file=sys.stderr)
        return EXIT_FINDINGS
    dot_text = to_dot(doc)
    try:
        if args.to == "dot":
            args.output.write_text(dot_text, encoding="utf-8")
        else:
            try:
                svg = to_svg(dot_text)
            except ExportError as exc:
                return _fail(f"{exc}: {exc.tool_output}", EXIT_FINDINGS)
            if svg is None:
                return _fail(
                    "graph layout tool `dot` not found on PATH; install graphviz",
                    EXIT_NO_TOOL,
                )
            args.output.write_bytes(svg)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    print(f"wrote {args.output}")
    return EXIT_OK


def _metric_selection(args) -> list[tuple[str, Context]]:
    keys = args.key or []
    contexts = args.context or []
    if not keys:
        raise InvalidArgumentError("at least one --key is required")
    if not contexts:
        contexts = ["training"] * len(keys)
    elif len(contexts) == 1 and len(keys) > 1:
        contexts = contexts * len(keys)
    elif len(contexts) != len(keys):
        raise InvalidArgumentError("--context count must match --key count")
    return [(key, Context(ctx)) for key, ctx in zip(keys, contexts)]


def cmd_metrics(args) -> int:
    if not args.run_dir.is_dir():
        return _fail(f"run directory {args.run_dir} does not exist", EXIT_IO)
    try:
        selection = _metric_selection(args)
        if args.plot:
            target = plot_metrics(args.run_dir, selection, args.output)
        else:
            if len(selection) != 1:
                raise InvalidArgumentError("--csv exports exactly one series")
            key, context = selection[0]
            target = export_metric_csv(args.run_dir, key, context, args.output)
    except (NotFoundError, InvalidArgumentError) as exc:
        return _fail(str(exc), EXIT_FINDINGS)
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)
    print(f"wrote {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provtrack",
        description="Inspect, merge, diff, and convert experiment provenance files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_merge = sub.add_parser("merge", help="combine per-rank documents into a collection")
    p_merge.add_argument("inputs", nargs="+", type=Path, metavar="INPUT")
    p_merge.add_argument("-o", "--output", type=Path, required=True)
    p_merge.add_argument("--collection-id", default=None)
    p_merge.set_defaults(func=cmd_merge)

    p_diff = sub.add_parser("diff", help="compare two run directories")
    p_diff.add_argument("left", type=Path)
    p_diff.add_argument("right", type=Path)
    p_diff.add_argument("--json", action="store_true", help="machine-readable output")
    p_diff.add_argument(
        "--full-series", action="store_true", help="also compare spilled samples"
    )
    p_diff.set_defaults(func=cmd_diff)

    p_validate = sub.add_parser("validate", help="check one document")
    p_validate.add_argument("path", type=Path)
    p_validate.set_defaults(func=cmd_validate)

    p_convert = sub.add_parser("convert", help="render a document as DOT or SVG")
    p_convert.add_argument("path", type=Path)
    p_convert.add_argument("--to", choices=("dot", "svg"), required=True)
    p_convert.add_argument("-o", "--output", type=Path, required=True)
    p_convert.set_defaults(func=cmd_convert)

    p_metrics = sub.add_parser("metrics", help="export or plot logged series")
    p_metrics.add_argument("run_dir", type=Path)
    p_metrics.add_argument("--key", action="append")
    p_metrics.add_argument("--context", action="append")
    group = p_metrics.add_mutually_exclusive_group(required=True)
    group.add_argument("--csv", action="store_true")
    group.add_argument("--plot", action="store_true")
    p_metrics.add_argument("-o", "--output", type=Path, required=True)
    p_metrics.set_defaults(func=cmd_metrics)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProvTrackError as exc:
        return _fail(str(exc), EXIT_FINDINGS)


def entry() -> None:
    sys.exit(main())
