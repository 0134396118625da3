"""Command-line entry point: validate, simulate, render, export-xsd.

Exit codes: 0 success, 1 domain error (validation/simulation failure),
2 usage error.  Payload goes to stdout (or ``-o``/``--trace``), error
text to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from hagent import model as m
from hagent import simulate
from hagent.render import MissingLayout, render_svg
from hagent.validate import render_diagnostics, validate_model
from hagent.xmlio import Severity, export_extension_schema, parse_model

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hagent",
        description="Parse, validate, simulate, and render human-agentic BPMN models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a model against the rule catalog")
    p_validate.add_argument("input", help="BPMN XML file")
    p_validate.add_argument(
        "--strict", action="store_true", help="treat warnings as failures"
    )

    p_sim = sub.add_parser("simulate", help="run a scripted simulation")
    p_sim.add_argument("input", help="BPMN XML file")
    p_sim.add_argument("--scenario", required=True, help="scenario YAML file")
    p_sim.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_sim.add_argument("--trace", default=None, help="trace output file (default stdout)")

    p_render = sub.add_parser("render", help="render the model to SVG")
    p_render.add_argument("input", help="BPMN XML file")
    p_render.add_argument("-o", "--output", default=None, help="SVG output file")
    p_render.add_argument("--hints", default=None, help="JSON layout hints file")

    p_xsd = sub.add_parser("export-xsd", help="write the extension schema")
    p_xsd.add_argument("-o", "--output", default=None, help="XSD output file")
    return parser


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise SystemExit(_usage_error(f"cannot read {path}: {exc}"))


def _usage_error(message: str) -> int:
    print(f"hagent: {message}", file=sys.stderr)
    return EXIT_USAGE


def _write_payload(data: bytes, path: Optional[str]):
    if path is None:
        sys.stdout.write(data.decode("utf-8"))
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _colorize(text: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    out = []
    for line in text.splitlines():
        if line.startswith("E-"):
            out.append(f"\x1b[31m{line}\x1b[0m")
        elif line.startswith("W-"):
            out.append(f"\x1b[33m{line}\x1b[0m")
        else:
            out.append(line)
    return "\n".join(out)


def _load_model(path: str):
    result = parse_model(_read(path))
    return result


def cmd_validate(args) -> int:
    result = _load_model(args.input)
    diagnostics = list(result.diagnostics)
    if result.model is not None:
        diagnostics += validate_model(result.model)
    text = render_diagnostics(diagnostics)
    if text:
        print(_colorize(text))
    has_error = any(d.severity is Severity.ERROR for d in diagnostics)
    if args.strict:
        has_error = has_error or bool(diagnostics)
    return EXIT_DOMAIN if has_error else EXIT_OK


def cmd_simulate(args) -> int:
    result = _load_model(args.input)
    if result.model is None:
        print(render_diagnostics(result.errors), file=sys.stderr)
        return EXIT_DOMAIN
    try:
        scenario = simulate.load_scenario(_read(args.scenario))
    except Exception as exc:
        print(f"hagent: bad scenario file: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.seed is not None:
        scenario.seed = args.seed
    try:
        trace = simulate.run_simulation(result.model, scenario)
    except (simulate.SimulationError, m.ModelError) as exc:
        print(f"hagent: simulation failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _write_payload(simulate.format_trace(trace).encode("utf-8"), args.trace)
    return EXIT_OK


def cmd_render(args) -> int:
    result = _load_model(args.input)
    if result.model is None:
        print(render_diagnostics(result.errors), file=sys.stderr)
        return EXIT_DOMAIN
    errors = [
        d for d in validate_model(result.model) if d.severity is Severity.ERROR
    ]
    if errors:
        print(render_diagnostics(errors), file=sys.stderr)
        return EXIT_DOMAIN
    hints = None
    if args.hints:
        try:
            hints = {
                k: tuple(v) for k, v in json.loads(_read(args.hints)).items()
            }
        except (ValueError, TypeError) as exc:
            print(f"hagent: bad hints file: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
    try:
        svg = render_svg(result.model, hints)
    except MissingLayout as exc:
        print(f"hagent: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _write_payload(svg, args.output)
    return EXIT_OK


def cmd_export_xsd(args) -> int:
    _write_payload(export_extension_schema(), args.output)
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "render": cmd_render,
    "export-xsd": cmd_export_xsd,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
