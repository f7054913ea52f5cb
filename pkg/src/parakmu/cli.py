"""Command-line front end: construct, verify, nullity, deform.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 domain / parse / validation error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import __version__
from .expr import GRAMMAR_HELP, ParseError
from .families import (
    PRESETS,
    DomainViolation,
    ManifestError,
    ValidationFailure,
    build_family,
    dumps_manifest,
    read_manifest,
)
from .jets import JetError
from .nullity import nullity_rows, write_nullity_csv
from .structure import NonpositiveAlpha, OutOfDomain, d_homothetic_deform
from .verify import (
    DEFAULT_TOLERANCES,
    EmptyGridAfterExclusions,
    GridSpecError,
    ReportIOError,
    SampleGrid,
    default_box,
    emit_report,
    report_text,
    run_suite,
    run_suites,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3, 4
DEFAULT_SUITES = "axioms,L1,L2,curvature,main_theorem"

EPILOG = f"""\
structures come from exactly one of
  --preset ex1
  --case case1|case2 --r EXPR --f EXPR --s EXPR --domain LO,HI
  --manifest PATH       (JSON written by `construct` or `deform`)

grids
  --grid lattice:NX,NY,NZ   evenly spaced, box endpoints included
  --grid random:N           uniform, numpy PCG64 seeded by --seed
  --box X0,X1,Y0,Y1,Z0,Z1   closed sampling box

{GRAMMAR_HELP}

exit codes: 0 ok, 1 verification failure, 2 usage, 3 domain/parse/validation, 4 I/O
"""


class UsageError(Exception):
    pass


def _add_structure_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("structure")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in structure")
    src.add_argument("--case", choices=("case1", "case2"), help="family constructor")
    src.add_argument("--r", help="r(z) > 0, the eigenvalue function of h")
    src.add_argument("--f", help="f(z)")
    src.add_argument("--s", help="s(z)")
    src.add_argument("--domain", help="z-interval LO,HI for --case")
    src.add_argument("--manifest", help="structure manifest (JSON)")


def _add_grid_args(p: argparse.ArgumentParser, default_grid: str) -> None:
    g = p.add_argument_group("sampling")
    g.add_argument("--grid", default=default_grid, help=f"lattice:NX,NY,NZ or random:N (default {default_grid})")
    g.add_argument("--box", help="X0,X1,Y0,Y1,Z0,Z1 (default: x, y in [-1,1], z from the domain or [1,3])")
    g.add_argument("--seed", type=int, default=0, help="seed for random grids (default 0)")
    g.add_argument("--lambda-min", type=float, default=1e-3, help="exclude points with lambda below this")


def _add_output_args(p: argparse.ArgumentParser, formats: Sequence[str] | None = None) -> None:
    if formats:
        p.add_argument("--format", choices=formats, default=formats[0], help=f"output format (default {formats[0]})")
    p.add_argument("--out", default="-", help="output path, '-' for stdout (default)")


def _tol_arg(text: str):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"tolerance must be NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"tolerance value must be a number, got {value!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="parakmu",
        description="Construct and numerically verify 3-dimensional paracontact metric (kappa, mu)-structures.",
        epilog=EPILOG,
        formatter_class=fmt,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("construct", help="validate a structure and write its manifest", epilog=EPILOG, formatter_class=fmt)
    _add_structure_args(p)
    _add_output_args(p)

    p = sub.add_parser("verify", help="run check suites and write a report", epilog=EPILOG, formatter_class=fmt)
    _add_structure_args(p)
    p.add_argument(
        "--suite",
        default=DEFAULT_SUITES,
        help="comma-separated suites: axioms, L1, L2, L3, curvature, main_theorem, pasa, "
        f"deformation(ALPHA) (default {DEFAULT_SUITES})",
    )
    p.add_argument(
        "--tol",
        type=_tol_arg,
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help=f"override a tolerance tier ({', '.join(DEFAULT_TOLERANCES)}) or a single check by its short name",
    )
    _add_grid_args(p, "lattice:5,5,5")
    _add_output_args(p, ("json", "csv", "text"))

    p = sub.add_parser("nullity", help="write per-point kappa, mu, nu, lambda, A, B as CSV", epilog=EPILOG, formatter_class=fmt)
    _add_structure_args(p)
    _add_grid_args(p, "random:100")
    _add_output_args(p)

    p = sub.add_parser("deform", help="apply a D-homothetic deformation, write its manifest and a report", epilog=EPILOG, formatter_class=fmt)
    _add_structure_args(p)
    p.add_argument("--alpha", type=float, required=True, help="deformation parameter alpha > 0")
    p.add_argument("--report", help="verification report path ('-' for stdout); default: text summary on stderr")
    p.add_argument("--report-format", choices=("json", "csv", "text"), default="json")
    _add_grid_args(p, "lattice:5,5,5")
    _add_output_args(p)
    return parser


def _parse_interval(text: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--domain must be LO,HI, got {text!r}") from exc
    return lo, hi


def load_structure(args):
    """Structure from --preset, --case (+ --r/--f/--s/--domain) or --manifest."""
    chosen = [name for name in ("preset", "case", "manifest") if getattr(args, name)]
    if len(chosen) != 1:
        raise UsageError("give exactly one of --preset, --case, --manifest")
    inline = [f"--{k}" for k in ("r", "f", "s", "domain") if getattr(args, k) is not None]
    if chosen[0] != "case" and inline:
        raise UsageError(f"{', '.join(inline)} only apply with --case")
    if args.preset:
        return PRESETS[args.preset]()
    if args.manifest:
        return read_manifest(args.manifest)
    missing = [f"--{k}" for k in ("r", "f", "s", "domain") if getattr(args, k) is None]
    if missing:
        raise UsageError(f"--case needs {', '.join(missing)}")
    return build_family(args.case, args.r, args.f, args.s, _parse_interval(args.domain))


def _grid(args, structure) -> SampleGrid:
    box = args.box if args.box else default_box(structure.domain)
    return SampleGrid.parse(args.grid, box, seed=args.seed, lam_min=args.lambda_min)


def _write(text: str, sink: str) -> None:
    if sink == "-":
        sys.stdout.write(text)
        return
    with open(sink, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _cmd_construct(args) -> int:
    s = load_structure(args)
    _write(dumps_manifest(s), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    s = load_structure(args)
    grid = _grid(args, s)
    suites = [x for x in _split_suites(args.suite) if x]
    report = run_suites(s, suites, grid, dict(args.tol))
    emit_report(report, args.format, args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _split_suites(text: str) -> list[str]:
    # commas inside deformation(...) are not separators
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    out.append(cur.strip())
    return out


def _cmd_nullity(args) -> int:
    s = load_structure(args)
    grid = _grid(args, s)
    pts = grid.points(s.domain)
    if len(pts) == 0:
        raise EmptyGridAfterExclusions("no grid points lie in the structure domain")
    rows = nullity_rows(s, pts)
    rows = [r for r in rows if r["lambda"] >= args.lambda_min]
    if args.out == "-":
        write_nullity_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_nullity_csv(rows, fh)
    return EXIT_OK


def _cmd_deform(args) -> int:
    s = load_structure(args)
    d = d_homothetic_deform(s, args.alpha)
    grid = _grid(args, s)
    report = run_suite(s, f"deformation({args.alpha!r})", grid)
    _write(dumps_manifest(d), args.out)
    if args.report:
        emit_report(report, args.report_format, args.report)
    else:
        sys.stderr.write(report_text(report))
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {"construct": _cmd_construct, "verify": _cmd_verify, "nullity": _cmd_nullity, "deform": _cmd_deform}


VALUE_FLAGS = ("--box", "--domain")


def _join_values(argv: Sequence[str]) -> list[str]:
    """Glue ``--box -1,1,...`` into ``--box=-1,1,...`` so argparse does not read the value as a flag."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_values(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, GridSpecError) as exc:
        print(f"parakmu {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        ParseError,
        DomainViolation,
        ValidationFailure,
        ManifestError,
        OutOfDomain,
        NonpositiveAlpha,
        EmptyGridAfterExclusions,
        JetError,
        ValueError,
    ) as exc:
        print(f"parakmu {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ReportIOError, OSError) as exc:
        print(f"parakmu {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
