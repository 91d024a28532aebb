"""Command-line interface: ``conerisk {statdim,limits,sweep,table1,verify}``.

Exit status: 0 success, 1 usage error, 2 numerical failure, 3 verification
failure. ``$CONERISK_WORKERS`` sets the process count and never changes the
numbers printed.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import limits as L
from . import risklab as R
from . import sets as S
from . import verify as V
from .exceptions import ConeriskError, InvalidInputError, NumericalError
from .numerics import format_float, read_csv_vector
from .statdim import DEFAULT_SAMPLES, mc_statdim, parse_noise

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3

SCENARIO_KEYS = ("set", "theta", "noise", "sigma_min", "sigma_max", "sigma_points",
                 "samples", "seed")


class UsageError(InvalidInputError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------

def _split_numbers(text: str) -> list[str]:
    text = text.strip().strip("()[]")
    toks = [t.strip() for t in text.replace(";", ",").split(",")]
    if not toks or any(not t for t in toks):
        raise UsageError(f"cannot parse number list {text!r}")
    return toks


def parse_theta(text: str, base_dir: Path | None = None, exact: bool = False) -> list:
    """Inline list (``1,-1,0.5``) or a CSV file holding one vector.

    With ``exact`` the decimal strings are converted to Fractions without
    rounding.
    """
    text = text.strip()
    path = Path(text)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if text.lower().endswith(".csv") or (path.exists() and path.is_file()):
        if not path.exists():
            raise UsageError(f"theta file not found: {path}")
        if exact:
            with open(path, encoding="utf-8") as fh:
                toks = [t for line in fh if line.strip() for t in _split_numbers(line)]
        else:
            return list(read_csv_vector(path))
    else:
        toks = _split_numbers(text)
    try:
        if exact:
            return [Fraction(t) for t in toks]
        return [float(t) for t in toks]
    except ValueError:
        raise UsageError(f"cannot parse theta {text!r}") from None


def read_scenario_file(path: str | Path) -> R.Scenario:
    """Parse a ``key = value`` scenario file (``#`` starts a comment)."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"scenario file not found: {path}")
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip().lower()
            if not sep or not key:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            if key not in SCENARIO_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val.strip()
    for req in ("set", "theta"):
        if req not in values:
            raise UsageError(f"{path}: missing required key {req!r}")
    base = path.parent
    cset = S.parse_set_spec(values["set"], base_dir=base)
    theta = np.asarray(parse_theta(values["theta"], base), dtype=float)
    noise_text = values.get("noise", "gaussian")
    if noise_text.startswith("table:") and not Path(noise_text[6:]).is_absolute():
        noise_text = "table:" + str(base / noise_text[6:])
    try:
        grid = R.default_sigma_grid(float(values.get("sigma_min", 1e-3)),
                                    float(values.get("sigma_max", 1e3)),
                                    int(values.get("sigma_points", 41)))
        samples = int(values.get("samples", DEFAULT_SAMPLES))
        seed = int(values.get("seed", 0))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return R.Scenario(cset, theta, parse_noise(noise_text), grid, samples, seed)


def _out(lines: Sequence[str] | str, stream=None) -> None:
    stream = stream or sys.stdout
    text = lines if isinstance(lines, str) else "\n".join(lines) + "\n"
    stream.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_statdim(args) -> int:
    cset = S.parse_set_spec(args.set)
    if not cset.is_cone:
        raise UsageError(f"{args.set!r} is not a cone")
    if args.hyperplane:
        v = read_csv_vector(args.hyperplane)
        cset = S.FaceCone.from_set(cset, v)
    est = mc_statdim(cset, parse_noise(args.noise), args.samples, args.seed)
    _out(f"{format_float(est.value)},{format_float(est.std_error)},{est.samples},{est.seed}\n")
    return EXIT_OK


def cmd_limits(args) -> int:
    cset = S.parse_set_spec(args.set)
    theta = parse_theta(args.theta, exact=args.exact)
    if len(theta) != cset.dim:
        raise UsageError(f"theta has dimension {len(theta)}, the set has {cset.dim}")
    report = L.limit_report(cset, theta, args.samples, args.seed, parse_noise(args.noise),
                            exact=args.exact or None)
    _out(report.lines())
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = read_scenario_file(args.scenario)
    points = R.simulate_risks(scenario)
    text = R.curve_csv(points)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        _out(text)
    return EXIT_OK


def cmd_table1(args) -> int:
    rows = R.table1_report(args.samples, args.seed, args.sigma, simulate=not args.analytic)
    _out(R.table1_lines(rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    make = V.VerifyConfig.quick if args.quick else V.VerifyConfig
    kw = {"seed": args.seed, "margin_scale": args.margin_scale}
    if args.samples is not None:
        kw["samples"] = args.samples
    report = V.run_verify(make(**kw))
    text = report.text()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    _out(text)
    return EXIT_OK if report.ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conerisk",
                description="Constrained least squares risk limits and simulations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def mc_flags(sp, samples=DEFAULT_SAMPLES):
        sp.add_argument("--samples", type=int, default=samples)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--noise", default="gaussian",
                        help="gaussian, scaled-uniform or table:<csv of value,weight rows>")

    sp = sub.add_parser("statdim", help="Monte Carlo statistical dimension of a cone")
    sp.add_argument("--set", required=True, help="set spec, e.g. monotone:n=6")
    sp.add_argument("--hyperplane", help="CSV vector v; intersect the cone with v-perp")
    mc_flags(sp)
    sp.set_defaults(func=cmd_statdim)

    sp = sub.add_parser("limits", help="low- and high-noise limits for one scenario")
    sp.add_argument("--set", required=True)
    sp.add_argument("--theta", required=True, help="CSV file or inline list such as 1,-1,0")
    sp.add_argument("--exact", action="store_true",
                    help="rational arithmetic for the isotonic partition")
    mc_flags(sp)
    sp.set_defaults(func=cmd_limits)

    sp = sub.add_parser("sweep", help="risk curves over a noise grid, as CSV")
    sp.add_argument("scenario", help="scenario file with key = value lines")
    sp.add_argument("-o", "--output", help="write CSV here instead of standard output")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("table1", help="isotonic regression limits for the six examples")
    sp.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sigma", type=float, default=1e-3)
    sp.add_argument("--analytic", action="store_true", help="skip the simulation column")
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("verify", help="run the numerical acceptance checks")
    sp.add_argument("--quick", action="store_true", help="fewer Monte Carlo samples")
    sp.add_argument("--seed", type=int, default=V.VerifyConfig.seed)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--margin-scale", type=float, default=1.0,
                    help="scale of the 3*SE + 0.01 margins (0 gives a negative control)")
    sp.add_argument("-o", "--output", help="also write the report to this file")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"conerisk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConeriskError, OSError) as exc:
        print(f"conerisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
