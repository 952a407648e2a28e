"""Command-line harness: ``lrswap {verify,prob,generator,simulate,table}``.

Settings resolve in the order defaults < config file < flags.  The config
file is a flat JSON object whose keys are the long flag names (dashes or
underscores).  Every report embeds the resolved settings and the tool
version, and carries no timestamps, so identical runs give identical bytes.

Exit codes: 0 success, 1 check or tolerance failure, 2 invalid input or
resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .bethe import QuadratureConfig, poisson_window, probability_table, window_positions
from .dynamics import (
    Configuration,
    extract_generator,
    generator_diff,
    reachable_words,
    series_distribution,
    simulate_ensemble,
)
from .errors import LRSwapError, NumericalInconsistencyWarning
from .pairalg import is_reducibility_check, verify_identities
from .rules import RuleType
from .scatter import DEFAULT_SEED, scattering_report
from .tensor import check_dimension, format_word, parse_word

OUTPUT_ENV = "LRSWAP_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _positions(text: str) -> tuple:
    return tuple(int(p) for p in str(text).replace(" ", "").split(",") if p != "")


# -- argument wiring --------------------------------------------------------------


def _add_rule(p):
    p.add_argument("--rule", default="drop-push", help="drop-push, tasep or non-integrable")


def _add_query(p):
    p.add_argument("--nu", required=False, help="initial species word, e.g. 21 (dot-separated if N > 9)")
    p.add_argument("--Y", dest="Y", default=None, help="initial positions, comma separated (default 0..n-1)")
    p.add_argument("--n", type=int, default=None, help="particle count (checked against --nu)")
    p.add_argument("--N", dest="N", type=int, default=None, help="species count (default max of --nu)")
    p.add_argument("--t", type=float, default=1.0)


def _add_quadrature(p):
    p.add_argument("--r", type=float, default=None,
                   help="contour radius: > 1 for drop-push, < 1 for tasep (default 0.5 for tasep; for drop-push 1.5, or 2.0 "
                        "at n=3, shrinking with the displacement)")
    p.add_argument("--M", dest="M", type=int, default=None, help="nodes per circle (default 64 if n <= 2 else 32)")
    p.add_argument("--convergence-check", action="store_true", default=False, help="also evaluate with 2M nodes")


def _add_output(p):
    p.add_argument("--output-dir", default=None, help=f"directory for report files (default ${OUTPUT_ENV} or .)")
    p.add_argument("--prefix", default=None, help="file name stem (default: subcommand name)")
    p.add_argument("--no-files", action="store_true", default=False, help="print the JSON report only")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrswap", description="Multispecies TASEP with long-range swap: checks and experiments.")
    parser.add_argument("--version", action="version", version=f"lrswap {__version__}")
    parser.add_argument("--config", default=None, help="flat JSON file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="exact identity suite, Yang-Baxter and boundary sums")
    _add_rule(p)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--N", dest="N", type=int, default=2)
    p.add_argument("--triples", type=int, default=20, help="random rational triples for Yang-Baxter")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_output(p)

    p = sub.add_parser("prob", help="per-state probabilities by Bethe quadrature, series oracle and Monte Carlo")
    _add_rule(p)
    _add_query(p)
    p.add_argument("--method", choices=["bethe", "series", "mc", "all"], default="all")
    _add_quadrature(p)
    p.add_argument("--window", type=int, default=None, help="window size beyond y_n (default: Poisson tail rule)")
    p.add_argument("--window-tol", type=float, default=1e-9)
    p.add_argument("--tail-tol", type=float, default=1e-13, help="Poisson tail tolerance of the series oracle")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--bethe-tol", type=float, default=None, help="max |p_bethe - p_series| (default 1e-8, 1e-6 at n=3)")
    p.add_argument("--imag-tol", type=float, default=1e-8)
    p.add_argument("--mc-sigmas", type=float, default=4.0)
    p.add_argument("--mc-min-p", type=float, default=1e-3, help="Monte Carlo is checked on states above this mass")
    _add_output(p)

    p = sub.add_parser("generator", help="extracted dynamics rates against the algebraic master equation")
    _add_rule(p)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--N", dest="N", type=int, default=2)
    p.add_argument("--shape", default=None, help="single target shape, comma separated (default: all gap patterns)")
    p.add_argument("--dump", action="store_true", default=False, help="include the extracted rate matrices")
    _add_output(p)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble of final configurations")
    _add_rule(p)
    _add_query(p)
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_output(p)

    p = sub.add_parser("table", help="Bethe probability table over a window")
    _add_rule(p)
    _add_query(p)
    _add_quadrature(p)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--window-tol", type=float, default=1e-9)
    _add_output(p)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        data = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise _UsageError(f"cannot read config file {known.config}: {exc}")
    if not isinstance(data, dict) or any(isinstance(v, (dict, list)) for v in data.values()):
        raise _UsageError("config file must be a flat JSON object")
    command = known.command
    if command not in COMMANDS:
        raise _UsageError("the subcommand must follow --config on the command line")
    if data.pop("command", command) != command:
        raise _UsageError(f"config file is for another subcommand than {command}")
    sub = _subparser(parser, command)
    dests = {a.dest for a in sub._actions}
    resolved = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise _UsageError(f"unknown config key {key!r} for {command}")
        resolved[dest] = value
    sub.set_defaults(**resolved)


# -- shared helpers ---------------------------------------------------------------


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"config", "output_dir", "prefix", "no_files"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _report(args, status: str, body: dict) -> dict:
    out = {"tool": "lrswap", "version": __version__, "command": args.command, "config": _config_dict(args),
           "status": status}
    out.update(body)
    return out


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _output_dir(args) -> Path:
    return Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")


def _write(args, report: dict, csv_text: Optional[str] = None) -> None:
    sys.stdout.write(_dumps(report))
    if args.no_files:
        return
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.prefix or args.command
    (out / f"{stem}.json").write_text(_dumps(report))
    if csv_text is not None:
        header = f"# lrswap {__version__} {json.dumps(_config_dict(args), sort_keys=True)}\n"
        (out / f"{stem}.csv").write_text(header + csv_text)


def _initial(args) -> Configuration:
    if not args.nu:
        raise _UsageError("--nu is required")
    word = parse_word(str(args.nu))
    n = len(word)
    if args.n is not None and args.n != n:
        raise _UsageError(f"--n {args.n} does not match the word {args.nu}")
    Y = _positions(args.Y) if args.Y is not None else tuple(range(n))
    if len(Y) != n:
        raise _UsageError("--Y and --nu differ in length")
    N = args.N if args.N is not None else max(word)
    if max(word) > N:
        raise _UsageError(f"word {args.nu} uses species beyond N={N}")
    args.n, args.N, args.Y, args.nu = n, N, ",".join(map(str, Y)), format_word(word)
    return Configuration(Y, word)


def _quadrature(args) -> QuadratureConfig:
    return QuadratureConfig(radius=args.r, nodes=args.M, convergence_check=args.convergence_check)


def _num(value) -> str:
    return "" if value is None else repr(float(value))


# -- subcommands ------------------------------------------------------------------


def cmd_verify(args) -> int:
    rule = RuleType.parse(args.rule)
    args.rule = str(rule)
    check_dimension(args.n, args.N)
    identities = verify_identities(args.n, args.N, rule)
    scattering = scattering_report(args.n, args.N, rule, triples=args.triples, seed=args.seed)
    ybe = [c for c in scattering.checks if c.name.startswith("yang_baxter")]
    ybe_ok = all(c.passed for c in ybe)
    reducibility_failures = [c.name for c in identities.checks if is_reducibility_check(c.name) and not c.passed]
    if rule.integrable:
        ok = identities.all_passed and scattering.all_passed
        expectation = "all checks pass"
    else:
        ok = ybe_ok and bool(reducibility_failures)
        expectation = "Yang-Baxter passes and at least one reducibility check fails"
    report = _report(args, "pass" if ok else "fail", {
        "expectation": expectation,
        "identities": identities.to_dict()["checks"],
        "scattering": scattering.to_dict()["checks"],
        "summary": {
            "checks": len(identities.checks) + len(scattering.checks),
            "failed": [c.name for c in identities.failures + scattering.failures],
            "yang_baxter": ybe_ok,
            "reducibility_failures": reducibility_failures,
        },
    })
    _write(args, report)
    return EXIT_OK if ok else EXIT_FAIL


def _window(args, c0: Configuration) -> int:
    if args.window is None:
        args.window = poisson_window(c0.n, args.t, args.window_tol)
    return args.window


def cmd_prob(args) -> int:
    rule = RuleType.parse(args.rule)
    args.rule = str(rule)
    c0 = _initial(args)
    methods = ["bethe", "series", "mc"] if args.method == "all" else [args.method]
    window = _window(args, c0)
    positions = window_positions(c0.positions, window)
    words = reachable_words(c0.word)
    states = [Configuration(x, w) for x in positions for w in words]
    if args.bethe_tol is None:
        args.bethe_tol = 1e-8 if c0.n <= 2 else 1e-6

    bethe = series = mc = None
    imag: Dict[Configuration, float] = {}
    extra = {}
    if "bethe" in methods:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NumericalInconsistencyWarning)
            table = probability_table(c0, args.t, window, rule, _quadrature(args), N=args.N)
        args.M = table.nodes
        extra["contour"] = {"r": table.radius, "r_min": table.min_radius, "M": table.nodes}
        bethe = {Configuration(r.positions, r.word): r.probability for r in table.rows}
        imag = {Configuration(r.positions, r.word): r.imag_residual for r in table.rows}
        extra["bethe_total_mass"] = table.total_mass
    if "series" in methods:
        res = series_distribution(c0, args.t, rule, args.tail_tol)
        series = {s: res.probability(s) for s in states}
        extra["series_cutoff"] = res.cutoff
        extra["series_mass_outside_window"] = res.total_mass - math.fsum(series.values())
    if "mc" in methods:
        counts = simulate_ensemble(c0, args.t, args.trials, args.seed, rule)
        mc = {s: counts.get(s, 0) / args.trials for s in states}
        extra["mc_outside_window"] = sum(v for s, v in counts.items() if s not in mc)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x_{i}" for i in range(1, c0.n + 1)] + ["word", "p_bethe", "p_series", "p_mc", "abs_diff",
                                                              "imag_residual"])
    for s in states:
        vals = [d[s] for d in (bethe, series, mc) if d is not None]
        diff = max((abs(a - b) for a, b in itertools.combinations(vals, 2)), default=None)
        writer.writerow(list(s.positions) + [format_word(s.word)] + [
            _num(None if d is None else d[s]) for d in (bethe, series, mc)
        ] + [_num(diff), _num(imag.get(s))])

    checks = []
    if bethe is not None and series is not None:
        worst = max(abs(bethe[s] - series[s]) for s in states)
        checks.append({"name": "bethe_vs_series", "max_abs_diff": worst, "tol": args.bethe_tol,
                       "pass": worst < args.bethe_tol})
    if bethe is not None:
        worst = max(map(abs, imag.values()), default=0.0)
        checks.append({"name": "bethe_imag_residual", "max_abs": worst, "tol": args.imag_tol,
                       "pass": worst < args.imag_tol})
    reference = series if series is not None else bethe
    if mc is not None and reference is not None:
        worst_z, breaches, tested = 0.0, [], 0
        for s in states:
            p = reference[s]
            if p <= args.mc_min_p:
                continue
            tested += 1
            se = math.sqrt(p * (1 - p) / args.trials)
            z = abs(mc[s] - p) / se if se > 0 else 0.0
            worst_z = max(worst_z, z)
            if z > args.mc_sigmas:
                breaches.append(s.key())
        checks.append({"name": "mc_vs_" + ("series" if series is not None else "bethe"), "states_tested": tested,
                       "max_z": worst_z, "sigmas": args.mc_sigmas, "breaches": breaches, "pass": not breaches})
    ok = all(c["pass"] for c in checks)
    report = _report(args, "pass" if ok else "fail", {"states": len(states), "checks": checks, "details": extra})
    _write(args, report, buf.getvalue())
    return EXIT_OK if ok else EXIT_FAIL


def _shapes(n: int) -> List[tuple]:
    shapes = []
    for gaps in itertools.product((1, 2), repeat=n - 1):
        shapes.append(tuple(itertools.accumulate((0,) + gaps)))
    return shapes


def cmd_generator(args) -> int:
    rule = RuleType.parse(args.rule)
    args.rule = str(rule)
    shapes = [_positions(args.shape)] if args.shape else _shapes(args.n)
    if args.shape and len(shapes[0]) != args.n:
        raise _UsageError("--shape length differs from --n")
    results = []
    for shape in shapes:
        diffs = generator_diff(shape, args.N, rule)
        entry = {"shape": list(shape), "mismatches": diffs}
        if args.dump:
            entry["outgoing"] = extract_generator(shape, args.N, rule).to_dict()
        results.append(entry)
    ok = not any(r["mismatches"] for r in results)
    report = _report(args, "pass" if ok else "fail", {"shapes": results})
    _write(args, report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    rule = RuleType.parse(args.rule)
    args.rule = str(rule)
    c0 = _initial(args)
    counts = simulate_ensemble(c0, args.t, args.trials, args.seed, rule)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x_{i}" for i in range(1, c0.n + 1)] + ["word", "count", "p_mc"])
    for s, k in counts.items():
        writer.writerow(list(s.positions) + [format_word(s.word), k, repr(k / args.trials)])
    report = _report(args, "pass", {"distinct_states": len(counts), "trials": args.trials})
    _write(args, report, buf.getvalue())
    return EXIT_OK


def cmd_table(args) -> int:
    rule = RuleType.parse(args.rule)
    args.rule = str(rule)
    c0 = _initial(args)
    window = _window(args, c0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalInconsistencyWarning)
        table = probability_table(c0, args.t, window, rule, _quadrature(args), N=args.N)
    args.M, args.r = table.nodes, table.radius
    ok = not table.flagged
    report = _report(args, "pass" if ok else "fail", table.summary())
    _write(args, report, table.to_csv())
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "verify": cmd_verify,
    "prob": cmd_prob,
    "generator": cmd_generator,
    "simulate": cmd_simulate,
    "table": cmd_table,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (_UsageError, LRSwapError, ValueError) as exc:
        kind = type(exc).__name__ if isinstance(exc, LRSwapError) else "InvalidParameterError"
        sys.stderr.write(_dumps({"tool": "lrswap", "version": __version__, "status": "error", "error": kind,
                                 "message": str(exc)}))
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
