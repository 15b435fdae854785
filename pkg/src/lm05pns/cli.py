"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 self-check failure.
Parameter precedence: command-line flag, then ``--config`` file, then the
command's built-in defaults.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, analytics, reports
from .adversary import BlockPlacement, EveKind, EveStrategy
from .analytics import Protocol, load_cascade_table
from .config import ConfigError, read_config, resolve
from .engine import SessionConfig
from .source import LinkParams

log = logging.getLogger("lm05pns")

EXIT_OK, EXIT_USAGE, EXIT_SELF_CHECK = 0, 1, 2

GLOBAL_DEFAULTS: dict[str, object] = {
    "seed": 0,
    "threads": 1,
    "eta_in_gamma": False,
    "account_cm": False,
    "cascade_table": "",
}

RATE_CURVE_DEFAULTS: dict[str, object] = {
    "mu": 1.0,
    "eta_b": 1.0,
    "gamma_c": 0.0,
    "start": 1e-3,
    "stop": 1.0,
    "points": 301,
    "scale": "log",
}

GAIN_DISTANCE_DEFAULTS: dict[str, object] = {
    "alpha": 2.5,
    "gamma_c": 8.0,
    "d_b": 5e-8,
    "eta_b": 0.5,
    "c": 0.5,
    "e_model": "dark",
    "e_det": 0.0248,
    "distances": list(reports.DEFAULT_DISTANCES),
    "max_distance": True,
}

EXPERIMENT_DEFAULTS: dict[str, object] = {
    "mu": 0.118,
    "e": 0.0248,
    "t_link": 0.27,
    "eta_b": 0.5,
    "d_b": 2.4e-6,
    "rep_rate": 20e6,
    "c": 0.5,
}

SIMULATE_DEFAULTS: dict[str, object] = {
    "protocol": "LM05",
    "eve": "none",
    "block": "forward",
    "backward_fraction": 0.5,
    "pulses": 1_000_000,
    "mu": 0.118,
    "alpha": 2.5,
    "distance": 0.0,
    "gamma_c": 5.7,
    "eta_b": 0.5,
    "d_b": 2.4e-6,
    "c": 0.5,
    "rep_rate": 20e6,
    "gamma_split": 0.5,
    "alice_eta": -1.0,
    "alice_d_b": -1.0,
    "self_check": False,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    # registered on the main parser and on every subcommand so they work on
    # either side of the subcommand name; subcommands only set what is given
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="64-bit RNG seed")
    p.add_argument("--config", default=d, help="key=value parameter file")
    p.add_argument("--out", default=d, help="write CSV here instead of stdout")
    p.add_argument("--eta-in-gamma", action="store_const", const=True, default=d,
                   help="treat detector efficiency as already inside gamma_c")
    p.add_argument("--account-cm", action="store_const", const=True, default=d,
                   help="scale LM05 gain by the message-mode fraction 1-c")
    p.add_argument("--threads", type=int, default=d)
    p.add_argument("--cascade-table", default=d,
                   help="two-column QBER/efficiency file for f_casc")
    p.add_argument("--format", choices=("csv", "gnuplot"), default=d)
    p.add_argument("-v", "--verbose", action="store_const", const=True, default=d)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lm05pns", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    rc = sub.add_parser("rate-curve", help="security margin vs transmittance")
    _add_globals(rc, suppress=True)
    rc.add_argument("--mu", type=float)
    rc.add_argument("--eta-b", type=float)
    rc.add_argument("--gamma-c", type=float)
    rc.add_argument("--start", type=float)
    rc.add_argument("--stop", type=float)
    rc.add_argument("--points", type=int)
    rc.add_argument("--scale", choices=("linear", "log"))

    gd = sub.add_parser("gain-distance", help="optimal secure gain vs distance")
    _add_globals(gd, suppress=True)
    gd.add_argument("--alpha", type=float)
    gd.add_argument("--gamma-c", type=float)
    gd.add_argument("--d-b", type=float)
    gd.add_argument("--eta-b", type=float)
    gd.add_argument("--c", type=float)
    gd.add_argument("--e-model", choices=("dark", "constant"))
    gd.add_argument("--e-det", type=float,
                    help="misalignment QBER (dark model) or the QBER (constant)")
    gd.add_argument("--distances", type=_float_list, help="comma-separated km")
    gd.add_argument("--no-max-distance", dest="max_distance",
                    action="store_const", const=False)

    ex = sub.add_parser("experiment", help="gains at the experimental working point")
    _add_globals(ex, suppress=True)
    ex.add_argument("--mu", type=float)
    ex.add_argument("--e", type=float)
    ex.add_argument("--t-link", type=float)
    ex.add_argument("--eta-b", type=float)
    ex.add_argument("--d-b", type=float)
    ex.add_argument("--rep-rate", type=float)
    ex.add_argument("--c", type=float)

    sm = sub.add_parser("simulate", help="Monte Carlo session")
    _add_globals(sm, suppress=True)
    sm.add_argument("--protocol", type=str.upper, choices=("LM05", "BB84"))
    sm.add_argument("--eve", choices=[k.value for k in EveKind])
    sm.add_argument("--block", choices=[b.value for b in BlockPlacement])
    sm.add_argument("--backward-fraction", type=float)
    sm.add_argument("--pulses", type=int)
    sm.add_argument("--mu", type=float)
    sm.add_argument("--alpha", type=float)
    sm.add_argument("--distance", type=float, help="Alice-Bob distance in km")
    sm.add_argument("--gamma-c", type=float)
    sm.add_argument("--eta-b", type=float)
    sm.add_argument("--d-b", type=float)
    sm.add_argument("--c", type=float)
    sm.add_argument("--rep-rate", type=float)
    sm.add_argument("--gamma-split", type=float)
    sm.add_argument("--alice-eta", type=float)
    sm.add_argument("--alice-d-b", type=float)
    sm.add_argument("--self-check", action="store_const", const=True,
                    help="exit 2 if MC and closed form differ by more than 5 sigma")
    return parser


def _settings(args: argparse.Namespace, defaults: dict[str, object]) -> dict[str, object]:
    allowed = {**GLOBAL_DEFAULTS, **defaults}
    file_values = read_config(args.config) if args.config else {}
    return resolve(allowed, file_values, vars(args))


@contextlib.contextmanager
def _output(path: str | None):
    if path:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            yield fh
    else:
        yield sys.stdout


def _table(s: dict[str, object]):
    path = s["cascade_table"]
    return load_cascade_table(path) if path else None


def cmd_rate_curve(args, s) -> int:
    p = LinkParams(mu=s["mu"], eta_b=s["eta_b"], gamma_c=s["gamma_c"],
                   eta_in_gamma=s["eta_in_gamma"])
    spec = reports.SweepSpec("t_link", s["start"], s["stop"], s["points"], s["scale"])
    header, rows = reports.rate_curve(p, spec)
    with _output(args.out) as fh:
        reports.write_table(header, rows, fh, args.format or "csv")
    for proto in Protocol:
        t0 = reports.margin_crossing(p, proto)
        print(f"# {proto.value} secure for t_link > {t0:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_gain_distance(args, s) -> int:
    p = LinkParams(alpha=s["alpha"], gamma_c=s["gamma_c"], d_b=s["d_b"],
                   eta_b=s["eta_b"], c=s["c"], eta_in_gamma=s["eta_in_gamma"])
    e_model = reports.e_model_from(s["e_model"], s["e_det"])
    table = _table(s)
    header, rows = reports.gain_distance(
        p, s["distances"], e_model, account_cm=s["account_cm"], table=table,
        threads=s["threads"],
    )
    with _output(args.out) as fh:
        reports.write_table(header, rows, fh, args.format or "csv")
    if s["max_distance"]:
        for proto in Protocol:
            lmax = analytics.max_secure_distance(
                p, proto, e_model, account_cm=s["account_cm"], table=table
            )
            print(f"# {proto.value} maximum secure distance {lmax:.2f} km", file=sys.stderr)
    return EXIT_OK


def cmd_experiment(args, s) -> int:
    results = reports.experiment(
        s["mu"], s["e"], s["t_link"], s["eta_b"], s["d_b"], s["rep_rate"],
        account_cm=s["account_cm"], c=s["c"], table=_table(s),
    )
    selected = "eta-in-gamma" if s["eta_in_gamma"] else "eta-separate"
    sys.stdout.write(reports.experiment_text(results, selected))
    if args.out:
        with _output(args.out) as fh:
            reports.write_table(reports.EXPERIMENT_HEADER,
                                reports.experiment_table(results), fh, args.format or "csv")
    return EXIT_OK


def cmd_simulate(args, s) -> int:
    link = LinkParams(
        mu=s["mu"], alpha=s["alpha"], l=s["distance"], gamma_c=s["gamma_c"],
        eta_b=s["eta_b"], d_b=s["d_b"], c=s["c"], rep_rate=s["rep_rate"],
        eta_in_gamma=s["eta_in_gamma"],
    )
    strategy = EveStrategy(EveKind(s["eve"]), BlockPlacement(s["block"]),
                           s["backward_fraction"])
    cfg = SessionConfig(
        link, Protocol.parse(s["protocol"]), strategy, s["pulses"], s["seed"],
        s["gamma_split"],
        alice_eta=None if s["alice_eta"] < 0 else s["alice_eta"],
        alice_d_b=None if s["alice_d_b"] < 0 else s["alice_d_b"],
    )
    res = reports.simulate(cfg, threads=s["threads"], account_cm=s["account_cm"],
                           table=_table(s))
    sys.stdout.write(reports.simulate_text(res))
    if args.out:
        with _output(args.out) as fh:
            reports.write_table(reports.SIMULATE_HEADER, [res.row()], fh,
                                args.format or "csv")
    if s["self_check"] and res.z_score() > 5.0:
        print(f"self-check failed: {res.z_score():.2f} sigma", file=sys.stderr)
        return EXIT_SELF_CHECK
    return EXIT_OK


COMMANDS = {
    "rate-curve": (cmd_rate_curve, RATE_CURVE_DEFAULTS),
    "gain-distance": (cmd_gain_distance, GAIN_DISTANCE_DEFAULTS),
    "experiment": (cmd_experiment, EXPERIMENT_DEFAULTS),
    "simulate": (cmd_simulate, SIMULATE_DEFAULTS),
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func, defaults = COMMANDS[args.command]
    try:
        settings = _settings(args, defaults)
        if settings["threads"] < 1:
            raise ConfigError("--threads must be at least 1")
        return func(args, settings)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"lm05pns {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
