"""Command-line front end: ``risnoma <command> [flags]``.

Settings resolve in three layers: built-in defaults, then an optional
``--config`` file of ``key=value`` lines, then flags given on the command
line.  Keys in the file use the flag names without the leading dashes
(``pmax-dbm=80``); repeatable flags take comma-separated lists there
(``pair=2:2,4:2``).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from . import __version__
from .channel import SystemParams
from .engine import (
    SCHEMES,
    ExperimentConfig,
    power_sweep,
    run_calibrate,
    run_pdfcheck,
    run_rateloss,
    run_sumrate,
    run_validate_bounds,
)
from .quantize import read_calibration

COMMANDS = ("sumrate", "rateloss", "calibrate", "validate-bounds", "pdfcheck")

DEFAULTS = {
    "n": 10,
    "d1": 10.0,
    "d2": 40.0,
    "dg": 10.0,
    "alpha1": 3.5,
    "alpha2": 2.5,
    "alphag": 2.5,
    "rth": 1.0,
    "zeta1": 1e-5,
    "zeta2": 0.95,
    "b": 4,
    "bprime": 4,
    "pmin_dbm": 0.0,
    "pmax_dbm": 60.0,
    "pstep_dbm": 5.0,
    "trials": 100_000,
    "seed": 1,
    "workers": None,
    "out": "-",
    "scheme": None,
    "pair": None,
    "p_dbm": None,
    "n_values": None,
    "calibration": None,
    "moment_source": "auto",
    "corrupt_c11": None,
}

# powers used when neither --p-dbm nor the sweep flags are given
COMMAND_POWERS = {"rateloss": (40.0, 60.0), "validate-bounds": (60.0,)}
# trial counts used when --trials is not given
COMMAND_TRIALS = {"calibrate": 1_000_000}


class UsageError(Exception):
    pass


def _pair(text: str) -> tuple[int, int]:
    try:
        b, bp = text.split(":")
        return int(b), int(bp)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected B:B_prime, got {text!r}") from None


def _scheme(text: str) -> str:
    if text not in SCHEMES:
        raise argparse.ArgumentTypeError(f"unknown scheme {text!r}; choose from {', '.join(SCHEMES)}")
    return text


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


# dest -> (flag, converter, repeatable, help)
_FLAGS = {
    "n": ("--n", int, False, "RIS elements"),
    "d1": ("--d1", float, False, "BS to User 1 distance"),
    "d2": ("--d2", float, False, "BS to RIS distance"),
    "dg": ("--dg", float, False, "RIS to User 2 distance"),
    "alpha1": ("--alpha1", float, False, "path-loss exponent, direct link"),
    "alpha2": ("--alpha2", float, False, "path-loss exponent, BS to RIS"),
    "alphag": ("--alphag", float, False, "path-loss exponent, RIS to User 2"),
    "rth": ("--rth", float, False, "weak-user target rate, bits/s/Hz"),
    "zeta1": ("--zeta1", float, False, "quantizer step scale"),
    "zeta2": ("--zeta2", float, False, "quantizer step decay per bit"),
    "b": ("--b", int, False, "gain feedback bits"),
    "bprime": ("--bprime", int, False, "RIS phase feedback bits"),
    "pmin_dbm": ("--pmin-dbm", float, False, "sweep start, dBm"),
    "pmax_dbm": ("--pmax-dbm", float, False, "sweep end, dBm"),
    "pstep_dbm": ("--pstep-dbm", float, False, "sweep step, dB"),
    "trials": ("--trials", _positive_int, False, "Monte Carlo trials per cell"),
    "seed": ("--seed", int, False, "master seed"),
    "workers": ("--workers", _positive_int, False, "worker processes (default: CPU count)"),
    "out": ("--out", str, False, "output CSV path, '-' for stdout"),
    "scheme": ("--scheme", _scheme, True, "scheme to run (repeatable)"),
    "pair": ("--pair", _pair, True, "B:B_prime feedback pair (repeatable)"),
    "p_dbm": ("--p-dbm", float, True, "explicit transmit power, dBm (repeatable)"),
    "n_values": ("--n-values", int, True, "RIS sizes to calibrate (repeatable)"),
    "calibration": ("--calibration", str, False, "calibration CSV for the eta moments"),
    "moment_source": ("--moment-source", str, False, "eta moments: auto, analytic or empirical"),
    "corrupt_c11": ("--corrupt-c11", float, False, argparse.SUPPRESS),
}

_KEY_TO_DEST = {flag.lstrip("-"): dest for dest, (flag, *_rest) in _FLAGS.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risnoma", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"risnoma {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="key=value file overriding the defaults")
        for dest, (flag, conv, repeatable, text) in _FLAGS.items():
            shown = text
            if text is not argparse.SUPPRESS and DEFAULTS[dest] is not None:
                shown = f"{text} (default: {DEFAULTS[dest]})"
            cmd.add_argument(
                flag,
                dest=dest,
                type=conv,
                action="append" if repeatable else "store",
                default=None,
                help=shown,
            )
    return parser


def read_config_file(path: str) -> dict:
    """Parse a ``key=value`` file into converted settings."""
    settings = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            dest = _KEY_TO_DEST.get(key) or _KEY_TO_DEST.get(key.replace("_", "-"))
            if dest is None or dest in ("out", "workers"):
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            _, conv, repeatable, _ = _FLAGS[dest]
            try:
                if repeatable:
                    settings[dest] = [conv(v.strip()) for v in value.split(",") if v.strip()]
                else:
                    settings[dest] = conv(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return settings


def resolve(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    given = read_config_file(args.config) if args.config else {}
    given.update({dest: getattr(args, dest) for dest in _FLAGS if getattr(args, dest) is not None})
    settings.update(given)
    settings["sweep_given"] = bool({"pmin_dbm", "pmax_dbm", "pstep_dbm"} & set(given))
    settings["trials_given"] = "trials" in given
    return settings


def build_config(command: str, s: dict) -> tuple[ExperimentConfig, dict]:
    params = SystemParams(
        N=s["n"],
        d1=s["d1"],
        d2=s["d2"],
        dg=s["dg"],
        alpha1=s["alpha1"],
        alpha2=s["alpha2"],
        alphag=s["alphag"],
        R_th=s["rth"],
        B=s["b"],
        B_prime=s["bprime"],
        zeta1=s["zeta1"],
        zeta2=s["zeta2"],
        seed=s["seed"],
    )
    if s["p_dbm"]:
        powers = tuple(s["p_dbm"])
    elif command in COMMAND_POWERS and not s["sweep_given"]:
        powers = COMMAND_POWERS[command]
    else:
        powers = power_sweep(s["pmin_dbm"], s["pmax_dbm"], s["pstep_dbm"])
    pairs = tuple(s["pair"]) if s["pair"] else ((s["b"], s["bprime"]),)
    schemes = tuple(dict.fromkeys(s["scheme"])) if s["scheme"] else SCHEMES
    calibration = read_calibration(s["calibration"]) if s["calibration"] else None
    config = ExperimentConfig(
        params=params,
        powers_dBm=powers,
        bit_pairs=tuple(dict.fromkeys(pairs)),
        schemes=schemes,
        trials=s["trials"] if s["trials_given"] else COMMAND_TRIALS.get(command, s["trials"]),
        workers=s["workers"] or os.cpu_count() or 1,
        calibration=calibration,
        moment_source=s["moment_source"],
        corrupt=(("C11", s["corrupt_c11"]),) if s["corrupt_c11"] is not None else (),
    )
    return config, s


def write_report(report, stream) -> None:
    for line in report.comments:
        stream.write(f"# {line}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(report.header)
    writer.writerows(report.rows)


def execute(command: str, config: ExperimentConfig, settings: dict):
    if command == "sumrate":
        return run_sumrate(config)
    if command == "rateloss":
        return run_rateloss(config)
    if command == "calibrate":
        return run_calibrate(config, settings["n_values"])
    if command == "validate-bounds":
        return run_validate_bounds(config)
    return run_pdfcheck(config)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args)
        config, settings = build_config(args.command, settings)
        out = settings["out"]
        if out == "-":
            report = execute(args.command, config, settings)
            write_report(report, sys.stdout)
        else:
            with open(out, "w", newline="") as stream:
                report = execute(args.command, config, settings)
                write_report(report, stream)
    except (ValueError, RuntimeError, OSError, UsageError) as exc:
        print(f"risnoma {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if not report.passed:
        print(f"risnoma {args.command}: one or more certificates failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
