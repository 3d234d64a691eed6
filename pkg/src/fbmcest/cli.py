"""Command-line front end.

Subcommands::

    fbmcest weights  --M 512 --K 3
    fbmcest preamble dump --family iam-c --M 8 [--antenna 0] [--out grid.csv]
    fbmcest simulate [--config run.toml] [--set trials=100 ...] --out results/
    fbmcest papr --M 512 --K 3 [--family iam-c ...] --out papr.csv

Exit codes: 0 ok, 2 usage, 3 configuration error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegeneratePilotError, InterferenceNotApproximable, ParameterError
from .fbcore import design_prototype, PrototypeFilter
from .harness import ExperimentConfig, papr_profile, run_sweep, write_papr_csv
from .interference import closed_form_weights
from .preamble import Family, PreambleSpec, generate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3, 4
CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def format_symbol(z: complex) -> str:
    """``1``, ``-j``, ``0.5``, ``0`` ... as printed in preamble tables."""
    z = complex(z)
    re, im = z.real, z.imag

    def num(x):
        return "1" if x == 1 else "-1" if x == -1 else repr(float(x)).rstrip("0").rstrip(".")
    if im == 0:
        return "0" if re == 0 else num(re)
    if re == 0:
        return "j" if im == 1 else "-j" if im == -1 else f"{num(im)}j"
    return f"{num(re)}{'+' if im > 0 else '-'}{num(abs(im)).lstrip('-')}j"


def grid_csv(symbols: np.ndarray, fmt: str = "pairs") -> str:
    """One line per subcarrier, time running left to right.

    ``pairs`` writes each cell as two fields ``re,im``; ``symbolic`` writes
    one field such as ``-j``.
    """
    def cell(v):
        if fmt == "symbolic":
            return format_symbol(v)
        return f"{format_symbol(v.real)},{format_symbol(v.imag)}"
    return "\n".join(",".join(cell(v) for v in row) for row in symbols) + "\n"


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a TOML file plus ``key=value`` overrides."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            values = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from None
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        values[key.strip()] = _parse_value(text.strip())
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}; allowed: {list(CONFIG_KEYS)}")
    for key in ("methods", "snr_db"):
        if key in values and not isinstance(values[key], (list, tuple)):
            values[key] = [values[key]]
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _filter(args) -> PrototypeFilter:
    if getattr(args, "filter_csv", None):
        return PrototypeFilter.from_csv(args.filter_csv, args.M)
    return design_prototype(args.M, args.K)


def cmd_weights(args) -> int:
    table = closed_form_weights(_filter(args))
    if args.json:
        print(json.dumps(table.as_dict()))
    else:
        for k, v in table.as_dict().items():
            print(f"{k:8s} {v: .6f}")
    return EXIT_OK


def cmd_preamble(args) -> int:
    base = Family(args.base) if args.base else Family.IAM_C
    spec = PreambleSpec(Family(args.family), args.M, n_tx=args.n_tx, n_rx=args.n_rx,
                        seed=args.seed, L_h=args.L_h, base=base)
    if Family.E_IAM_C in (spec.family, spec.base):
        spec = spec.with_epsilon_of(closed_form_weights(design_prototype(args.M, args.K)))
    frames = generate(spec)
    if not 0 <= args.antenna < len(frames):
        raise ConfigError(f"antenna index {args.antenna} outside 0..{len(frames) - 1}")
    text = grid_csv(frames[args.antenna].symbols, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set or ())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_sweep(cfg)
    res.to_csv(out / "nmse.csv")
    write_papr_csv(res.papr, out / "papr.csv")
    res.write_manifest(out / "manifest.json")
    for r in res.rows():
        print(f"{r['method']:8s} {r['snr_db']:6.1f} dB  NMSE {10 * np.log10(r['nmse_mean']):8.2f} dB"
              f"  (excluded {r['excluded']})")
    return EXIT_OK


def cmd_papr(args) -> int:
    filt = _filter(args)
    table = closed_form_weights(filt)
    profiles = {}
    for fam in args.family:
        spec = PreambleSpec(Family(fam), args.M, seed=args.seed).with_epsilon_of(table)
        prof = papr_profile(generate(spec)[0], filt)
        profiles[fam] = prof
        print(f"{fam:8s} peak {prof.power.max():10.3f}  PAPR {prof.papr_db:6.2f} dB")
    if args.out:
        write_papr_csv(profiles, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbmcest", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def filt_args(p):
        p.add_argument("--M", type=int, default=512, help="number of subcarriers")
        p.add_argument("--K", type=int, default=3, help="overlapping factor")
        p.add_argument("--filter-csv", help="prototype coefficients, one per line")

    p = sub.add_parser("weights", help="print the interference weights")
    filt_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("preamble", help="preamble utilities")
    psub = p.add_subparsers(dest="action", required=True)
    d = psub.add_parser("dump", help="write a preamble grid as CSV")
    d.add_argument("--family", required=True, choices=[f.value for f in Family])
    d.add_argument("--M", type=int, default=8)
    d.add_argument("--K", type=int, default=3)
    d.add_argument("--n-tx", type=int, default=1)
    d.add_argument("--n-rx", type=int, default=1)
    d.add_argument("--antenna", type=int, default=0)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--L-h", type=int, default=None, help="channel length for sparse preambles")
    d.add_argument("--base", choices=[f.value for f in Family], default=None,
                   help="IAM layout repeated by mimo-iam")
    d.add_argument("--format", choices=["pairs", "symbolic"], default="pairs",
                   help="cells as re,im pairs (default) or as 1, -j, ...")
    d.add_argument("--out")
    d.set_defaults(func=cmd_preamble)

    p = sub.add_parser("simulate", help="run a Monte Carlo NMSE sweep")
    p.add_argument("--config", help="TOML file with experiment settings")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a setting")
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("papr", help="power profile and PAPR of preamble signals")
    filt_args(p)
    p.add_argument("--family", nargs="+", default=["e-iam-c", "iam-c", "iam-r", "iam-i"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_papr)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, ParameterError, InterferenceNotApproximable, OSError) as exc:
        print(f"fbmcest: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegeneratePilotError as exc:
        print(f"fbmcest: runtime error: {exc} (subcarriers {list(exc.subcarriers)[:8]})",
              file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort diagnostic
        print(f"fbmcest: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
