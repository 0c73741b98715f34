"""Command-line front end: sweeps, timing, verification, and trace dumps.

Subcommands mirror the library operations one-to-one. Every experiment
subcommand accepts an optional config file (JSON mapping or INI sections)
whose keys mirror ExperimentConfig; any command-line flag overrides the
file. A seed is mandatory before any results are emitted, so every CSV and
JSON artifact is reproducible from its sidecar alone.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

from .sim import (
    DEFAULT_ORACLE_TOL,
    ExperimentConfig,
    build_instance,
    parse_scheme,
    run_blocklength_sweep,
    run_ser_sweep,
    run_timing_bench,
    write_csv,
    write_sidecar,
    _ADMM_KINDS,
)
from .solvers import AdmmConfig, solve
from .verify_suite import run_all

# default Monte-Carlo volume: at the reference 10x10, N=8 size this gives
# 25000 * 5 blocks = 1e7 symbol decisions, enough to resolve an SER of 1e-5
DEFAULT_TRIALS = 25_000
DEFAULT_BLOCKS_PER_CHANNEL = 5

_CONFIG_FIELDS = {
    "scheme": str,
    "num_antennas": int,
    "num_users": int,
    "block_length": int,
    "psk_order": int,
    "snr_db": "float_list",
    "block_lengths": "int_list",
    "trials": int,
    "blocks_per_channel": int,
    "seed": int,
    "p0": float,
    "rho": float,
}


def _parse_float_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(part) for part in str(text).split(",") if part.strip())


def _parse_int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    return tuple(int(part) for part in str(text).split(",") if part.strip())


def _coerce(name: str, raw):
    kind = _CONFIG_FIELDS[name]
    if kind == "float_list":
        return _parse_float_list(raw)
    if kind == "int_list":
        return _parse_int_list(raw)
    return kind(raw)


def load_config_file(path: str) -> dict:
    """Read a JSON mapping or an INI file into ExperimentConfig keyword form.

    INI sections are merged in order, so a flat [experiment] section and
    nested groups both work; unknown keys are rejected either way.
    """
    text = Path(path).read_text()
    stripped = text.lstrip()
    values = {}
    if stripped.startswith("{"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("config file must contain a JSON object")
        items = raw.items()
    else:
        parser = configparser.ConfigParser()
        parser.read_string(text)
        items = []
        for section in parser.sections():
            items.extend(parser.items(section))
        items.extend(parser.defaults().items())
    for key, raw_value in items:
        key = key.strip().lower()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw_value)
    return values


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON or INI file with ExperimentConfig keys")
    sub.add_argument("--scheme", help="scheme tag, e.g. zf or ci-blp-admm2-50")
    sub.add_argument("--num-antennas", type=int, dest="num_antennas")
    sub.add_argument("--num-users", type=int, dest="num_users")
    sub.add_argument("--block-length", type=int, dest="block_length")
    sub.add_argument("--psk-order", type=int, dest="psk_order")
    sub.add_argument("--snr-db", dest="snr_db",
                     help="comma-separated SNR list in dB, e.g. 0,10,20,30")
    sub.add_argument("--block-lengths", dest="block_lengths",
                     help="comma-separated block-length list for the sweep axis")
    sub.add_argument("--trials", type=int, help="channel realizations per point")
    sub.add_argument("--blocks-per-channel", type=int, dest="blocks_per_channel")
    sub.add_argument("--seed", type=int, help="master seed (required to emit results)")
    sub.add_argument("--p0", type=float, help="transmit power budget per slot")
    sub.add_argument("--rho", type=float,
                     help="ADMM penalty for iterative schemes (default: solver default)")
    sub.add_argument("--workers", type=int, default=1,
                     help="partition trials across this many sequential workers")
    sub.add_argument("--oracle-tol", type=float, dest="oracle_tol",
                     default=DEFAULT_ORACLE_TOL)
    sub.add_argument("--out", help="CSV output path; JSON sidecar lands next to it")


_EXPERIMENT_DEFAULTS = {
    "num_antennas": 10,
    "num_users": 10,
    "block_length": 8,
    "psk_order": 8,
    "snr_db": (30.0,),
    "trials": DEFAULT_TRIALS,
    "blocks_per_channel": DEFAULT_BLOCKS_PER_CHANNEL,
    "p0": 1.0,
}


def _build_experiment_config(args, parser, need_block_lengths: bool) -> ExperimentConfig:
    values = dict(_EXPERIMENT_DEFAULTS)
    if args.config:
        values.update(load_config_file(args.config))
    for name in _CONFIG_FIELDS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = _coerce(name, flag_value)
    if values.get("seed") is None:
        parser.error("a --seed (or seed= in the config file) is required to emit results")
    if values.get("scheme") is None:
        parser.error("a --scheme (or scheme= in the config file) is required")
    if need_block_lengths and not values.get("block_lengths"):
        parser.error("blocklength-sweep needs --block-lengths or block_lengths in the config")
    values.setdefault("block_lengths", None)
    return ExperimentConfig(**values)


def _emit(result, out: str | None, extra: dict | None = None) -> None:
    if out:
        out_path = Path(out)
        write_csv(out_path, result)
        write_sidecar(out_path.with_suffix(".json"), result, extra=extra)
    header = "scheme,axis,errors,symbols,ser,median_ms,iters"
    print(header)
    for point in result.points:
        print(f"{point.scheme},{point.axis:g},{point.errors},{point.symbols},"
              f"{point.ser:.6e},{point.median_ms:.4f},{point.iters:g}")


def _cmd_ser_sweep(args, parser) -> int:
    config = _build_experiment_config(args, parser, need_block_lengths=False)
    result = run_ser_sweep(config, workers=args.workers, oracle_tol=args.oracle_tol)
    _emit(result, args.out)
    return 0


def _cmd_blocklength_sweep(args, parser) -> int:
    config = _build_experiment_config(args, parser, need_block_lengths=True)
    result = run_blocklength_sweep(config, workers=args.workers,
                                   oracle_tol=args.oracle_tol)
    _emit(result, args.out)
    return 0


def _cmd_timing(args, parser) -> int:
    config = _build_experiment_config(args, parser, need_block_lengths=False)
    schemes = None
    if args.schemes:
        schemes = tuple(part.strip() for part in args.schemes.split(",") if part.strip())
    result = run_timing_bench(config, schemes=schemes, oracle_tol=args.oracle_tol)
    _emit(result, args.out, extra={"benchmark": "per-block solve time"})
    return 0


def _cmd_verify(args, parser) -> int:
    sizes = None
    if args.sizes:
        sizes = []
        for part in args.sizes.split(","):
            dims = tuple(int(v) for v in part.strip().lower().split("x"))
            sizes.append(dims)
    seeds = _parse_int_list(args.seeds) if args.seeds else None
    report = run_all(sizes=sizes, seeds=seeds, tolerance=args.tolerance)
    payload = report.to_json()
    if args.out:
        Path(args.out).write_text(payload + "\n")
    print(payload)
    if not report.passed:
        print(f"verification FAILED: {len(report.failures)} case(s)", file=sys.stderr)
        return 1
    return 0


def _cmd_trace(args, parser) -> int:
    spec = parse_scheme(args.scheme)
    if spec.kind not in _ADMM_KINDS:
        parser.error("trace needs an iterative scheme tag such as ci-blp-admm2-500")
    geometry, qp = build_instance(args.num_antennas, args.num_users,
                                  args.block_length, args.psk_order, args.seed)
    config = AdmmConfig(rho=args.rho, max_iters=spec.budget)
    result = solve(qp, _ADMM_KINDS[spec.kind], config)
    rows = result.state.trace.rows()
    lines = ["iter,objective,primal,dual,lagrangian"]
    lines += [f"{k},{obj:.12e},{pri:.12e},{dua:.12e},{lag:.12e}"
              for (k, obj, pri, dua, lag) in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        meta = {
            "scheme": args.scheme, "rho": args.rho, "seed": args.seed,
            "num_antennas": args.num_antennas, "num_users": args.num_users,
            "block_length": args.block_length, "psk_order": args.psk_order,
        }
        Path(args.out).with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")
    else:
        print(text, end="")
    final = rows[-1]
    print(f"final: iter={final[0]} objective={final[1]:.6e} "
          f"primal={final[2]:.3e} dual={final[3]:.3e}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ciblp",
        description="Block-level interference-exploiting precoder experiments")
    subs = parser.add_subparsers(dest="command", required=True)

    ser = subs.add_parser("ser-sweep", help="SER versus SNR for one scheme")
    _add_experiment_flags(ser)
    ser.set_defaults(func=_cmd_ser_sweep)

    blk = subs.add_parser("blocklength-sweep", help="SER versus block length")
    _add_experiment_flags(blk)
    blk.set_defaults(func=_cmd_blocklength_sweep)

    tim = subs.add_parser("timing", help="per-block solve-time benchmark")
    _add_experiment_flags(tim)
    tim.add_argument("--schemes", help="comma-separated scheme tags to compare")
    tim.set_defaults(func=_cmd_timing)

    ver = subs.add_parser("verify", help="structural verification suite")
    ver.add_argument("--sizes", help="comma-separated NTxKxN triples, e.g. 6x6x4,8x8x6")
    ver.add_argument("--seeds", help="comma-separated seed list")
    ver.add_argument("--tolerance", type=float, default=1e-9)
    ver.add_argument("--out", help="JSON report path")
    ver.set_defaults(func=_cmd_verify)

    tra = subs.add_parser("trace", help="single-instance solver convergence dump")
    tra.add_argument("--scheme", required=True,
                     help="iterative scheme tag with budget, e.g. ci-blp-admm2-500")
    tra.add_argument("--rho", type=float, default=1.0)
    tra.add_argument("--seed", type=int, required=True)
    tra.add_argument("--num-antennas", type=int, dest="num_antennas", default=10)
    tra.add_argument("--num-users", type=int, dest="num_users", default=10)
    tra.add_argument("--block-length", type=int, dest="block_length", default=8)
    tra.add_argument("--psk-order", type=int, dest="psk_order", default=8)
    tra.add_argument("--out", help="CSV output path")
    tra.set_defaults(func=_cmd_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
