"""Command-line front end: reproducible experiments with CSV outputs.

Subcommands: farey, design, distance-sweep, rate, ber.  All numeric output
is CSV with a header row and period decimal separators.  File outputs land
in --output (or stdout); the ber command writes per-scheme CSV files into an
output directory, defaulting to $NOMAQAM_OUTDIR or the working directory.

Exit codes: 0 success, 2 validation failure, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import design as design_mod
from . import farey as farey_mod
from . import rate as rate_mod
from . import sim as sim_mod
from .errors import InvariantViolation, ValidationError

try:  # pragma: no cover - version shim
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

OUTDIR_ENV = "NOMAQAM_OUTDIR"


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _default_outdir() -> str:
    return os.environ.get(OUTDIR_ENV, ".")


def cmd_farey(args) -> int:
    seq = farey_mod.enumerate_punched_farey(args.K, args.L)
    print(seq.compact_str())
    if args.verify:
        report = farey_mod.verify_properties(seq)
        print(
            f"properties ok: {report.num_terms} terms, "
            f"{report.pairs_checked} pairs, {report.triples_checked} triples, "
            f"recurrence={'ok' if report.recurrence_verified else 'FAILED'}"
        )
    if args.output:
        _write_text(args.output, seq.to_csv())
    return 0


def cmd_design(args) -> int:
    channel = design_mod.ChannelRealization(complex(args.h1), complex(args.h2))
    power = design_mod.PowerBudget(args.p1, args.p2)
    sizes = design_mod.ConstellationPair(args.m1, args.m2)
    result = design_mod.design_weights(channel, power, sizes)
    d_oma = design_mod.oma_min_distance(channel, power, sizes)
    lines = [design_mod.DESIGN_CSV_HEADER, design_mod.design_csv_row(channel, power, sizes, result, d_oma)]
    _write_text(args.output, "\n".join(lines) + "\n")
    if args.oracle:
        if not sizes.both_active:
            raise ValidationError("--oracle requires both users active")
        nc = design_mod.normalize(channel, power, sizes)
        best, w1t, w2t = design_mod.grid_search_oracle(nc, sizes, steps=args.oracle_steps)
        slack = (nc.h1_tilde + nc.h2_tilde) * (max(sizes.M1, sizes.M2) - 1) / args.oracle_steps
        print(
            f"grid oracle ({args.oracle_steps}x{args.oracle_steps}): "
            f"best d = {best:.12g} at w~ = ({w1t:.6g}, {w2t:.6g}); "
            f"closed form d = {result.d_noma:.12g} (oracle slack bound {slack:.3g})"
        )
    return 0


def cmd_distance_sweep(args) -> int:
    if args.sum_size % args.m1 != 0:
        raise ValidationError(f"m1={args.m1} does not divide sum constellation size {args.sum_size}")
    m2 = args.sum_size // args.m1
    sizes = design_mod.ConstellationPair(args.m1, m2)
    power = design_mod.PowerBudget(args.p1, args.p2)
    if args.points < 2 or args.h2_min <= 0 or args.h2_max <= args.h2_min:
        raise ValidationError("need points >= 2 and 0 < h2-min < h2-max")
    grid = np.logspace(math.log10(args.h2_min), math.log10(args.h2_max), args.points)
    lines = [design_mod.DESIGN_CSV_HEADER]
    for h2 in grid:
        channel = design_mod.ChannelRealization(complex(args.h1), complex(h2))
        result = design_mod.design_weights(channel, power, sizes)
        d_oma = design_mod.oma_min_distance(channel, power, sizes)
        lines.append(design_mod.design_csv_row(channel, power, sizes, result, d_oma))
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


def cmd_rate(args) -> int:
    if args.lam is not None:
        lam = args.lam
    else:
        if args.h1 is None or args.h2 is None:
            raise ValidationError("provide --lam or both --h1 and --h2")
        lam = args.p2 * args.h2 * args.h2 / (args.p1 * args.h1 * args.h1)
    prob = rate_mod.RateProblem(args.sum_size, lam)
    opt = rate_mod.optimal_rate_allocation(prob)
    asym = rate_mod.asymptotic_rate_allocation(prob)
    lines = [rate_mod.RATE_CSV_HEADER, rate_mod.rate_csv_row(prob, opt, asym)]
    if args.all:
        lines.append("M1,beta")
        lines.extend(f"{m1},{b:.12g}" for m1, b in rate_mod.enumerate_rate_allocations(prob))
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


def _load_config_file(path: str) -> dict:
    with open(path, "rb") as fh:
        if path.endswith(".toml"):
            return tomllib.load(fh)
        return json.load(fh)


_BER_KEYS = (
    "snr_db_grid",
    "symbols_per_point",
    "seed",
    "schemes",
    "m1",
    "m2",
    "delta1_sq",
    "delta2_sq",
    "p1",
    "p2",
    "block_fading",
    "psk_order",
)


def _parse_snr_grid(text: str) -> list[float]:
    # either "a,b,c" or "start:step:stop" (stop inclusive)
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0:
            raise ValidationError("SNR range must be start:step:stop with step > 0")
        start, step, stop = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValidationError("empty SNR range")
        return [start + i * step for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _build_sim_config(args) -> sim_mod.SimConfig:
    settings: dict = {
        "snr_db_grid": [10.0, 20.0, 30.0],
        "symbols_per_point": 100_000,
        "seed": 1,
        "schemes": ["noma", "tdma", "fdma"],
        "m1": 4,
        "m2": 4,
        "delta1_sq": 1.0,
        "delta2_sq": 1.0,
        "p1": 1.0,
        "p2": 1.0,
        "block_fading": 1,
        "psk_order": None,
    }
    if args.full_scale:
        # heavyweight benchmark: per-user 64-QAM under a strong near-far
        # spread; expect a multi-hour single-threaded run
        settings.update(
            {
                "snr_db_grid": [30 + 2 * i for i in range(14)],
                "symbols_per_point": 2_000_000,
                "schemes": ["noma", "tdma", "fdma", "cr_noma"],
                "m1": 8,
                "m2": 8,
                "delta1_sq": 1.0,
                "delta2_sq": 1.0 / 64.0,
            }
        )
        print("warning: --full-scale is a long benchmark run", file=sys.stderr)
    if args.config:
        file_cfg = _load_config_file(args.config)
        unknown = set(file_cfg) - set(_BER_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_cfg)
    if args.snr_db is not None:
        settings["snr_db_grid"] = _parse_snr_grid(args.snr_db)
    for flag in ("symbols_per_point", "seed", "m1", "m2", "delta1_sq", "delta2_sq", "p1", "p2", "block_fading", "psk_order"):
        val = getattr(args, flag)
        if val is not None:
            settings[flag] = val
    if args.schemes is not None:
        settings["schemes"] = [s.strip() for s in args.schemes.split(",") if s.strip()]
    sizes = design_mod.ConstellationPair(int(settings["m1"]), int(settings["m2"]))
    powers = design_mod.PowerBudget(float(settings["p1"]), float(settings["p2"]))
    return sim_mod.SimConfig(
        snr_db_grid=tuple(settings["snr_db_grid"]),
        symbols_per_point=int(settings["symbols_per_point"]),
        seed=int(settings["seed"]),
        schemes=tuple(settings["schemes"]),
        sizes=sizes,
        fading_vars=(float(settings["delta1_sq"]), float(settings["delta2_sq"])),
        powers=powers,
        block_fading=int(settings["block_fading"]),
        psk_order=None if settings["psk_order"] is None else int(settings["psk_order"]),
    )


def cmd_ber(args) -> int:
    config = _build_sim_config(args)
    curves = sim_mod.simulate_ber(config)
    outdir = args.outdir or _default_outdir()
    os.makedirs(outdir, exist_ok=True)
    prefix = args.prefix
    paths = []
    for curve in curves:
        path = os.path.join(outdir, f"{prefix}_{curve.scheme}.csv")
        _write_text(path, sim_mod.curves_to_csv([curve]))
        paths.append(path)
        print(f"wrote {path}")
    if args.summary:
        summary = {
            "config": {
                "snr_db_grid": list(config.snr_db_grid),
                "symbols_per_point": config.symbols_per_point,
                "seed": config.seed,
                "schemes": list(config.schemes),
                "m1": config.sizes.M1,
                "m2": config.sizes.M2,
                "delta1_sq": config.fading_vars[0],
                "delta2_sq": config.fading_vars[1],
                "p1": config.powers.P1,
                "p2": config.powers.P2,
                "block_fading": config.block_fading,
                "psk_order": config.psk_order,
            },
            "files": paths,
            "curves": [
                {
                    "scheme": c.scheme,
                    "points": [
                        {
                            "snr_db": p.snr_db,
                            "bits": p.bits_sent,
                            "errors": p.bit_errors,
                            "ber": p.ber,
                            "ci_halfwidth": p.wilson_halfwidth,
                        }
                        for p in c.points
                    ],
                }
                for c in curves
            ],
        }
        _write_text(args.summary, json.dumps(summary, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nomaqam",
        description="Two-user uplink NOMA design, rate allocation and BER simulation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("farey", help="enumerate a punched Farey sequence")
    p.add_argument("K", type=int, help="denominator bound (>= 1)")
    p.add_argument("L", type=int, help="numerator bound (>= 1)")
    p.add_argument("--verify", action="store_true", help="run the structural property checks")
    p.add_argument("-o", "--output", help="write the sequence as CSV to this path")
    p.set_defaults(func=cmd_farey)

    p = sub.add_parser("design", help="closed-form optimal weights for one channel")
    p.add_argument("--h1", type=float, required=True, help="|h1| channel magnitude")
    p.add_argument("--h2", type=float, required=True, help="|h2| channel magnitude")
    p.add_argument("--p1", type=float, default=1.0, help="power budget of user 1 (default 1)")
    p.add_argument("--p2", type=float, default=1.0, help="power budget of user 2 (default 1)")
    p.add_argument("--m1", type=int, default=4, help="per-branch PAM size of user 1 (default 4)")
    p.add_argument("--m2", type=int, default=4, help="per-branch PAM size of user 2 (default 4)")
    p.add_argument("--oracle", action="store_true", help="also run the grid-search oracle")
    p.add_argument("--oracle-steps", type=int, default=1000, help="grid steps per axis (default 1000)")
    p.add_argument("-o", "--output", help="write the CSV row to this path (default stdout)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("distance-sweep", help="minimum distance vs |h2| (CSV)")
    p.add_argument("--sum-size", type=int, required=True, help="sum PAM size M = M1*M2")
    p.add_argument("--m1", type=int, required=True, help="per-branch PAM size of user 1")
    p.add_argument("--h1", type=float, default=1.0, help="|h1| (default 1)")
    p.add_argument("--h2-min", type=float, default=0.1, help="sweep start (default 0.1)")
    p.add_argument("--h2-max", type=float, default=100.0, help="sweep stop (default 100)")
    p.add_argument("--points", type=int, default=200, help="log-spaced sample count (default 200)")
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--p2", type=float, default=1.0)
    p.add_argument("-o", "--output", help="write CSV to this path (default stdout)")
    p.set_defaults(func=cmd_distance_sweep)

    p = sub.add_parser("rate", help="optimal and asymptotic rate allocation")
    p.add_argument("--sum-size", type=int, required=True, help="sum PAM size M (power of 2)")
    p.add_argument("--lam", type=float, help="disparity ratio P2|h2|^2/(P1|h1|^2)")
    p.add_argument("--h1", type=float, help="|h1| (alternative to --lam)")
    p.add_argument("--h2", type=float, help="|h2| (alternative to --lam)")
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--p2", type=float, default=1.0)
    p.add_argument("--all", action="store_true", help="also list beta at every split")
    p.add_argument("-o", "--output", help="write CSV to this path (default stdout)")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("ber", help="Monte Carlo BER curves (per-scheme CSV files)")
    p.add_argument("--config", help="TOML or JSON config file (flags override it)")
    p.add_argument("--snr-db", help='grid as "a,b,c" or "start:step:stop"')
    p.add_argument("--symbols-per-point", type=int, dest="symbols_per_point")
    p.add_argument("--seed", type=int)
    p.add_argument("--schemes", help="comma list from: noma,tdma,fdma,cr_noma")
    p.add_argument("--m1", type=int)
    p.add_argument("--m2", type=int)
    p.add_argument("--delta1-sq", type=float, dest="delta1_sq", help="fading variance of user 1")
    p.add_argument("--delta2-sq", type=float, dest="delta2_sq", help="fading variance of user 2")
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--block-fading", type=int, dest="block_fading")
    p.add_argument("--psk-order", type=int, dest="psk_order", help="cr_noma PSK size (default m1^2)")
    p.add_argument("--full-scale", action="store_true", help="heavyweight benchmark preset (long run)")
    p.add_argument("--outdir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    p.add_argument("--prefix", default="ber", help="output file prefix (default 'ber')")
    p.add_argument("--summary", help="also write a JSON summary to this path")
    p.set_defaults(func=cmd_ber)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports its own message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:  # console_scripts hook
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
