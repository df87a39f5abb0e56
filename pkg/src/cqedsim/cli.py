"""Command-line interface.

Subcommands: `solve` (exact dynamics CSV), `run` (full experiment sweep),
`compare` (summary table over persisted runs), `spectrum` (Fourier transform
of a persisted run's mitigated populations).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .analysis import TimeSeries, fft_spectrum
from .harness import (
    compare_variants,
    format_table,
    load_config,
    load_run,
    run_experiment,
)
from .model import PopulationDistribution, solve_populations


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--variant", default=None,
                   help="variant name when the config file defines variants")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel step workers")


def _load(args) -> "RunConfig":
    from dataclasses import replace

    cfg = load_config(args.config, variant=args.variant)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if getattr(args, "jobs", None) is not None:
        cfg = replace(cfg, jobs=args.jobs)
    return cfg


def cmd_solve(args) -> int:
    cfg = _load(args)
    times = cfg.times()
    pops = solve_populations(cfg.model, times)
    writer = csv.writer(sys.stdout if args.out is None else open(args.out, "w", newline=""))
    n = cfg.model.n_emitters
    writer.writerow(["t"] + [f"p_e{i}" for i in range(1, n + 1)] + ["p_cav_env"])
    for t, p in zip(times, pops):
        writer.writerow([repr(float(t))] + [repr(float(x)) for x in p.as_array()])
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg)
    print(f"{cfg.name}: MHD(post)={_num(result.mhd_post)} MHD(raw)={_num(result.mhd_raw)} "
          f"discard={result.mean_discard:.3f} "
          f"angle={result.total_entangling_angle:.2f} rad", file=sys.stderr)
    if cfg.out_dir:
        print(f"results written to {cfg.out_dir}", file=sys.stderr)
    return 0


def _num(x) -> str:
    return "-" if x is None else f"{x:.5f}"


def cmd_compare(args) -> int:
    runs = [load_run(p) for p in args.run_dirs]
    rows = compare_variants(runs)
    table = format_table(rows)
    print(table, end="")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    return 0


def cmd_spectrum(args) -> int:
    stored = load_run(args.run_dir)
    with open(f"{args.run_dir}/steps.csv") as fh:
        reader = csv.DictReader(fh)
        times, pops = [], []
        for row in reader:
            times.append(float(row["t"]))
            chans = [k for k in row if k.startswith("p_")]
            vec = np.array([float(row[k]) for k in sorted(chans, key=_chan_key)])
            pops.append(PopulationDistribution(p_emitters=vec[:-1], p_cav_env=float(vec[-1])))
    series = TimeSeries(times=np.array(times), populations=tuple(pops))
    spec = fft_spectrum(series)
    writer = csv.writer(sys.stdout if args.out is None else open(args.out, "w", newline=""))
    writer.writerow(["frequency", "channel", "amplitude"])
    for ci, name in enumerate(spec.channel_names):
        for fi, f in enumerate(spec.frequencies):
            writer.writerow([repr(float(f)), name, repr(float(spec.amplitudes[fi, ci]))])
    return 0


def _chan_key(name: str):
    # p_e1 .. p_eN before p_cav_env
    return (0, int(name[3:])) if name.startswith("p_e") and name[3:].isdigit() else (1, 0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cqedsim",
                                     description="Open Tavis-Cummings circuit simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="exact population dynamics as CSV")
    _add_config_args(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_run = sub.add_parser("run", help="full noisy sweep with mitigation and analysis")
    _add_config_args(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_cmp = sub.add_parser("compare", help="summary table over persisted run directories")
    p_cmp.add_argument("run_dirs", nargs="+")
    p_cmp.add_argument("--out", default=None, help="also write the table as CSV")
    p_cmp.set_defaults(fn=cmd_compare)

    p_spec = sub.add_parser("spectrum", help="Fourier spectrum of a persisted run")
    p_spec.add_argument("run_dir")
    p_spec.add_argument("--out", default=None)
    p_spec.set_defaults(fn=cmd_spectrum)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
