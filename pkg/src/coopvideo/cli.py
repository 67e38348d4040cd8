"""Command-line entry point: ``coopvideo {run,per,fec,placements,compare}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import mcper
from .config import load_spec
from .fec import make_plan
from .harness import (
    compare_schemes,
    ensemble_seed,
    read_report_csv,
    run_experiment,
    write_ratios_csv,
)
from .mcper import Scheme, placement_rng
from .scenario import ConfigError, generate_placements, read_placements_csv, write_placements_csv
from .schemes import combine_rdstc

log = logging.getLogger("coopvideo")

RATE_ARITY = {Scheme.DIRECT: 2, Scheme.RDSTC: 4, Scheme.RDSTC_HR: 4, Scheme.RDSTC_NC: 3}


def _spec(args):
    spec = load_spec(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    if getattr(args, "trials", None) is not None:
        spec.trials_per_estimate = args.trials
    return spec


def cmd_run(args):
    spec = _spec(args)
    t0 = time.perf_counter()
    report = run_experiment(spec, out_dir=args.out, jobs=args.jobs, cache_dir=args.cache)
    log.info("finished %d cells in %.1f s", len(report.plans), time.perf_counter() - t0)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "density", "distance", "mean_rate_mbps"])
    for e in report.entries:
        w.writerow([e.scheme, e.density, e.distance, f"{e.mean_rate / 1e6:.4f}"])
    return 0


def _pick_placement(args, spec):
    if args.placements:
        placements = read_placements_csv(args.placements)
        return placements[args.placement_id]
    density = args.density if args.density is not None else spec.densities[0]
    distance = args.distance if args.distance is not None else spec.distances[0]
    ens = generate_placements(spec.region, density, distance, args.placement_id + 1,
                              ensemble_seed(spec.seed, density), spec.fixed_relay_count)
    return ens[args.placement_id]


def cmd_per(args):
    spec = _spec(args)
    scheme = Scheme(args.scheme)
    rates = [float(x) * 1e6 for x in args.rates.split(",")]
    if len(rates) != RATE_ARITY[scheme]:
        raise ConfigError(f"{scheme} takes {RATE_ARITY[scheme]} rates, got {len(rates)}")
    placement = _pick_placement(args, spec)
    T, ch = spec.trials_per_estimate, spec.channel
    rng = placement_rng(spec.seed, placement)
    trace = None
    if scheme is Scheme.DIRECT:
        out = mcper.estimate_direct(placement, *rates, T, rng, ch, trace=bool(args.trace))
    elif scheme is Scheme.RDSTC:
        if args.trace:
            raise ConfigError("--trace for RDSTC needs a single direction; use the library API")
        e12 = mcper.estimate_rdstc(placement, "12", rates[0], rates[1], T, rng, ch)
        e21 = mcper.estimate_rdstc(placement, "21", rates[2], rates[3], T,
                                   placement_rng(spec.seed, placement), ch)
        out = combine_rdstc(e12, e21)
    elif scheme is Scheme.RDSTC_HR:
        out = mcper.estimate_rdstc_hr(placement, *rates, T, rng, ch, trace=bool(args.trace))
    else:
        out = mcper.estimate_rdstc_nc(placement, *rates, T, rng, ch, trace=bool(args.trace))
    if isinstance(out, tuple):
        out, trace = out
        mcper.write_trace_csv(args.trace, trace)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scheme", "rates_mbps", "relay_candidates", "p12", "p21",
                "stderr12", "stderr21", "avg_relay_count", "trials"])
    w.writerow([str(scheme), " ".join(f"{r / 1e6:g}" for r in rates), placement.n_relays,
                out.p12, out.p21, f"{out.stderr12:.6g}", f"{out.stderr21:.6g}",
                out.avg_relay_count, out.trials])
    return 0


def cmd_fec(args):
    plan = make_plan(args.n, args.p, args.tau)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "s", "m", "fec_rate", "predicted_failure"])
    w.writerow([plan.n, plan.s, plan.m, "" if plan.fec_rate is None else f"{plan.fec_rate:.6g}",
                f"{plan.predicted_failure:.6g}"])
    return 0


def cmd_placements(args):
    spec = _spec(args)
    density = args.density if args.density is not None else spec.densities[0]
    distance = args.distance if args.distance is not None else spec.distances[0]
    count = args.count if args.count is not None else spec.placements_per_density
    ens = generate_placements(spec.region, density, distance, count,
                              ensemble_seed(spec.seed, density), spec.fixed_relay_count)
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "placements.csv"
    write_placements_csv(out, ens)
    print(f"wrote {len(ens)} placements ({sum(p.n_relays for p in ens)} relays) to {out}")
    return 0


def cmd_compare(args):
    report = read_report_csv(args.report)
    ratios = compare_schemes(report, Scheme(args.numerator), Scheme(args.denominator))
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "ratios.csv"
    write_ratios_csv(out, ratios)
    for r in ratios:
        shown = "n/a" if r.ratio is None else f"{r.ratio:.3f} +/- {r.stderr:.3f}"
        print(f"density={r.density:g} distance={r.distance:g} {r.numerator}/{r.denominator} = {shown}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment TOML file (default: bundled)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="results", help="output directory or CSV path")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per PER estimate")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="coopvideo", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="full sweep -> report/plans/ratios CSVs")
    r.add_argument("--cache", help="directory for cached PER tables")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("per", parents=[common], help="one PER estimate")
    e.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    e.add_argument("--rates", required=True,
                   help="Mbps, comma separated: Direct r12,r21; RDSTC r12,rr2,r21,rr1; "
                        "RDSTC_HR r12,r21,rr2,rr1; RDSTC_NC r12,r21,rr")
    e.add_argument("--placements", help="placement CSV (default: generate from config)")
    e.add_argument("--placement-id", type=int, default=0)
    e.add_argument("--density", type=float)
    e.add_argument("--distance", type=float)
    e.add_argument("--trace", help="write per-trial outcomes to this CSV")
    e.set_defaults(func=cmd_per)

    f = sub.add_parser("fec", help="FEC block plan for n, p, tau")
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--p", type=float, required=True)
    f.add_argument("--tau", type=float, default=0.005)
    f.set_defaults(func=cmd_fec)

    g = sub.add_parser("placements", parents=[common], help="generate and export an ensemble")
    g.add_argument("--density", type=float)
    g.add_argument("--distance", type=float)
    g.add_argument("--count", type=int)
    g.set_defaults(func=cmd_placements)

    c = sub.add_parser("compare", parents=[common], help="report.csv -> scheme ratio table")
    c.add_argument("--report", required=True)
    c.add_argument("--numerator", default=Scheme.RDSTC_NC.value)
    c.add_argument("--denominator", default=Scheme.RDSTC_HR.value)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"coopvideo: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
