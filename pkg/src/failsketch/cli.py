"""Command-line front end.

Subcommands:

    simulate   generate traffic, encode, decode, classify; write report
               CSVs, snapshots, figures and a summary
    compare    run both sketch kinds across a list of memory budgets
    epidemic   closed-form propagation curves and time-to-fraction
               tables for unlimited vs rate-limited scanning
    decode     decode a snapshot file against a host list

Exit codes: 0 success, 2 corrupt snapshot, 3 parameter/config error.
Config keys can also be set as environment variables with the
FAILSKETCH_ prefix (e.g. FAILSKETCH_SEED=7).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_config
from .epidemic import (
    DomainError,
    EpidemicParams,
    infected_fraction,
    slowdown_factor,
    time_to_fraction,
)
from .experiment import (
    run_compare,
    run_simulation,
    summarize_period,
    write_compare_csv,
    write_summary_csv,
)
from .hashing import ParameterError
from .pipeline import CorruptSnapshotError, SketchSnapshot, nmc_decode, write_reports_csv


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to the parameter-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help="named preset (fig1..fig6, fig1-desk..fig6-desk)")
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="global RNG seed")
    parser.add_argument("--sketch", choices=("bitmap", "dsra", "both"))
    parser.add_argument("--periods", type=int, help="number of measurement periods")
    parser.add_argument("--out-dir", default="failsketch-out", help="output directory")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")


def _config_from_args(args) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "sketch": args.sketch,
        "periods": getattr(args, "periods", None),
    }
    return build_config(preset=args.preset, config_path=args.config, overrides=overrides)


def _cmd_simulate(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    keep_events = bool(args.dump_events)
    results, truths = run_simulation(config, keep_events=keep_events)
    summary_rows = []
    for kind, result in results.items():
        for i, period_result in enumerate(result.periods):
            tag = f"{kind}_p{period_result.period:03d}"
            with open(out / f"hostreports_{tag}.csv", "w", encoding="utf-8") as fh:
                write_reports_csv(period_result.reports, fh)
            period_result.snapshot.write(out / f"snapshot_{tag}.frsk")
            with open(out / f"hosts_p{period_result.period:03d}.txt", "w", encoding="utf-8") as fh:
                fh.writelines(f"{h}\n" for h in period_result.hosts)
            if keep_events and period_result.events is not None:
                with open(out / f"events_p{period_result.period:03d}.csv", "w", encoding="utf-8") as fh:
                    period_result.events.dump(fh, addr_format=args.addr_format)
            row = summarize_period(period_result, truths[i], kind=kind)
            summary_rows.append(row)
            if not args.no_figures:
                from . import plots

                plots.scatter_reports(
                    period_result.reports,
                    out / f"scatter_{tag}.png",
                    f"{kind}, period {period_result.period}",
                )
    with open(out / "summary.csv", "w", encoding="utf-8") as fh:
        write_summary_csv(summary_rows, fh)
    for row in summary_rows:
        print(
            f"{row['kind']} p{row['period']}: hosts={row['hosts']} "
            f"bits/host={row['bits_per_host']:.1f} "
            f"worm_rel_err={row['worm_mean_rel_error']:.3f} "
            f"normal_abs_err={row['normal_mean_abs_error']:.2f} "
            f"limited={row['worms_limited']}/{row['worm_hosts']} worms, "
            f"normals unrestricted={row['normals_unrestricted_frac']:.4f}"
        )
    print(f"wrote {out}/summary.csv")
    return 0


def _cmd_compare(args) -> int:
    config = _config_from_args(args)
    budgets = [b for b in (s.strip() for s in args.budgets_mb.split(",")) if b]
    if not budgets:
        raise ConfigError("empty budget list")
    budgets_bits = [int(float(b) * 1_000_000) for b in budgets]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_compare(config, budgets_bits)
    with open(out / "compare.csv", "w", encoding="utf-8") as fh:
        write_compare_csv(rows, fh)
    if not args.no_figures:
        from . import plots

        plots.compare_budgets(rows, out / "compare.png")
    for row in rows:
        print(
            f"{row['budget_bits'] / 1e6:.3g} Mbit {row['kind']}: "
            f"worm_rel_err={row['worm_mean_rel_error']:.3f} "
            f"saturated={row['saturated_hosts']}"
        )
    print(f"wrote {out}/compare.csv")
    return 0


def _cmd_epidemic(args) -> int:
    params = EpidemicParams(
        address_space=args.address_space,
        vulnerable=args.vulnerable,
        initially_infected=args.initially_infected,
        scan_rate=args.scan_rate_per_min / 60.0,
    )
    limited = EpidemicParams(
        address_space=args.address_space,
        vulnerable=args.vulnerable,
        initially_infected=args.initially_infected,
        scan_rate=args.limited_rate_per_min / 60.0,
    )
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    horizon = time_to_fraction(limited, 0.99)
    times = np.linspace(0.0, horizon, 600)
    unlimited_curve = np.array([infected_fraction(params, t) for t in times])
    limited_curve = np.array([infected_fraction(limited, t) for t in times])
    with open(out / "epidemic_curve.csv", "w", encoding="utf-8") as fh:
        fh.write("t_seconds,infected_unlimited,infected_limited\n")
        for t, iu, il in zip(times, unlimited_curve, limited_curve):
            fh.write(f"{t:.6f},{iu:.9f},{il:.9f}\n")
    factor = slowdown_factor(args.scan_rate_per_min, args.limited_rate_per_min)
    with open(out / "epidemic_times.csv", "w", encoding="utf-8") as fh:
        fh.write("alpha,t_unlimited_seconds,t_limited_seconds,ratio\n")
        for a in alphas:
            tu = time_to_fraction(params, a)
            tl = time_to_fraction(limited, a)
            ratio = tl / tu if tu else float("nan")
            fh.write(f"{a:.6f},{tu:.6f},{tl:.6f},{ratio:.9f}\n")
            print(f"alpha={a:g}: unlimited {tu:.1f}s, limited {tl:.1f}s ({ratio:.1f}x)")
    if not args.no_figures:
        from . import plots

        plots.epidemic_curves(times, unlimited_curve, limited_curve, factor, out / "epidemic.png")
    print(f"wrote {out}/epidemic_times.csv (slowdown factor {factor:g})")
    return 0


def _cmd_decode(args) -> int:
    snapshot = SketchSnapshot.read(args.snapshot)
    hosts = [
        int(line) for line in Path(args.hosts).read_text(encoding="utf-8").split()
    ]
    threshold = args.threshold_per_min * args.period_seconds / 60.0
    reports = nmc_decode(snapshot, hosts, threshold)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_reports_csv(reports, fh)
        print(f"wrote {args.out} ({len(reports)} hosts)")
    else:
        write_reports_csv(reports, sys.stdout)
    return 0


def make_parser() -> _Parser:
    parser = _Parser(prog="failsketch", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the measurement pipeline", parents=[])
    _add_config_flags(p_sim)
    p_sim.add_argument("--dump-events", action="store_true", help="write the event stream CSV")
    p_sim.add_argument(
        "--addr-format", choices=("int", "dotted"), default="int",
        help="address rendering in event dumps",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_cmp = sub.add_parser("compare", help="sweep both sketch kinds over memory budgets")
    _add_config_flags(p_cmp)
    p_cmp.add_argument(
        "--budgets-mb", required=True,
        help="comma-separated per-direction budgets in Mbit, e.g. 5,2.5,1.25",
    )
    p_cmp.set_defaults(func=_cmd_compare)

    p_epi = sub.add_parser("epidemic", help="propagation curves and slowdown tables")
    p_epi.add_argument("--address-space", type=int, default=2**32)
    p_epi.add_argument("--vulnerable", type=int, default=100_000)
    p_epi.add_argument("--initially-infected", type=int, default=1)
    p_epi.add_argument("--scan-rate-per-min", type=float, default=600.0)
    p_epi.add_argument("--limited-rate-per-min", type=float, default=6.0)
    p_epi.add_argument("--alphas", default="0.1,0.25,0.5,0.75,0.9,0.99")
    p_epi.add_argument("--out-dir", default="failsketch-out")
    p_epi.add_argument("--no-figures", action="store_true")
    p_epi.set_defaults(func=_cmd_epidemic)

    p_dec = sub.add_parser("decode", help="decode one snapshot file")
    p_dec.add_argument("snapshot", help="snapshot file written by simulate")
    p_dec.add_argument("--hosts", required=True, help="candidate host list, one address per line")
    p_dec.add_argument("--threshold-per-min", type=float, default=60.0)
    p_dec.add_argument("--period-seconds", type=float, default=60.0)
    p_dec.add_argument("--out", help="report CSV path (default: stdout)")
    p_dec.set_defaults(func=_cmd_decode)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CorruptSnapshotError as err:
        print(f"failsketch: corrupt snapshot: {err}", file=sys.stderr)
        return 2
    except (ConfigError, ParameterError, DomainError) as err:
        print(f"failsketch: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"failsketch: {err}", file=sys.stderr)
        return 3
    except SystemExit as err:
        return int(err.code or 0)


if __name__ == "__main__":
    sys.exit(main())
