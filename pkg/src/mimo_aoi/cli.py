"""Command-line entry point: ``mimo-aoi {solve,sweep,compare}``.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from mimo_aoi.errors import ConfigError, NumericError
from mimo_aoi.experiment import (
    load_config,
    point_spec,
    run_compare,
    run_sweep,
    single_point,
)
from mimo_aoi.report import csv_text, exact_csv_text, fmt, svg_text
from mimo_aoi.rvi import check_drift_condition, save_solution, solve_rvi

EXIT_USAGE = 1
EXIT_NUMERIC = 2

log = logging.getLogger("mimo_aoi")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text: str, cast=float) -> list:
    """``"0:30:5"`` (inclusive range) or ``"3,5"`` (explicit list)."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [cast(start + i * step) for i in range(n)]
        return [cast(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use a,b,c or start:stop:step") from None


def _int_grid(text):
    return parse_grid(text, int)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file with channel/mdp/sim blocks")
    common.add_argument("--snr-db", type=parse_grid, help="transmit SNR P/sigma^2 in dB (list or range)")
    common.add_argument("--antennas", type=_int_grid, help="number of AP antennas N (list or range)")
    common.add_argument("--devices", type=int, help="number of devices K")
    common.add_argument("--distance", type=parse_grid, help="device-AP distance d (list)")
    common.add_argument("--path-loss", type=float, dest="path_loss_exponent")
    common.add_argument("--threshold", type=float, dest="snr_threshold", help="decoding SNR threshold")
    common.add_argument("--delta-max", type=int, help="age truncation")
    common.add_argument("--tol", type=float, dest="rvi_tol", help="RVI span tolerance")
    common.add_argument("--max-iters", type=int)
    common.add_argument("--policies", type=lambda s: [p for p in s.split(",") if p],
                        help="comma list of optimal, greedy, fixed:<k>")
    common.add_argument("--horizon", type=int, help="simulated slots per replica")
    common.add_argument("--burn-in", type=int)
    common.add_argument("--untruncated", dest="track_truncation", action="store_false", default=None,
                        help="simulate unbounded ages instead of saturating at delta-max")
    common.add_argument("--seeds", type=_int_grid, help="replica seeds (list or range)")
    common.add_argument("--out-dir")
    common.add_argument("--jobs", type=int, help="grid points solved concurrently")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="mimo-aoi", description="AoI-optimal multiuser MIMO scheduling")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="solve the MDP at one channel point")
    sweep = sub.add_parser("sweep", parents=[common], help="sweep SNR or N; write CSV and SVG")
    sweep.add_argument("--exact", action="store_true", default=None,
                       help="also evaluate each policy exactly on the truncated chain")
    sub.add_parser("compare", parents=[common], help="rank policies at one channel point")
    return parser


_OVERRIDES = ["snr_db", "antennas", "devices", "distance", "path_loss_exponent", "snr_threshold",
              "delta_max", "rvi_tol", "max_iters", "policies", "horizon", "burn_in", "seeds",
              "out_dir", "jobs", "exact", "track_truncation"]


def cmd_solve(cfg, out=None) -> int:
    out = out or sys.stdout
    pt = single_point(cfg)
    spec = point_spec(cfg, pt)
    report = solve_rvi(spec, cfg.rvi_tol, cfg.max_iters)
    drift = check_drift_condition(spec, m=2.0)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "K": spec.num_devices,
        "N": pt.antennas,
        "snr_db": pt.snr_db,
        "distance": pt.distance,
        "delta_max": spec.delta_max,
        "outage": list(spec.outage),
        "j_star": report.values.j_star,
        "iterations": report.iterations,
        "final_span": report.final_span,
        "residual": report.residual,
        "converged": report.converged,
        "drift_beta": drift.beta,
        "drift_m": drift.m,
        "drift_satisfied": drift.satisfied,
    }
    print(f"K={spec.num_devices} N={pt.antennas} snr_db={fmt(pt.snr_db)} d={fmt(pt.distance)} "
          f"delta_max={spec.delta_max}", file=out)
    print("P_e(k): " + " ".join(f"{p:.6g}" for p in spec.outage[1:]), file=out)
    print(f"j_star={report.values.j_star:.12g} iterations={report.iterations} "
          f"span={report.final_span:.3g} residual={report.residual:.3g} converged={report.converged}",
          file=out)
    print(f"drift: beta={drift.beta:.6g} m={drift.m:g} satisfied={drift.satisfied}", file=out)
    if not report.converged:
        print(f"error: RVI did not converge within {cfg.max_iters} iterations", file=sys.stderr)
        return EXIT_NUMERIC
    save_solution(out_dir / "solution.rvi", spec, report)
    (out_dir / "solve.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_sweep(cfg, out=None) -> int:
    out = out or sys.stdout
    rows = run_sweep(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.csv").write_text(csv_text(rows))
    (out_dir / "sweep.svg").write_text(svg_text(rows, cfg.sweep_var))
    if cfg.exact:
        (out_dir / "exact.csv").write_text(exact_csv_text(rows))
    print(f"wrote {len(rows)} rows to {out_dir / 'sweep.csv'} and {out_dir / 'sweep.svg'}", file=out)
    failed = [r for r in rows if math.isnan(r.avg_aoi)]
    if failed:
        print(f"error: {len(failed)} cells failed to solve", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def cmd_compare(cfg, out=None) -> int:
    out = out or sys.stdout
    result = run_compare(cfg)
    print(f"{'rank':>4}  {'policy':<10} {'avg_aoi':>12} {'stderr':>10}", file=out)
    for i, r in enumerate(result.rows, 1):
        print(f"{i:>4}  {r.policy:<10} {fmt(r.avg_aoi):>12} {fmt(r.stderr):>10}", file=out)
    print("", file=out)
    print(f"{'better':<10} {'worse':<10} {'diff':>12} {'comb_se':>10} {'z':>8}", file=out)
    for a, b, diff, se in result.pairs:
        z = diff / se if se > 0 else math.inf
        print(f"{a:<10} {b:<10} {fmt(diff):>12} {fmt(se):>10} {z:>8.2f}", file=out)
    if any(math.isnan(r.avg_aoi) for r in result.rows):
        return EXIT_NUMERIC
    return 0


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, {k: getattr(args, k, None) for k in _OVERRIDES})
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
