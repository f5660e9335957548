"""Command line interface.

    footnav simulate --config cfg.json --out DIR [--seed N] [--variant V ...]
    footnav replay   --config cfg.json --imu imu.csv --range range.csv \
                     [--truth truth.csv] --out DIR [--variant V ...]
    footnav observe  --config cfg.json --out DIR [--seed N]

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 filter
divergence.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .fusion import FilterFault
from .logio import DataError
from .pipeline import ConfigError, VARIANTS, run
from .strapdown import PropagationError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}") from None


def _build_parser() -> _Parser:
    parser = _Parser(prog="footnav", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_seed=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="output directory")
        if with_seed:
            p.add_argument("--seed", type=int, default=None)

    p_sim = sub.add_parser("simulate", help="generate a walk and filter it")
    common(p_sim)
    p_sim.add_argument(
        "--variant", action="append", choices=sorted(VARIANTS), default=None
    )
    p_sim.add_argument("--geojson", action="store_true")

    p_rep = sub.add_parser("replay", help="filter recorded logs")
    common(p_rep, with_seed=False)
    p_rep.add_argument("--imu", required=True, help="IMU log (CSV)")
    p_rep.add_argument("--range", dest="range_", required=True, help="range log (CSV)")
    p_rep.add_argument("--truth", default=None, help="truth trajectory (CSV)")
    p_rep.add_argument(
        "--variant", action="append", choices=sorted(VARIANTS), default=None
    )
    p_rep.add_argument("--geojson", action="store_true")

    p_obs = sub.add_parser("observe", help="constraint-batch observability report")
    common(p_obs)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return 0 if exc.code in (0, None) else 1

    overrides = {"out_dir": args.out}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "variant", None):
        overrides["variants"] = args.variant
    if getattr(args, "geojson", False):
        overrides["geojson"] = True
    if args.command == "replay":
        overrides["imu_path"] = args.imu
        overrides["range_path"] = args.range_
        overrides["truth_path"] = args.truth

    try:
        cfg = load_config(args.config, args.command, overrides)
        report = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FilterFault, PropagationError) as exc:
        print(f"filter divergence: {exc}", file=sys.stderr)
        return 3

    if args.command == "observe":
        last = report["series"][-1] if report["series"] else {}
        print(f"rows: {last.get('n_rows', 0)}, rank: {last.get('rank', '-')}")
        if "eigenvalues" in last:
            lo, hi = last["eigenvalues"][0], last["eigenvalues"][-1]
            print(f"eigenvalue range: {lo:.3e} .. {hi:.3e}")
    else:
        for variant, summary in report["variants"].items():
            line = f"[{variant}]"
            rel = summary.get("relative")
            if rel is not None:
                line += (
                    f" rel pos err {rel['position_error']:.3f} m,"
                    f" rel yaw err {rel['yaw_error_deg']:.3f} deg"
                )
            print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
