"""Command-line entry points: certification suites and risk experiments."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import load_config, monte_carlo_risk, rate_fit
from .report import render_risk_figure, write_risk_csv
from .suites import SUITES, run_verification_suite


def _cmd_verify(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    reports = []
    failed = False
    for name in names:
        rep = run_verification_suite(name, seed=args.seed, budget=args.budget)
        reports.append(rep)
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} suite {name}: trials={rep.trials} failures={len(rep.failures)} "
              f"max_slack={rep.max_slack_used:.3g} elapsed={rep.elapsed:.2f}s")
        failed = failed or not rep.passed
    if args.out:
        doc = reports[0].to_dict() if len(reports) == 1 else [r.to_dict() for r in reports]
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True, default=float))
        print(f"wrote {args.out}")
    return 1 if failed else 0


def _cmd_risk(args) -> int:
    cfg = load_config(args.config)
    report = monte_carlo_risk(cfg)
    out = Path(args.out)
    write_risk_csv(report, out)
    print(f"wrote {out}")
    for pt in report.points:
        print(f"  n={pt.n}: risk={pt.risk:.5g} (stderr {pt.stderr:.2g}, {pt.trials} trials)")
    if len(report.points) >= 3:
        fit = rate_fit(report)
        print(f"  fitted log-log slope: {fit.slope:+.4f} (r^2 {fit.r_squared:.4f})")
    if not args.no_figure:
        fig_path = Path(args.figure) if args.figure else out.with_suffix(".png")
        render_risk_figure(report, fig_path)
        print(f"wrote {fig_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="localinfo",
        description="Certification suites and Monte Carlo risk experiments for "
                    "estimation under local information constraints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run a certification suite")
    p_verify.add_argument("suite", choices=sorted(SUITES) + ["all"],
                          help="suite name")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--budget", type=int, default=None,
                          help="instance count override (suite-specific default)")
    p_verify.add_argument("--out", default=None, help="write the JSON report here")
    p_verify.set_defaults(fn=_cmd_verify)

    p_risk = sub.add_parser("risk", help="run a risk experiment from a config file")
    p_risk.add_argument("--config", required=True, help="TOML or JSON experiment config")
    p_risk.add_argument("--out", default="results.csv", help="CSV output path")
    p_risk.add_argument("--figure", default=None,
                        help="figure path (default: CSV path with .png)")
    p_risk.add_argument("--no-figure", action="store_true", help="skip the figure")
    p_risk.set_defaults(fn=_cmd_risk)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
