"""Command-line front end: ``effort-audit {audit,sweep-alpha,cf-compare,gen-data}``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .config import load_config, with_overrides
from .exceptions import AuditError, ConfigError
from .experiments import run_cf_compare, run_configured_audit, run_sweep
from .models import ConvergenceWarning
from .report import (
    BOX_COLUMNS, CURVE_COLUMNS, SWEEP_COLUMNS, boxes_csv_text, check_csv, curves_csv_text, json_text,
    sweep_csv_text, write_atomic,
)

log = logging.getLogger("effort_audit")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from None


def parse_seeds(text: str) -> list[int]:
    """``"3"``, ``"0,2,5"`` or an inclusive range ``"0..4"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N, N,M,... or N..M, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="YAML experiment configuration")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--data", type=Path, help="German credit data file (overrides the config)")
    seeds = common.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, help="single seed")
    seeds.add_argument("--seeds", type=parse_seeds, help="seed list N,M,... or inclusive range N..M")
    common.add_argument("--quantiles", type=parse_float_list, help="comma separated quantile grid")
    common.add_argument("--alpha", type=parse_float_list, help="alpha value(s) for the synthetic data")
    common.add_argument("--norm", choices=("l1", "l2"), help="distance norm")
    common.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="effort-audit", description="Equality-of-effort audits via recourse.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("audit", parents=[common], help="run the audit and write report.json and curves.csv")
    sub.add_parser("sweep-alpha", parents=[common], help="ACR and CFR across alpha values (synthetic)")
    sub.add_parser("cf-compare", parents=[common], help="counterfactual fairness ratio and cost boxplots")
    sub.add_parser("gen-data", parents=[common], help="write the (encoded) dataset(s) as CSV")
    return parser


def _resolve_config(args):
    cfg = load_config(args.config)
    seeds = [args.seed] if args.seed is not None else args.seeds
    overrides = dict(seeds=seeds, quantiles=args.quantiles, norm=args.norm)
    if args.alpha is not None:
        if not args.alpha:
            raise ConfigError("--alpha list must not be empty")
        overrides["alphas"] = args.alpha
        overrides["alpha"] = args.alpha[0]
    if args.data is not None:
        overrides["data_path"] = args.data
    cfg = with_overrides(cfg, **overrides)
    if cfg.experiment == "german":
        if cfg.data_path is None:
            raise UsageError("--data: no German credit file given (flag or config data.path)")
        if not Path(cfg.data_path).is_file():
            raise UsageError(f"--data: German credit file not found: {cfg.data_path}")
    return cfg


def cmd_audit(cfg, out: Path, figures: bool) -> list[Path]:
    report = run_configured_audit(cfg)
    curves = curves_csv_text(report.curves)
    check_csv(curves, CURVE_COLUMNS, len(report.curves))
    write_atomic(out / "report.json", json_text(report.to_dict()))
    write_atomic(out / "curves.csv", curves)
    written = [out / "report.json", out / "curves.csv"]
    for group, s in report.system.items():
        log.info("system-level %s centers: ACR=%s RD=%s", group, s["acr"], s["rd"])
    if figures:
        from .figures import render_audit

        written += render_audit(report.curves, out)
    return written


def cmd_sweep_alpha(cfg, out: Path, figures: bool) -> list[Path]:
    rows, reports = run_sweep(cfg)
    text = sweep_csv_text(rows)
    check_csv(text, SWEEP_COLUMNS, len(rows))
    summary = {"config": cfg.to_dict(), "rows": rows,
               "system": {str(a): rep.system for a, rep in zip(cfg.alphas, reports)}}
    write_atomic(out / "sweep.json", json_text(summary))
    write_atomic(out / "sweep.csv", text)
    written = [out / "sweep.json", out / "sweep.csv"]
    if figures:
        from .figures import plot_sweep

        written.append(plot_sweep(rows, out / "sweep.png"))
    return written


def cmd_cf_compare(cfg, out: Path, figures: bool) -> list[Path]:
    result = run_cf_compare(cfg)
    text = boxes_csv_text(result)
    check_csv(text, BOX_COLUMNS)
    write_atomic(out / "cf_compare.json", json_text(result))
    write_atomic(out / "cf_compare.csv", text)
    log.info("counterfactual fairness ratio %.6f", result["cfr"])
    written = [out / "cf_compare.json", out / "cf_compare.csv"]
    if figures:
        from .figures import plot_cf_boxes

        written.append(plot_cf_boxes(result, out / "cf_compare.png"))
    return written


def cmd_gen_data(cfg, out: Path, figures: bool) -> list[Path]:
    written = []
    if cfg.experiment == "german":
        ds = cfg.dataset()
        path = out / "german.csv"
        ds.to_csv(path)
        written.append(path)
    else:
        for alpha in cfg.alphas or [cfg.alpha]:
            for seed in cfg.seeds:
                path = out / f"synthetic_alpha{alpha:g}_seed{seed}.csv"
                cfg.dataset(seed, alpha).to_csv(path)
                written.append(path)
    return written


COMMANDS = {
    "audit": cmd_audit,
    "sweep-alpha": cmd_sweep_alpha,
    "cf-compare": cmd_cf_compare,
    "gen-data": cmd_gen_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", ConvergenceWarning)
    try:
        cfg = _resolve_config(args)
        if args.command == "sweep-alpha" and cfg.experiment != "synthetic":
            raise UsageError("sweep-alpha needs a synthetic configuration")
        if args.command == "sweep-alpha" and not cfg.alphas:
            raise ConfigError("alpha list is empty (config alphas or --alpha)")
        written = COMMANDS[args.command](cfg, args.out, args.figures)
    except (UsageError, ConfigError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AuditError, ValueError, OSError) as exc:
        print(f"{parser.prog} {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
