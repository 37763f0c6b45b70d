"""Command-line entry point: ``wasserpush <subcommand> [--config F] [--out D] [--seed S] [--ref-resolution M]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config, validate
from .experiments import (
    audit_bounds,
    compare_histogram,
    demo_oscillator,
    emit_outputs,
    fit_rate,
    run_convergence,
    write_csv,
    write_json,
)

log = logging.getLogger("wasserpush")


def _u64(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _pos_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError("must be >= 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wasserpush", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "converge": "sweep the surrogate size and record pushforward distances",
        "bounds": "check W_p against its upper and lower bounds",
        "compare-hist": "spline pipeline versus histogram density estimation",
        "demo-oscillator": "v^2 on U[1,2] against a 4-node piecewise-linear fit",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
        p.add_argument("--seed", type=_u64, help="base RNG seed")
        p.add_argument("--ref-resolution", type=_pos_int, help="reference grid points per dimension")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else validate(ExperimentConfig())
    return cfg.with_overrides(
        seed=args.seed,
        ref_resolution=args.ref_resolution,
        out_dir=str(args.out) if args.out else None,
    )


def _converge(cfg):
    records = run_convergence(cfg)
    fits = {}
    for metric in cfg.metrics:
        model = "exponential" if cfg.surrogate_kind == "gpc" else "power"
        try:
            fits[metric] = fit_rate(records, model, metric)
        except ValueError as exc:
            log.warning("no rate for %s: %s", metric, exc)
    paths = emit_outputs(records, fits, cfg.out_dir, list(cfg.metrics), cfg.record_walltime)
    for fit in fits.values():
        unit = "decades per unit N" if fit.model == "exponential" else "log-log slope"
        print(f"{fit.metric}: {unit} {fit.slope:.4g} (r2 {fit.r2:.4f}, N {fit.n_min}..{fit.n_max})")
    failed = [r for r in records if r.failure]
    for r in failed:
        print(f"N={r.N} failed: {r.failure}", file=sys.stderr)
    print(f"wrote {paths['csv']}")
    return 0


def _bounds(cfg):
    res = audit_bounds(cfg)
    out = Path(cfg.out_dir)
    row = res.report.as_row()
    write_csv(out / "bounds.csv", list(row), [list(row.values())])
    write_json(
        out / "bounds.json",
        {
            "row": row,
            "checks": [{"name": n, "lhs": a, "rhs": b, "ok": ok} for n, a, b, ok in res.report.checks()],
            "pdf_sup_gap": res.pdf_sup_gap,
            "notes": res.notes,
        },
    )
    return 0 if res.report.ok else 1


def _compare(cfg):
    cmp = compare_histogram(cfg)
    out = Path(cfg.out_dir)
    cols = list(cmp.rows[0])
    write_csv(out / "compare_hist.csv", cols, [[r[c] for c in cols] for r in cmp.rows])
    scols = list(cmp.seed_rows[0])
    write_csv(out / "compare_hist_seeds.csv", scols, [[r[c] for c in scols] for r in cmp.seed_rows])
    write_json(out / "rates.json", {k: f.as_dict() for k, f in cmp.fits.items()})
    for k, f in cmp.fits.items():
        print(f"{k}: W1 ~ N^{f.slope:.3f} (r2 {f.r2:.3f})")
    return 0


def _demo(cfg):
    summary, table = demo_oscillator(cfg)
    out = Path(cfg.out_dir)
    cols = list(table)
    write_csv(out / "oscillator_pdf.csv", cols, list(zip(*(table[c] for c in cols))))
    write_json(out / "oscillator_summary.json", summary)
    for k in ("sup_abs_f_minus_g", "w1", "w2", "hm1", "l1pdf"):
        print(f"{k} = {summary[k]:.6g}")
    return 0


_COMMANDS = {"converge": _converge, "bounds": _bounds, "compare-hist": _compare, "demo-oscillator": _demo}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
