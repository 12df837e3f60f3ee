"""Command-line entry point.

Exit codes: 0 success, 1 invalid arguments or input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .entropy import DEFAULT_BINS, DEFAULT_CLUSTERS, DEFAULT_SEED
from .errors import HeterogeneityError, ValidationError
from .ingest import (REQUIRED_FIELDS, OPTIONAL_FIELDS, availability_table, build_panels,
                     parse_survey_csv, summarize, write_survey_csv)
from .meregress import (BasisSpec, fit_me_density, fit_me_regression, predict, r_squared,
                        scale_to_unit, to_polar)
from .preprocess import OutlierPolicy, RateTable, parse_ratios, preprocess
from .report import METRICS, compute_metrics, emit_report, render
from .simulate import (CesParams, CobbDouglasScenario, gen_ces, gen_cobb_douglas,
                       run_monte_carlo, write_ces, write_dataset)
from .zonotope import DEFAULT_SAMPLES

SEED_ENV = "INDHET_SEED"
log = logging.getLogger("indhet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    text = os.environ.get(SEED_ENV)
    if text is None:
        return DEFAULT_SEED
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={text!r} is not an integer") from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} must be > 0")
    return v


def _column_map(text):
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        logical, sep, column = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"{part!r} must look like logical=column")
        logical = logical.strip()
        if logical not in REQUIRED_FIELDS + OPTIONAL_FIELDS:
            raise argparse.ArgumentTypeError(f"unknown logical column {logical!r}")
        out[logical] = column.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    seed = _default_seed()
    p = _Parser(prog="indhet", description="Industrial heterogeneity metrics from firm-level data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def out_opts(sp, formats=True):
        if formats:
            sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--output", type=Path)

    def input_opts(sp):
        sp.add_argument("--input", type=Path, required=True)
        sp.add_argument("--column-map", type=_column_map, default={},
                        help="logical=column pairs, e.g. d2=sales,n7a=capital")

    sp = sub.add_parser("preprocess", help="convert to real USD and trim outliers")
    input_opts(sp)
    sp.add_argument("--rates", type=Path, help="CSV: country,year,month,exchange_rate,deflator")
    sp.add_argument("--sd", type=_positive_float, default=3.0)
    sp.add_argument("--ratios", type=parse_ratios, default=(("Y", "L"), ("K", "L")))
    sp.add_argument("--output", type=Path, help="cleaned CSV (default: stdout)")

    sp = sub.add_parser("metrics", help="Gini volume, normalized ME, tangent angles per panel")
    sp.add_argument("which", choices=METRICS + ("all",))
    input_opts(sp)
    sp.add_argument("--clusters", type=_positive_int, default=DEFAULT_CLUSTERS)
    sp.add_argument("--bins", type=_positive_int, default=DEFAULT_BINS)
    sp.add_argument("--seed", type=int, default=seed)
    sp.add_argument("--volume-mode", choices=("exact", "sampled"), default="exact")
    sp.add_argument("--samples", type=_positive_int, default=DEFAULT_SAMPLES)
    out_opts(sp)

    sp = sub.add_parser("fit", help="maximum-entropy regression on a K,L,Y table")
    sp.add_argument("--input", type=Path, required=True)
    sp.add_argument("--order-k", type=int, default=3)
    sp.add_argument("--order-l", type=int, default=3)
    sp.add_argument("--polar", action="store_true")
    sp.add_argument("--density", action="store_true")
    sp.add_argument("--tol", type=_positive_float, default=1e-8)
    sp.add_argument("--max-iter", type=_positive_int, default=200)
    sp.add_argument("--reference-column",
                    help="also report R^2 of the fit against this column (e.g. y_det)")
    sp.add_argument("--output", type=Path)

    sp = sub.add_parser("simulate", help="synthetic datasets and the Monte Carlo comparison")
    sim = sp.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    s = sim.add_parser("ces")
    s.add_argument("--samples", "-T", dest="samples", type=_positive_int, default=2000)
    s.add_argument("--sigma-u", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--output", type=Path)
    s = sim.add_parser("cobb-douglas")
    s.add_argument("--regime", choices=("high", "low"), required=True)
    s.add_argument("--firms", type=_positive_int, default=100)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--output", type=Path)
    s = sim.add_parser("monte-carlo")
    s.add_argument("--pairs", type=_positive_int, default=100)
    s.add_argument("--firms", type=_positive_int, default=100)
    s.add_argument("--clusters", type=_positive_int, default=DEFAULT_CLUSTERS)
    s.add_argument("--bins", type=_positive_int, default=DEFAULT_BINS)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--outdir", type=Path)
    out_opts(s)

    sp = sub.add_parser("summary", help="availability counts and Y/K/L summary statistics")
    input_opts(sp)
    sp.add_argument("--threshold", type=float, default=100.0)
    out_opts(sp)
    return p


def _note_seed(seed):
    print(f"seed: {seed}", file=sys.stderr)


def _write_text(text: str, path):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_panels(args):
    records = parse_survey_csv(args.input, args.column_map)
    panels, dropped = build_panels(records)
    if dropped:
        log.info("dropped %d incomplete records", dropped)
    return panels


def cmd_preprocess(args):
    records = parse_survey_csv(args.input, args.column_map)
    rates = RateTable.from_csv(args.rates) if args.rates else None
    policy = OutlierPolicy(sd_multiplier=args.sd, ratio_set=args.ratios)
    cleaned, report = preprocess(records, rates, policy)
    summary = json.dumps(report.to_dict(), indent=2) + "\n"
    if args.output is None:
        write_survey_csv(cleaned, sys.stdout)
        sys.stderr.write(summary)
    else:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            write_survey_csv(cleaned, fh)
        sys.stdout.write(summary)


def cmd_metrics(args):
    which = METRICS if args.which == "all" else (args.which,)
    if "me" in which or args.volume_mode == "sampled":
        _note_seed(args.seed)
    bundle = compute_metrics(_load_panels(args), which=which, clusters=args.clusters,
                             bins=args.bins, seed=args.seed, volume_mode=args.volume_mode,
                             samples=args.samples)
    emit_report(bundle, args.format, args.output)


def _read_table(path: Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r]
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric cell ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged or empty table")
    return {h: data[:, i] for i, h in enumerate(header)}


def cmd_fit(args):
    table = _read_table(args.input)
    for col in ("K", "L"):
        if col not in table:
            raise ValidationError(f"{args.input}: missing column {col}")
    ycol = "Y" if "Y" in table else "y"
    if ycol not in table:
        raise ValidationError(f"{args.input}: missing output column Y (or y)")
    spec = BasisSpec(args.order_k, args.order_l)
    sample = scale_to_unit(table["K"], table["L"], table[ycol])
    if args.polar:
        sample = to_polar(sample)
    coeffs, report = fit_me_regression(sample, spec, max_iter=args.max_iter, tol=args.tol)
    out = {"coefficients": None, "report": report.to_dict()}
    if args.reference_column:
        if args.reference_column not in table:
            raise ValidationError(f"{args.input}: missing column {args.reference_column}")
        y_hat = predict(coeffs, table["K"], table["L"]).y
        out["reference_r_squared"] = r_squared(table[args.reference_column], y_hat)
    if args.density:
        dens = fit_me_density(sample, spec, tol=args.tol, max_iter=args.max_iter)
        coeffs = type(coeffs)(coeffs.s, coeffs.basis, coeffs.scaler, coeffs.representation, dens.c)
        out["density"] = {"converged": dens.converged, "iterations": dens.iterations,
                          "moment_residual_norm": dens.moment_residual_norm,
                          "integral": dens.integral()}
    out["coefficients"] = coeffs.to_dict()
    _write_text(json.dumps(out, indent=2, allow_nan=False) + "\n", args.output)
    return 0 if report.converged else 2


def _dataset_csv(writer_fn, data, path, seed):
    _note_seed(seed)
    if path is None:
        writer_fn(sys.stdout, data)
    else:
        writer_fn(path, data)
        print(json.dumps({"path": str(path), "seed": seed}))


def cmd_simulate(args):
    if args.kind == "ces":
        sample = gen_ces(CesParams(sigma_u=args.sigma_u, sample_size=args.samples, seed=args.seed))
        _dataset_csv(write_ces, sample, args.output, args.seed)
    elif args.kind == "cobb-douglas":
        data = gen_cobb_douglas(CobbDouglasScenario(args.regime, n=args.firms, seed=args.seed))
        _dataset_csv(write_dataset, data, args.output, args.seed)
    else:
        _note_seed(args.seed)
        report = run_monte_carlo(pairs=args.pairs, n=args.firms, master_seed=args.seed,
                                 clusters=args.clusters, bins=args.bins, outdir=args.outdir,
                                 workers=args.workers)
        if args.outdir is not None:
            (args.outdir / "monte_carlo_report.json").write_text(render(report, "json"), encoding="utf-8")
            (args.outdir / "monte_carlo_report.csv").write_text(render(report, "csv"), encoding="utf-8")
        emit_report(report, args.format, args.output)


class _SummaryReport:
    def __init__(self, panels, threshold):
        self.table = availability_table(panels, threshold)
        self.stats = {key: [summarize(panel, v) for v in ("Y", "K", "L")]
                      for key, panel in panels.items()}

    def to_dict(self):
        return {
            "availability": self.table.to_dict(),
            "panels": {key.label(): {s.variable: s.to_dict() for s in stats}
                       for key, stats in sorted(self.stats.items())},
        }

    csv_header = ("isic", "country", "year", "variable", "count", "mean", "std_dev", "min", "max")

    def csv_rows(self):
        for key, stats in sorted(self.stats.items()):
            for s in stats:
                yield (key.isic, key.country, key.year, s.variable, s.count, s.mean, s.std_dev, s.min, s.max)


def cmd_summary(args):
    emit_report(_SummaryReport(_load_panels(args), args.threshold), args.format, args.output)


COMMANDS = {
    "preprocess": cmd_preprocess,
    "metrics": cmd_metrics,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "summary": cmd_summary,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except (ValidationError, ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"indhet: error: {exc}", file=sys.stderr)
        return 1
    except (HeterogeneityError, OSError) as exc:
        print(f"indhet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
