"""Command line interface.

Subcommands: ``estimate`` (day-by-day estimates from a line list),
``fit-survival`` (delay model fits), ``simulate`` (replicate study of a
synthetic scenario), ``coverage`` (interval coverage of the same).

Exit codes: 0 success, 2 usage error, 3 unreadable input, 4 malformed
input, 5 estimation failure, 1 unexpected error. Outputs are written
atomically (temporary file + rename) with a one-line ``#`` metadata header
recording the subcommand and flags, so identical invocations produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .errors import CfrError, EstimationError, ParseError
from .estimators import DelaySchedule, EstimateSeries, estimate_series
from .linelist import aggregate, parse_csv
from .simulation import (
    Scenario,
    StepRates,
    StudyResult,
    load_example_arm,
    run_study,
)
from .survival import (
    DelaySample,
    NegBinomial,
    SurvivalModel,
    Zinb,
    fit_empirical,
    fit_nb_mle,
    fit_zinb_mle,
    nb_loglik,
    point_mass,
    zinb_loglik,
)

__all__ = ["RunConfig", "main"]

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_UNREADABLE = 3
EXIT_MALFORMED = 4
EXIT_ESTIMATION = 5


class RunConfig(argparse.Namespace):
    """Parsed invocation; argparse fills the per-subcommand attributes."""


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _meta_line(args: argparse.Namespace) -> str:
    skip = {"func", "command"}
    parts = [
        f"{key.replace('_', '-')}={value}"
        for key, value in sorted(vars(args).items())
        if key not in skip and value is not None
    ]
    return f"# cfrkit {__version__} | {args.command} | " + " ".join(parts)


def _write_csv(
    path: str, meta: str, header: Sequence[str], rows: Iterable[Sequence[str]]
) -> None:
    """Write atomically: a temp file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        dir=target.parent, prefix=target.name + ".", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(meta + "\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _parse_epoch(value: str | None) -> date | None:
    return date.fromisoformat(value) if value else None


def _parse_delay_spec(spec: str) -> SurvivalModel:
    """Parse nb:MU,R | zinb:PI,MU,R | point:K into a delay model."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "nb":
            mu, r = (float(x) for x in rest.split(","))
            return NegBinomial(mu, r)
        if kind == "zinb":
            pi, mu, r = (float(x) for x in rest.split(","))
            return Zinb(pi, mu, r)
        if kind == "point":
            return point_mass(int(rest))
    except (ValueError, TypeError) as exc:
        raise argparse.ArgumentTypeError(f"bad delay spec {spec!r}: {exc}") from exc
    raise argparse.ArgumentTypeError(
        f"unknown delay family {kind!r} (expected nb, zinb, or point)"
    )


def _read_arm_csv(path: str) -> np.ndarray:
    text = _read_text(path)
    reader = csv.reader(
        line for line in text.splitlines() if line.strip() and not line.startswith("#")
    )
    header = next(reader, None)
    if header is None:
        raise ParseError(f"{path}: empty case-curve file")
    names = [h.strip() for h in header]
    if "cases" not in names:
        raise ParseError(f"{path}: case-curve file needs a 'cases' column")
    col = names.index("cases")
    try:
        arm = np.array([int(row[col]) for row in reader if row], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: bad case count ({exc})") from exc
    if arm.size == 0:
        raise ParseError(f"{path}: no case counts found")
    return arm


def _read_params_csv(path: str) -> SurvivalModel:
    """Load a parametric delay model from a fit-survival parameter file.

    Rows without distribution parameters (the empirical entry) are skipped;
    among the rest the highest log-likelihood wins.
    """
    text = _read_text(path)
    rows = [
        line
        for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    ]
    reader = csv.DictReader(rows)
    best: tuple[float, SurvivalModel] | None = None
    for row in reader:
        model_name = (row.get("model") or "").strip()
        mu_raw = (row.get("mu") or "").strip()
        r_raw = (row.get("r") or "").strip()
        if not mu_raw or not r_raw:
            continue
        mu, r = float(mu_raw), float(r_raw)
        pi_raw = (row.get("pi") or "").strip()
        if model_name == "zinb" or (pi_raw and float(pi_raw) > 0):
            model: SurvivalModel = Zinb(float(pi_raw or 0.0), mu, r)
        else:
            model = NegBinomial(mu, r)
        loglik = float((row.get("loglik") or "nan").strip() or "nan")
        if best is None or loglik > best[0]:
            best = (loglik, model)
    if best is None:
        raise ParseError(f"{path}: no parametric delay model rows found")
    return best[1]


# ---------------------------------------------------------------------------
# Subcommands


def _series_rows(series: EstimateSeries, with_final: bool, with_true: bool):
    header = ["t", "r_t", "cfr_naive", "cfr", "ci_low", "ci_high", "cfr_garske", "cfr_garske_mod"]
    if with_final:
        header.append("cfr_final")
    if with_true:
        header.append("cfr_true")
    rows = []
    for i in range(len(series)):
        row = [
            str(int(series.t[i])),
            str(int(series.r_t[i])),
            _fmt(series.cfr_naive[i]),
            _fmt(series.cfr[i]),
            _fmt(series.ci_low[i]),
            _fmt(series.ci_high[i]),
            _fmt(series.cfr_garske[i]),
            _fmt(series.cfr_garske_mod[i]),
        ]
        if with_final:
            row.append(_fmt(series.cfr_final[i]))
        if with_true:
            row.append(_fmt(series.cfr_true[i]))
        rows.append(row)
    return header, rows


def _input_path(args: argparse.Namespace) -> str:
    path = args.input_flag or args.input
    if not path:
        raise argparse.ArgumentTypeError("an input line-list CSV is required")
    return path


def _cmd_estimate(args: argparse.Namespace) -> int:
    text = _read_text(_input_path(args))
    linelist = parse_csv(text, epoch=_parse_epoch(args.epoch))
    table = aggregate(linelist)

    schedule = None
    if args.survival == "nb":
        schedule = DelaySchedule(fit_nb_mle(DelaySample.from_linelist(linelist)))
    elif args.survival == "zinb":
        schedule = DelaySchedule(fit_zinb_mle(DelaySample.from_linelist(linelist)))
    elif args.survival == "file":
        if not args.survival_file:
            raise argparse.ArgumentTypeError("--survival file needs --survival-file")
        schedule = DelaySchedule(_read_params_csv(args.survival_file))
    # args.survival == "empirical": leave None, estimate_series refits per day.

    last_day = table.n_days - 1
    start = args.from_day if args.from_day is not None else 2 * args.lookback
    stop = args.to_day if args.to_day is not None else last_day
    if stop > last_day:
        stop = last_day
    if start > stop:
        raise EstimationError(
            f"no evaluation days: requested {start}..{stop} with data ending at {last_day}"
        )
    series = estimate_series(
        table,
        range(start, stop + 1),
        alpha=args.alpha,
        schedule=schedule,
        lookback=args.lookback,
        include_final=args.with_final,
    )
    header, rows = _series_rows(series, with_final=args.with_final, with_true=False)
    _write_csv(args.output, _meta_line(args), header, rows)
    return EXIT_OK


def _cmd_fit_survival(args: argparse.Namespace) -> int:
    text = _read_text(_input_path(args))
    linelist = parse_csv(text, epoch=_parse_epoch(args.epoch))
    table = aggregate(linelist)
    sample = DelaySample.from_linelist(linelist)

    t_fit = table.n_days - 1
    empirical = fit_empirical(table, t_fit, lookback=args.lookback)
    lags = sample.lags
    nb = fit_nb_mle(sample)
    zinb = fit_zinb_mle(sample)

    # Empirical log-likelihood over its own eligible support.
    emp_pmf = np.diff(np.concatenate([[0.0], empirical.cdf_table]))
    emp_ll = 0.0
    eligible = lags[lags <= empirical.cdf_table.size - 1]
    for k in np.unique(eligible):
        mass = emp_pmf[int(k)]
        if mass > 0:
            emp_ll += float(np.sum(eligible == k)) * float(np.log(mass))

    param_rows = [
        ["empirical", "", "", "", _fmt(emp_ll), str(empirical.n_obs)],
        ["nb", "", _fmt(nb.mu), _fmt(nb.r), _fmt(nb_loglik(sample, nb.mu, nb.r)), str(len(sample))],
        [
            "zinb",
            _fmt(zinb.pi),
            _fmt(zinb.mu),
            _fmt(zinb.r),
            _fmt(zinb_loglik(sample, zinb.pi, zinb.mu, zinb.r)),
            str(len(sample)),
        ],
    ]
    _write_csv(
        args.output,
        _meta_line(args),
        ["model", "pi", "mu", "r", "loglik", "n"],
        param_rows,
    )

    cdf_path = args.cdf_output
    if cdf_path is None:
        out = Path(args.output)
        cdf_path = str(out.with_name(out.stem + "_cdf" + out.suffix))
    cdf_rows = [
        [str(k), _fmt(v)] for k, v in enumerate(empirical.cdf_table.tolist())
    ]
    _write_csv(cdf_path, _meta_line(args), ["k", "cdf"], cdf_rows)
    return EXIT_OK


def _build_scenario(args: argparse.Namespace) -> Scenario:
    arm = _read_arm_csv(args.arm_file) if args.arm_file else load_example_arm()
    if args.arm_days is not None:
        if not 0 < args.arm_days <= arm.size:
            raise argparse.ArgumentTypeError(
                f"--arm-days must lie in 1..{arm.size}"
            )
        arm = arm[: args.arm_days]
    span = arm.size * (2 if args.symmetric else 1)
    horizon = args.horizon if args.horizon is not None else span - 1 + args.tail_days
    return Scenario(
        rising_arm=arm,
        symmetric=args.symmetric,
        p_spec=StepRates(args.c1, args.c2, args.dstar),
        delay=_parse_delay_spec(args.delay),
        horizon=horizon,
        seed=args.seed,
        replicates=args.replicates,
    )


def _eval_days(args: argparse.Namespace, scenario: Scenario, mode: str):
    if args.from_day is None and args.to_day is None and args.every == 1:
        return None  # run_study default grid
    curve_cases = np.cumsum(scenario.curve)
    first = int(np.nonzero(curve_cases > 0)[0][0])
    default_start = first if mode == "known" else 2 * args.lookback
    start = args.from_day if args.from_day is not None else default_start
    stop = args.to_day if args.to_day is not None else scenario.horizon
    return range(start, stop + 1, args.every)


def _cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _build_scenario(args)
    result = run_study(
        scenario,
        args.mode,
        eval_days=_eval_days(args, scenario, args.mode),
        alpha=args.alpha,
        lookback=args.lookback,
        keep_series=args.per_replicate_dir is not None,
    )
    header = [
        "t",
        "r_t",
        "cfr_true",
        "mean_cfr_naive",
        "se_cfr_naive",
        "mean_cfr",
        "se_cfr",
        "mean_cfr_garske",
        "se_cfr_garske",
        "mean_cfr_garske_mod",
        "se_cfr_garske_mod",
        "mean_cfr_final",
        "se_cfr_final",
        "coverage",
        "coverage_se",
        "mean_ci_length",
    ]
    rows = []
    for i in range(result.days.size):
        rows.append(
            [str(int(result.days[i])), str(int(result.r_t[i]))]
            + [
                _fmt(arr[i])
                for arr in (
                    result.cfr_true,
                    result.mean_cfr_naive,
                    result.se_cfr_naive,
                    result.mean_cfr,
                    result.se_cfr,
                    result.mean_cfr_garske,
                    result.se_cfr_garske,
                    result.mean_cfr_garske_mod,
                    result.se_cfr_garske_mod,
                    result.mean_cfr_final,
                    result.se_cfr_final,
                    result.coverage.coverage,
                    result.coverage.coverage_se,
                    result.coverage.mean_ci_length,
                )
            ]
        )
    _write_csv(args.output, _meta_line(args), header, rows)

    if args.per_replicate_dir is not None:
        directory = Path(args.per_replicate_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for index, rep in enumerate(result.replicates):
            header_r, rows_r = _series_rows(rep.series, with_final=True, with_true=True)
            _write_csv(
                str(directory / f"replicate_{index:04d}.csv"),
                _meta_line(args) + f" replicate={index}",
                header_r,
                rows_r,
            )
    return EXIT_OK


def _cmd_coverage(args: argparse.Namespace) -> int:
    scenario = _build_scenario(args)
    result = run_study(
        scenario,
        args.mode,
        eval_days=_eval_days(args, scenario, args.mode),
        alpha=args.alpha,
        lookback=args.lookback,
    )
    summary = result.coverage
    rows = [
        [
            str(int(summary.days[i])),
            str(int(summary.r_t[i])),
            _fmt(summary.coverage[i]),
            _fmt(summary.coverage_se[i]),
            _fmt(summary.mean_ci_length[i]),
        ]
        for i in range(summary.days.size)
    ]
    _write_csv(
        args.output,
        _meta_line(args),
        ["t", "r_t", "mean_coverage", "coverage_se", "mean_ci_length"],
        rows,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_io_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "input",
        nargs="?",
        default=None,
        help="line-list CSV (confirm_date,death_date)",
    )
    sub.add_argument(
        "--input",
        dest="input_flag",
        default=None,
        help="line-list CSV; alternative to the positional argument",
    )
    sub.add_argument("-o", "--output", required=True, help="output CSV path")
    sub.add_argument(
        "--epoch",
        default=None,
        help="calendar date of day 0, e.g. 2020-03-03; required for date-valued inputs",
    )
    sub.add_argument(
        "--lookback",
        type=int,
        default=45,
        help="days a cohort must age before entering the empirical delay fit (default 45)",
    )


def _add_scenario_options(sub: argparse.ArgumentParser, default_mode: str) -> None:
    sub.add_argument("-o", "--output", required=True, help="output CSV path")
    sub.add_argument(
        "--arm-file",
        default=None,
        help="CSV with a 'cases' column giving the rising arm (default: bundled curve)",
    )
    sub.add_argument(
        "--arm-days", type=int, default=None, help="truncate the arm to its first N days"
    )
    sub.add_argument(
        "--symmetric",
        action="store_true",
        help="mirror the arm around its peak",
    )
    sub.add_argument("--c1", type=float, default=0.1, help="daily rate before the step (default 0.1)")
    sub.add_argument("--c2", type=float, default=0.05, help="daily rate from the step on (default 0.05)")
    sub.add_argument("--dstar", type=int, default=120, help="step day (default 120)")
    sub.add_argument(
        "--delay",
        default="nb:10.79,0.88",
        help="delay model: nb:MU,R | zinb:PI,MU,R | point:K (default nb:10.79,0.88)",
    )
    sub.add_argument("--seed", type=int, default=0, help="study seed (default 0)")
    sub.add_argument(
        "--replicates", type=int, default=200, help="number of replicates (default 200)"
    )
    sub.add_argument(
        "--horizon",
        type=int,
        default=None,
        help="last simulated day (default: curve end + tail days)",
    )
    sub.add_argument(
        "--tail-days",
        type=int,
        default=150,
        help="zero-case days appended after the curve when --horizon is absent (default 150)",
    )
    sub.add_argument(
        "--mode",
        choices=["known", "estimated"],
        default=default_mode,
        help=f"evaluation mode (default {default_mode})",
    )
    sub.add_argument("--alpha", type=float, default=0.05, help="interval level (default 0.05)")
    sub.add_argument(
        "--lookback",
        type=int,
        default=45,
        help="empirical-fit lookback used in estimated mode (default 45)",
    )
    sub.add_argument("--from", dest="from_day", type=int, default=None, help="first evaluation day")
    sub.add_argument("--to", dest="to_day", type=int, default=None, help="last evaluation day")
    sub.add_argument("--every", type=int, default=1, help="evaluation-day stride (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfrkit",
        description="Delay-adjusted case fatality rate estimation.",
        epilog=(
            "exit codes: 0 ok, 2 usage, 3 unreadable input, 4 malformed input, "
            "5 estimation failure, 1 unexpected"
        ),
    )
    parser.add_argument("--version", action="version", version=f"cfrkit {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    est = commands.add_parser(
        "estimate", help="day-by-day estimates and intervals from a line list"
    )
    _add_io_options(est)
    est.add_argument(
        "--survival",
        choices=["empirical", "nb", "zinb", "file"],
        default="empirical",
        help="delay CDF source (default: per-day empirical refit)",
    )
    est.add_argument(
        "--survival-file",
        default=None,
        help="parameter CSV from fit-survival, used with --survival file",
    )
    est.add_argument("--alpha", type=float, default=0.05, help="interval level (default 0.05)")
    est.add_argument(
        "--from",
        dest="from_day",
        type=int,
        default=None,
        help="first evaluation day (default 2 * lookback)",
    )
    est.add_argument(
        "--to", dest="to_day", type=int, default=None, help="last evaluation day (default: last data day)"
    )
    est.add_argument(
        "--with-final",
        action="store_true",
        help="append the hindsight cfr_final column (uses recorded outcomes)",
    )
    est.set_defaults(func=_cmd_estimate)

    fit = commands.add_parser("fit-survival", help="fit delay models to a line list")
    _add_io_options(fit)
    fit.add_argument(
        "--cdf-output",
        default=None,
        help="empirical CDF table path (default: output stem + _cdf.csv)",
    )
    fit.set_defaults(func=_cmd_fit_survival)

    sim = commands.add_parser(
        "simulate", help="replicate study of a synthetic step-rate scenario"
    )
    _add_scenario_options(sim, default_mode="known")
    sim.add_argument(
        "--per-replicate-dir",
        default=None,
        help="also write one estimate CSV per replicate into this directory",
    )
    sim.set_defaults(func=_cmd_simulate)

    cov = commands.add_parser(
        "coverage", help="interval coverage study of a synthetic scenario"
    )
    _add_scenario_options(cov, default_mode="estimated")
    cov.set_defaults(func=_cmd_coverage)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv, namespace=RunConfig())
    except SystemExit as exc:  # argparse uses 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"cfrkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cfrkit: cannot read or write file: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    except ParseError as exc:
        print(f"cfrkit: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (EstimationError, ValueError) as exc:
        print(f"cfrkit: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except CfrError as exc:
        print(f"cfrkit: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except Exception as exc:  # pragma: no cover - safety net
        print(f"cfrkit: unexpected error: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
