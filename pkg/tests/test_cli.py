"""Command line behaviour: schemas, exit codes, determinism, atomicity."""

from __future__ import annotations

import csv
import hashlib
import io
from datetime import date
from importlib import resources

import numpy as np
import pytest

from cfrkit import (
    DelaySchedule,
    NegBinomial,
    aggregate,
    estimate_series,
    fit_nb_mle,
    parse_csv,
)
from cfrkit.cli import main
from cfrkit.survival import DelaySample

# The bundled 1000-row example is deliberately sparse, so the window rates
# legitimately fail A2 on some days; the warning is part of the contract.
pytestmark = pytest.mark.filterwarnings("ignore::cfrkit.AssumptionWarning")


@pytest.fixture
def linelist_file(tmp_path):
    text = resources.files("cfrkit.data").joinpath("example_linelist.csv").read_text()
    path = tmp_path / "linelist.csv"
    path.write_text(text)
    return path


def read_output(path):
    """Split an output CSV into its metadata line and parsed rows."""
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# cfrkit")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return lines[0], rows


# ---------------------------------------------------------------------------
# estimate


def test_estimate_schema_and_values(tmp_path, linelist_file):
    out = tmp_path / "est.csv"
    code = main(
        [
            "estimate",
            str(linelist_file),
            "-o",
            str(out),
            "--epoch",
            "2020-03-03",
            "--from",
            "100",
            "--to",
            "105",
        ]
    )
    assert code == 0
    meta, rows = read_output(out)
    assert "estimate" in meta
    assert list(rows[0].keys()) == [
        "t",
        "r_t",
        "cfr_naive",
        "cfr",
        "ci_low",
        "ci_high",
        "cfr_garske",
        "cfr_garske_mod",
    ]
    assert [r["t"] for r in rows] == [str(t) for t in range(100, 106)]

    # Values match the library path exactly.
    linelist = parse_csv(linelist_file.read_text(), epoch=date(2020, 3, 3))
    table = aggregate(linelist)
    series = estimate_series(table, range(100, 106), lookback=45)
    for row, i in zip(rows, range(len(series))):
        assert float(row["cfr"]) == series.cfr[i]
        assert float(row["ci_low"]) == series.ci_low[i]
        assert int(row["r_t"]) == series.r_t[i]


def test_estimate_with_final_column(tmp_path, linelist_file):
    out = tmp_path / "est.csv"
    code = main(
        [
            "estimate",
            "--input",
            str(linelist_file),
            "-o",
            str(out),
            "--epoch",
            "2020-03-03",
            "--from",
            "95",
            "--to",
            "96",
            "--with-final",
        ]
    )
    assert code == 0
    _, rows = read_output(out)
    assert "cfr_final" in rows[0]


def test_estimate_nb_survival(tmp_path, linelist_file):
    out = tmp_path / "est.csv"
    code = main(
        [
            "estimate",
            str(linelist_file),
            "-o",
            str(out),
            "--epoch",
            "2020-03-03",
            "--survival",
            "nb",
            "--from",
            "100",
            "--to",
            "101",
        ]
    )
    assert code == 0
    _, rows = read_output(out)
    linelist = parse_csv(linelist_file.read_text(), epoch=date(2020, 3, 3))
    table = aggregate(linelist)
    nb = fit_nb_mle(DelaySample.from_linelist(linelist))
    series = estimate_series(table, [100, 101], schedule=DelaySchedule(nb))
    assert float(rows[0]["cfr"]) == pytest.approx(series.cfr[0], rel=1e-12)


def test_estimate_deterministic_bytes(tmp_path, linelist_file):
    digests = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        args = [
            "estimate",
            str(linelist_file),
            "-o",
            str(out),
            "--epoch",
            "2020-03-03",
            "--from",
            "100",
            "--to",
            "102",
        ]
        assert main(args) == 0
        content = out.read_bytes().replace(name.encode(), b"OUT")
        digests.append(hashlib.sha256(content).hexdigest())
    assert digests[0] == digests[1]


def test_estimate_does_not_touch_input(tmp_path, linelist_file):
    before = hashlib.sha256(linelist_file.read_bytes()).hexdigest()
    main(
        [
            "estimate",
            str(linelist_file),
            "-o",
            str(tmp_path / "o.csv"),
            "--epoch",
            "2020-03-03",
            "--from",
            "100",
            "--to",
            "100",
        ]
    )
    assert hashlib.sha256(linelist_file.read_bytes()).hexdigest() == before


def test_estimate_no_stray_temp_files(tmp_path, linelist_file):
    out = tmp_path / "est.csv"
    main(
        [
            "estimate",
            str(linelist_file),
            "-o",
            str(out),
            "--epoch",
            "2020-03-03",
            "--from",
            "100",
            "--to",
            "100",
        ]
    )
    assert sorted(p.name for p in tmp_path.iterdir()) == ["est.csv", "linelist.csv"]


# ---------------------------------------------------------------------------
# exit codes


def test_exit_unreadable_input(tmp_path, capsys):
    code = main(["estimate", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "o.csv")])
    assert code == 3
    assert "cannot read" in capsys.readouterr().err


def test_exit_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("confirm_date,death_date\n5,2\n")
    code = main(["estimate", str(bad), "-o", str(tmp_path / "o.csv")])
    assert code == 4
    assert "death precedes confirmation at line 2" in capsys.readouterr().err
    assert not (tmp_path / "o.csv").exists()


def test_exit_estimation_failure(tmp_path, capsys):
    short = tmp_path / "short.csv"
    short.write_text("confirm_date,death_date\n0,1\n2,\n")
    code = main(["estimate", str(short), "-o", str(tmp_path / "o.csv")])
    assert code == 5
    assert "no evaluation days" in capsys.readouterr().err


def test_exit_usage_errors(tmp_path, capsys):
    assert main(["estimate"]) == 2  # missing --output
    assert main(["no-such-command"]) == 2
    assert main(["estimate", "-o", str(tmp_path / "o.csv")]) == 2  # no input path
    capsys.readouterr()


def test_exit_bad_delay_spec(tmp_path, capsys):
    code = main(
        ["simulate", "-o", str(tmp_path / "o.csv"), "--delay", "weibull:2,3",
         "--arm-days", "10", "--dstar", "5", "--replicates", "1"]
    )
    assert code == 2
    assert "delay" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# fit-survival


def test_fit_survival_outputs(tmp_path, linelist_file):
    out = tmp_path / "fit.csv"
    code = main(
        ["fit-survival", str(linelist_file), "-o", str(out), "--epoch", "2020-03-03"]
    )
    assert code == 0
    meta, rows = read_output(out)
    assert [r["model"] for r in rows] == ["empirical", "nb", "zinb"]
    nb_row = rows[1]
    assert nb_row["pi"] == ""
    assert float(nb_row["mu"]) > 0 and float(nb_row["r"]) > 0
    assert float(nb_row["loglik"]) < 0
    assert int(nb_row["n"]) == 25

    _, cdf_rows = read_output(tmp_path / "fit_cdf.csv")
    cdf = [float(r["cdf"]) for r in cdf_rows]
    assert cdf == sorted(cdf)
    assert cdf[-1] == 1.0
    assert [int(r["k"]) for r in cdf_rows] == list(range(len(cdf)))


def test_fit_survival_file_roundtrip(tmp_path, linelist_file):
    fit_out = tmp_path / "fit.csv"
    main(["fit-survival", str(linelist_file), "-o", str(fit_out), "--epoch", "2020-03-03"])
    est_out = tmp_path / "est.csv"
    code = main(
        [
            "estimate",
            str(linelist_file),
            "-o",
            str(est_out),
            "--epoch",
            "2020-03-03",
            "--survival",
            "file",
            "--survival-file",
            str(fit_out),
            "--from",
            "100",
            "--to",
            "100",
        ]
    )
    assert code == 0
    _, rows = read_output(est_out)
    assert float(rows[0]["cfr"]) > 0


# ---------------------------------------------------------------------------
# simulate / coverage


def test_simulate_aggregated_output(tmp_path):
    out = tmp_path / "sim.csv"
    code = main(
        [
            "simulate",
            "-o",
            str(out),
            "--arm-days",
            "40",
            "--symmetric",
            "--dstar",
            "30",
            "--replicates",
            "4",
            "--seed",
            "11",
            "--from",
            "20",
            "--to",
            "60",
            "--every",
            "20",
        ]
    )
    assert code == 0
    meta, rows = read_output(out)
    assert "seed=11" in meta
    assert [r["t"] for r in rows] == ["20", "40", "60"]
    for row in rows:
        assert 0.0 <= float(row["coverage"]) <= 1.0
        assert float(row["mean_ci_length"]) >= 0.0
        assert float(row["se_cfr"]) >= 0.0


def test_simulate_per_replicate_files(tmp_path):
    out = tmp_path / "sim.csv"
    rep_dir = tmp_path / "reps"
    code = main(
        [
            "simulate",
            "-o",
            str(out),
            "--arm-days",
            "30",
            "--symmetric",
            "--dstar",
            "25",
            "--replicates",
            "3",
            "--seed",
            "2",
            "--from",
            "10",
            "--to",
            "30",
            "--every",
            "10",
            "--per-replicate-dir",
            str(rep_dir),
        ]
    )
    assert code == 0
    files = sorted(p.name for p in rep_dir.iterdir())
    assert files == ["replicate_0000.csv", "replicate_0001.csv", "replicate_0002.csv"]
    _, rows = read_output(rep_dir / "replicate_0000.csv")
    assert "cfr_true" in rows[0] and "cfr_final" in rows[0]


def test_simulate_deterministic(tmp_path):
    args = [
        "simulate",
        "--arm-days",
        "30",
        "--symmetric",
        "--dstar",
        "20",
        "--replicates",
        "3",
        "--seed",
        "5",
        "--from",
        "30",
        "--to",
        "30",
    ]
    out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    assert main(args + ["-o", str(out1)]) == 0
    assert main(args + ["-o", str(out2)]) == 0
    body1 = out1.read_text().replace("s1.csv", "OUT")
    body2 = out2.read_text().replace("s2.csv", "OUT")
    assert body1 == body2


def test_coverage_schema(tmp_path):
    out = tmp_path / "cov.csv"
    code = main(
        [
            "coverage",
            "-o",
            str(out),
            "--arm-days",
            "60",
            "--symmetric",
            "--dstar",
            "40",
            "--replicates",
            "3",
            "--seed",
            "7",
            "--mode",
            "known",
            "--from",
            "40",
            "--to",
            "80",
            "--every",
            "40",
        ]
    )
    assert code == 0
    _, rows = read_output(out)
    assert list(rows[0].keys()) == [
        "t",
        "r_t",
        "mean_coverage",
        "coverage_se",
        "mean_ci_length",
    ]
    r_t = [int(r["r_t"]) for r in rows]
    assert r_t == sorted(r_t)


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "cfrkit" in capsys.readouterr().out
