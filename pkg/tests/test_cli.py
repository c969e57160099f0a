import csv
import json

import pytest

from alphaforge.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_VALIDATION,
    RunManifest,
    UsageError,
    main,
    parse_synthetic,
    select_jobs,
)
from alphaforge.corpus import corpus_text
from alphaforge.market import generate_synthetic, write_market_csv

SMALL = "seed=3,days=300,assets=30,groups=3"


def read_stats(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_corpus(tmp_path, capsys):
    f = tmp_path / "alphas.txt"
    f.write_text(corpus_text())
    assert main(["validate", str(f)]) == EXIT_OK
    out = capsys.readouterr().out
    assert sum(": OK (" in line for line in out.splitlines()) == 101


def test_validate_unbalanced(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("rank(close\n")
    assert main(["validate", str(f)]) == EXIT_VALIDATION
    assert "unbalanced parenthesis at" in capsys.readouterr().out


def test_validate_empty(tmp_path, capsys):
    f = tmp_path / "empty.txt"
    f.write_text("\n")
    assert main(["validate", str(f)]) == EXIT_VALIDATION
    captured = capsys.readouterr()
    assert "no expressions found" in captured.out + captured.err


def test_validate_named_entries(tmp_path, capsys):
    f = tmp_path / "mine.txt"
    f.write_text("mom: rank(delta(close, 5))\nclose > open ? 1 : -1\n")
    assert main(["validate", str(f)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "mom: OK" in out and "expr2: OK" in out


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "nope.txt")]) != EXIT_OK


def test_bad_flags_exit_1(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["run", "--out", str(tmp_path)])
    assert e.value.code == EXIT_VALIDATION
    assert main(["run", "--synthetic", "seed=1,days=5", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["run", "--synthetic", SMALL, "--alphas", "0,5", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["run", "--synthetic", SMALL, "--book", "-5", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_missing_data_exit_2(tmp_path):
    assert main(["run", "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_short_history_exit_2(tmp_path):
    code = main(["run", "--synthetic", "seed=1,days=100,assets=10", "--alphas", "19", "--out", str(tmp_path)])
    assert code == EXIT_DATA
    assert "InsufficientHistoryError" in (tmp_path / "errors.txt").read_text()


def test_run_is_byte_identical(tmp_path):
    args = ["run", "--synthetic", SMALL, "--alphas", "1-12,42,53,101", "--emit-values"]
    assert main(args + ["--out", str(tmp_path / "a"), "--threads", "4"]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--threads", "1"]) == EXIT_OK
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert {"stats.csv", "correlation.csv", "report.txt", "regressions.csv", "manifest.json"} <= {str(f) for f in files}
    assert any(str(f).startswith("values") for f in files)
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_delay_zero_recorded(tmp_path):
    assert main(["run", "--synthetic", SMALL, "--alphas", "42,53", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_stats(tmp_path / "stats.csv")
    assert [(r["id"], r["delay_class"]) for r in rows] == [("42", "0"), ("53", "0")]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["synthetic"] == parse_synthetic(SMALL)


def test_run_from_csv_and_file(tmp_path):
    data = tmp_path / "market.csv"
    write_market_csv(generate_synthetic(2, 120, 12, 2), data)
    src = tmp_path / "mine.txt"
    src.write_text("mom: rank(delta(close, 5))\nrev: -ts_rank(volume, 10)\n")
    assert main(["run", "--data", str(data), "--alphas", str(src), "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = read_stats(tmp_path / "o" / "stats.csv")
    assert len(rows) == 2 and all(r["delay_class"] == "1" for r in rows)


def test_select_jobs():
    assert [j.key for j in select_jobs("3-5,1")] == ["1", "3", "4", "5"]
    assert len(select_jobs("all")) == 101
    with pytest.raises(UsageError):
        select_jobs("abc")


def test_manifest_requires_one_source():
    with pytest.raises(UsageError):
        RunManifest(data=None, synthetic=None, alphas="all", book=1.0, out="x")
    with pytest.raises(UsageError):
        RunManifest(data="a.csv", synthetic={"seed": 1}, alphas="all", book=1.0, out="x")


def test_corpus_export_and_list(tmp_path, capsys):
    assert main(["corpus", "export", str(tmp_path / "c.txt")]) == EXIT_OK
    assert (tmp_path / "c.txt").read_text() == corpus_text()
    assert main(["corpus", "list"]) == EXIT_OK
    assert "101" in capsys.readouterr().out
