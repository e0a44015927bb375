import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from spgls import cli
from spgls.dataset import load_csv
from spgls.errors import NumericError
from spgls.evaluate import _threads


def run(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture
def generated(tmp_path):
    path = tmp_path / "gen.csv"
    assert run("gen", "--m", 200, "--n", 100, "--noise", 0.1, "--seed", 7, "--out", path) == 0
    return path


def test_gen_shape(generated):
    with open(generated) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 201
    assert len(rows[0]) >= 101 and rows[0][-2:] == ["y", "z"]
    d = load_csv(generated, z_column="z")
    assert (d.m, d.n) == (200, 100)
    assert np.all(d.z >= d.y) and np.any(d.z > d.y)


def test_gen_without_attack(tmp_path):
    path = tmp_path / "g.csv"
    assert run("gen", "--m", 5, "--n", 2, "--attack", "none", "--out", path) == 0
    d = load_csv(path, z_column="z")
    np.testing.assert_array_equal(d.z, d.y)


def test_solve_generated(generated, tmp_path):
    out = tmp_path / "eq.json"
    assert run("solve", "--input", generated, "--gamma", 0.01, "--out", out) == 0
    res = json.loads(out.read_text())
    assert res["verification"]["passed"] is True
    assert len(res["w"]) == 100
    assert {"mu", "lambda", "alpha", "objective", "residuals", "status", "timings"} <= set(res)
    assert abs(res["objective"] - res["mu"]) <= 1e-6 * (1 + abs(res["mu"]))


def test_solve_stdout(capsys, tmp_path):
    path = tmp_path / "w1.csv"
    path.write_text("x,y\n1,1\n")
    assert run("solve", "--input", path, "--gamma", 1, "--no-normalize") == 0
    res = json.loads(capsys.readouterr().out)
    assert res["w"][0] == pytest.approx(1.0, abs=1e-9)
    assert res["status"] == "boundary"


def test_attack_example(tmp_path):
    src, dst = tmp_path / "y.csv", tmp_path / "z.csv"
    src.write_text("x,y\n1,5\n2,7\n")
    assert run("attack", "--input", src, "--spec", "threshold:6", "--out", dst) == 0
    d = load_csv(dst, z_column="z")
    np.testing.assert_array_equal(d.z, [6.0, 7.0])
    np.testing.assert_array_equal(d.y, [5.0, 7.0])


def test_exit_codes(tmp_path, capsys):
    good = tmp_path / "ok.csv"
    good.write_text("x,y\n1,5\n2,7\n")
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,abc\n")
    unattained = tmp_path / "u.csv"
    unattained.write_text("x,y\n1,1\n1,-1\n")

    assert run("solve", "--input", good) == 2                       # missing --gamma
    assert run("solve", "--input", good, "--gamma", -1) == 2
    assert run("cv", "--input", good, "--gamma-grid", "1:0.5:3") == 2
    assert run("cv", "--input", good, "--methods", "lasso") == 2
    assert run("attack", "--input", good, "--spec", "bogus", "--out", tmp_path / "o.csv") == 2
    assert run("solve", "--input", tmp_path / "missing.csv", "--gamma", 1) == 3
    assert run("solve", "--input", bad, "--gamma", 1) == 3
    assert run("solve", "--input", unattained, "--gamma", 1, "--no-normalize") == 4
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "UnattainedEquilibriumError"
    assert run("cv", "--input", good, "--folds", 5, "--gamma-grid", "0.1") == 3


def test_help_documents_flags(capsys):
    assert run("--help") == 0
    assert run("cv", "--help") == 0
    text = capsys.readouterr().out
    for flag in ("--gamma-grid", "--folds", "--methods", "--attack", "--out-csv", "--threads"):
        assert flag in text


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run([sys.executable, "-m", "spgls", "gen", "--m", "3", "--n", "2", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


def test_parse_grid():
    np.testing.assert_allclose(cli.parse_grid("1e-3:0.75:40"), np.linspace(1e-3, 0.75, 40))
    assert cli.parse_grid("1e-3:0.75:40").size == 40
    np.testing.assert_allclose(cli.parse_grid("0.01:1:3:log"), [0.01, 0.1, 1.0])
    np.testing.assert_allclose(cli.parse_grid("0.1, 0.2"), [0.1, 0.2])
    for bad in ("0:1:3", "1:0.5:3", "0.1:1:0", "a,b", "-1", "0.1:1:3:lin"):
        with pytest.raises(cli.ArgumentError):
            cli.parse_grid(bad)


def _strip_seconds(path):
    with open(path) as fh:
        return [{k: v for k, v in r.items() if k != "seconds"} for r in csv.DictReader(fh)]


def test_outputs_are_reproducible(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("gen", "--m", 40, "--n", 3, "--seed", 11, "--out", a)
    run("gen", "--m", 40, "--n", 3, "--seed", 11, "--out", b)
    assert a.read_bytes() == b.read_bytes()

    ja, jb = tmp_path / "a.json", tmp_path / "b.json"
    run("solve", "--input", a, "--gamma", 0.05, "--out", ja)
    run("solve", "--input", a, "--gamma", 0.05, "--out", jb)
    ra, rb = json.loads(ja.read_text()), json.loads(jb.read_text())
    ra.pop("timings"), rb.pop("timings")
    assert ra == rb

    ca, cb = tmp_path / "ca.csv", tmp_path / "cb.csv"
    common = ["cv", "--input", a, "--gamma-grid", "0.01:0.5:3", "--folds", 4, "--methods", "spgls,ols,ridge"]
    assert run(*common, "--out-csv", ca) == 0
    assert run(*common, "--out-csv", cb, "--threads", 2) == 0
    rows = _strip_seconds(ca)
    assert rows == _strip_seconds(cb) and len(rows) == 9


def test_cv_json_and_attack_flag(tmp_path):
    data = tmp_path / "d.csv"
    run("gen", "--m", 30, "--n", 2, "--attack", "none", "--out", data)
    js = tmp_path / "cv.json"
    assert run("cv", "--input", data, "--attack", "quartile:0.25", "--gamma-grid", "0.01",
               "--folds", 3, "--out-json", js) == 0
    rep = json.loads(js.read_text())
    assert rep["methods"] == ["spgls", "ols", "ridge"]
    assert "timings" in rep and len(rep["mse"]["spgls"][0]) == 3


# --- bench ----------------------------------------------------------------

def test_emit_bench_report(tmp_path):
    path = tmp_path / "b.csv"
    cli.emit_bench_report([{"m": 200, "n": 100, "bisect_seconds": 3.0, "direct_seconds": 0.5,
                            "eig_seconds": 0.25, "ratio": -1}], path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(cli.BENCH_COLUMNS)
    assert len(rows) == 2
    assert float(rows[1][5]) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        cli.emit_bench_report([], path)


def test_bench_eig_column_uses_eig_timer(monkeypatch):
    import spgls.reform as reform

    real = reform.eig_sym

    def slow(M):
        time.sleep(0.2)
        return real(M)

    monkeypatch.setattr(reform, "eig_sym", slow)
    row = cli.bench_instance(20, 10, seed=0)
    assert row["eig_seconds"] >= 0.2
    assert row["direct_seconds"] < 0.2 and row["bisect_seconds"] < 0.2
    assert row["mu_bisect"] == pytest.approx(row["mu_direct"], abs=2e-8)


def test_bench_flushes_partial_results(tmp_path, monkeypatch):
    real = cli.bench_instance
    calls = []

    def flaky(m, n, *a, **k):
        calls.append((m, n))
        if len(calls) == 2:
            raise NumericError("simulated failure")
        return real(m, n, *a, **k)

    monkeypatch.setattr(cli, "bench_instance", flaky)
    out = tmp_path / "bench.csv"
    assert run("bench", "--sizes", "10,20", "--ratios", "0.5,1,2", "--out", out) == 4
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and (rows[0]["m"], rows[0]["n"]) == ("5", "10")


def test_bench_full_sweep(tmp_path):
    out = tmp_path / "bench.csv"
    assert run("bench", "--sizes", "8,16", "--out", out) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert [(int(r["m"]), int(r["n"])) for r in rows] == [(4, 8), (8, 8), (16, 8), (8, 16), (16, 16), (32, 16)]


def test_thread_env(monkeypatch):
    monkeypatch.setenv("SPGLS_THREADS", "3")
    assert _threads() == 3
    monkeypatch.setenv("SPGLS_THREADS", "junk")
    assert _threads() == 1
