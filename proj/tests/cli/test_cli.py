import csv
import json
import os
import subprocess

import numpy as np
import pytest

CLI = os.environ.get("DACGLM_CLI", "dacglm")


def run(*args, check=None):
    proc = subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)
    if check is not None:
        assert proc.returncode == check, proc.stderr
    return proc


def write_data(path, n=300, p=4, seed=0, family="gaussian"):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    eta = X @ np.array([0.8, -0.4] + [0.0] * (p - 2))
    if family == "gaussian":
        y = eta + rng.standard_normal(n)
    else:
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"x{j + 1}" for j in range(p)] + ["y"])
        for i in range(n):
            w.writerow([repr(float(v)) for v in X[i]] + [repr(float(y[i]))])
    return X, y


@pytest.fixture
def data(tmp_path):
    X, y = write_data(tmp_path / "d.csv")
    return tmp_path, X, y


def test_glm_fit_is_least_squares(data):
    d, X, y = data
    out = json.loads(run("fit", d / "d.csv", "--method", "glm", "--no-intercept", "--json", check=0).stdout)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(out["beta"], ols, atol=1e-9)
    assert out["names"] == ["x1", "x2", "x3", "x4"]


def test_summaries_recombine_to_the_same_fit(data):
    d, _, _ = data
    fit = json.loads(run("fit", d / "d.csv", "--k", 3, "--lambda", 0.05, "--emit-summaries",
                         d / "sums", "--json", check=0).stdout)
    files = sorted((d / "sums").glob("batch_*.json"))
    assert len(files) == 3
    comb = json.loads(run("combine", *files, "--json", check=0).stdout)
    np.testing.assert_allclose(comb["beta"], fit["beta"], rtol=0, atol=1e-12)
    np.testing.assert_allclose(comb["se"], fit["se"], rtol=0, atol=1e-12)


def test_partition_then_manifest_matches_file_input(data):
    d, _, _ = data
    run("partition", d / "d.csv", "--k", 2, "--seed", 4, "--out-dir", d / "shards", check=0)
    manifest = d / "shards" / "manifest.json"
    assert manifest.exists()
    a = json.loads(run("fit", "--manifest", manifest, "--method", "glm", "--json", check=0).stdout)
    b = json.loads(run("fit", d / "d.csv", "--method", "glm", "--json", check=0).stdout)
    np.testing.assert_allclose(a["beta"], b["beta"], atol=1e-10)


def test_corrupt_shard_exit_codes(data):
    d, _, _ = data
    run("partition", d / "d.csv", "--k", 3, "--out-dir", d / "shards", check=0)
    with open(d / "shards" / "shard_001.csv", "a") as f:
        f.write("1,1,1,1,1\n")
    manifest = d / "shards" / "manifest.json"
    failed = run("fit", "--manifest", manifest, "--lambda", 0.05, check=1)
    assert "shard_001.csv" in failed.stderr
    partial = run("fit", "--manifest", manifest, "--lambda", 0.05, "--allow-partial", "--json", check=2)
    assert json.loads(partial.stdout)["partial"] is True


def test_invalid_inputs_exit_with_json_errors(data):
    d, _, _ = data
    bad = run("fit", d / "d.csv", "--family", "logistic", check=1)
    assert json.loads(bad.stderr)["error"]["message"]
    run("fit", d / "d.csv", "--lambda", 0.1, "--cv", check=1)
    run("fit", d / "missing.csv", check=1)
    run("frobnicate", check=1)


def test_logistic_coefficient_csv(tmp_path):
    write_data(tmp_path / "l.csv", n=600, family="logistic")
    run("fit", tmp_path / "l.csv", "--family", "logistic", "--k", 2, "--grid-size", 20,
        "--out", tmp_path / "fit.json", "--coef-csv", tmp_path / "coef.csv", check=0)
    rows = list(csv.DictReader(open(tmp_path / "coef.csv")))
    assert [r["name"] for r in rows] == ["(Intercept)", "x1", "x2", "x3", "x4"]
    assert float(rows[1]["ci_lo"]) < float(rows[1]["estimate"]) < float(rows[1]["ci_hi"])
    assert json.load(open(tmp_path / "fit.json"))["method"] == "modac"


def test_simulate_writes_study_files(tmp_path):
    out = run("simulate", "--N", 300, "--p", 6, "--k", 2, "--s0", 2, "--n-reps", 2,
              "--methods", "GLM,MODAC,VOTING", "--omega-sweep", "--out-dir", tmp_path / "study", check=0)
    assert out.stdout.startswith("metric,GLM,MODAC,VOTING(w=0),VOTING(w=1)")
    for name in ("study_summary.csv", "study_raw.jsonl", "study_long.csv", "study_config.json"):
        assert (tmp_path / "study" / name).exists()


def test_diagnose_reports_batches(data):
    d, _, _ = data
    rep = json.loads(run("diagnose", d / "d.csv", "--k", 3, "--json", check=0).stdout)
    assert len(rep["batches"]) == 3
    assert not rep["batches"][0]["rank_deficient"]
