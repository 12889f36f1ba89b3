import csv
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from dynlbm.cli import main
from dynlbm.core import CountTensor
from dynlbm.ingest import read_dump, write_dump
from dynlbm.report import load_schema

BENCHMARK = Path(__file__).resolve().parents[1] / "data" / "benchmark_spec.json"


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim") / "bench"
    assert main(["simulate", "--spec", str(BENCHMARK), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def fitted(sim, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert main(["fit", "--input", f"{sim}.csv", "--restarts", "2", "--out", str(out)]) == 0
    return out


def test_simulate_writes_benchmark_dump(sim):
    d = read_dump(sim)
    assert d.tensor.shape == (50, 50, 24)
    assert set(d.extra["truth"]) == {"row", "col", "time"}
    assert len(set(d.extra["truth"]["row"])) == 3


def test_simulate_is_repeatable(sim, tmp_path):
    assert main(["simulate", "--spec", str(BENCHMARK), "--out", str(tmp_path / "again")]) == 0
    assert Path(f"{sim}.csv").read_bytes() == (tmp_path / "again.csv").read_bytes()
    first = json.loads(Path(f"{sim}.json").read_text())
    second = json.loads((tmp_path / "again.json").read_text())
    # "data" names the csv file, which differs with the prefix
    assert first.pop("data") == "bench.csv" and second.pop("data") == "again.csv"
    assert first == second


def test_simulate_rejects_bad_spec(tmp_path):
    spec = {"N": 2, "M": 5, "U": 5, "s1": [0, 1, 2], "s2": [1], "s3": [1]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(spec))
    assert main(["simulate", "--spec", str(path), "--out", str(tmp_path / "x")]) == 2


def test_fit_report(fitted, sim, capsys):
    report = json.loads((fitted / "report.json").read_text())
    jsonschema.validate(report, load_schema())
    assert report["spec_version"] == 1
    assert (report["K"], report["G"], report["D"]) == (3, 3, 3)
    assert len(report["intervals"]) == 24
    totals = read_dump(sim).tensor.interval_totals()
    assert [row["total_count"] for row in report["intervals"]] == totals.tolist()
    means = [tc["mean_intensity"] for tc in report["time_clusters"]]
    assert means == sorted(means)
    with open(fitted / "time_clusters.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 24


def test_fit_is_byte_deterministic(fitted, sim, tmp_path):
    assert main(["fit", "--input", f"{sim}.csv", "--restarts", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").read_bytes() == (fitted / "report.json").read_bytes()
    assert (tmp_path / "assignments.csv").read_bytes() == (fitted / "assignments.csv").read_bytes()


def test_evaluate_fit_against_truth(fitted, sim, capsys):
    capsys.readouterr()
    code = main(["evaluate", "--truth", f"{sim}.json", "--assignments", str(fitted / "assignments.csv"),
                 "--report", str(fitted / "report.json")])
    assert code == 0
    out = capsys.readouterr().out
    for name in ("row", "col", "time"):
        assert f"ARI {name} 1.000000" in out
    gap = float(out.strip().splitlines()[-1].split()[-1])
    assert gap <= 1e-6


def _write_assignments(path, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "index", "id", "cluster"])
        for name, lab in zip(("row", "col", "time"), labels):
            for i, v in enumerate(lab):
                w.writerow([name, i, i, int(v)])


def test_evaluate_random_labels_scores_near_zero(sim, tmp_path, capsys):
    aris = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        labels = [rng.integers(0, 3, size=n) for n in (50, 50, 24)]
        _write_assignments(tmp_path / "a.csv", labels)
        capsys.readouterr()
        assert main(["evaluate", "--truth", str(sim), "--assignments", str(tmp_path / "a.csv")]) == 0
        out = capsys.readouterr().out
        aris.append(float(out.splitlines()[0].split()[-1]))
    assert all(abs(a) < 0.1 for a in aris)


def test_evaluate_dimension_mismatch(sim, tmp_path):
    _write_assignments(tmp_path / "a.csv", [[0] * 49, [0] * 50, [0] * 24])
    assert main(["evaluate", "--truth", str(sim), "--assignments", str(tmp_path / "a.csv")]) == 2


def test_fit_all_zero_tensor(tmp_path):
    write_dump(tmp_path / "zero", CountTensor((4, 3, 5), [], [], [], []))
    assert main(["fit", "--input", str(tmp_path / "zero"), "--restarts", "2", "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert (report["K"], report["G"], report["D"]) == (1, 1, 1)


def test_fit_tsv_contact_log(tmp_path):
    lines = ["# t\ti\tj"]
    rng = np.random.default_rng(0)
    for k in range(400):
        t = int(rng.integers(0, 4 * 3600)) // 20 * 20
        a, b = rng.choice(8, size=2, replace=False)
        lines.append(f"{t}\tp{a}\tp{b}")
    (tmp_path / "log.tsv").write_text("\n".join(lines) + "\n")
    code = main(["fit", "--input", str(tmp_path / "log.tsv"), "--format", "tsv_t_i_j", "--bin-width", "900",
                 "--t-start", "0", "--t-end", str(4 * 3600), "--restarts", "2", "--out", str(tmp_path / "o")])
    assert code == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["shape"] == {"N": 8, "M": 8, "U": 16}
    assert sum(r["total_count"] for r in report["intervals"]) == 400


def test_usage_errors(tmp_path, sim):
    log = tmp_path / "log.tsv"
    log.write_text("0\ta\tb\n")
    assert main(["fit", "--input", str(log), "--format", "tsv_t_i_j", "--out", str(tmp_path)]) == 1
    assert main(["fit", "--input", str(sim), "--init-k", "2", "--fix-k", "3", "--out", str(tmp_path)]) == 1
    assert main(["fit", "--input", str(sim), "--fix-k", "0", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--bogus"])
    assert exc.value.code == 1


def test_input_errors(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,zero,1\na,b,x,1\n")
    assert main(["fit", "--input", str(bad), "--format", "csv_quad", "--out", str(tmp_path)]) == 2
