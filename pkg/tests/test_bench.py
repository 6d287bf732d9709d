import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfwkit.bench import (
    BenchConfig,
    DegenerateRunError,
    default_batch_size,
    relative_suboptimality,
    run_benchmark,
)
from sfwkit.data import synth_dataset
from sfwkit.solvers import TraceRow


def test_relative_suboptimality_examples():
    rel = relative_suboptimality({"a": [9.0, 5.0, 1.0], "b": [3.0]})
    np.testing.assert_array_equal(rel["a"], [1.0, 0.5, 0.0])
    assert rel["b"][0] == 0.25
    with pytest.raises(DegenerateRunError):
        relative_suboptimality({"a": [2.0, 2.0], "b": [2.0]})
    with pytest.raises(ValueError):
        relative_suboptimality({})


def test_relative_suboptimality_reference_floor():
    rel = relative_suboptimality({"a": [9.0, 5.0]}, f_min=1.0)
    np.testing.assert_array_equal(rel["a"], [1.0, 0.5])
    # a floor above the observed minimum is ignored
    rel = relative_suboptimality({"a": [9.0, 1.0]}, f_min=5.0)
    np.testing.assert_array_equal(rel["a"], [1.0, 0.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_relative_suboptimality_monotone_and_bounded(values):
    if max(values) == min(values):
        return
    rel = relative_suboptimality({"x": values})["x"]
    assert np.all((0.0 <= rel) & (rel <= 1.0))
    order = np.argsort(values, kind="stable")
    assert np.all(np.diff(rel[order]) >= 0)


def test_default_batch_size():
    assert default_batch_size(50) == 1
    assert default_batch_size(683) == 6
    assert default_batch_size(10**6) == 10**4


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig("x", solvers=("sgd",))
    with pytest.raises(ValueError):
        BenchConfig("x", seeds=())
    with pytest.raises(ValueError):
        BenchConfig("x", constraint="l2:1")
    with pytest.raises(ValueError):
        BenchConfig("x", out_format="xml")
    cfg = BenchConfig("x", batch_size=500)
    with pytest.raises(ValueError):
        cfg.resolve_batch(100)
    assert BenchConfig("x").resolve_budget(7) == 700


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_benchmark_outputs(tmp_path):
    ds = synth_dataset(0, 40, 5)
    cfg = BenchConfig(
        "n=40,d=5",
        fmt="synth",
        solvers=("sfw", "fw", "mokhtari", "lufreund"),
        seeds=(0, 1),
        grad_budget=40,
        out_dir=str(tmp_path),
        reference_budget=4000,
    )
    summary = run_benchmark(cfg, ds)
    assert len(summary["runs"]) == 8 and all(r["status"] == "ok" for r in summary["runs"])
    for solver in cfg.solvers:
        for seed in (0, 1):
            assert (tmp_path / f"{solver}_seed{seed}.csv").exists()
    on_disk = json.loads((tmp_path / "summary.json").read_text())
    assert on_disk["schema_version"] == 1 and on_disk["grad_budget"] == 40
    # budget = n is one epoch: 40 unit steps for sfw, one full pass for fw
    iters = {(r["solver"], r["seed"]): r["iterations"] for r in summary["runs"]}
    assert iters[("sfw", 0)] == 40 and iters[("fw", 0)] == 1
    assert summary["f_min"] <= summary["reference_optimum"] + 1e-12
    for r in summary["runs"]:
        assert 0.0 <= r["final_relative_suboptimality"] <= 1.0

    rows = _read_csv(tmp_path / "sfw_seed0.csv")
    assert tuple(rows[0]) == TraceRow.FIELDS
    assert rows[1][0] == "0" and rows[1][4] == "" and rows[1][5] == ""
    assert len(rows) == 42


def test_run_benchmark_records_failing_run(tmp_path):
    ds = synth_dataset(0, 30, 4)
    cfg = BenchConfig("d", solvers=("sfw", "fw"), grad_budget=10, out_dir=str(tmp_path), reference_budget=0)
    summary = run_benchmark(cfg, ds)
    status = {r["solver"]: r for r in summary["runs"]}
    assert status["sfw"]["status"] == "ok"
    assert status["fw"]["status"] == "error" and "ValueError" in status["fw"]["error"]
    assert not (tmp_path / "fw_seed0.csv").exists()
    assert summary["reference_optimum"] is None


def test_run_benchmark_json_traces_and_exact_diagnostics(tmp_path):
    ds = synth_dataset(1, 20, 3, task="regression")
    cfg = BenchConfig("d", loss="squared", grad_budget=60, trace_every=10, exact_diagnostics=True,
                      out_format="json", out_dir=str(tmp_path), reference_budget=0)
    run_benchmark(cfg, ds)
    rows = json.loads((tmp_path / "sfw_seed0.json").read_text())["rows"]
    assert [r["t"] for r in rows] == [0, 10, 20, 30, 40, 50, 60]
    assert all(r["exact_gap"] is not None for r in rows[1:])


def test_kappa_over_n_breast_cancer_shaped(tmp_path):
    ds = synth_dataset(0, 683, 10)
    cfg = BenchConfig("d", grad_budget=683, out_dir=str(tmp_path), reference_budget=0, trace_every=0)
    stats = run_benchmark(cfg, ds)["stats"]
    assert stats["kappa_over_n"] <= 1.0
    assert stats["kappa"] == pytest.approx(stats["kappa_over_n"] * 683)
