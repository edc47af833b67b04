import csv
import json
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, strategies as st

from faultbench import bench
from faultbench.bench import BenchConfig, CombinationResult, emit_report, sweep_dimension
from faultbench.evalcv import classifier


@dataclass(frozen=True)
class FirstColumns:
    name: str = "first"
    scope: str = "FS"

    def fit(self, X, y, size, seed):
        return None

    def apply(self, fitted, X, size):
        return X[:, :size]


@dataclass
class Constant:
    name: str = "const"

    def fit(self, X, y, n_classes, seed):
        return self

    def predict(self, Xq):
        return np.zeros(len(Xq), dtype=int)


def bit_data(k, n_noise=6, per_class=20, seed=0):
    """2^k classes coded by k binary columns, then noise columns."""
    rng = np.random.default_rng(seed)
    codes = np.array([[(c >> b) & 1 for b in range(k)] for c in range(2 ** k)], float)
    y = np.repeat(np.arange(2 ** k), per_class)
    X = codes[y] * 4 + 0.1 * rng.standard_normal((y.size, k))
    return np.hstack([X, 3 * rng.standard_normal((y.size, n_noise))]), y


@pytest.mark.parametrize("k", [2, 3])
def test_sweep_finds_informative_size(k):
    X, y = bit_data(k)
    sw = sweep_dimension(FirstColumns(), classifier("knn", k=1), X, y, list(range(1, 9)),
                         k_folds=5, min_gain=0.005, patience=3)
    assert sw.best == k
    assert sw.report.accuracy > 0.95
    assert len(sw.evaluated) == k + 3


def test_sweep_single_point_grid():
    X, y = bit_data(2)
    sw = sweep_dimension(FirstColumns(), classifier("knn"), X, y, [3], k_folds=5)
    assert sw.best == 3 and [s for s, _ in sw.evaluated] == [3]


def test_sweep_flat_stops_after_patience():
    X, y = bit_data(2)
    sw = sweep_dimension(FirstColumns(), Constant(), X, y, [1, 2, 3, 4, 5, 6, 7, 8], k_folds=5,
                         patience=3)
    assert len(sw.evaluated) == 4
    assert sw.best == 1


def test_sweep_grid_validation():
    X, y = bit_data(2)
    with pytest.raises(ValueError):
        sweep_dimension(FirstColumns(), Constant(), X, y, [], k_folds=5)
    with pytest.raises(ValueError):
        sweep_dimension(FirstColumns(), Constant(), X, y, [3, 1], k_folds=5)


# ---------------------------------------------------------------- config

def test_config_round_trip(tmp_path):
    cfg = BenchConfig.desk(snr_list=[10.0, 30.0])
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert BenchConfig.load(path) == cfg
    assert cfg.n_cells() == (5 * 3 + 4 * 3 + 3) * 4


@pytest.mark.parametrize("bad", [
    {"fs_methods": ["cadr"]},
    {"classifiers": []},
    {"fs_grid": [3, 2]},
    {"fs_methods": [], "dr_methods": [], "include_baseline": False},
    {"cv_folds": 1},
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        BenchConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        BenchConfig.from_dict({"snr": [10]})


def test_result_validation():
    with pytest.raises(ValueError):
        CombinationResult("D1", 10.0, 1.0, "FS", "relief", "knn", 3, 1.2, 0.5)
    with pytest.raises(ValueError):
        CombinationResult("D1", 10.0, 1.0, "XX", "relief", "knn", 3, 0.2, 0.5)
    # error cells carry placeholder metrics
    assert not CombinationResult("D1", 10.0, 1.0, "FS", "relief", "knn", 0, 0.0, 0.0,
                                 error="boom").ok


# ---------------------------------------------------------------- matrix runs

def tiny_config(**kw):
    base = dict(snr_list=[30.0], fr_list=[1.0, 10.0], n_buses=12, topology_seed=3,
                sample_rate_hz=2000.0, cv_folds=3, fs_grid=[2, 5, 13], dr_grid=[1, 2, 3],
                classifier_params={"knn": {"k": 3}, "svm": {"epochs": 3},
                                   "rf": {"n_trees": 3}},
                reducer_params={"mds": {"n_landmarks": 60}, "lle": {"n_subsample": 60}})
    base.update(kw)
    return BenchConfig(**base)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = tiny_config()
    return cfg, out, bench.run_matrix(cfg, out)


def test_count_law(tiny_run):
    cfg, out, results = tiny_run
    assert len(results) == (5 * 3 + 4 * 3 + 3) * 2 == cfg.n_cells()
    assert all(r.ok for r in results), [r.error for r in results if not r.ok]
    assert len(list((out / "cells").glob("*.json"))) == len(results)
    assert results == bench.canonical_sort(results)


def test_sizes_come_from_grids(tiny_run):
    _, _, results = tiny_run
    for r in results:
        if r.scope == "FS":
            assert r.size in (2, 5, 13)
        elif r.scope == "DR":
            assert r.size in (1, 2, 3)
        else:
            assert r.size == 3 * 12


def test_resume_skips_finished_cells(tiny_run, tmp_path):
    cfg, out, results = tiny_run
    cells = tmp_path / "cells"
    cells.mkdir()
    for p in (out / "cells").glob("*.json"):
        if "__lle__" not in p.name:
            (cells / p.name).write_text(p.read_text())
    seen = []
    again = bench.run_matrix(cfg, tmp_path, resume=True, progress=seen.append)
    assert {r.method for r in seen} == {"lle"}
    key = lambda r: (r.cell, r.size, r.accuracy, r.f1)
    assert [key(r) for r in again] == [key(r) for r in results]


def test_run_is_reproducible(tiny_run, tmp_path):
    cfg, _, results = tiny_run
    sub = tiny_config(fs_methods=["relief"], dr_methods=["pca"], fr_list=[1.0])
    again = bench.run_matrix(sub)
    keep = {r.cell: r for r in results}
    for r in again:
        assert (r.accuracy, r.f1, r.size) == (keep[r.cell].accuracy, keep[r.cell].f1,
                                              keep[r.cell].size)


def test_parallel_matches_serial(tiny_run):
    _, _, results = tiny_run
    sub = tiny_config(fs_methods=["mi"], dr_methods=["lda"], fr_list=[1.0])
    par = bench.run_matrix(sub, jobs=2)
    keep = {r.cell: r for r in results}
    assert len(par) == 9
    for r in par:
        assert (r.accuracy, r.size) == (keep[r.cell].accuracy, keep[r.cell].size)


def test_error_cell_recorded():
    cfg = tiny_config(fs_methods=[], dr_methods=["lda"], include_baseline=False, fr_list=[1.0],
                      dr_grid=[500], classifiers=["knn"])
    (r,) = bench.run_matrix(cfg)
    assert not r.ok and "no legal" in r.error


# ---------------------------------------------------------------- summaries

def cell(ds, snr, fr, scope, method, clf, acc, f1=None):
    return CombinationResult(ds, snr, fr, scope, method, clf, 3, acc, acc if f1 is None else f1)


def test_rank_tie_break_and_order():
    rs = [cell("D1", 10, 1, "FS", "mi", "svm", 0.5), cell("D1", 10, 1, "FS", "lasso", "svm", 0.5),
          cell("D1", 10, 1, "FS", "relief", "knn", 0.9), cell("D2", 10, 10, "FS", "relief", "knn", 0.7)]
    ranking = bench.rank_combinations(rs, "accuracy", "FS")
    assert [(e.method, e.classifier) for e in ranking] == [("relief", "knn"), ("lasso", "svm"),
                                                           ("mi", "svm")]
    assert ranking[0].value == pytest.approx(0.8) and ranking[0].n == 2
    with pytest.raises(ValueError):
        bench.rank_combinations(rs, "precision")


@given(st.lists(st.floats(0, 1).map(lambda v: round(v, 4)), min_size=1, max_size=12))
def test_rank_mean_oracle(values):
    rs = [cell(f"D{i + 1}", 10, 1, "DR", "pca", "knn", v) for i, v in enumerate(values)]
    (entry,) = bench.rank_combinations(rs, "accuracy", "DR")
    assert abs(entry.value - sum(values) / len(values)) <= 1e-12


def test_trend_summary_oracle():
    rs = [cell("D1", 10, 1, "FS", "mi", "knn", 0.2), cell("D2", 30, 1, "FS", "mi", "knn", 0.6),
          cell("D1", 10, 1, "baseline", "baseline", "knn", 0.4)]
    trend = {(t["group"], t["key"]): t for t in bench.trend_summary(rs)}
    assert trend[("snr_db", 10)]["accuracy"] == pytest.approx(0.3)
    assert trend[("snr_db", 30)]["n"] == 1
    assert trend[("fr_ohm", 1)]["accuracy"] == pytest.approx(0.4)
    assert [k for g, k in trend if g == "scope"] == ["baseline", "FS"]


def test_emit_empty_results_header_only(tmp_path):
    paths = emit_report([], ["csv"], tmp_path)
    assert len(paths) == 6
    assert (tmp_path / "results.csv").read_text() == ",".join(bench.RESULT_COLUMNS) + "\n"


def test_emit_formats_agree(tiny_run, tmp_path):
    _, _, results = tiny_run
    emit_report(results, ["csv", "md", "json"], tmp_path)
    rows = list(csv.reader(open(tmp_path / "results.csv")))
    md = (tmp_path / "report.md").read_text()
    for row in rows[1:]:
        assert "| " + " | ".join(row) + " |" in md
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["tables"]["results"]["rows"] == rows[1:]
    assert bench.results_from_json(tmp_path / "report.json") == results


def test_rankings_rebuild_from_csv(tiny_run, tmp_path):
    _, _, results = tiny_run
    emit_report(results, ["csv"], tmp_path)
    back = bench.results_from_csv(tmp_path / "results.csv")
    for scope in ("FS", "DR"):
        for metric in ("accuracy", "f1"):
            a = bench.rank_combinations(results, metric, scope)
            b = bench.rank_combinations(back, metric, scope)
            assert [(e.method, e.classifier, round(e.value, 10)) for e in a] == \
                [(e.method, e.classifier, round(e.value, 10)) for e in b]


def test_emit_bad_format_and_path(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], ["xlsx"], tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report([], ["csv"], blocker / "sub")
