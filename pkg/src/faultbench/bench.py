"""Benchmark orchestration: baseline, FS x classifier and DR x classifier cells.

A cell is one (dataset, method, classifier) triple. Cells that share a
dataset and a method run in one task so the per-fold normalizer and
reduction are fitted once and reused by every classifier and grid point.
Reduction seeds do not depend on the classifier, so grouping never changes
a cell's result.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import dimred, featsel, gridsim
from .classify import CLASSIFIERS, DEFAULT_PARAMS, ClassifierSpec
from .evalcv import (EvalReport, FoldCache, Pipeline, cross_validate, derive_seed,
                     make_reduction, stratified_kfold)

SCOPES = ("baseline", "FS", "DR")
FS_GRID = (1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 354)
DR_GRID = (1, 2, 3, 5, 8, 13, 21, 34, 55, 69)
DECIMALS = 4


def _round(x: float) -> float:
    return round(float(x), DECIMALS)


@dataclass
class BenchConfig:
    snr_list: list = field(default_factory=lambda: [10.0, 30.0, 70.0])
    fr_list: list = field(default_factory=lambda: [1.0, 10.0])
    data_seed: int = 42
    cv_seed: int = 0
    n_buses: int = 118
    topology_seed: int = 1
    sample_rate_hz: float = 10_000.0
    fs_methods: list = field(default_factory=lambda: list(featsel.FS_METHODS))
    dr_methods: list = field(default_factory=lambda: list(dimred.DR_METHODS))
    classifiers: list = field(default_factory=lambda: list(CLASSIFIERS))
    include_baseline: bool = True
    fs_grid: list = field(default_factory=lambda: list(FS_GRID))
    dr_grid: list = field(default_factory=lambda: list(DR_GRID))
    cv_folds: int = 10
    min_gain: float = 0.005
    patience: int = 3
    classifier_params: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_PARAMS.items()})
    reducer_params: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.snr_list or not self.fr_list:
            raise ValueError("snr_list and fr_list must be non-empty")
        if not self.classifiers:
            raise ValueError("classifier roster must be non-empty")
        if not (self.fs_methods or self.dr_methods or self.include_baseline):
            raise ValueError("nothing to run: empty FS and DR rosters and no baseline")
        for name in self.fs_methods:
            if name not in featsel.FS_METHODS:
                raise ValueError(f"unknown FS method {name!r}")
        for name in self.dr_methods:
            if name not in dimred.DR_METHODS:
                raise ValueError(f"unknown DR method {name!r}")
        for name in self.classifiers:
            if name not in CLASSIFIERS:
                raise ValueError(f"unknown classifier {name!r}")
        for label, grid in (("fs_grid", self.fs_grid), ("dr_grid", self.dr_grid)):
            if not grid or list(grid) != sorted(set(grid)) or min(grid) < 1:
                raise ValueError(f"{label} must be non-empty, strictly ascending and >= 1")
        if self.cv_folds < 2 or self.patience < 1 or self.jobs < 1:
            raise ValueError("cv_folds >= 2, patience >= 1 and jobs >= 1 required")

    @classmethod
    def desk(cls, **overrides) -> "BenchConfig":
        """50 rows per class and lighter classifiers; the laptop-sized preset."""
        params = {k: dict(v) for k, v in DEFAULT_PARAMS.items()}
        params["svm"].update(epochs=15)
        params["rf"].update(n_trees=10)
        base = dict(sample_rate_hz=2000.0, classifier_params=params, snr_list=[10.0],
                    fr_list=[1.0, 10.0])
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "classifier_params" in doc:
            merged = {k: dict(v) for k, v in DEFAULT_PARAMS.items()}
            for name, params in doc["classifier_params"].items():
                merged.setdefault(name, {}).update(params)
            doc["classifier_params"] = merged
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def datasets(self) -> list[tuple[str, float, float]]:
        return gridsim.dataset_grid(self.snr_list, self.fr_list)

    def n_cells(self) -> int:
        per = len(self.classifiers) * (len(self.fs_methods) + len(self.dr_methods)
                                       + int(self.include_baseline))
        return per * len(self.datasets())


@dataclass(frozen=True)
class CombinationResult:
    dataset: str
    snr_db: float
    fr_ohm: float
    scope: str
    method: str
    classifier: str
    size: int
    accuracy: float
    f1: float
    wall_time: float = 0.0
    error: str = ""

    def __post_init__(self):
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if not self.error:
            for name in ("accuracy", "f1"):
                v = getattr(self, name)
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def cell(self) -> tuple[str, str, str]:
        return (self.dataset, self.method, self.classifier)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "CombinationResult":
        return cls(**doc)


def _dataset_number(dataset_id: str) -> int:
    digits = "".join(ch for ch in dataset_id if ch.isdigit())
    return int(digits) if digits else 0


def canonical_key(r: CombinationResult):
    return (_dataset_number(r.dataset), r.dataset, SCOPES.index(r.scope), r.method, r.classifier)


def canonical_sort(results: Iterable[CombinationResult]) -> list[CombinationResult]:
    return sorted(results, key=canonical_key)


# ---------------------------------------------------------------- sweep

@dataclass
class SweepResult:
    best: int
    report: EvalReport
    evaluated: list  # (size, accuracy) in evaluation order


def sweep_dimension(reduction, classifier, X, y, grid: Sequence[int], seed: int = 0,
                    k_folds: int = 10, n_classes: int | None = None, min_gain: float = 0.005,
                    patience: int = 3, cache: FoldCache | None = None,
                    folds: np.ndarray | None = None) -> SweepResult:
    """Ascending sweep over ``grid``; stop after ``patience`` points without a
    gain of ``min_gain`` over the best so far. Ties keep the smaller size."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    if grid != sorted(grid):
        raise ValueError("sweep grid must be ascending")
    cache = cache if cache is not None else FoldCache(max(grid))
    best_size, best_report, stale = None, None, 0
    evaluated = []
    for size in grid:
        report = cross_validate(Pipeline(classifier, reduction, size), X, y, k=k_folds, seed=seed,
                                n_classes=n_classes, cache=cache, folds=folds)
        evaluated.append((size, report.accuracy))
        if best_report is None:
            best_size, best_report = size, report
            continue
        gain = report.accuracy - best_report.accuracy
        stale = 0 if gain >= min_gain else stale + 1
        if report.accuracy > best_report.accuracy:
            best_size, best_report = size, report
        if stale >= patience:
            break
    return SweepResult(best_size, best_report, evaluated)


# ---------------------------------------------------------------- cells

def _grid_for(config: BenchConfig, scope: str, method: str, n_train: int, p: int,
              n_classes: int) -> list[int]:
    if scope == "FS":
        return [g for g in config.fs_grid if g <= p]
    params = config.reducer_params.get(method, {})
    cap = min(dimred.max_dimension(method, n_train, p, n_classes, **params), p)
    return [g for g in config.dr_grid if g <= cap]


@lru_cache(maxsize=4)
def _cached_dataset(n_buses, topology_seed, snr, fr, data_seed, sample_rate_hz):
    grid = gridsim.build_topology(n_buses, topology_seed)
    return gridsim.build_dataset(grid, snr, fr, seed=data_seed, sample_rate_hz=sample_rate_hz)


def config_dataset(config: BenchConfig, snr: float, fr: float) -> gridsim.Dataset:
    return _cached_dataset(config.n_buses, config.topology_seed, float(snr), float(fr),
                           config.data_seed, float(config.sample_rate_hz))


def _scope_of(method: str) -> str:
    if method == "baseline":
        return "baseline"
    return "FS" if method in featsel.FS_METHODS else "DR"


def run_group(config: BenchConfig, dataset: tuple[str, float, float], method: str,
              classifiers: Sequence[str]) -> list[CombinationResult]:
    """Evaluate one method against several classifiers on one dataset."""
    ds_id, snr, fr = dataset
    data = config_dataset(config, snr, fr)
    X, y, l = data.X, data.y, data.n_classes
    scope = _scope_of(method)
    seed = derive_seed(config.cv_seed, ds_id)
    folds = stratified_kfold(y, config.cv_folds, derive_seed(seed, "folds"))
    n_train = int(np.sum(folds != 0))
    out = []
    if scope == "baseline":
        grid, reduction, cache = [X.shape[1]], None, FoldCache()
    else:
        reduction = make_reduction(method, config.reducer_params.get(method, {}))
        grid = _grid_for(config, scope, method, n_train, X.shape[1], l)
        cache = FoldCache(max(grid) if grid else None)
    for clf_name in classifiers:
        clf = ClassifierSpec(clf_name, dict(config.classifier_params.get(clf_name, {})))
        t0 = time.perf_counter()
        try:
            if scope == "baseline":
                rep = cross_validate(Pipeline(clf), X, y, k=config.cv_folds, seed=seed,
                                     n_classes=l, folds=folds, cache=cache)
                size = X.shape[1]
            else:
                if not grid:
                    raise ValueError(f"no legal {scope} sizes for {method}")
                sw = sweep_dimension(reduction, clf, X, y, grid, seed=seed, k_folds=config.cv_folds,
                                     n_classes=l, min_gain=config.min_gain,
                                     patience=config.patience, cache=cache, folds=folds)
                rep, size = sw.report, sw.best
            out.append(CombinationResult(ds_id, snr, fr, scope, method, clf_name, int(size),
                                         _round(rep.accuracy), _round(rep.f1),
                                         round(time.perf_counter() - t0, 3)))
        except Exception as exc:  # a failed cell is recorded, not fatal
            out.append(CombinationResult(ds_id, snr, fr, scope, method, clf_name, 0, 0.0, 0.0,
                                         round(time.perf_counter() - t0, 3),
                                         f"{type(exc).__name__}: {exc}"))
    return out


def _groups(config: BenchConfig, done: set) -> list[tuple]:
    methods = (["baseline"] if config.include_baseline else []) + list(config.fs_methods) \
        + list(config.dr_methods)
    tasks = []
    for ds in config.datasets():
        for m in methods:
            todo = [c for c in config.classifiers if (ds[0], m, c) not in done]
            if todo:
                tasks.append((ds, m, todo))
    return tasks


def _cell_path(cell_dir: Path, r: CombinationResult) -> Path:
    return cell_dir / f"{r.dataset}__{r.method}__{r.classifier}.json"


def load_cells(cell_dir: str | Path) -> list[CombinationResult]:
    cell_dir = Path(cell_dir)
    if not cell_dir.is_dir():
        return []
    return [CombinationResult.from_dict(json.loads(p.read_text()))
            for p in sorted(cell_dir.glob("*.json"))]


def run_matrix(config: BenchConfig, out_dir: str | Path | None = None, resume: bool = False,
               jobs: int | None = None, progress=None) -> list[CombinationResult]:
    """Run every configured cell; returns all results (error cells included), canonically sorted.

    With ``out_dir`` each finished cell is written to ``cells/``; ``resume``
    reuses cells already there that finished without error.
    """
    jobs = config.jobs if jobs is None else jobs
    cell_dir = Path(out_dir) / "cells" if out_dir is not None else None
    kept: list[CombinationResult] = []
    if cell_dir is not None:
        cell_dir.mkdir(parents=True, exist_ok=True)
        if resume:
            wanted = {(d[0], m, c) for d in config.datasets()
                      for m in (["baseline"] if config.include_baseline else [])
                      + config.fs_methods + config.dr_methods for c in config.classifiers}
            kept = [r for r in load_cells(cell_dir) if r.ok and r.cell in wanted]
        else:
            for p in cell_dir.glob("*.json"):
                p.unlink()
    tasks = _groups(config, {r.cell for r in kept})
    results = list(kept)

    def collect(batch):
        for r in batch:
            results.append(r)
            if cell_dir is not None:
                _cell_path(cell_dir, r).write_text(json.dumps(r.to_dict(), sort_keys=True) + "\n")
            if progress is not None:
                progress(r)

    if jobs <= 1 or len(tasks) <= 1:
        for ds, m, clfs in tasks:
            collect(run_group(config, ds, m, clfs))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_group, config, ds, m, clfs) for ds, m, clfs in tasks]
            for fut in as_completed(futures):
                collect(fut.result())
    return canonical_sort(results)


def run_baseline(config: BenchConfig, **kwargs) -> list[CombinationResult]:
    cfg = replace(config, fs_methods=[], dr_methods=[], include_baseline=True)
    return run_matrix(cfg, **kwargs)


# ---------------------------------------------------------------- summaries

@dataclass(frozen=True)
class RankEntry:
    rank: int
    method: str
    classifier: str
    value: float
    n: int


def rank_combinations(results: Iterable[CombinationResult], metric: str = "accuracy",
                      scope: str = "FS") -> list[RankEntry]:
    """Mean of ``metric`` per (method, classifier) over datasets, best first."""
    if metric not in ("accuracy", "f1"):
        raise ValueError(f"metric must be accuracy or f1, got {metric!r}")
    groups: dict = {}
    for r in results:
        if r.ok and r.scope == scope:
            groups.setdefault((r.method, r.classifier), []).append(getattr(r, metric))
    means = [(math.fsum(v) / len(v), key, len(v)) for key, v in groups.items()]
    means.sort(key=lambda t: (-t[0], t[1]))
    return [RankEntry(i + 1, key[0], key[1], value, n) for i, (value, key, n) in enumerate(means)]


def _group_mean(rows: list[CombinationResult]) -> dict:
    return {"n": len(rows),
            "accuracy": math.fsum(r.accuracy for r in rows) / len(rows),
            "f1": math.fsum(r.f1 for r in rows) / len(rows)}


def trend_summary(results: Iterable[CombinationResult]) -> list[dict]:
    """Grouped means by SNR, by FR, by scope, and by scope within each SNR."""
    ok = [r for r in results if r.ok]
    rows = []
    keyed = (
        ("snr_db", lambda r: r.snr_db),
        ("fr_ohm", lambda r: r.fr_ohm),
        ("scope", lambda r: r.scope),
        ("classifier", lambda r: r.classifier),
    )
    for group, fn in keyed:
        buckets: dict = {}
        for r in ok:
            buckets.setdefault(fn(r), []).append(r)
        order = sorted(buckets, key=lambda k: (SCOPES.index(k) if group == "scope" else 0, k))
        for key in order:
            rows.append({"group": group, "key": key, **_group_mean(buckets[key])})
    return rows


# ---------------------------------------------------------------- reports

RESULT_COLUMNS = ("dataset", "snr_db", "fr_ohm", "scope", "method", "classifier", "size",
                  "accuracy", "f1")
RANK_COLUMNS = ("rank", "method", "classifier", "value", "n")
TREND_COLUMNS = ("group", "key", "n", "accuracy", "f1")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.{DECIMALS}f}"
    return str(v)


def _result_rows(results):
    return [[_fmt(getattr(r, c)) for c in RESULT_COLUMNS] for r in results]


def _tables(results: Sequence[CombinationResult]) -> dict:
    ok = canonical_sort(r for r in results if r.ok)
    tables = {"results": (RESULT_COLUMNS, _result_rows(ok))}
    for scope in ("FS", "DR"):
        for metric in ("accuracy", "f1"):
            ranking = rank_combinations(ok, metric, scope)
            tables[f"ranking_{scope}_{metric}"] = (
                RANK_COLUMNS, [[_fmt(getattr(e, c)) for c in RANK_COLUMNS] for e in ranking])
    trend = trend_summary(ok)
    tables["trend"] = (TREND_COLUMNS, [[_fmt(t[c]) for c in TREND_COLUMNS] for t in trend])
    return tables


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _md_text(title, header, rows) -> str:
    lines = [f"## {title}", "", "| " + " | ".join(header) + " |",
             "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_report(results: Sequence[CombinationResult], formats: Iterable[str] = ("csv",),
                out_dir: str | Path = ".") -> list[Path]:
    """Write the results table, four rankings and the trend summary."""
    formats = list(formats)
    bad = set(formats) - {"csv", "md", "json"}
    if bad:
        raise ValueError(f"unknown report formats: {sorted(bad)}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror or exc}") from exc
    tables = _tables(results)
    written = []
    if "csv" in formats:
        for name, (header, rows) in tables.items():
            written.append(_write(out_dir / f"{name}.csv", _csv_text(header, rows)))
    if "md" in formats:
        text = "\n".join(_md_text(name, header, rows) for name, (header, rows) in tables.items())
        written.append(_write(out_dir / "report.md", text))
    if "json" in formats:
        doc = {"results": [r.to_dict() for r in canonical_sort(results)],
               "tables": {name: {"columns": list(h), "rows": rows}
                          for name, (h, rows) in tables.items()}}
        written.append(_write(out_dir / "report.json", json.dumps(doc, indent=1) + "\n"))
    return written


def results_from_json(path: str | Path) -> list[CombinationResult]:
    doc = json.loads(Path(path).read_text())
    return [CombinationResult.from_dict(d) for d in doc["results"]]


def results_from_csv(path: str | Path) -> list[CombinationResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(CombinationResult(
                row["dataset"], float(row["snr_db"]), float(row["fr_ohm"]), row["scope"],
                row["method"], row["classifier"], int(row["size"]), float(row["accuracy"]),
                float(row["f1"])))
    return out


def report_errors(results: Iterable[CombinationResult], stream=None) -> int:
    stream = stream or sys.stderr
    errs = [r for r in results if not r.ok]
    for r in errs:
        print(f"error cell {r.dataset}/{r.method}/{r.classifier}: {r.error}", file=stream)
    return len(errs)


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
