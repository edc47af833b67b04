"""Surrogate measurement generator for the 118-bus fault benchmark.

Each scenario (one load-loss site, one generator outage, one generator
ground fault, or the normal state) produces a block of time samples of
per-bus voltage magnitude, frequency and phase angle. Fault signatures are
exponentially decaying oscillations whose amplitude falls off with graph
distance from the fault location and with fault resistance.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

FAULT_TYPES = ("LL", "GO", "GG", "Normal")

NOMINAL_VOLTAGE = 1.0
NOMINAL_FREQUENCY = 50.0
NOISE_POWER_FLOOR = 1e-12

_REF_BUSES = 118
_REF_GENERATORS = 19
_REF_LOADS = 91
_REF_LL_SITES = 31


@dataclass(frozen=True)
class GridModel:
    n_buses: int
    edges: tuple[tuple[int, int], ...]
    generator_buses: tuple[int, ...]
    load_buses: tuple[int, ...]
    ll_fault_buses: tuple[int, ...]
    phase_offsets: tuple[float, ...]

    @cached_property
    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_buses)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        for nbrs in adj:
            nbrs.sort()
        return adj

    def hop_distances(self, source: int) -> np.ndarray:
        """Breadth-first hop counts from ``source`` to every bus (-1 if unreachable)."""
        dist = np.full(self.n_buses, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        return np.stack([self.hop_distances(b) for b in range(self.n_buses)])

    @property
    def n_features(self) -> int:
        return 3 * self.n_buses


@dataclass(frozen=True)
class ScenarioSpec:
    fault_type: str
    location_bus: int | None
    fr_ohm: float
    duration_ms: float = 25.0
    sample_rate_hz: float = 10_000.0

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_ms * self.sample_rate_hz / 1000.0))

    @property
    def label(self) -> str:
        if self.fault_type == "Normal":
            return "Normal"
        return f"{self.fault_type}@{self.location_bus + 1}"


def _default_base():
    return {"LL": 0.04, "GO": 0.08, "GG": 0.30}


def _default_signature():
    # (voltage p.u., frequency Hz, angle rad) per unit severity
    return {
        "LL": (0.6, 0.15, 0.08),
        "GO": (-0.1, -1.0, -0.25),
        "GG": (-1.0, -0.2, 0.6),
    }


def _default_tau():
    return {"LL": 6.0, "GO": 5.0, "GG": 4.0}


def _default_osc():
    return {"LL": 80.0, "GO": 120.0, "GG": 200.0}


@dataclass(frozen=True)
class SeverityProfile:
    base_magnitude: dict[str, float] = field(default_factory=_default_base)
    channel_signature: dict[str, tuple[float, float, float]] = field(
        default_factory=_default_signature
    )
    distance_decay: float = 1.0
    fr_attenuation: float = 0.05
    tau_ms: dict[str, float] = field(default_factory=_default_tau)
    osc_hz: dict[str, float] = field(default_factory=_default_osc)
    osc_depth: float = 0.2

    def __post_init__(self):
        for kind in FAULT_TYPES[:3]:
            if self.base_magnitude[kind] <= 0:
                raise ValueError(f"base magnitude for {kind} must be positive")
            if self.tau_ms[kind] <= 0:
                raise ValueError(f"tau for {kind} must be positive")
            if not any(self.channel_signature[kind]):
                raise ValueError(f"signature for {kind} is all zero")
        if self.distance_decay <= 0 or self.fr_attenuation < 0:
            raise ValueError("decay must be positive and fr_attenuation non-negative")
        if not 0 <= self.osc_depth < 1:
            raise ValueError("osc_depth must lie in [0, 1)")

    def severity(self, fault_type: str, hops: np.ndarray, fr_ohm: float) -> np.ndarray:
        base = self.base_magnitude[fault_type]
        return base / (1.0 + self.distance_decay * hops) / (1.0 + self.fr_attenuation * fr_ohm)


def _scaled_count(n_buses: int, ref: int) -> int:
    return math.ceil(n_buses * ref / _REF_BUSES)


def build_topology(n_buses: int = 118, seed: int = 1) -> GridModel:
    """Ring of ``n_buses`` plus seeded random chords (mean degree close to 3)."""
    if n_buses < 3:
        raise ValueError(f"n_buses must be >= 3, got {n_buses}")
    rng = np.random.default_rng(seed)
    edges = {(i, (i + 1) % n_buses) if i < (i + 1) % n_buses else ((i + 1) % n_buses, i)
             for i in range(n_buses)}
    max_edges = n_buses * (n_buses - 1) // 2
    target = min(len(edges) + n_buses // 2, max_edges)
    while len(edges) < target:
        a, b = (int(v) for v in rng.choice(n_buses, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))

    n_gen = _scaled_count(n_buses, _REF_GENERATORS)
    n_load = min(_scaled_count(n_buses, _REF_LOADS), n_buses - n_gen)
    n_ll = min(_scaled_count(n_buses, _REF_LL_SITES), n_load)
    perm = rng.permutation(n_buses)
    generators = tuple(sorted(int(b) for b in perm[:n_gen]))
    loads = tuple(sorted(int(b) for b in perm[n_gen:n_gen + n_load]))

    partial = GridModel(n_buses, tuple(sorted(edges)), generators, loads, (), ())
    dist = partial.distance_matrix
    # farthest-point sampling spreads LL sites over the graph
    chosen = [loads[int(rng.integers(len(loads)))]] if n_ll else []
    load_arr = np.array(loads)
    while len(chosen) < n_ll:
        gap = dist[np.ix_(chosen, load_arr)].min(axis=0)
        gap[np.isin(load_arr, chosen)] = -1
        chosen.append(int(load_arr[int(np.argmax(gap))]))
    slack = generators[0]
    offsets = -0.04 * dist[slack] + rng.uniform(-0.02, 0.02, size=n_buses)
    return GridModel(
        n_buses=n_buses,
        edges=partial.edges,
        generator_buses=generators,
        load_buses=loads,
        ll_fault_buses=tuple(sorted(chosen)),
        phase_offsets=tuple(float(v) for v in offsets),
    )


def scenario_roster(grid: GridModel, fr_ohm: float, sample_rate_hz: float = 10_000.0
                    ) -> list[ScenarioSpec]:
    """Canonical scenario order: LL sites, GO, GG (ascending bus), Normal last."""
    mk = lambda kind, bus: ScenarioSpec(kind, bus, fr_ohm, sample_rate_hz=sample_rate_hz)
    roster = [mk("LL", b) for b in grid.ll_fault_buses]
    roster += [mk("GO", b) for b in grid.generator_buses]
    roster += [mk("GG", b) for b in grid.generator_buses]
    roster.append(mk("Normal", None))
    return roster


def _check_location(grid: GridModel, s: ScenarioSpec) -> None:
    if s.fault_type not in FAULT_TYPES:
        raise ValueError(f"unknown fault type {s.fault_type!r}")
    if s.fault_type == "Normal":
        return
    legal = grid.ll_fault_buses if s.fault_type == "LL" else grid.generator_buses
    if s.location_bus not in legal:
        raise ValueError(f"bus {s.location_bus} is not a legal {s.fault_type} location")


def nominal_row(grid: GridModel) -> np.ndarray:
    n = grid.n_buses
    return np.concatenate([
        np.full(n, NOMINAL_VOLTAGE), np.full(n, NOMINAL_FREQUENCY),
        np.asarray(grid.phase_offsets, dtype=float),
    ])


def fault_deviation(grid: GridModel, s: ScenarioSpec, profile: SeverityProfile,
                    seed: int) -> np.ndarray:
    """Deviation from nominal, shape (n_samples, 3 * n_buses)."""
    _check_location(grid, s)
    n = grid.n_buses
    if s.fault_type == "Normal":
        return np.zeros((s.n_samples, 3 * n))
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(s.n_samples) / s.sample_rate_hz
    tau = profile.tau_ms[s.fault_type] / 1000.0
    omega = 2.0 * np.pi * profile.osc_hz[s.fault_type]
    # envelope stays strictly positive so |deviation| scales with severity pointwise
    wave = np.exp(-t / tau) * (1.0 + profile.osc_depth * np.cos(omega * t + phase))
    sev = profile.severity(s.fault_type, grid.hop_distances(s.location_bus), s.fr_ohm)
    sig = np.repeat(np.asarray(profile.channel_signature[s.fault_type], dtype=float), n)
    spatial = np.tile(sev, 3) * sig
    return wave[:, None] * spatial[None, :]


def simulate_scenario(grid: GridModel, s: ScenarioSpec, profile: SeverityProfile | None = None,
                      seed: int = 0) -> np.ndarray:
    """Noise-free measurement block for one scenario."""
    profile = profile or SeverityProfile()
    return nominal_row(grid)[None, :] + fault_deviation(grid, s, profile, seed)


def inject_noise(block: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add per-column white Gaussian noise at ``snr_db`` relative to the column's AC power."""
    block = np.asarray(block, dtype=float)
    if math.isinf(snr_db) and snr_db > 0:
        return block.copy()
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    power = np.mean((block - block.mean(axis=0)) ** 2, axis=0)
    power = np.maximum(power, NOISE_POWER_FLOOR)
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return block + rng.standard_normal(block.shape) * sigma


def _stream_seed(seed: int, class_id: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, class_id, stream]).generate_state(1)[0])


def feature_names(n_buses: int) -> list[str]:
    width = max(3, len(str(n_buses)))
    return [f"{p}{i:0{width}d}" for p in "vfa" for i in range(1, n_buses + 1)]


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    meta: dict
    n_classes: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)


def build_dataset(grid: GridModel, snr_db: float, fr_ohm: float,
                  profile: SeverityProfile | None = None, seed: int = 0,
                  sample_rate_hz: float = 10_000.0) -> Dataset:
    """Stack all roster scenarios into one labeled dataset.

    ``sample_rate_hz`` sets rows per class over the fixed 25 ms window
    (10 kHz gives 250, 2 kHz gives 50).
    """
    if fr_ohm < 0 or not math.isfinite(fr_ohm):
        raise ValueError(f"fr_ohm must be finite and non-negative, got {fr_ohm}")
    profile = profile or SeverityProfile()
    roster = scenario_roster(grid, fr_ohm, sample_rate_hz)
    blocks, labels = [], []
    for cid, s in enumerate(roster):
        clean = simulate_scenario(grid, s, profile, _stream_seed(seed, cid, 0))
        blocks.append(inject_noise(clean, snr_db, _stream_seed(seed, cid, 1)))
        labels.append(np.full(s.n_samples, cid, dtype=np.int64))
    meta = {
        "snr_db": float(snr_db), "fr_ohm": float(fr_ohm), "seed": int(seed),
        "sample_rate_hz": float(sample_rate_hz), "n_buses": grid.n_buses,
        "roster": [s.label for s in roster],
    }
    return Dataset(np.vstack(blocks), np.concatenate(labels), feature_names(grid.n_buses),
                   meta, len(roster))


def save_dataset(data: Dataset, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (features + label column) and ``<path>.json`` sidecar."""
    path = Path(path)
    csv_path, meta_path = path.with_suffix(".csv"), path.with_suffix(".json")
    header = ",".join(list(data.feature_names) + ["label"])
    table = np.column_stack([data.X, data.y.astype(float)])
    fmt = ["%.17g"] * data.X.shape[1] + ["%d"]
    np.savetxt(csv_path, table, fmt=fmt, delimiter=",", header=header, comments="")
    meta_path.write_text(json.dumps(data.meta, indent=2) + "\n")
    return csv_path, meta_path


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    csv_path, meta_path = path.with_suffix(".csv"), path.with_suffix(".json")
    with open(csv_path) as fh:
        names = fh.readline().strip().split(",")
    table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(meta_path.read_text())
    y = table[:, -1].astype(np.int64)
    return Dataset(table[:, :-1], y, names[:-1], meta, len(meta.get("roster", [])) or int(y.max()) + 1)


def dataset_grid(snr_list: Sequence[float], fr_list: Sequence[float]) -> list[tuple[str, float, float]]:
    """Dataset ids D1.. in SNR-major order, matching the 6-dataset layout at defaults."""
    out = []
    for snr in snr_list:
        for fr in fr_list:
            out.append((f"D{len(out) + 1}", float(snr), float(fr)))
    return out
