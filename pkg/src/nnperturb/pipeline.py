"""Measure (delta, ell_hat) per query, normalize, and compare against the limit law."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lid import DeltaSample, NeighborProfile, bin_by_lid, hill_estimates
from .model import (
    AsymptoticDeltaModel,
    LidIndex,
    RankPair,
    asymptotic_cdf,
    asymptotic_pdf,
    expectation,
    median,
    mode,
    normalize_delta,
)
from .stats_core import (
    DegenerateSampleError,
    EmpiricalDensity1D,
    kde_1d,
    kde_2d,
    ks_statistic,
    _rng,
    silverman_bandwidth,
)
from .synthetic import DistanceLaw, empirical_delta_distribution

DEFAULT_LID0 = 10.0
GRID_SIZE = 512
MIN_BIN_COUNT = 30


def ks_band(n: int) -> float:
    """99% Kolmogorov-Smirnov acceptance band for n samples."""
    return 1.63 / math.sqrt(n)


@dataclass
class DeltaSampleSet:
    """Struct-of-arrays batch of :class:`DeltaSample` plus drop tallies."""

    query_ids: np.ndarray
    delta: np.ndarray
    ell_hat: np.ndarray
    tie: np.ndarray
    degenerate: int = 0
    zero_distance: int = 0
    short: int = 0

    def __len__(self):
        return self.delta.size

    def __iter__(self):
        for qid, d, e, t in zip(self.query_ids, self.delta, self.ell_hat, self.tie):
            yield DeltaSample(float(d), float(e), qid.item() if hasattr(qid, "item") else qid,
                              frozenset({"tie"}) if t else frozenset())

    @property
    def kept(self) -> int:
        return int(np.count_nonzero(~self.tie))

    @property
    def tie_flagged(self) -> int:
        return int(np.count_nonzero(self.tie))

    @property
    def dropped(self) -> int:
        return self.degenerate + self.zero_distance + self.short

    @property
    def input_count(self) -> int:
        return self.kept + self.tie_flagged + self.dropped

    def tallies(self) -> dict:
        return {
            "input": self.input_count,
            "kept": self.kept,
            "tie_flagged": self.tie_flagged,
            "degenerate": self.degenerate,
            "zero_distance": self.zero_distance,
            "short": self.short,
        }

    def unflagged(self) -> tuple[np.ndarray, np.ndarray]:
        keep = ~self.tie
        return self.delta[keep], self.ell_hat[keep]

    @classmethod
    def concat(cls, parts: Sequence["DeltaSampleSet"]) -> "DeltaSampleSet":
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.query_ids for p in parts]),
            np.concatenate([p.delta for p in parts]),
            np.concatenate([p.ell_hat for p in parts]),
            np.concatenate([p.tie for p in parts]),
            sum(p.degenerate for p in parts),
            sum(p.zero_distance for p in parts),
            sum(p.short for p in parts),
        )

    @classmethod
    def empty(cls) -> "DeltaSampleSet":
        return cls(np.empty(0, dtype=object), np.empty(0), np.empty(0), np.empty(0, dtype=bool))


def measure_array(distances, ranks: RankPair, query_ids=None) -> DeltaSampleSet:
    """Vectorized measurement over a ``(q, k)`` array of sorted neighbor distances, k >= k_x."""
    ranks.require_toward()
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[1] < ranks.k_x:
        raise ValueError(f"need a (q, k) array with k >= k_x={ranks.k_x}")
    ids = np.arange(d.shape[0]) if query_ids is None else np.asarray(query_ids)
    d = d[:, : ranks.k_x]
    zero = d[:, 0] <= 0
    ell = hill_estimates(d)
    usable = np.isfinite(ell)
    t, x = d[:, ranks.k_t - 1], d[:, ranks.k_x - 1]
    tie = t == x
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(tie, 0.0, 1.0 - t / x)
    return DeltaSampleSet(
        ids[usable],
        delta[usable],
        ell[usable],
        tie[usable],
        degenerate=int(np.count_nonzero(~usable & ~zero)),
        zero_distance=int(np.count_nonzero(zero)),
    )


def measure_all(profiles: Iterable[NeighborProfile], ranks: RankPair) -> DeltaSampleSet:
    """One sample per usable profile; degenerate, zero-distance and short profiles are tallied."""
    rows, ids, short = [], [], 0
    for p in profiles:
        if len(p) < ranks.k_x:
            short += 1
            continue
        rows.append(p.distances[: ranks.k_x])
        ids.append(p.query_id)
    if not rows:
        out = DeltaSampleSet.empty()
    else:
        qids = np.empty(len(ids), dtype=object)
        qids[:] = ids
        out = measure_array(np.vstack(rows), ranks, qids)
    out.short = short
    return out


def normalize_all(samples: DeltaSampleSet, lid_target=DEFAULT_LID0) -> np.ndarray:
    """Transport every unflagged sample to the common index ``lid_target`` using its own ell_hat."""
    delta, ell = samples.unflagged()
    if delta.size == 0:
        return np.empty(0)
    return np.atleast_1d(normalize_delta(delta, ell, lid_target))


def _arr(v):
    return np.asarray(v, dtype=float).tolist()


@dataclass
class ComparisonReport:
    config: dict
    grid: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    ks: float
    ks_band: float
    markers: dict
    counts: dict

    @property
    def empirical_density(self) -> EmpiricalDensity1D:
        return EmpiricalDensity1D(self.grid, self.empirical)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "grid": _arr(self.grid),
            "empirical": _arr(self.empirical),
            "theoretical": _arr(self.theoretical),
            "ks": self.ks,
            "ks_band": self.ks_band,
            "markers": self.markers,
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonReport":
        return cls(
            d["config"],
            np.asarray(d["grid"]),
            np.asarray(d["empirical"]),
            np.asarray(d["theoretical"]),
            d["ks"],
            d["ks_band"],
            d["markers"],
            d["counts"],
        )

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("delta", "empirical_pdf", "theoretical_pdf"))
            for row in zip(self.grid, self.empirical, self.theoretical):
                w.writerow(tuple(repr(float(v)) for v in row))
            w.writerow(())
            w.writerow(("marker", "value", "method"))
            for name, m in self.markers.items():
                w.writerow((name, repr(float(m["value"])), m["method"]))


def theory_markers(model: AsymptoticDeltaModel) -> dict:
    out = {}
    for name, est in (("expectation", expectation(model)), ("median", median(model)), ("mode", mode(model))):
        out[name] = {"value": est.value, "method": est.method}
    return out


def compare_to_theory(
    samples,
    ranks: RankPair,
    lid_target=DEFAULT_LID0,
    *,
    grid_size: int = GRID_SIZE,
    dataset: str = "synthetic",
    counts: dict | None = None,
) -> ComparisonReport:
    """KDE of normalized samples next to the limit density at ``lid_target``, plus KS."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise DegenerateSampleError(f"need at least 100 samples, got {x.size}")
    ell0 = LidIndex(lid_target).ell
    model = AsymptoticDeltaModel(ranks, LidIndex(ell0))
    grid = np.linspace(0.0, 1.0, grid_size)
    dens = kde_1d(x, grid)
    ks = ks_statistic(x, lambda z: asymptotic_cdf(model, z))
    config = {"dataset": dataset, "k_t": ranks.k_t, "k_x": ranks.k_x, "lid0": ell0, "n_samples": int(x.size)}
    cnt = {"samples": int(x.size)}
    if counts:
        cnt.update(counts)
    return ComparisonReport(
        config, grid, dens.values, asymptotic_pdf(model, grid), ks.statistic, ks_band(x.size),
        theory_markers(model), cnt,
    )


@dataclass
class JointReport:
    config: dict
    grid_ell: np.ndarray
    grid_delta: np.ndarray
    empirical: np.ndarray  # (len(grid_ell), len(grid_delta))
    model: np.ndarray
    ell_marginal: np.ndarray
    l1: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "grid_ell": _arr(self.grid_ell),
            "grid_delta": _arr(self.grid_delta),
            "empirical": _arr(self.empirical),
            "model": _arr(self.model),
            "ell_marginal": _arr(self.ell_marginal),
            "l1": self.l1,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JointReport":
        return cls(
            d["config"],
            np.asarray(d["grid_ell"]),
            np.asarray(d["grid_delta"]),
            np.asarray(d["empirical"]),
            np.asarray(d["model"]),
            np.asarray(d["ell_marginal"]),
            d["l1"],
        )

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("ell", "delta", "empirical_pdf", "model_pdf"))
            for i, ell in enumerate(self.grid_ell):
                for j, d in enumerate(self.grid_delta):
                    w.writerow((repr(float(ell)), repr(float(d)), repr(float(self.empirical[i, j])),
                                repr(float(self.model[i, j]))))


def joint_compare(
    ell_hat,
    delta,
    ranks: RankPair,
    *,
    n_ell: int = 96,
    n_delta: int = 128,
    dataset: str = "synthetic",
) -> JointReport:
    """Empirical joint density of (ell_hat, delta) against ``f(delta | ell) * f_L(ell)``.

    ``f_L`` is the KDE of the ell_hat values; the conditional is the limit
    density. Both are tabulated on one grid and compared in L1.
    """
    ell = np.asarray(ell_hat, dtype=float)
    d = np.asarray(delta, dtype=float)
    if ell.size < 1000:
        raise DegenerateSampleError(f"need at least 1000 samples, got {ell.size}")
    h = silverman_bandwidth(ell)
    lo = max(ell.min() - 2 * h, 1e-3)
    grid_ell = np.linspace(lo, ell.max() + 2 * h, n_ell)
    grid_delta = np.linspace(0.0, 1.0, n_delta)
    emp = kde_2d(np.column_stack([ell, d]), grid_ell, grid_delta)
    f_l = kde_1d(ell, grid_ell).values
    cond = np.vstack([asymptotic_pdf(AsymptoticDeltaModel(ranks, LidIndex(e)), grid_delta) for e in grid_ell])
    model_tab = cond * f_l[:, None]
    diff = np.abs(emp.values - model_tab)
    l1 = float(np.trapezoid(np.trapezoid(diff, grid_delta, axis=1), grid_ell))
    config = {"dataset": dataset, "k_t": ranks.k_t, "k_x": ranks.k_x, "n_samples": int(ell.size)}
    return JointReport(config, grid_ell, grid_delta, emp.values, model_tab, f_l, l1)


@dataclass
class ConvergenceTable:
    law: str
    k_t: int
    k_x: int
    theory_lid: float
    replicates: int
    n_values: list
    ks: list

    @property
    def slope(self) -> float:
        """Least-squares slope of KS against log10 n."""
        if len(self.n_values) < 2:
            return 0.0
        return float(np.polyfit(np.log10(self.n_values), self.ks, 1)[0])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slope"] = self.slope
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceTable":
        d = {k: v for k, v in d.items() if k != "slope"}
        return cls(**d)


def convergence_study(
    law: DistanceLaw,
    ranks: RankPair,
    n_values,
    replicates: int,
    rng,
    theory_lid: float | None = None,
) -> ConvergenceTable:
    """KS between simulated finite-n deltas and the limit law, for each dataset size.

    The reference index defaults to the law's own regular-variation index.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    ns = [int(n) for n in n_values]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_values must be a nonempty increasing sequence")
    if ranks.k_x > ns[0]:
        raise ValueError(f"k_x={ranks.k_x} exceeds the smallest n={ns[0]}")
    rng = _rng(rng)
    ell = law.rv_index if theory_lid is None else float(theory_lid)
    model = AsymptoticDeltaModel(ranks, LidIndex(ell))
    ks = []
    for n in ns:
        d = empirical_delta_distribution(law, n, ranks, rng, replicates)
        ks.append(ks_statistic(d, lambda z: asymptotic_cdf(model, z)).statistic)
    return ConvergenceTable(law.spec, ranks.k_t, ranks.k_x, ell, replicates, ns, ks)


@dataclass
class BinnedKsTable:
    k_t: int
    k_x: int
    lid0: float
    bin_width: float
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BinnedKsTable":
        return cls(**d)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("bin", "lid_lo", "lid_hi", "count", "ks", "insufficient"))
            for r in self.rows:
                w.writerow((r["bin"], r["lid_lo"], r["lid_hi"], r["count"],
                            "" if r["ks"] is None else repr(r["ks"]), int(r["insufficient"])))


def binned_ks_study(
    samples: DeltaSampleSet | Iterable[DeltaSample],
    ranks: RankPair,
    lid_target=DEFAULT_LID0,
    bin_width: float = 5.0,
    min_count: int = MIN_BIN_COUNT,
) -> BinnedKsTable:
    """Per-bin KS of normalized samples, bins ``[b w, (b+1) w)`` on ell_hat.

    Bins with fewer than ``min_count`` samples are listed but not scored.
    """
    items = [s for s in samples if not s.tie]
    if not items:
        raise DegenerateSampleError("no unflagged samples to bin")
    ell0 = LidIndex(lid_target).ell
    model = AsymptoticDeltaModel(ranks, LidIndex(ell0))
    table = BinnedKsTable(ranks.k_t, ranks.k_x, ell0, float(bin_width))
    for b, members in bin_by_lid(items, bin_width).items():
        row = {"bin": b, "lid_lo": b * bin_width, "lid_hi": (b + 1) * bin_width, "count": len(members),
               "ks": None, "insufficient": len(members) < min_count}
        if not row["insufficient"]:
            d = np.array([s.delta for s in members])
            e = np.array([s.ell_hat for s in members])
            row["ks"] = ks_statistic(normalize_delta(d, e, ell0), lambda z: asymptotic_cdf(model, z)).statistic
        table.rows.append(row)
    return table


@dataclass
class AnalysisResult:
    comparison: ComparisonReport
    joint: JointReport | None
    binned: BinnedKsTable
    tallies: dict


def analyze(
    samples: DeltaSampleSet,
    ranks: RankPair,
    lid_target=DEFAULT_LID0,
    *,
    dataset: str = "synthetic",
    bin_width: float = 5.0,
) -> AnalysisResult:
    """Normalized comparison, joint comparison (when >= 1000 samples) and binned KS."""
    tallies = samples.tallies()
    normalized = normalize_all(samples, lid_target)
    comparison = compare_to_theory(normalized, ranks, lid_target, dataset=dataset, counts=tallies)
    delta, ell = samples.unflagged()
    joint = joint_compare(ell, delta, ranks, dataset=dataset) if delta.size >= 1000 else None
    binned = binned_ks_study(samples, ranks, lid_target, bin_width)
    return AnalysisResult(comparison, joint, binned, tallies)


def report_stem(dataset: str, ranks: RankPair, lid0: float) -> str:
    return f"{dataset}_kt{ranks.k_t}_kx{ranks.k_x}_l0{lid0:g}"


def write_reports(result: AnalysisResult, out_dir, dataset: str, ranks: RankPair, lid0: float) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, report_stem(dataset, ranks, lid0))
    written = []

    def dump(obj: dict, suffix: str):
        path = f"{stem}_{suffix}.json"
        with open(path, "w") as f:
            json.dump(obj, f, indent=1)
        written.append(path)

    dump(result.comparison.to_dict(), "comparison")
    result.comparison.write_csv(f"{stem}_comparison.csv")
    written.append(f"{stem}_comparison.csv")
    if result.joint is not None:
        dump(result.joint.to_dict(), "joint")
        result.joint.write_csv(f"{stem}_joint.csv")
        written.append(f"{stem}_joint.csv")
    dump(result.binned.to_dict(), "binned_ks")
    result.binned.write_csv(f"{stem}_binned_ks.csv")
    written.append(f"{stem}_binned_ks.csv")
    return written
