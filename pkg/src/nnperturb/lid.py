"""Local intrinsic dimension from nearest-neighbor distances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np

from .model import RankPair


class DegenerateProfileError(ValueError):
    """All distances equal: the Hill estimator diverges."""


class ZeroDistanceError(DegenerateProfileError):
    """A neighbor coincides with the query, so log-ratios are undefined."""


@dataclass(frozen=True)
class NeighborProfile:
    """Sorted distances from one query to its nearest neighbors.

    Zero distances are representable (exact duplicates of the query) but make
    the profile unusable for estimation; see :attr:`has_zero_distance`.
    """

    query_id: Hashable
    distances: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise ValueError("a profile needs at least two distances")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite and nonnegative")
        if np.any(np.diff(d) < 0):
            raise ValueError("distances must be sorted ascending")
        object.__setattr__(self, "distances", d)

    @property
    def has_zero_distance(self) -> bool:
        return bool(self.distances[0] == 0.0)

    def __len__(self):
        return self.distances.size


@dataclass(frozen=True)
class LidEstimate:
    ell_hat: float
    k_used: int


@dataclass(frozen=True)
class DeltaSample:
    """One query's measured (delta, ell_hat) pair."""

    delta: float
    ell_hat: float
    query_id: Hashable = None
    flags: frozenset = field(default_factory=frozenset)

    @property
    def tie(self) -> bool:
        return "tie" in self.flags


def hill_estimate(profile: NeighborProfile) -> LidEstimate:
    """Maximum-likelihood (Hill) estimate of the LID from all distances in the profile."""
    d = profile.distances
    if profile.has_zero_distance:
        raise ZeroDistanceError(f"query {profile.query_id!r} has a zero distance")
    # the last term log(d_k / d_k) is 0 but still counts in the mean
    mean_log = np.mean(np.log(d / d[-1]))
    if mean_log == 0.0:
        raise DegenerateProfileError(f"query {profile.query_id!r}: all distances equal")
    return LidEstimate(float(-1.0 / mean_log), d.size)


def hill_estimates(distances: np.ndarray) -> np.ndarray:
    """Row-wise Hill estimates of a ``(q, k)`` array; NaN where undefined."""
    d = np.asarray(distances, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_log = np.mean(np.log(d / d[:, -1:]), axis=1)
        out = -1.0 / mean_log
    out[(d[:, 0] <= 0) | (mean_log == 0) | ~np.isfinite(out)] = np.nan
    return out


def delta_and_lid(profile: NeighborProfile, ranks: RankPair) -> DeltaSample:
    """Measure delta between ranks k_t and k_x, and the LID, on the first k_x distances."""
    ranks.require_toward()
    if len(profile) < ranks.k_x:
        raise ValueError(f"profile has {len(profile)} distances, need k_x={ranks.k_x}")
    sub = NeighborProfile(profile.query_id, profile.distances[: ranks.k_x])
    est = hill_estimate(sub)
    t, x = sub.distances[ranks.k_t - 1], sub.distances[ranks.k_x - 1]
    if t == x:
        return DeltaSample(0.0, est.ell_hat, profile.query_id, frozenset({"tie"}))
    return DeltaSample(float(1.0 - t / x), est.ell_hat, profile.query_id)


def bin_by_lid(samples: Iterable[DeltaSample], bin_width: float) -> dict[int, list[DeltaSample]]:
    """Group samples by ``floor(ell_hat / bin_width)``; intervals are closed on the left."""
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    bins: dict[int, list[DeltaSample]] = {}
    for s in samples:
        bins.setdefault(int(np.floor(s.ell_hat / bin_width)), []).append(s)
    return dict(sorted(bins.items()))
