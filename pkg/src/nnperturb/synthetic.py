"""Distance laws and simulated neighborhoods.

Only distances to the query are modeled: n i.i.d. draws from a law F whose
c.d.f. is regularly varying at 0 with index ``ell``. Order statistics are
produced from exponential spacings, so a draw costs O(k_x) regardless of n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincinv, gammaln

from .model import LidIndex, RankPair
from .stats_core import DomainError, _rng


class DistanceLaw:
    """C.d.f., density and quantile of the query-to-point distance."""

    rv_index: float
    # set when F(x) = x**ell exactly near 0, which makes the finite-n law closed form
    power_index: float | None = None

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLaw(DistanceLaw):
    """F(x) = x**ell on [0, 1]."""

    ell: float

    @property
    def rv_index(self) -> float:
        return self.ell

    @property
    def power_index(self) -> float:
        return self.ell

    @property
    def spec(self) -> str:
        return f"power:{self.ell:g}"

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return x**self.ell

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.ell * np.where(inside, x, 1.0) ** (self.ell - 1.0)
        return np.where(inside, out, 0.0)

    def quantile(self, u):
        return np.asarray(u, dtype=float) ** (1.0 / self.ell)


@dataclass(frozen=True)
class ChiLaw(DistanceLaw):
    """Norm of a standard Gaussian vector in ``dim`` dimensions."""

    dim: int

    @property
    def rv_index(self) -> float:
        return float(self.dim)

    @property
    def spec(self) -> str:
        return f"chi:{self.dim}"

    def cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return gammainc(self.dim / 2.0, 0.5 * x * x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k = self.dim
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = (k - 1) * np.log(x) - 0.5 * x * x - (k / 2.0 - 1) * math.log(2.0) - gammaln(k / 2.0)
            out = np.exp(logp)
        if k == 1:
            out = np.where(x == 0, math.sqrt(2.0 / math.pi), out)
        return np.where(x >= 0, np.nan_to_num(out, nan=0.0), 0.0)

    def quantile(self, u):
        return np.sqrt(2.0 * gammaincinv(self.dim / 2.0, np.asarray(u, dtype=float)))


def make_power_law(ell) -> PowerLaw:
    ell = ell.ell if isinstance(ell, LidIndex) else LidIndex(ell).ell
    return PowerLaw(ell)


def make_chi_law(dim: int) -> ChiLaw:
    if int(dim) != dim or dim < 1:
        raise DomainError(f"chi law needs a positive integer dimension, got {dim}")
    return ChiLaw(int(dim))


def parse_law(spec: str) -> DistanceLaw:
    """Parse ``power:<ell>`` or ``chi:<dim>``."""
    kind, _, arg = spec.partition(":")
    if kind == "power" and arg:
        return make_power_law(float(arg))
    if kind == "chi" and arg:
        return make_chi_law(int(arg))
    raise ValueError(f"unknown law spec {spec!r}; expected power:<ell> or chi:<dim>")


def rv_ratio(law: DistanceLaw, x: float, lam: float = 2.0) -> float:
    """F(lam x) / F(x); tends to lam**ell as x -> 0."""
    return float(law.cdf(lam * x) / law.cdf(x))


def _uniform_order_stats(n: int, k_x: int, rng: np.random.Generator, count: int) -> np.ndarray:
    # U_(i) = S_i / S_(n+1) with S partial sums of n+1 unit exponentials;
    # the tail S_(n+1) - S_(k_x) is a single Gamma(n + 1 - k_x) draw
    spacings = rng.standard_exponential((count, k_x))
    partial = np.cumsum(spacings, axis=1)
    rest = rng.standard_gamma(n + 1 - k_x, count)
    return partial / (partial[:, -1] + rest)[:, None]


def sample_order_stats(law: DistanceLaw, n: int, k_x: int, rng, count: int) -> np.ndarray:
    """Smallest ``k_x`` of ``n`` i.i.d. distances, ``count`` times.

    Returns a ``(count, k_x)`` array; each row is sorted ascending.
    """
    if not 1 <= k_x <= n:
        raise DomainError(f"need 1 <= k_x <= n, got k_x={k_x}, n={n}")
    u = _uniform_order_stats(n, k_x, _rng(rng), count)
    return law.quantile(u)


def empirical_delta_distribution(law: DistanceLaw, n: int, ranks: RankPair, rng, count: int) -> np.ndarray:
    """Simulated ``1 - d_(k_t) / d_(k_x)`` over ``count`` independent datasets of size n.

    Only the two order statistics involved are generated:
    ``U_(k_t) = A / T`` and ``U_(k_x) = (A + B) / T`` with
    ``A ~ Gamma(k_t)``, ``B ~ Gamma(k_x - k_t)``, ``T = A + B + Gamma(n + 1 - k_x)``.
    """
    ranks.require_toward()
    if ranks.k_x > n:
        raise DomainError(f"k_x={ranks.k_x} exceeds n={n}")
    rng = _rng(rng)
    a = rng.standard_gamma(ranks.k_t, count)
    b = rng.standard_gamma(ranks.k_x - ranks.k_t, count)
    rest = rng.standard_gamma(n + 1 - ranks.k_x, count)
    total = a + b + rest
    t = law.quantile(a / total)
    x = law.quantile((a + b) / total)
    return 1.0 - t / x
