"""Distributions of the relative perturbation needed to change a neighbor rank.

Toward the query: a point at rank ``k_x`` pushed to rank ``k_t < k_x`` needs
the relative displacement ``delta = 1 - t/x``. Its limit law as the dataset
grows is ``1 - B**(1/ell)`` with ``B ~ Beta(k_t, k_x - k_t)``.
Away from the query (``k_t > k_x``) the limit is ``B**(-1/ell) - 1`` with
``B ~ Beta(k_x, k_t - k_x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import betaln, xlog1py, xlogy

from .stats_core import BetaParams, DomainError, inv_reg_inc_beta, reg_inc_beta, sample_beta

if TYPE_CHECKING:
    from .synthetic import DistanceLaw


@dataclass(frozen=True)
class RankPair:
    k_t: int
    k_x: int

    def __post_init__(self):
        for name in ("k_t", "k_x"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v}")
            object.__setattr__(self, name, int(v))
        if self.k_t == self.k_x:
            raise DomainError("target and original ranks must differ")

    @classmethod
    def away(cls, k_t: int, k_x: int) -> "RankPair":
        if not k_x < k_t:
            raise DomainError(f"moving away needs k_x < k_t, got k_t={k_t}, k_x={k_x}")
        return cls(k_t, k_x)

    @property
    def toward(self) -> bool:
        return self.k_t < self.k_x

    def require_toward(self):
        if not self.toward:
            raise DomainError(f"expected k_t < k_x, got k_t={self.k_t}, k_x={self.k_x}")


@dataclass(frozen=True)
class LidIndex:
    ell: float

    def __post_init__(self):
        if not (np.isfinite(self.ell) and self.ell > 0):
            raise DomainError(f"LID index must be positive and finite, got {self.ell}")
        object.__setattr__(self, "ell", float(self.ell))


def _ell(lid) -> float:
    return lid.ell if isinstance(lid, LidIndex) else LidIndex(lid).ell


@dataclass(frozen=True)
class AsymptoticDeltaModel:
    ranks: RankPair
    lid: LidIndex

    def __post_init__(self):
        if not isinstance(self.lid, LidIndex):
            object.__setattr__(self, "lid", LidIndex(self.lid))

    @property
    def ell(self) -> float:
        return self.lid.ell

    @property
    def ratio_beta(self) -> BetaParams:
        """Law of ``(t/x)**ell`` in the limit."""
        self.ranks.require_toward()
        return BetaParams(self.ranks.k_t, self.ranks.k_x - self.ranks.k_t)


@dataclass(frozen=True)
class FiniteDeltaModel:
    ranks: RankPair
    law: "DistanceLaw"
    n: int
    mc_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        self.ranks.require_toward()
        if self.ranks.k_x > self.n:
            raise DomainError(f"k_x={self.ranks.k_x} exceeds dataset size n={self.n}")
        if self.mc_samples < 1000:
            raise DomainError("mc_samples must be at least 1000")

    def xi_draws(self) -> np.ndarray:
        # same seed -> same draws for every delta: common random numbers
        k_x = self.ranks.k_x
        return sample_beta(BetaParams(k_x, self.n - k_x + 1), self.seed, self.mc_samples)


@dataclass(frozen=True)
class Estimate:
    """A scalar statistic together with the method that produced it."""

    value: float
    method: str


def delta_from_distances(t, x):
    """Minimal relative perturbation ``1 - t/x`` bringing a point at distance x to distance t."""
    t_arr = np.asarray(t, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if np.any(t_arr <= 0) or np.any(x_arr <= 0):
        raise DomainError("distances must be positive")
    if np.any(t_arr >= x_arr):
        raise DomainError("need t < x")
    out = 1.0 - t_arr / x_arr
    return float(out) if out.ndim == 0 else out


def joint_order_pdf(model: FiniteDeltaModel, t, x):
    """Joint density of the (k_t, k_x)-th smallest of n i.i.d. distances."""
    law = model.law
    k_t, k_x, n = model.ranks.k_t, model.ranks.k_x, model.n
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    ft, fx = law.pdf(t), law.pdf(x)
    Ft, Fx = law.cdf(t), law.cdf(x)
    valid = (x > t) & (t >= 0) & (ft > 0) & (fx > 0) & (Fx > Ft)
    with np.errstate(divide="ignore", invalid="ignore"):
        logg = (
            xlogy(k_t - 1, Ft)
            + xlogy(k_x - k_t - 1, Fx - Ft)
            + xlog1py(n - k_x, -Fx)
            + np.log(ft)
            + np.log(fx)
            - betaln(k_t, k_x - k_t)
            - betaln(k_x, n - k_x + 1)
        )
        out = np.where(valid, np.exp(logg), 0.0)
    out = np.nan_to_num(out, nan=0.0)
    return float(out) if out.ndim == 0 else out


def finite_cdf(model: FiniteDeltaModel, delta):
    """C.d.f. of the relative perturbation for a dataset of n points.

    Averages ``1 - I_r(k_t, k_x - k_t)`` with ``r = F((1-delta) F^-1(xi)) / xi``
    over Beta(k_x, n-k_x+1) draws of ``xi``. A pure power law makes ``r``
    constant, so the closed form is returned directly.
    """
    d = np.asarray(delta, dtype=float)
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    k_t, k_x = model.ranks.k_t, model.ranks.k_x
    out = np.where(d >= 1.0, 1.0, 0.0)
    inner = np.flatnonzero((d > 0) & (d < 1))
    power = getattr(model.law, "power_index", None)
    if power is not None:
        lim = AsymptoticDeltaModel(model.ranks, LidIndex(power))
        out[inner] = asymptotic_cdf(lim, d[inner])
    elif inner.size:
        xi = model.xi_draws()
        q = model.law.quantile(xi)
        for i in inner:
            r = np.clip(model.law.cdf((1.0 - d[i]) * q) / xi, 0.0, 1.0)
            out[i] = 1.0 - np.mean(reg_inc_beta(r, k_t, k_x - k_t))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def _lshape(delta: np.ndarray, ell: float) -> np.ndarray:
    # 1 - (1 - delta)**ell without cancellation for small delta
    return -np.expm1(ell * np.log1p(-delta))


def asymptotic_cdf(model: AsymptoticDeltaModel, delta):
    model.ranks.require_toward()
    d = np.asarray(delta, dtype=float)
    k_t, k_x = model.ranks.k_t, model.ranks.k_x
    inner = (d > 0) & (d < 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(inner, _lshape(np.where(inner, d, 0.5), model.ell), 0.0)
    out = np.where(d >= 1, 1.0, np.where(inner, reg_inc_beta(np.clip(arg, 0, 1), k_x - k_t, k_t), 0.0))
    return float(out) if out.ndim == 0 else out


def asymptotic_pdf(model: AsymptoticDeltaModel, delta):
    model.ranks.require_toward()
    d = np.asarray(delta, dtype=float)
    k_t, k_x = model.ranks.k_t, model.ranks.k_x
    ell = model.ell
    inside = (d >= 0) & (d <= 1)
    dd = np.where(inside, d, 0.5)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logp = (
            math.log(ell)
            - betaln(k_x - k_t, k_t)
            + xlogy(k_x - k_t - 1, _lshape(dd, ell))
            + xlog1py(k_t * ell - 1, -dd)
        )
        out = np.exp(logp)
    out = np.where(inside, out, 0.0)
    return float(out) if out.ndim == 0 else out


def sample_asymptotic(model: AsymptoticDeltaModel, rng, count: int) -> np.ndarray:
    b = sample_beta(model.ratio_beta, rng, count)
    return -np.expm1(np.log(b) / model.ell)


def expectation(model: AsymptoticDeltaModel, method: str = "auto") -> Estimate:
    """Mean of the limit law.

    ``method="exact"`` is only available for ``k_t == 1`` (Kumaraswamy case);
    ``"approx"`` is the second-order expansion around ``E[B]``, good for large
    ``k_x``; ``"auto"`` picks exact whenever it exists.
    """
    model.ranks.require_toward()
    k_t, k_x, ell = model.ranks.k_t, model.ranks.k_x, model.ell
    if method == "auto":
        method = "exact" if k_t == 1 else "approx"
    if method == "exact":
        if k_t != 1:
            raise DomainError("exact expectation is only known for k_t == 1")
        value = 1.0 - math.exp(math.log(k_x - 1) + betaln(1.0 + 1.0 / ell, k_x - 1))
    elif method == "approx":
        corr = (ell - 1.0) / (2.0 * ell**2) * (k_x - k_t) / (k_t * (k_x + 1.0))
        value = 1.0 - (k_t / k_x) ** (1.0 / ell) * (1.0 - corr)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Estimate(value, method)


def median(model: AsymptoticDeltaModel, method: str = "exact") -> Estimate:
    model.ranks.require_toward()
    k_t, k_x, ell = model.ranks.k_t, model.ranks.k_x, model.ell
    if method == "exact":
        b_med = inv_reg_inc_beta(0.5, k_t, k_x - k_t)
        value = -math.expm1(math.log(b_med) / ell)
    elif method == "approx":
        if k_t < 2 or k_x < k_t + 2:
            raise DomainError("median approximation needs k_t >= 2 and k_x >= k_t + 2")
        value = 1.0 - ((k_t - 1.0 / 3.0) / (k_x - 2.0 / 3.0)) ** (1.0 / ell)
    elif method == "kumaraswamy":
        if k_t != 1:
            raise DomainError("closed-form median needs k_t == 1")
        value = 1.0 - (-math.expm1(-math.log(2.0) / (k_x - 1))) ** (1.0 / ell)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Estimate(value, method)


def mode(model: AsymptoticDeltaModel) -> Estimate:
    """Mode of the limit density.

    Interior only when ``k_t * ell > 1`` and ``k_x - k_t > 1``. Otherwise the
    supremum sits on an endpoint and the result says so through ``method``
    (``"boundary"``, value 0 or 1; ``"flat"`` for the uniform case).
    """
    model.ranks.require_toward()
    k_t, k_x, ell = model.ranks.k_t, model.ranks.k_x, model.ell
    if k_t * ell > 1 and k_x - k_t > 1:
        value = 1.0 - ((k_t * ell - 1.0) / ((k_x - 1.0) * ell - 1.0)) ** (1.0 / ell)
        return Estimate(value, "interior")
    if k_t * ell < 1 or (k_t * ell == 1 and k_x - k_t > 1):
        return Estimate(1.0, "boundary")
    if k_x - k_t == 1 and k_t * ell > 1:
        return Estimate(0.0, "boundary")
    return Estimate(float("nan"), "flat")


def success_probability(model: AsymptoticDeltaModel, epsilon: float) -> float:
    """Probability that a displacement of ``1 - (k_t/k_x)**(1/ell) + epsilon`` suffices."""
    if epsilon < 0:
        raise DomainError("epsilon must be nonnegative")
    k_t, k_x = model.ranks.k_t, model.ranks.k_x
    return asymptotic_cdf(model, 1.0 - (k_t / k_x) ** (1.0 / model.ell) + epsilon)


def normalize_delta(delta, lid_measured, lid_target):
    """Map a perturbation observed at index ``ell`` onto index ``ell0``.

    If delta follows the limit law at ``ell``, ``1 - (1 - delta)**(ell/ell0)``
    follows it at ``ell0`` with the same ranks.
    """
    d = np.asarray(delta, dtype=float)
    if np.any(~((d > 0) & (d < 1))):
        raise DomainError("delta must lie in (0, 1)")
    ratio = np.asarray(_ell_array(lid_measured)) / _ell(lid_target)
    out = -np.expm1(ratio * np.log1p(-d))
    return float(out) if out.ndim == 0 else out


def _ell_array(lid):
    if isinstance(lid, LidIndex):
        return lid.ell
    arr = np.asarray(lid, dtype=float)
    if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
        raise DomainError("LID index must be positive and finite")
    return arr


def away_cdf(ranks: RankPair, lid, delta):
    """C.d.f. of ``B**(-1/ell) - 1`` with ``B ~ Beta(k_x, k_t - k_x)``."""
    if ranks.toward:
        raise DomainError(f"away case needs k_x < k_t, got k_t={ranks.k_t}, k_x={ranks.k_x}")
    ell = _ell(lid)
    d = np.asarray(delta, dtype=float)
    if np.any(d < 0):
        raise DomainError("delta must be nonnegative")
    arg = np.exp(-ell * np.log1p(d))
    out = 1.0 - reg_inc_beta(arg, ranks.k_x, ranks.k_t - ranks.k_x)
    return float(out) if np.ndim(out) == 0 else out


def sample_away(ranks: RankPair, lid, rng, count: int) -> np.ndarray:
    if ranks.toward:
        raise DomainError("away case needs k_x < k_t")
    b = sample_beta(BetaParams(ranks.k_x, ranks.k_t - ranks.k_x), rng, count)
    return np.expm1(-np.log(b) / _ell(lid))
