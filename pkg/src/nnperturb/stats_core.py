"""Special functions, sampling and nonparametric statistics.

Everything here is vectorized over numpy arrays; scalar inputs give Python
floats back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betaln

_FPMIN = 1e-300
_CF_EPS = 1e-16
_CF_MAXIT = 20000
_TINY = np.nextafter(0.0, 1.0)


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(ArithmeticError):
    """An iterative routine stopped before meeting its tolerance."""


class DegenerateSampleError(ValueError):
    """Sample too small or too concentrated for the requested estimate."""


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"Beta shapes must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class EmpiricalDensity1D:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


@dataclass(frozen=True)
class DensityTable2D:
    grid_x: np.ndarray
    grid_y: np.ndarray
    values: np.ndarray  # shape (len(grid_x), len(grid_y))

    def integral(self) -> float:
        inner = np.trapezoid(self.values, self.grid_y, axis=1)
        return float(np.trapezoid(inner, self.grid_x))

    def marginal_x(self) -> EmpiricalDensity1D:
        return EmpiricalDensity1D(self.grid_x, np.trapezoid(self.values, self.grid_y, axis=1))


@dataclass(frozen=True)
class KsReport:
    statistic: float
    n_samples: int


def _as_params(alpha, beta):
    if isinstance(alpha, BetaParams):
        return alpha.alpha, alpha.beta
    if beta is None:
        raise TypeError("beta shape missing")
    return alpha, beta


def _broadcast(x, a, b):
    x, a, b = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("Beta shapes must be positive")
    return x, a, b


def _beta_cf(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Continued fraction for I_x(a, b), modified Lentz, elementwise."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    active = np.arange(x.size)
    for m in range(1, _CF_MAXIT + 1):
        if active.size == 0:
            return h
        aa, bb, xx = a[active], b[active], x[active]
        cc, dd, hh = c[active], d[active], h[active]
        m2 = 2 * m
        num = m * (bb - m) * xx / ((qam[active] + m2) * (aa + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _FPMIN, _FPMIN, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _FPMIN, _FPMIN, cc)
        dd = 1.0 / dd
        hh = hh * dd * cc
        num = -(aa + m) * (qab[active] + m) * xx / ((aa + m2) * (qap[active] + m2))
        dd = 1.0 + num * dd
        dd = np.where(np.abs(dd) < _FPMIN, _FPMIN, dd)
        cc = 1.0 + num / cc
        cc = np.where(np.abs(cc) < _FPMIN, _FPMIN, cc)
        dd = 1.0 / dd
        step = dd * cc
        hh = hh * step
        c[active], d[active], h[active] = cc, dd, hh
        active = active[np.abs(step - 1.0) >= _CF_EPS]
    if active.size:
        raise ConvergenceError(
            f"incomplete beta continued fraction did not converge at {active.size} points"
        )
    return h


def _reg_inc_beta(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.where(x >= 1.0, 1.0, 0.0)
    inner = (x > 0) & (x < 1)
    if not np.any(inner):
        return out
    xi, ai, bi = x[inner], a[inner], b[inner]
    # the prefactor x^a (1-x)^b / B(a, b) is symmetric under the reflection
    log_front = ai * np.log(xi) + bi * np.log1p(-xi) - betaln(ai, bi)
    swap = xi > (ai + 1.0) / (ai + bi + 2.0)
    ca = np.where(swap, bi, ai)
    cb = np.where(swap, ai, bi)
    cx = np.where(swap, 1.0 - xi, xi)
    with np.errstate(under="ignore"):
        tail = np.exp(log_front) * _beta_cf(ca, cb, cx) / ca
    out[inner] = np.clip(np.where(swap, 1.0 - tail, tail), 0.0, 1.0)
    return out


def reg_inc_beta(x, alpha, beta=None):
    """Regularized incomplete beta function I_x(alpha, beta), the Beta c.d.f.

    ``alpha`` may be a :class:`BetaParams`, in which case ``beta`` is omitted.
    Arguments broadcast against each other.
    """
    alpha, beta = _as_params(alpha, beta)
    scalar = all(np.ndim(v) == 0 for v in (x, alpha, beta))
    x, a, b = _broadcast(x, alpha, beta)
    if np.any(~((x >= 0) & (x <= 1))):
        raise DomainError("x must lie in [0, 1]")
    out = _reg_inc_beta(x.ravel(), a.ravel(), b.ravel()).reshape(x.shape)
    return float(out) if scalar else out


def beta_pdf(x, alpha, beta=None):
    alpha, beta = _as_params(alpha, beta)
    scalar = all(np.ndim(v) == 0 for v in (x, alpha, beta))
    x, a, b = _broadcast(x, alpha, beta)
    with np.errstate(all="ignore"):
        logp = (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - betaln(a, b)
        out = np.where((x > 0) & (x < 1), np.exp(logp), 0.0)
    out = np.nan_to_num(out, nan=0.0)
    return float(out) if scalar else out


def inv_reg_inc_beta(u, alpha, beta=None, tol: float = 1e-12, maxiter: int = 2000):
    """Inverse of :func:`reg_inc_beta` in its first argument.

    Safeguarded Newton: each iterate keeps a bracket [lo, hi] around the root
    and falls back to bisection whenever the Newton step leaves it.
    Where ``I`` is too steep for ``|I_x - u| <= 1e-10`` to be reachable, the
    bracket is driven down to adjacent floats and the closer one is returned.
    Raises :class:`ConvergenceError` if neither happens.
    """
    alpha, beta = _as_params(alpha, beta)
    scalar = all(np.ndim(v) == 0 for v in (u, alpha, beta))
    u, a, b = _broadcast(u, alpha, beta)
    if np.any(~((u >= 0) & (u <= 1))):
        raise DomainError("u must lie in [0, 1]")
    shape = u.shape
    u, a, b = u.ravel().copy(), a.ravel(), b.ravel()
    out = np.where(u >= 1.0, 1.0, 0.0)
    idx = np.flatnonzero((u > 0) & (u < 1))
    if idx.size:
        uu, aa, bb = u[idx], a[idx], b[idx]
        lo = np.zeros_like(uu)
        hi = np.ones_like(uu)
        xk = aa / (aa + bb)
        fk = _reg_inc_beta(xk, aa, bb) - uu
        done = np.zeros(uu.shape, dtype=bool)

        def narrow(lo, hi):
            # adjacent floats: the root cannot be located any further
            return hi - lo <= np.spacing(lo)

        for _ in range(maxiter):
            lo = np.where(~done & (fk < 0), xk, lo)
            hi = np.where(~done & (fk > 0), xk, hi)
            done |= (np.abs(fk) <= tol) | narrow(lo, hi)
            if np.all(done):
                break
            dens = beta_pdf(xk, aa, bb)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = xk - fk / dens
            ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
            # bisect geometrically near zero so tiny roots are reached quickly
            mid = np.where(
                (lo > 0) & (hi / np.maximum(lo, 1e-300) > 4), np.sqrt(lo) * np.sqrt(hi), 0.5 * (lo + hi)
            )
            # never round down onto lo == 0, or the search stalls among subnormals
            mid = np.where(lo == 0, np.maximum(hi / 16.0, _TINY), mid)
            xk = np.where(done, xk, np.where(ok, newton, mid))
            fk = np.where(done, fk, _reg_inc_beta(xk, aa, bb) - uu)
        resid = np.abs(_reg_inc_beta(xk, aa, bb) - uu)
        # a root pinned between adjacent floats: return the closer endpoint
        pinned = narrow(lo, hi)
        for end in (lo, hi):
            r_end = np.abs(_reg_inc_beta(end, aa, bb) - uu)
            better = pinned & (r_end < resid)
            xk = np.where(better, end, xk)
            resid = np.where(better, r_end, resid)
        unresolved = (resid > 1e-10) & ~pinned
        if np.any(unresolved):
            raise ConvergenceError(f"inverse incomplete beta failed at {np.sum(unresolved)} points")
        out[idx] = xk
    out = out.reshape(shape)
    return float(out) if scalar else out


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _log_gamma_variates(rng: np.random.Generator, shape: float, count: int) -> np.ndarray:
    # standard_gamma is Marsaglia-Tsang; the boost G(a) = G(a+1) U^(1/a) keeps
    # small shapes from underflowing to zero
    if shape >= 1.0:
        return np.log(rng.standard_gamma(shape, count))
    g = rng.standard_gamma(shape + 1.0, count)
    return np.log(g) + np.log(rng.random(count)) / shape


def sample_beta(p: BetaParams, rng, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. Beta(alpha, beta) variates as a ratio of Gammas."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _rng(rng)
    la = _log_gamma_variates(rng, p.alpha, count)
    lb = _log_gamma_variates(rng, p.beta, count)
    # X / (X + Y) = 1 / (1 + exp(log Y - log X)), stable for lopsided shapes
    out = 1.0 / (1.0 + np.exp(lb - la))
    return np.clip(out, _TINY, np.nextafter(1.0, 0.0))


def ks_statistic(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> KsReport:
    """One-sample Kolmogorov-Smirnov distance between ``samples`` and ``cdf``.

    ``cdf`` is called once on the sorted sample array.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DegenerateSampleError("KS statistic of an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = max(np.max(np.abs(i / n - f)), np.max(np.abs((i - 1) / n - f)))
    return KsReport(float(min(max(d, 0.0), 1.0)), n)


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    std = np.std(x, ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(std, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = std
    return 0.9 * spread * x.size ** (-0.2)


def cubic_bspline(u: np.ndarray) -> np.ndarray:
    """Centered cubic B-spline, support [-2, 2], unit integral."""
    a = np.abs(u)
    inner = (4.0 - 6.0 * a**2 + 3.0 * a**3) / 6.0
    outer = (2.0 - a) ** 3 / 6.0
    return np.where(a < 1.0, inner, np.where(a < 2.0, outer, 0.0))


def _kernel_matrix(grid: np.ndarray, samples: np.ndarray, h: float) -> np.ndarray:
    return cubic_bspline((grid[:, None] - samples[None, :]) / h) / h


def _validate_kde_input(samples: np.ndarray, minimum: int):
    if samples.shape[0] < minimum:
        raise DegenerateSampleError(f"need at least {minimum} samples, got {samples.shape[0]}")
    if not np.all(np.isfinite(samples)):
        raise DegenerateSampleError("samples must be finite")


def kde_1d(samples, grid, bandwidth: float | None = None, chunk: int = 8192) -> EmpiricalDensity1D:
    """Cubic B-spline kernel density estimate with Silverman's bandwidth."""
    x = np.asarray(samples, dtype=float).ravel()
    _validate_kde_input(x, 10)
    g = np.asarray(grid, dtype=float)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise DegenerateSampleError("zero bandwidth: all samples equal")
    dens = np.zeros_like(g)
    for start in range(0, x.size, chunk):
        dens += _kernel_matrix(g, x[start : start + chunk], h).sum(axis=1)
    return EmpiricalDensity1D(g, dens / x.size)


def kde_2d(samples, grid_x, grid_y, chunk: int = 8192) -> DensityTable2D:
    """Separable product-kernel 2-D density estimate, per-axis Silverman bandwidths."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError("samples must be an (N, 2) array")
    _validate_kde_input(s, 100)
    hx = silverman_bandwidth(s[:, 0])
    hy = silverman_bandwidth(s[:, 1])
    if not (hx > 0 and hy > 0):
        raise DegenerateSampleError("degenerate axis: zero bandwidth")
    gx = np.asarray(grid_x, dtype=float)
    gy = np.asarray(grid_y, dtype=float)
    table = np.zeros((gx.size, gy.size))
    for start in range(0, s.shape[0], chunk):
        block = s[start : start + chunk]
        table += _kernel_matrix(gx, block[:, 0], hx) @ _kernel_matrix(gy, block[:, 1], hy).T
    return DensityTable2D(gx, gy, np.maximum(table / s.shape[0], 0.0))
