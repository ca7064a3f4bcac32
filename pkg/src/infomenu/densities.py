"""Distributions of the buyer's private belief on [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .roots import bisect


@dataclass(frozen=True)
class BeliefDensity:
    """Density ``pdf``, CDF ``cdf`` and quantile ``ppf`` of the belief.

    ``kinks`` lists points where the density is not smooth; the menu grid
    inserts them so piecewise quadrature stays accurate.
    """

    pdf: Callable
    cdf: Callable
    ppf: Callable
    symmetric: bool = False
    name: str = ""
    params: dict = field(default_factory=dict)
    kinks: tuple = ()

    def __call__(self, mu):
        return self.pdf(mu)


def _numeric_ppf(cdf):
    def ppf(x):
        x = np.asarray(x, dtype=float)
        if np.any((x < 0) | (x > 1)):
            raise DomainError("quantile level outside [0, 1]")
        lo = np.zeros_like(x)
        hi = np.ones_like(x)
        out = bisect(lambda m: cdf(m) - x, lo, hi)
        return out
    return ppf


def uniform():
    def pdf(m):
        m = np.asarray(m, dtype=float)
        return np.where((m >= 0) & (m <= 1), 1.0, 0.0)

    def cdf(m):
        return np.clip(np.asarray(m, dtype=float), 0.0, 1.0)

    return BeliefDensity(pdf, cdf, cdf, symmetric=True, name="uniform")


def triangular():
    """Symmetric triangular density with its peak at 1/2."""

    def pdf(m):
        m = np.clip(np.asarray(m, dtype=float), 0.0, 1.0)
        return 4.0 * np.minimum(m, 1.0 - m)

    def cdf(m):
        m = np.clip(np.asarray(m, dtype=float), 0.0, 1.0)
        return np.where(m <= 0.5, 2.0 * m ** 2, 1.0 - 2.0 * (1.0 - m) ** 2)

    def ppf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0.5, np.sqrt(x / 2.0), 1.0 - np.sqrt((1.0 - x) / 2.0))

    return BeliefDensity(pdf, cdf, ppf, symmetric=True, name="triangular", kinks=(0.5,))


def tilted(slope):
    """Uniform density tilted to ``1 + slope * (mu - 1/2)``; ``|slope| <= 2``."""
    a = float(slope)
    if abs(a) > 2:
        raise DomainError("tilt slope must satisfy |slope| <= 2 to keep the density non-negative")

    def pdf(m):
        m = np.asarray(m, dtype=float)
        return np.where((m >= 0) & (m <= 1), 1.0 + a * (m - 0.5), 0.0)

    def cdf(m):
        m = np.clip(np.asarray(m, dtype=float), 0.0, 1.0)
        return m + 0.5 * a * (m ** 2 - m)

    def ppf(x):
        x = np.asarray(x, dtype=float)
        if a == 0:
            return x
        # 0.5 a m^2 + (1 - 0.5 a) m - x = 0, the root in [0, 1], in the
        # cancellation-free form 2x / (b + sqrt(b^2 + 2 a x))
        b = 1.0 - 0.5 * a
        disc = np.sqrt(np.maximum(b * b + 2.0 * a * x, 0.0))
        den = b + disc
        safe = np.where(den > 0, den, 1.0)
        return np.clip(np.where(den > 0, 2.0 * x / safe, 0.0), 0.0, 1.0)

    return BeliefDensity(pdf, cdf, ppf, symmetric=(a == 0), name="tilted", params={"slope": a})


class PiecewiseLinear:
    """Piecewise-linear function on sorted knots with an exact running integral."""

    def __init__(self, xs, ys):
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs.ndim != 1 or self.xs.size < 2 or np.any(np.diff(self.xs) <= 0):
            raise DomainError("knots must be strictly increasing with at least two points")
        seg = 0.5 * (self.ys[1:] + self.ys[:-1]) * np.diff(self.xs)
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys, left=0.0, right=0.0)

    def integral(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.xs[0], self.xs[-1])
        k = np.clip(np.searchsorted(self.xs, x, side="right") - 1, 0, self.xs.size - 2)
        x0 = self.xs[k]
        y0 = self.ys[k]
        slope = (self.ys[k + 1] - y0) / (self.xs[k + 1] - x0)
        d = x - x0
        return self.cum[k] + y0 * d + 0.5 * slope * d * d


def tabulated(xs, fs, name="tabulated", symmetric=None):
    """Piecewise-linear density through ``(xs, fs)``, normalised on [0, 1]."""
    xs = np.asarray(xs, dtype=float)
    fs = np.asarray(fs, dtype=float)
    if xs[0] != 0.0 or xs[-1] != 1.0:
        raise DomainError("tabulated density must span exactly [0, 1]")
    if np.any(fs < 0):
        raise DomainError("tabulated density has negative values")
    pl = PiecewiseLinear(xs, fs)
    total = pl.cum[-1]
    if total <= 0:
        raise DomainError("tabulated density integrates to zero")
    pl = PiecewiseLinear(xs, fs / total)

    def cdf(m):
        return pl.integral(m)

    if symmetric is None:
        grid = np.linspace(0, 1, 257)
        symmetric = bool(np.max(np.abs(pl(grid) - pl(1 - grid))) < 1e-12)
    return BeliefDensity(
        pl, cdf, _numeric_ppf(cdf), symmetric=symmetric, name=name,
        params={"points": np.column_stack([xs, fs]).tolist()},
        kinks=tuple(float(x) for x in xs[1:-1]),
    )


def spike(center=0.9, width=0.02, height=30.0):
    """Uniform background plus a narrow triangular bump at ``center``.

    Violates the likelihood-ratio condition: the density rises steeply
    across the bump.
    """
    xs = [0.0, center - width, center, center + width, 1.0]
    fs = [1.0, 1.0, 1.0 + height, 1.0, 1.0]
    d = tabulated(xs, fs, name="spike", symmetric=False)
    return BeliefDensity(d.pdf, d.cdf, d.ppf, symmetric=False, name="spike",
                         params={"center": center, "width": width, "height": height},
                         kinks=d.kinks)


def check_density(f, n=257, tol=1e-9):
    """Return a list of invariant violations (empty when ``f`` is a valid density)."""
    grid = np.linspace(0.0, 1.0, n)
    problems = []
    if np.any(f.pdf(grid) < 0):
        problems.append("negative density")
    if abs(float(f.cdf(0.0))) > tol or abs(float(f.cdf(1.0)) - 1.0) > tol:
        problems.append("CDF does not run from 0 to 1")
    if np.any(np.diff(f.cdf(grid)) < -tol):
        problems.append("CDF decreasing")
    levels = np.linspace(0.001, 0.999, n)
    if np.max(np.abs(f.cdf(f.ppf(levels)) - levels)) > tol:
        problems.append("quantile does not invert the CDF")
    if f.symmetric and np.max(np.abs(f.pdf(grid) - f.pdf(1.0 - grid))) > tol:
        problems.append("flagged symmetric but pdf(mu) != pdf(1 - mu)")
    return problems
