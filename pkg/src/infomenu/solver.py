"""Revenue-maximising menu of simple experiments for a continuum of buyers.

The belief line splits at ``mu0 = F^-1(1 - lam)``. Around ``mu0`` the
interval ``[mu_minus, mu_plus]`` buys full revelation at one flat price.
Above ``mu_plus`` buyers get experiments that reveal ``l`` conclusively and
whose noisy signal moves them to a posterior ``nu > mu`` pinned down by a
first-order condition; below ``mu_minus`` the mirror image with ``h``.
Where the first-order condition stops admitting ``nu`` on the right side of
``mu`` the buyer is excluded. Prices come from the envelope condition:
surplus is the integral of ``d(delta V)/d mu`` along the contract curve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.integrate import simpson

from . import core
from .core import FULL, NULL, REVEAL_H, REVEAL_L
from .errors import (AssumptionRefusal, DomainError, ThresholdNotFoundError,
                     UnsolvedMultiplierError)
from .roots import bisect, bisect_scalar, first_sign_change, last_sign_change

GUARD = 1e-6
DEFAULT_GRID = 1001
LAMBDA_BRACKET = (0.05, 0.95)


@dataclass(frozen=True)
class ThresholdSet:
    lam: float
    mu0: float
    mu_minus: float
    mu_plus: float
    excl_lo: float | None = None
    excl_hi: float | None = None

    def as_dict(self):
        return {
            "lambda": self.lam,
            "mu0": self.mu0,
            "mu_minus": self.mu_minus,
            "mu_plus": self.mu_plus,
            "exclusion_low": self.excl_lo,
            "exclusion_high": self.excl_hi,
        }


# --------------------------------------------------------------------------
# thresholds


def _shift(mu, lam, f):
    return lam + f.cdf(mu) - 1.0


def minus_equation(mu, lam, f):
    return f.pdf(mu) * mu + _shift(mu, lam, f)


def plus_equation(mu, lam, f):
    return f.pdf(mu) * (1.0 - mu) - _shift(mu, lam, f)


def solve_thresholds(f, lam, xtol=1e-14):
    """``mu0``, ``mu_minus`` and ``mu_plus`` for multiplier ``lam``."""
    if not 0.0 < lam < 1.0:
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")
    mu0 = float(f.ppf(1.0 - lam))
    try:
        mu_minus = bisect_scalar(lambda m: float(minus_equation(m, lam, f)), 0.0, mu0, xtol=xtol)
    except ValueError:
        raise ThresholdNotFoundError("f(mu)mu + (lam + F(mu) - 1) = 0", 0.0, mu0) from None
    try:
        mu_plus = bisect_scalar(lambda m: float(plus_equation(m, lam, f)), mu0, 1.0, xtol=xtol)
    except ValueError:
        raise ThresholdNotFoundError("f(mu)(1 - mu) - (lam + F(mu) - 1) = 0", mu0, 1.0) from None
    return ThresholdSet(lam=float(lam), mu0=mu0, mu_minus=float(mu_minus), mu_plus=float(mu_plus))


# --------------------------------------------------------------------------
# first-order conditions


def foc_high(mu, nu, lam, V, f):
    """Optimality condition for the posterior of a reveal-l contract (mu > mu0).

    Positive values mean the seller gains by making the experiment more
    informative (raising ``nu``).
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    coef = 1.0 - (1.0 - mu) * f.pdf(mu) / _shift(mu, lam, f)
    gap = V(nu) - V(0.0) - nu * V.dV(nu)
    return coef * gap + V.d2V(nu) * nu ** 2 * (1.0 - nu) / mu


def foc_low(mu, nu, lam, V, f):
    """Optimality condition for the posterior of a reveal-h contract (mu < mu0).

    Positive values mean the seller gains by lowering ``nu``.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    coef = 1.0 + mu * f.pdf(mu) / _shift(mu, lam, f)
    gap = V(nu) - V(1.0) + (1.0 - nu) * V.dV(nu)
    return coef * gap + V.d2V(nu) * nu * (1.0 - nu) ** 2 / (1.0 - mu)


def _solve_side(mu, lam, V, f, high):
    """Clamped FOC posterior for an array of beliefs on one side of ``mu0``."""
    mu = np.asarray(mu, dtype=float)
    if high:
        at_mu = foc_high(mu, mu, lam, V, f)
        at_end = foc_high(mu, np.ones_like(mu), lam, V, f)
        excluded = at_mu <= 0
        full = ~excluded & (at_end >= 0)
        end = 1.0
    else:
        at_mu = foc_low(mu, mu, lam, V, f)
        at_end = foc_low(mu, np.zeros_like(mu), lam, V, f)
        excluded = at_mu <= 0
        full = ~excluded & (at_end >= 0)
        end = 0.0
    nu = np.where(excluded, mu, end)
    inner = ~excluded & ~full
    if np.any(inner):
        m = mu[inner]
        fn = (lambda x: foc_high(m, x, lam, V, f)) if high else (lambda x: foc_low(m, x, lam, V, f))
        lo, hi = (m, np.ones_like(m)) if high else (np.zeros_like(m), m)
        nu[inner] = bisect(fn, lo, hi)
    return nu, excluded


def solve_foc_posterior(mu, lam, V, f, mu0=None):
    """Posterior of the noisy signal in the contract for belief ``mu``.

    Above ``mu0`` the reveal-l condition is solved on ``(mu, 1)``, below it
    the reveal-h condition on ``(0, mu)``. The result is clamped to the
    admissible side: a clamp to ``mu`` means the buyer is excluded, a clamp
    to 1 (or 0) means full revelation. Within ``GUARD`` of ``mu0`` the
    conditions are singular and full revelation is returned.
    """
    V.require_smooth("solve_foc_posterior")
    if mu0 is None:
        mu0 = float(f.ppf(1.0 - lam))
    scalar = np.ndim(mu) == 0
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    out = np.empty_like(mu)
    near = np.abs(mu - mu0) <= GUARD
    hi = (mu > mu0) & ~near
    lo = (mu < mu0) & ~near
    out[near] = np.where(mu[near] >= mu0, 1.0, 0.0)
    if np.any(hi):
        out[hi] = _solve_side(mu[hi], lam, V, f, True)[0]
    if np.any(lo):
        out[lo] = _solve_side(mu[lo], lam, V, f, False)[0]
    return float(out[0]) if scalar else out


def noise_from_posterior(mu, nu, orientation, tol=1e-12):
    """Noise parameter of the simple experiment that moves ``mu`` to ``nu``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if orientation == REVEAL_L:
        if np.any(nu < mu - tol) or np.any(nu > 1 + tol):
            raise DomainError("reveal-l posterior must lie in [mu, 1]")
        nu = np.clip(nu, mu, 1.0)
        den = nu * (1.0 - mu)
        out = np.where(den > 0, 1.0 - mu * (1.0 - nu) / np.where(den > 0, den, 1.0), 0.0)
    elif orientation == REVEAL_H:
        if np.any(nu > mu + tol) or np.any(nu < -tol):
            raise DomainError("reveal-h posterior must lie in [0, mu]")
        nu = np.clip(nu, 0.0, mu)
        den = mu * (1.0 - nu)
        out = np.where(den > 0, 1.0 - nu * (1.0 - mu) / np.where(den > 0, den, 1.0), 0.0)
    else:
        raise DomainError(f"noise_from_posterior needs reveal-h or reveal-l, got {orientation!r}")
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def exclusion_point(lam, V, f, side, thresholds=None, scan=512, xtol=1e-14):
    """Belief beyond which the buyer gets nothing.

    High side: the largest ``mu`` above ``mu_plus`` whose contract still has
    ``nu > mu``; low side: the smallest ``mu`` below ``mu_minus`` with
    ``nu < mu``. Returns 1 (or 0) when no buyer on that side is excluded.
    """
    V.require_smooth("exclusion_point")
    th = thresholds or solve_thresholds(f, lam)
    if side == "high":
        g = lambda m: foc_high(m, m, lam, V, f)
        a, b = th.mu_plus + GUARD, 1.0
        if g(np.array(b)) >= 0:
            return 1.0
        br = last_sign_change(g, a, b, scan)
        if br is None:
            return th.mu_plus
    elif side == "low":
        g = lambda m: foc_low(m, m, lam, V, f)
        a, b = 0.0, th.mu_minus - GUARD
        if g(np.array(a)) >= 0:
            return 0.0
        br = first_sign_change(g, a, b, scan)
        if br is None:
            return th.mu_minus
    else:
        raise DomainError("side must be 'high' or 'low'")
    return bisect_scalar(lambda m: float(g(np.array(m))), br[0], br[1], xtol=xtol)


# --------------------------------------------------------------------------
# contract curve and quadrature


def _contracts(mu, th, V, f):
    """Side flag (True = reveal-l), noise and posterior for each belief."""
    mu = np.asarray(mu, dtype=float)
    is_l = mu >= th.mu0
    noise = np.zeros_like(mu)
    nu = mu.copy()
    full = (mu >= th.mu_minus) & (mu <= th.mu_plus)
    noise[full] = 1.0
    nu[full] = np.where(is_l[full], 1.0, 0.0)
    hi = (mu > th.mu_plus) & (mu < th.excl_hi)
    lo = (mu < th.mu_minus) & (mu > th.excl_lo)
    if np.any(hi):
        n, _ = _solve_side(mu[hi], th.lam, V, f, True)
        nu[hi] = n
        noise[hi] = noise_from_posterior(mu[hi], n, REVEAL_L)
    if np.any(lo):
        n, _ = _solve_side(mu[lo], th.lam, V, f, False)
        nu[lo] = n
        noise[lo] = noise_from_posterior(mu[lo], n, REVEAL_H)
    return is_l, noise, nu


def _dv(mu, is_l, noise, V):
    return np.where(is_l, core.simple_delta_v(mu, "l", noise, V), core.simple_delta_v(mu, "h", noise, V))


def _dv_mu(mu, is_l, noise, V):
    return np.where(is_l, core.simple_delta_v_mu(mu, "l", noise, V),
                    core.simple_delta_v_mu(mu, "h", noise, V))


def _orientation(is_l, noise):
    out = np.where(is_l, REVEAL_L, REVEAL_H).astype(object)
    out[noise >= 1.0] = FULL
    out[noise <= 0.0] = NULL
    return out


def _breaks(th, f):
    pts = [0.0, th.excl_lo, th.mu_minus, th.mu0, th.mu_plus, th.excl_hi, 1.0]
    pts += [k for k in f.kinks if 0.0 < k < 1.0]
    return np.unique(np.asarray(pts, dtype=float))


def _segment_kind(a, b, th):
    m = 0.5 * (a + b)
    if m < th.excl_lo or m > th.excl_hi:
        return NULL
    if th.mu_minus <= m <= th.mu_plus:
        return FULL
    return "partial"


def _simpson_cells(x, gx, gmid):
    """Cell integrals of composite Simpson with explicit midpoint values."""
    h = np.diff(x)
    return h / 6.0 * (gx[:-1] + 4.0 * gmid + gx[1:])


def _envelope_integrand(mu, th, V, f):
    is_l, noise, _ = _contracts(mu, th, V, f)
    return _dv_mu(mu, is_l, noise, V)


def _surplus_on_grid(x, th, V, f, breaks):
    """Running integral of the envelope integrand, exact on full-revelation stretches."""
    s = np.zeros_like(x)
    is_l, noise, _ = _contracts(x, th, V, f)
    g = _dv_mu(x, is_l, noise, V)
    mids = 0.5 * (x[:-1] + x[1:])
    gm = _envelope_integrand(mids, th, V, f)
    cells = _simpson_cells(x, g, gm)
    full_dv = lambda m: m * V(1.0) + (1.0 - m) * V(0.0) - V(m)
    seg = np.searchsorted(breaks, mids, side="right") - 1
    for k in range(x.size - 1):
        a, b = breaks[seg[k]], breaks[seg[k] + 1]
        kind = _segment_kind(a, b, th)
        if kind == NULL:
            cells[k] = 0.0
        elif kind == FULL:
            cells[k] = full_dv(x[k + 1]) - full_dv(x[k])
    s[1:] = np.cumsum(cells)
    return s, g


def solve_lambda(V, f, bracket=LAMBDA_BRACKET, grid=DEFAULT_GRID, tol=1e-8, trace=None):
    """Multiplier on the integral constraint.

    Symmetric problems return exactly 1/2. Otherwise the multiplier is the
    root in ``bracket`` of the total envelope integral over [0, 1] of the
    menu it induces, which makes prices vanish at both ends of the belief
    line.
    """
    V.require_smooth("solve_lambda")
    if is_symmetric(V, f):
        return 0.5
    log = trace if trace is not None else []

    def resid(lam):
        r = constraint_residual(V, f, lam, grid)
        log.append((lam, r))
        return r

    a, b = bracket
    ra, rb = resid(a), resid(b)
    if ra == 0:
        return a
    if rb == 0:
        return b
    if (ra < 0) == (rb < 0):
        raise UnsolvedMultiplierError(
            f"constraint residual has no sign change on [{a}, {b}]", trace=log)
    lam = bisect_scalar(resid, a, b, xtol=1e-13)
    r = resid(lam)
    if abs(r) > tol:
        raise UnsolvedMultiplierError(f"residual {r:.3e} exceeds {tol:.1e} at lambda={lam}", trace=log)
    return lam


def constraint_residual(V, f, lam, grid=DEFAULT_GRID):
    """Integral over [0, 1] of the envelope integrand for multiplier ``lam``."""
    th = full_thresholds(V, f, lam)
    x, breaks = menu_grid(th, f, grid)
    s, _ = _surplus_on_grid(x, th, V, f, breaks)
    return float(s[-1])


def is_symmetric(V, f, n=257, tol=1e-12):
    grid = np.linspace(0.0, 1.0, n)
    v_sym = np.max(np.abs(V(grid) - V(1.0 - grid))) <= tol * max(1.0, np.max(np.abs(V(grid))))
    f_sym = f.symmetric or np.max(np.abs(f.pdf(grid) - f.pdf(1.0 - grid))) <= tol
    return bool(v_sym and f_sym)


def full_thresholds(V, f, lam):
    th = solve_thresholds(f, lam)
    lo = exclusion_point(lam, V, f, "low", th)
    hi = exclusion_point(lam, V, f, "high", th)
    return ThresholdSet(th.lam, th.mu0, th.mu_minus, th.mu_plus, lo, hi)


def menu_grid(th, f, n=DEFAULT_GRID):
    breaks = _breaks(th, f)
    x = np.union1d(np.linspace(0.0, 1.0, n), breaks)
    # merge points closer than rounding noise
    keep = np.concatenate([[True], np.diff(x) > 1e-13])
    return x[keep], breaks


# --------------------------------------------------------------------------
# menu


@dataclass
class OptimalMenu:
    thresholds: ThresholdSet
    V: core.ValueFunction
    f: object
    mu: np.ndarray
    orientation: np.ndarray
    noise: np.ndarray
    posterior: np.ndarray
    price: np.ndarray
    surplus: np.ndarray
    gross_utility: np.ndarray
    revenue: float
    revenue_virtual: float
    constraint_residual: float
    breaks: np.ndarray
    assumption_reports: list = field(default_factory=list)

    @property
    def is_l(self):
        return self.mu >= self.thresholds.mu0

    def records(self):
        cols = ("mu", "orientation", "noise", "posterior", "price", "surplus", "gross_utility")
        arrs = [getattr(self, c) for c in cols]
        return [dict(zip(cols, row)) for row in zip(*arrs)]

    def contract_at(self, mu):
        """``(orientation, noise, posterior)`` of the contract for arbitrary beliefs."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        is_l, noise, nu = _contracts(mu, self.thresholds, self.V, self.f)
        return _orientation(is_l, noise), noise, nu

    def surplus_at(self, mu, nodes=10):
        """Buyer surplus at arbitrary beliefs (Gauss-Legendre from the nearest grid node)."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        th = self.thresholds
        out = np.empty_like(mu)
        gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
        for i, m in enumerate(mu):
            if m < th.excl_lo or m > th.excl_hi:
                out[i] = 0.0
                continue
            k = int(np.clip(np.searchsorted(self.mu, m, side="right") - 1, 0, self.mu.size - 1))
            a = self.mu[k]
            if m == a:
                out[i] = self.surplus[k]
                continue
            t = 0.5 * (m - a) * gl_x + 0.5 * (m + a)
            out[i] = self.surplus[k] + 0.5 * (m - a) * np.dot(gl_w, _envelope_integrand(t, th, self.V, self.f))
        return out

    def price_at(self, mu):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        is_l, noise, _ = _contracts(mu, self.thresholds, self.V, self.f)
        p = _dv(mu, is_l, noise, self.V) - self.surplus_at(mu)
        return np.where(noise <= 0.0, 0.0, p)

    def offered(self):
        """Arrays ``(is_l, noise, price)`` of every distinct contract on the grid."""
        return self.is_l.copy(), self.noise.copy(), self.price.copy()


def price_schedule(mu, is_l, noise, th, V, f, breaks):
    """Envelope surplus and price on a sorted grid.

    ``s(mu)`` integrates ``d(delta V)/d mu`` along the contract curve from 0;
    ``p = delta V - s``. Excluded buyers pay nothing and keep nothing.
    """
    s, _ = _surplus_on_grid(mu, th, V, f, breaks)
    dv = _dv(mu, is_l, noise, V)
    price = dv - s
    excluded = noise <= 0.0
    price = np.where(excluded, 0.0, price)
    s_out = np.where(excluded, 0.0, s)
    return price, s_out, float(s[-1])


def segment_breaks(mu, orientation, kinks=()):
    """Grid points that split the menu into smooth pieces.

    A row is a break when its contract is full or null and a neighbour's
    orientation differs; density kinks that fall on grid points are breaks
    too. Only the orientation column is needed, so a menu read back from
    disk yields the same breaks.
    """
    mu = np.asarray(mu, dtype=float)
    o = np.asarray(orientation, dtype=object)
    edge = np.zeros(mu.size, dtype=bool)
    edge[0] = edge[-1] = True
    change = o[1:] != o[:-1]
    boundary = (o == FULL) | (o == NULL)
    edge[:-1] |= change & boundary[:-1]
    edge[1:] |= change & boundary[1:]
    if len(kinks):
        edge |= np.isin(mu, np.asarray(kinks, dtype=float))
    return np.nonzero(edge)[0]


def revenue(mu, price, f, orientation):
    """Integral of ``price * density`` over the menu grid.

    Composite Simpson (irregular spacing) on each smooth piece between
    ``segment_breaks``.
    """
    mu = np.asarray(mu, dtype=float)
    y = np.asarray(price, dtype=float) * f.pdf(mu)
    idx = segment_breaks(mu, orientation, f.kinks)
    total = 0.0
    for a, b in zip(idx[:-1], idx[1:]):
        if b - a == 1:
            total += 0.5 * (y[a] + y[b]) * (mu[b] - mu[a])
        else:
            total += float(simpson(y[a:b + 1], x=mu[a:b + 1]))
    return total


def revenue_virtual(th, V, f, breaks, n=DEFAULT_GRID):
    """Revenue via the virtual-surplus form ``int dV f - (1 - F) dV_mu``.

    Independent of the price schedule: no nested integral, Simpson per
    smooth segment.
    """
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        if _segment_kind(a, b, th) == NULL or b <= a:
            continue
        m = max(8, int(np.ceil((b - a) * n)))
        x = np.linspace(a, b, m + 1)
        mids = 0.5 * (x[:-1] + x[1:])

        def integrand(t):
            is_l, noise, _ = _contracts(t, th, V, f)
            return (_dv(t, is_l, noise, V) * f.pdf(t)
                    - (1.0 - f.cdf(t)) * _dv_mu(t, is_l, noise, V))

        total += float(np.sum(_simpson_cells(x, integrand(x), integrand(mids))))
    return total


def build_menu(V, f, grid=DEFAULT_GRID, lam=None, bracket=LAMBDA_BRACKET,
               check=True, override=False):
    """Optimal menu for value function ``V`` and belief density ``f``."""
    V.require_smooth("build_menu")
    if lam is None:
        lam = solve_lambda(V, f, bracket=bracket, grid=grid)
    th = full_thresholds(V, f, lam)
    reports = []
    if check:
        from .assumptions import gate_reports
        reports = gate_reports(V, f, th)
        failed = [r for r in reports if not r.passed]
        if failed and not override:
            raise AssumptionRefusal(failed)
        if failed:
            warnings.warn(f"proceeding despite failed checks: {[r.condition for r in failed]}")
    x, breaks = menu_grid(th, f, grid)
    is_l, noise, nu = _contracts(x, th, V, f)
    price, surplus, resid = price_schedule(x, is_l, noise, th, V, f, breaks)
    dv = _dv(x, is_l, noise, V)
    orientation = _orientation(is_l, noise)
    return OptimalMenu(
        thresholds=th, V=V, f=f, mu=x,
        orientation=orientation,
        noise=noise, posterior=nu, price=price, surplus=surplus,
        gross_utility=V(x) + dv,
        revenue=revenue(x, price, f, orientation),
        revenue_virtual=revenue_virtual(th, V, f, breaks, grid),
        constraint_residual=resid,
        breaks=breaks,
        assumption_reports=reports,
    )


# --------------------------------------------------------------------------
# flat price benchmark


@dataclass(frozen=True)
class FlatPrice:
    price: float
    revenue: float
    served: tuple | None


def flat_price_optimum(V, f, scan=1024, hull_grid=4097):
    """Best single price for the fully revealing experiment.

    Type ``mu`` buys iff its gain ``coV(mu) - V(mu)`` is at least the price.
    The gain is concave, so the buyers form an interval found by bisection
    on each side of the peak.
    """
    co = concave_hull(V, hull_grid)
    gain = lambda m: np.asarray(co(m)) - np.asarray(V(m))
    xs = np.linspace(0.0, 1.0, hull_grid)
    gx = gain(xs)
    k = int(np.argmax(gx))
    top = float(gx[k])
    if top <= 1e-14:
        return FlatPrice(0.0, 0.0, None)
    peak = optimize.minimize_scalar(lambda m: -float(gain(m)),
                                    bounds=(xs[max(k - 1, 0)], xs[min(k + 1, xs.size - 1)]),
                                    method="bounded", options={"xatol": 1e-12}).x
    top = max(top, float(gain(peak)))

    def served(p):
        lo = 0.0 if gain(0.0) >= p else bisect_scalar(lambda m: float(gain(m)) - p, 0.0, peak)
        hi = 1.0 if gain(1.0) >= p else bisect_scalar(lambda m: float(gain(m)) - p, peak, 1.0)
        return lo, hi

    def rev(p):
        if p <= 0 or p > top:
            return 0.0
        lo, hi = served(p)
        return p * float(f.cdf(hi) - f.cdf(lo))

    ps = np.linspace(0.0, top, scan + 1)
    rs = np.array([rev(p) for p in ps])
    i = int(np.argmax(rs))
    if 0 < i < scan:
        res = optimize.minimize_scalar(lambda p: -rev(p), bracket=(ps[i - 1], ps[i], ps[i + 1]),
                                       method="golden", tol=1e-12)
        p_star = float(res.x) if -res.fun >= rs[i] else float(ps[i])
    else:
        p_star = float(ps[i])
    return FlatPrice(p_star, rev(p_star), served(p_star))


from .core import concave_hull  # noqa: E402  (re-export for callers of this module)
