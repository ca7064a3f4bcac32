"""Numerical checks of the regularity conditions behind the menu solver.

Every check returns an ``AssumptionReport``. Monotonicity is tested with
adjacent differences on a grid. A strict inequality is checked with a tiny
margin (``STRICT_MARGIN``) and tolerance 0, so a flat expression fails;
weak inequalities use the caller's tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .roots import bisect_scalar

GUARD = 1e-6
STRICT_MARGIN = 1e-13
DEFAULT_POINTS = 512


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of one check.

    ``violation`` is the worst offending magnitude (never negative) and
    ``location`` the point where it occurs, e.g. ``{"mu": .., "nu": ..}``.
    """

    condition: str
    passed: bool
    violation: float
    location: dict = field(default_factory=dict)
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "condition": self.condition,
            "passed": self.passed,
            "violation": self.violation,
            "location": dict(self.location),
            "tolerance": self.tolerance,
            "details": _plain(self.details),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _monotone(values, xs, direction, strict, tol):
    """Worst adjacent-difference violation of a monotonicity claim.

    Returns ``(violation, index)``; ``index`` is the left grid point of the
    offending pair.
    """
    d = np.diff(np.asarray(values, dtype=float))
    sign = 1.0 if direction == "increasing" else -1.0
    margin = STRICT_MARGIN if strict else 0.0
    bad = margin - sign * d
    k = int(np.argmax(bad))
    return max(0.0, float(bad[k])), k


def _shift(mu, lam, f):
    return lam + f.cdf(mu) - 1.0


# --------------------------------------------------------------------------
# likelihood-ratio condition


def mlr_ratios(mu, lam, f):
    """The two ratios whose monotonicity the likelihood-ratio check tests."""
    mu = np.asarray(mu, dtype=float)
    den = _shift(mu, lam, f)
    return f.pdf(mu) * (1.0 - mu) / den, f.pdf(mu) * mu / den


def check_mlr(f, lam_grid=(0.5,), mu_grid=None, tol=1e-9):
    """Both likelihood ratios decreasing on their side of ``F^-1(1 - lam)``."""
    if mu_grid is None:
        mu_grid = np.linspace(0.0, 1.0, DEFAULT_POINTS + 2)[1:-1]
    mu_grid = np.asarray(mu_grid, dtype=float)
    worst, where, skipped = 0.0, {}, []
    for lam in np.atleast_1d(lam_grid):
        lam = float(lam)
        mu0 = float(f.ppf(1.0 - lam))
        near = np.abs(mu_grid - mu0) <= GUARD
        if np.any(near):
            skipped.extend(float(m) for m in mu_grid[near])
        for side, sel in (("high", mu_grid > mu0 + GUARD), ("low", mu_grid < mu0 - GUARD)):
            xs = mu_grid[sel]
            if xs.size < 2:
                continue
            hi_ratio, lo_ratio = mlr_ratios(xs, lam, f)
            vals = hi_ratio if side == "high" else lo_ratio
            v, k = _monotone(vals, xs, "decreasing", False, tol)
            if v > worst:
                worst = v
                where = {"lambda": lam, "mu": float(xs[k]), "mu_next": float(xs[k + 1]), "side": side}
    return AssumptionReport("likelihood-ratio", worst <= tol, worst, where, tol,
                            {"guard_skipped": skipped})


# --------------------------------------------------------------------------
# supermodularity and monotone virtual value


def supermod_expressions(nu, V, f, mu_lo, mu_hi, lam_lo, lam_hi):
    """The four expressions whose monotonicity in ``nu`` the check tests.

    Keys 1 and 3 must be increasing, 2 and 4 decreasing.
    """
    nu = np.asarray(nu, dtype=float)
    a = V(nu) + V.dV(nu) * (1.0 - nu)
    b = V(nu) - V.dV(nu) * nu
    c = V.d2V(nu)
    c3 = 1.0 + f.pdf(mu_lo) * mu_lo / _shift(mu_lo, lam_hi, f)
    c4 = 1.0 - f.pdf(mu_hi) * (1.0 - mu_hi) / _shift(mu_hi, lam_lo, f)
    return {
        1: a + c * nu * (1.0 - nu) ** 2 / (1.0 - mu_hi),
        2: b + c * nu ** 2 * (1.0 - nu) / mu_lo,
        3: float(c3) * a + c * nu * (1.0 - nu) ** 2 / (1.0 - mu_lo),
        4: float(c4) * b + c * nu ** 2 * (1.0 - nu) / mu_hi,
    }


def check_supermod_virtual(V, f, mu_lo, mu_hi, lam_lo, lam_hi, nu_grid=None, n=DEFAULT_POINTS):
    """Strict monotonicity of the supermodularity and virtual-value expressions.

    By default the increasing expressions are scanned on ``(0, mu_lo]`` and
    the decreasing ones on ``[mu_hi, 1)``, the posterior ranges that the
    reveal-h and reveal-l contracts can reach. A caller-supplied
    ``nu_grid`` is used for all four.
    """
    V.require_smooth("check_supermod_virtual")
    if not (0 < mu_lo < mu_hi < 1):
        raise DomainError("need 0 < mu_lo < mu_hi < 1")
    if not (0 < lam_lo <= lam_hi < 1):
        raise DomainError("need 0 < lam_lo <= lam_hi < 1")
    if nu_grid is not None:
        grids = {k: np.asarray(nu_grid, dtype=float) for k in (1, 2, 3, 4)}
    else:
        low = np.linspace(0.0, mu_lo, n + 1)[1:]
        high = np.linspace(mu_hi, 1.0, n + 1)[:-1]
        grids = {1: low, 3: low, 2: high, 4: high}
    worst, where, per = 0.0, {}, {}
    for k, direction in ((1, "increasing"), (2, "decreasing"), (3, "increasing"), (4, "decreasing")):
        xs = grids[k]
        vals = supermod_expressions(xs, V, f, mu_lo, mu_hi, lam_lo, lam_hi)[k]
        v, i = _monotone(vals, xs, direction, True, 0.0)
        per[f"condition_{k}"] = {"direction": direction, "violation": v, "passed": v <= 0.0,
                                 "nu": float(xs[i]), "nu_next": float(xs[i + 1])}
        if v > worst:
            worst = v
            where = {"condition": k, "nu": float(xs[i]), "nu_next": float(xs[i + 1]),
                     "mu_lo": mu_lo, "mu_hi": mu_hi, "lam_lo": lam_lo, "lam_hi": lam_hi}
    return AssumptionReport("supermodular-virtual-value", worst <= 0.0, worst, where, 0.0, per)


# --------------------------------------------------------------------------
# single-crossing differences


def scd_low(mu, nu, V):
    """Cross derivative of the surplus in belief and ``p`` (reveal-h side)."""
    nu = np.asarray(nu, dtype=float)
    return (V(1.0) - V(nu) - V.dV(nu) * (1.0 - nu)
            - V.d2V(nu) * nu * (1.0 - nu) ** 2 / (1.0 - np.asarray(mu, dtype=float)))


def scd_high(mu, nu, V):
    """Cross derivative of the surplus in belief and ``q`` (reveal-l side)."""
    nu = np.asarray(nu, dtype=float)
    return (V(nu) - V(0.0) - V.dV(nu) * nu
            + V.d2V(nu) * nu ** 2 * (1.0 - nu) / np.asarray(mu, dtype=float))


def scd_signs(V, f, lam, mu0=None, thresholds=None, n=64, pairs=None):
    """Signs of the single-crossing differences on the contract domain.

    The low-side cross derivative must be positive for beliefs below
    ``mu_minus`` and posteriors in ``(0, mu)``; the high-side one negative
    for beliefs above ``mu_plus`` and posteriors in ``(mu, 1)``. Both must
    vanish at their stated zero points (``nu = 1`` and ``nu = 0``).
    ``pairs`` may override the two sample sets as ``(low_pairs, high_pairs)``
    of ``(mu, nu)`` arrays. The details also count sign failures on the
    unrestricted ``(0, 1)^2`` grid for information.
    """
    V.require_smooth("scd_signs")
    from .solver import solve_thresholds
    th = thresholds or solve_thresholds(f, lam)
    mu0 = th.mu0 if mu0 is None else mu0
    if pairs is None:
        s = (np.arange(n) + 0.5) / n
        lo_mu = th.mu_minus * s
        hi_mu = th.mu_plus + (1.0 - th.mu_plus) * s
        lm, ls = np.meshgrid(lo_mu, s, indexing="ij")
        hm, hs = np.meshgrid(hi_mu, s, indexing="ij")
        low = (lm.ravel(), (lm * ls).ravel())
        high = (hm.ravel(), (hm + hs * (1.0 - hm)).ravel())
    else:
        low, high = pairs
    v1 = scd_low(low[0], low[1], V)
    v2 = scd_high(high[0], high[1], V)
    bad1 = STRICT_MARGIN - v1
    bad2 = v2 + STRICT_MARGIN
    k1, k2 = int(np.argmax(bad1)), int(np.argmax(bad2))
    zero1 = float(np.max(np.abs(scd_low(low[0], np.ones_like(low[0]), V))))
    zero2 = float(np.max(np.abs(scd_high(high[0], np.zeros_like(high[0]), V))))
    cands = [
        (max(0.0, float(bad1[k1])), {"expression": "low", "mu": float(low[0][k1]), "nu": float(low[1][k1])}),
        (max(0.0, float(bad2[k2])), {"expression": "high", "mu": float(high[0][k2]), "nu": float(high[1][k2])}),
        (zero1, {"expression": "low zero at nu=1"}),
        (zero2, {"expression": "high zero at nu=0"}),
    ]
    worst, where = max(cands, key=lambda c: c[0])
    g = (np.arange(n) + 0.5) / n
    gm, gn = np.meshgrid(g, g, indexing="ij")
    free_low = int(np.sum(scd_low(gm, gn, V)[gm < mu0] <= 0))
    free_high = int(np.sum(scd_high(gm, gn, V)[gm > mu0] >= 0))
    details = {"low_min": float(np.min(v1)), "high_max": float(np.max(v2)),
               "zero_low": zero1, "zero_high": zero2, "mu0": mu0,
               "unrestricted_failures": {"low": free_low, "high": free_high}}
    return AssumptionReport("single-crossing", worst <= 0.0, worst, where, 0.0, details)


# --------------------------------------------------------------------------
# H functions


def h_functions(mu, nu, lam, V, f):
    """Values of the two first-order functions of an interior posterior.

    The shift ``lam + F(mu) - 1`` is used throughout both coefficients.
    """
    nu = np.asarray(nu, dtype=float)
    s = float(_shift(mu, lam, f))
    fm = float(f.pdf(mu))
    h1 = (fm * mu + s) * (V(nu) + V.dV(nu) * (1.0 - nu)) + s * V.d2V(nu) * nu * (1.0 - nu) ** 2 / (1.0 - mu)
    h2 = (fm * (1.0 - mu) - s) * (V(nu) - V.dV(nu) * nu) - s * V.d2V(nu) * nu ** 2 * (1.0 - nu) / mu
    return h1, h2


def _region(mu, mu_lo, mu0, mu_hi):
    if mu < mu_lo:
        return "below-lower"
    if mu <= mu0:
        return "lower-to-switch"
    if mu <= mu_hi:
        return "switch-to-upper"
    return "above-upper"


def h_scan(mu, lam, V, f, n=DEFAULT_POINTS, mu_lo=None, mu_hi=None):
    """Strict monotonicity of both H functions in ``nu`` on ``(0, 1)``.

    Each function passes if it is strictly increasing or strictly
    decreasing. At the switch point ``F^-1(1 - lam)`` the shift vanishes and
    the scan is skipped.
    """
    V.require_smooth("h_scan")
    mu0 = float(f.ppf(1.0 - lam))
    if mu_lo is None or mu_hi is None:
        from .solver import solve_thresholds
        th = solve_thresholds(f, lam)
        mu_lo = th.mu_minus if mu_lo is None else mu_lo
        mu_hi = th.mu_plus if mu_hi is None else mu_hi
    region = _region(mu, mu_lo, mu0, mu_hi)
    if abs(mu - mu0) <= GUARD:
        return AssumptionReport("h-monotone", True, 0.0, {"mu": mu, "lambda": lam},
                                0.0, {"skipped": "guard band at switch point", "region": region})
    nu = np.linspace(0.0, 1.0, n + 2)[1:-1]
    h1, h2 = h_functions(mu, nu, lam, V, f)
    details = {"region": region}
    worst, where = 0.0, {}
    for name, vals in (("H1", h1), ("H2", h2)):
        vi, ki = _monotone(vals, nu, "increasing", True, 0.0)
        vd, kd = _monotone(vals, nu, "decreasing", True, 0.0)
        if vi <= vd:
            v, k, direction = vi, ki, "increasing"
        else:
            v, k, direction = vd, kd, "decreasing"
        details[name] = {"direction": direction, "violation": v, "nu": float(nu[k])}
        if v > worst:
            worst = v
            where = {"function": name, "mu": mu, "lambda": lam, "nu": float(nu[k]),
                     "nu_next": float(nu[k + 1])}
    return AssumptionReport("h-monotone", worst <= 0.0, worst, where, 0.0, details)


# --------------------------------------------------------------------------
# exclusion bound


def check_exclusion_bound(V, f, lam_lo, lam_hi, profit):
    """Full-revelation gain at the extreme thresholds must stay below ``profit``.

    The upper point solves ``f(mu)(1 - mu) = lam_lo + F(mu) - 1`` above
    ``F^-1(1 - lam_lo)``; the lower one solves ``f(mu) mu = -(lam_hi + F(mu) - 1)``
    below ``F^-1(1 - lam_hi)``, the sign that makes it meet ``mu_minus``
    when ``lam_lo = lam_hi``. The same equation with ``+`` on the right has
    no root below the switch point; whether it has one is recorded.
    """
    from .solver import minus_equation, plus_equation
    up0 = float(f.ppf(1.0 - lam_lo))
    dn0 = float(f.ppf(1.0 - lam_hi))
    try:
        mu_up = bisect_scalar(lambda m: float(plus_equation(m, lam_lo, f)), up0 + GUARD, 1.0, xtol=1e-14)
        mu_dn = bisect_scalar(lambda m: float(minus_equation(m, lam_hi, f)), 0.0, dn0 - GUARD, xtol=1e-14)
    except ValueError:
        return AssumptionReport("exclusion-bound", False, float("nan"), {}, 0.0,
                                {"inconclusive": "no root in (0, 1)"})
    plus_sign = lambda m: float(f.pdf(m) * m - _shift(m, lam_hi, f))
    xs = np.linspace(GUARD, dn0 - GUARD, 257)
    plus_has_root = bool(np.any(np.diff(np.sign([plus_sign(x) for x in xs])) != 0))
    gain = lambda m: m * V(1.0) + (1.0 - m) * V(0.0) - V(m)
    g_up, g_dn = float(gain(mu_up)), float(gain(mu_dn))
    top = max(g_up, g_dn)
    violation = max(0.0, top - profit + STRICT_MARGIN)
    where = {"mu": mu_up if g_up >= g_dn else mu_dn, "lam_lo": lam_lo, "lam_hi": lam_hi}
    details = {"mu_upper": mu_up, "mu_lower": mu_dn, "gain_upper": g_up, "gain_lower": g_dn,
               "profit": profit, "plus_sign_lower_equation_has_root": plus_has_root}
    return AssumptionReport("exclusion-bound", violation <= 0.0, violation, where, 0.0, details)


def gate_reports(V, f, th):
    """Checks ``build_menu`` requires before it solves.

    The supermodularity bounds are taken at the solved thresholds
    (``mu_lo = mu_minus``, ``mu_hi = mu_plus``) and the multiplier range
    collapses to the solved ``lam``.
    """
    return [
        check_mlr(f, [th.lam]),
        check_supermod_virtual(V, f, th.mu_minus, th.mu_plus, th.lam, th.lam),
    ]
