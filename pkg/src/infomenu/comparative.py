"""Comparative statics in the dispersion of buyer beliefs.

``rotation_density`` moves mass from the middle of each half of [0, 1]
towards the ends, pivoting at ``mu_minus`` of the base density and its
mirror image. Larger ``t`` gives a more dispersed density; the checks below
confirm that the optimal menu then serves more buyers, sells more
informative experiments and leaves every buyer weakly better off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import solver
from .core import FULL, NULL, REVEAL_H, REVEAL_L, SimpleExperiment
from .densities import BeliefDensity, PiecewiseLinear, _numeric_ppf
from .errors import DomainError, InfeasibleFamilyError
from .roots import first_sign_change

SLACK = 1e-8


# --------------------------------------------------------------------------
# rotation family


def _tilt(c):
    """Odd piecewise-linear tilt about ``c`` on [0, 1/2], mirrored onto [1/2, 1]."""
    w = min(c, 0.5 - c)
    knots = sorted({0.0, c - w, c, c + w, 0.5, 1 - c - w, 1 - c, 1 - c + w, 1.0})

    def r(m):
        m = np.asarray(m, dtype=float)
        h = np.minimum(m, 1.0 - m)
        return np.where(np.abs(h - c) <= w, (c - h) / w, 0.0)

    xs = np.array(knots)
    return PiecewiseLinear(xs, r(xs)), tuple(k for k in knots if 0 < k < 1)


def max_rotation(base, c=None, n=4097):
    """Largest ``t`` keeping ``base + t * tilt`` non-negative."""
    c = _pivot(base) if c is None else c
    r, _ = _tilt(c)
    xs = np.linspace(0.0, 1.0, n)
    xs = np.union1d(xs, r.xs)
    rv = r(xs)
    neg = rv < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(base.pdf(xs[neg]) / -rv[neg]))


def _pivot(base):
    return solver.solve_thresholds(base, 0.5).mu_minus


def rotation_density(base, t, c=None):
    """``base + t * r`` with ``r`` odd about ``c`` and ``1 - c`` and mass-neutral per half.

    ``c`` defaults to ``mu_minus`` of the base density at multiplier 1/2.
    """
    if not base.symmetric:
        raise DomainError("rotation needs a symmetric base density")
    t = float(t)
    c = _pivot(base) if c is None else float(c)
    if not 0 < c < 0.5:
        raise DomainError("pivot must lie in (0, 1/2)")
    t_max = max_rotation(base, c)
    if t < 0 or t > t_max + 1e-12:
        raise InfeasibleFamilyError(t, t_max)
    if t == 0:
        return base
    r, knots = _tilt(c)

    def pdf(m):
        return base.pdf(m) + t * r(m)

    def cdf(m):
        return np.clip(base.cdf(m) + t * r.integral(m), 0.0, 1.0)

    kinks = tuple(sorted(set(base.kinks) | set(knots)))
    return BeliefDensity(pdf, cdf, _numeric_ppf(cdf), symmetric=True,
                         name=f"rotation({base.name})", params={"t": t, "pivot": c}, kinks=kinks)


@dataclass
class DispersionFamily:
    """Rotations of ``base`` indexed by ``t`` in ``[0, t_max]``."""

    base: BeliefDensity
    pivot: float = None
    t_max: float = field(init=False)

    def __post_init__(self):
        if self.pivot is None:
            self.pivot = _pivot(self.base)
        self.t_max = max_rotation(self.base, self.pivot)

    def member(self, t):
        return rotation_density(self.base, t, self.pivot)


# --------------------------------------------------------------------------
# dispersive order


@dataclass(frozen=True)
class DispersionReport:
    more_dispersed: bool
    cutoff: float
    worst: float
    location: float | None
    density_cutoff: float | None

    def __bool__(self):
        return self.more_dispersed


def density_cutoff(g, n=512):
    """Root of ``g(mu) + G(mu) - 1/2`` on (0, 1/2), or ``None`` if there is none."""
    fn = lambda m: g.pdf(m) + g.cdf(m) - 0.5
    br = first_sign_change(fn, 1e-9, 0.5 - 1e-9, n)
    if br is None:
        return None
    from .roots import bisect_scalar
    return bisect_scalar(lambda m: float(fn(m)), *br, xtol=1e-14)


def dispersion_order(f, g, n=512, tol=1e-10):
    """Compare ``f(mu) / (1/2 - F(mu))`` with the same ratio for ``g`` below ``g``'s cutoff.

    The cutoff solves ``g(mu) mu + G(mu) - 1/2 = 0``, the full-revelation
    threshold of ``g`` at multiplier 1/2. The root of ``g + G - 1/2`` is
    recorded as ``density_cutoff`` (``None`` when it does not exist).
    """
    cut = solver.solve_thresholds(g, 0.5).mu_minus
    xs = np.linspace(0.0, cut, n + 1)[1:-1]
    lhs = f.pdf(xs) / (0.5 - f.cdf(xs))
    rhs = g.pdf(xs) / (0.5 - g.cdf(xs))
    gap = rhs - lhs
    k = int(np.argmax(gap))
    worst = max(0.0, float(gap[k]))
    return DispersionReport(worst <= tol, cut, worst, float(xs[k]) if worst > 0 else None,
                            density_cutoff(g))


def is_more_dispersed(f, g, n=512, tol=1e-10):
    """True when ``f`` is at least as dispersed as ``g``."""
    return dispersion_order(f, g, n, tol).more_dispersed


# --------------------------------------------------------------------------
# Blackwell comparison of simple experiments


def blackwell_compare(e1, e2):
    """``"dominates"``, ``"dominated"``, ``"equal"`` or ``"incomparable"``."""
    a, b = e1.canonical(), e2.canonical()
    if a.orientation == b.orientation and a.noise == b.noise:
        return "equal"
    if a.orientation == FULL or b.orientation == NULL:
        return "dominates"
    if b.orientation == FULL or a.orientation == NULL:
        return "dominated"
    if a.orientation != b.orientation:
        return "incomparable"
    return "dominates" if a.noise > b.noise else "dominated"


def _experiment(orientation, noise):
    if orientation in (FULL, NULL):
        return SimpleExperiment(orientation)
    return SimpleExperiment(orientation, float(noise))


# --------------------------------------------------------------------------
# monotonicity reports


@dataclass
class SweepResult:
    ts: list
    menus: dict
    failed: dict = field(default_factory=dict)


def solve_family(family, ts, V, grid=solver.DEFAULT_GRID, override=False):
    """Menus for each ``t``; solver errors are recorded per member."""
    menus, failed = {}, {}
    for t in sorted(set(float(x) for x in ts)):
        try:
            menus[t] = solver.build_menu(V, family.member(t), grid=grid, override=override)
        except InfeasibleFamilyError:
            raise
        except Exception as exc:  # noqa: BLE001 - reported per member
            failed[t] = f"{type(exc).__name__}: {exc}"
    return SweepResult(sorted(menus), menus, failed)


@dataclass(frozen=True)
class MonotoneReport:
    name: str
    passed: bool
    worst: float
    violations: list

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "worst": self.worst,
                "violations": self.violations}


def _pairs(ts):
    return list(zip(ts[:-1], ts[1:]))


def thresholds_monotone(sweep, slack=SLACK):
    """``mu_minus`` and the low exclusion point fall, ``mu_plus`` and the high one rise."""
    bad, worst = [], 0.0
    for t0, t1 in _pairs(sweep.ts):
        a, b = sweep.menus[t0].thresholds, sweep.menus[t1].thresholds
        for name, d in (("mu_minus", b.mu_minus - a.mu_minus),
                        ("exclusion_low", b.excl_lo - a.excl_lo),
                        ("mu_plus", a.mu_plus - b.mu_plus),
                        ("exclusion_high", a.excl_hi - b.excl_hi)):
            worst = max(worst, d)
            if d > slack:
                bad.append({"t": t0, "t_next": t1, "quantity": name, "excess": d})
    for t, msg in sweep.failed.items():
        bad.append({"t": t, "error": msg})
    return MonotoneReport("thresholds", not bad, max(worst, 0.0), bad)


def blackwell_monotone(sweep, probes, slack=SLACK):
    """At each probe the contract under larger ``t`` Blackwell-dominates the one under smaller ``t``."""
    probes = np.asarray(probes, dtype=float)
    bad, worst = [], 0.0
    contracts = {t: sweep.menus[t].contract_at(probes) for t in sweep.ts}
    for t0, t1 in _pairs(sweep.ts):
        o0, n0, _ = contracts[t0]
        o1, n1, _ = contracts[t1]
        for k, mu in enumerate(probes):
            e0, e1 = _experiment(o0[k], n0[k]), _experiment(o1[k], n1[k])
            rel = blackwell_compare(e1, e0)
            if rel in ("dominates", "equal"):
                continue
            if rel == "dominated" and e0.orientation == e1.orientation and n0[k] - n1[k] <= slack:
                continue
            d = float(n0[k] - n1[k]) if e0.orientation == e1.orientation else np.inf
            worst = max(worst, d)
            bad.append({"t": t0, "t_next": t1, "mu": float(mu), "relation": rel,
                        "before": [o0[k], float(n0[k])], "after": [o1[k], float(n1[k])]})
    for t, msg in sweep.failed.items():
        bad.append({"t": t, "error": msg})
    return MonotoneReport("blackwell", not bad, worst, bad)


def surplus_monotone(sweep, probes, slack=SLACK):
    """Buyer surplus at each probe is nondecreasing in ``t``."""
    probes = np.asarray(probes, dtype=float)
    s = {t: sweep.menus[t].surplus_at(probes) for t in sweep.ts}
    bad, worst = [], 0.0
    for t0, t1 in _pairs(sweep.ts):
        d = s[t0] - s[t1]
        worst = max(worst, float(np.max(d, initial=0.0)))
        for k in np.nonzero(d > slack)[0]:
            bad.append({"t": t0, "t_next": t1, "mu": float(probes[k]), "drop": float(d[k])})
    for t, msg in sweep.failed.items():
        bad.append({"t": t, "error": msg})
    return MonotoneReport("surplus", not bad, worst, bad)


def dispersion_chain(family, ts):
    """Dispersive order between consecutive members."""
    ts = sorted(set(float(x) for x in ts))
    out = []
    for t0, t1 in _pairs(ts):
        r = dispersion_order(family.member(t1), family.member(t0))
        out.append({"t": t0, "t_next": t1, "more_dispersed": r.more_dispersed, "worst": r.worst,
                    "density_cutoff": r.density_cutoff})
    return MonotoneReport("dispersion", all(o["more_dispersed"] for o in out),
                          max([o["worst"] for o in out], default=0.0),
                          [o for o in out if not o["more_dispersed"]]), out
