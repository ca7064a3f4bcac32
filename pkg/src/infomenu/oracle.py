"""Finite screening oracle and global incentive checks.

A ``DiscreteInstance`` has finitely many belief types and a finite catalog
of experiments. For a fixed assignment of types to experiments the best
prices are shortest-path distances in the incentive-constraint graph (see
``kernels``). The oracle searches assignments exhaustively when the budget
allows and otherwise by seeded multi-start local search.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import core, kernels
from .core import FULL, NULL, REVEAL_H, REVEAL_L, GeneralExperiment, SimpleExperiment
from .errors import BudgetExceededError, DomainError

BUDGET = 2_000_000
RESTARTS = 64
IMPROVE_TOL = 1e-12


# --------------------------------------------------------------------------
# instances and catalogs


def _key(e):
    if isinstance(e, SimpleExperiment):
        e = e.canonical().to_general()
    return e.key()


def dedupe(catalog):
    """Drop experiments equal up to signal relabelling, keeping first occurrences."""
    seen, out = set(), []
    for e in catalog:
        k = _key(e)
        if k not in seen:
            seen.add(k)
            out.append(e)
    return out


def gain_matrix(mus, catalog, V):
    """``gains[i, k] = delta V`` of experiment ``k`` at belief ``mus[i]``."""
    mus = np.asarray(mus, dtype=float)
    out = np.empty((mus.size, len(catalog)))
    for k, e in enumerate(catalog):
        out[:, k] = core.delta_V(mus, e, V)
    return out


@dataclass(frozen=True)
class DiscreteInstance:
    """Belief types with weights, an experiment catalog and a value function."""

    mus: np.ndarray
    weights: np.ndarray
    catalog: tuple
    V: object
    gains: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mus = np.asarray(self.mus, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if mus.shape != w.shape or mus.ndim != 1:
            raise DomainError("types and weights must be 1-d arrays of equal length")
        core.check_belief(mus)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("weights must be non-negative and sum to 1")
        cat = tuple(self.catalog)
        keys = {_key(e) for e in cat}
        if _key(SimpleExperiment.null()) not in keys:
            raise DomainError("catalog must contain the null experiment")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "catalog", cat)
        object.__setattr__(self, "gains", np.ascontiguousarray(gain_matrix(mus, cat, self.V)))

    @property
    def null_index(self):
        k = _key(SimpleExperiment.null())
        return next(i for i, e in enumerate(self.catalog) if _key(e) == k)

    @property
    def full_index(self):
        """Index of the full experiment, or the null index when it is not offered."""
        k = _key(SimpleExperiment.full())
        return next((i for i, e in enumerate(self.catalog) if _key(e) == k), self.null_index)


def uniform_types(n, lo=0.05, hi=0.95):
    mus = np.linspace(lo, hi, n)
    return mus, np.full(n, 1.0 / n)


def simple_catalog(step=0.1, orientations=(REVEAL_H, REVEAL_L)):
    """Null, full and simple experiments with noise on a grid of ``step``."""
    m = int(round(1.0 / step))
    noises = [round(k * step, 12) for k in range(1, m) if k * step < 1.0]
    cat = [SimpleExperiment.null(), SimpleExperiment.full()]
    for o in orientations:
        cat += [SimpleExperiment(o, x) for x in noises]
    return dedupe(cat)


def _grid(step):
    m = int(round(1.0 / step))
    return [k / m for k in range(1, m)]


def three_signal_catalog(step=0.125):
    """Three-signal experiments whose signals land on a posterior grid at prior 1/2.

    Two families: both conclusive signals plus one interior signal (interior
    posterior and interior mass on the grid), and one conclusive signal plus
    two distinct interior signals (posteriors on the grid, split of the
    conclusive state's mass on the grid).
    """
    grid = _grid(step)
    out = []
    for r in grid:
        for m in grid:
            xh, xl = 2 * m * r, 2 * m * (1 - r)
            if xh < 1 and xl < 1:
                out.append(GeneralExperiment(np.array([[1 - xh, 0.0], [0.0, 1 - xl], [xh, xl]])))
    for r1, r2 in itertools.combinations(grid, 2):
        for s in grid:
            # conclusive l signal; h mass split s / 1 - s over the interior signals
            a1, a2 = s, 1 - s
            b1, b2 = a1 * (1 - r1) / r1, a2 * (1 - r2) / r2
            if b1 + b2 < 1:
                out.append(GeneralExperiment(np.array([[0.0, 1 - b1 - b2], [a1, b1], [a2, b2]])))
            # conclusive h signal; l mass split s / 1 - s
            b1, b2 = s, 1 - s
            a1, a2 = b1 * r1 / (1 - r1), b2 * r2 / (1 - r2)
            if a1 + a2 < 1:
                out.append(GeneralExperiment(np.array([[1 - a1 - a2, 0.0], [a1, b1], [a2, b2]])))
    return dedupe(out)


# --------------------------------------------------------------------------
# prices and search


@dataclass(frozen=True)
class PriceResult:
    prices: np.ndarray
    feasible: bool
    revenue: float


def best_prices_for_assignment(instance, assignment):
    """Revenue-maximal IC/IR prices for a fixed assignment.

    Infeasible assignments (a negative cycle, or a price forced below 0)
    return ``feasible=False`` with zero revenue.
    """
    a = np.asarray(assignment, dtype=np.int64)
    if a.shape != instance.mus.shape:
        raise DomainError("assignment must give one catalog index per type")
    if np.any(a < 0) or np.any(a >= len(instance.catalog)):
        raise DomainError("assignment index outside the catalog")
    p, ok = kernels.assignment_prices(instance.gains, a)
    p = np.asarray(p, dtype=float)
    if not ok:
        return PriceResult(np.zeros_like(p), False, 0.0)
    return PriceResult(p, True, float(p @ instance.weights))


@dataclass(frozen=True)
class DiscreteMechanism:
    """Assignment of types to catalog entries with per-type prices."""

    assignment: tuple
    prices: np.ndarray
    revenue: float
    mode: str
    certified: bool
    restarts: int = 0

    def experiments(self, instance):
        return [instance.catalog[k] for k in self.assignment]

    def as_dict(self, instance=None):
        out = {"assignment": list(map(int, self.assignment)),
               "prices": [float(p) for p in self.prices],
               "revenue": self.revenue, "mode": self.mode, "certified": self.certified,
               "restarts": self.restarts}
        if instance is not None:
            out["types"] = instance.mus.tolist()
            out["experiments"] = [np.asarray(e.likelihoods()).tolist() for e in self.experiments(instance)]
        return out


def _revenue(gains, weights, assign):
    p, ok = kernels.assignment_prices(gains, assign)
    return float(np.asarray(p) @ weights) if ok else -np.inf


def local_search(gains, weights, start):
    """Best-improvement single-type moves until no move gains more than ``IMPROVE_TOL``.

    Ties between moves go to the first ``(type, entry)`` pair in index order.
    """
    a = np.array(start, dtype=np.int64)
    cur = _revenue(gains, weights, a)
    if not np.isfinite(cur):
        raise DomainError("local search needs a feasible starting assignment")
    n = a.size
    while True:
        best, move = cur + IMPROVE_TOL, None
        for i in range(n):
            rev = np.asarray(kernels.move_revenues(gains, weights, a, i))
            k = int(np.argmax(rev))
            if rev[k] > best:
                best, move = float(rev[k]), (i, k)
        if move is None:
            return a, cur
        a[move[0]] = move[1]
        cur = best


def pair_polish(gains, weights, start):
    """Alternate single-move search with best moves of two types at once.

    Escapes the local optima where symmetric types must change together.
    """
    a, cur = local_search(gains, weights, start)
    n, K = gains.shape
    while True:
        best, move = cur + IMPROVE_TOL, None
        for i in range(n):
            for k1 in range(K):
                if k1 == a[i]:
                    continue
                b = a.copy()
                b[i] = k1
                for j in range(i + 1, n):
                    rev = np.asarray(kernels.move_revenues(gains, weights, b, j))
                    k2 = int(np.argmax(rev))
                    if rev[k2] > best:
                        best, move = float(rev[k2]), (i, k1, j, k2)
        if move is None:
            return a, cur
        a = a.copy()
        a[move[0]], a[move[2]] = move[1], move[3]
        a, cur = local_search(gains, weights, a)


def _repair(gains, weights, a, null, rng):
    """Send types to ``null`` in random order until the assignment is feasible."""
    order = rng.permutation(a.size)
    for i in order:
        if np.isfinite(_revenue(gains, weights, a)):
            return a
        a[i] = null
    return a


def _restart(args):
    gains, weights, r, seed, null, full = args
    n, K = gains.shape
    if r == 0:
        start = np.full(n, null, dtype=np.int64)
    elif r == 1:
        start = np.full(n, full, dtype=np.int64)
    else:
        rng = np.random.default_rng([seed, r])
        start = _repair(gains, weights, rng.integers(0, K, size=n).astype(np.int64), null, rng)
    a, rev = local_search(gains, weights, start)
    return rev, tuple(int(x) for x in a)


def _pick(results):
    """Max revenue; within ``IMPROVE_TOL`` the lexicographically smallest assignment."""
    top = max(r for r, _ in results)
    return min((a for r, a in results if r >= top - IMPROVE_TOL))


def brute_force_optimal(instance, budget=BUDGET, restarts=RESTARTS, seed=0,
                        fallback=True, workers=1, starts=(), polish=True):
    """Best mechanism over the catalog.

    Exhaustive (certified) when ``K ** n <= budget``. Otherwise seeded
    multi-start single-move local search, after which the winner is
    polished with two-type moves; the result is flagged as uncertified.
    ``starts`` adds extra starting assignments (for warm starts).
    """
    g, w = instance.gains, instance.weights
    n, K = g.shape
    if K ** n <= budget:
        a, _ = kernels.enumerate_best(g, w)
        pr = best_prices_for_assignment(instance, a)
        return DiscreteMechanism(tuple(int(x) for x in a), pr.prices, pr.revenue, "exhaustive", True)
    if not fallback:
        raise BudgetExceededError(f"{K}^{n} assignments exceed the budget of {budget}")
    jobs = [(g, w, r, seed, instance.null_index, instance.full_index) for r in range(restarts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_restart, jobs))
    else:
        results = [_restart(j) for j in jobs]
    for s in starts:
        a, rev = local_search(g, w, s)
        results.append((rev, tuple(int(x) for x in a)))
    a = _pick(results)
    if polish:
        a, _ = pair_polish(g, w, np.array(a, dtype=np.int64))
        a = tuple(int(x) for x in a)
    pr = best_prices_for_assignment(instance, a)
    return DiscreteMechanism(a, pr.prices, pr.revenue, "local-search", False, restarts)


def milp_optimal(instance, time_limit=120.0):
    """Exact optimum as a mixed-integer program (independent cross-check).

    Binary ``x[i, k]`` picks type ``i``'s entry, ``t_i >= 0`` is its price:
    maximise ``sum w_i t_i`` subject to IR and pairwise IC written linearly
    in ``x`` and ``t``.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    g, w = instance.gains, instance.weights
    n, K = g.shape
    nx = n * K
    c = np.concatenate([np.zeros(nx), -w])
    rows = n + n + n * (n - 1)
    A = lil_matrix((rows, nx + n))
    lo = np.full(rows, -np.inf)
    hi = np.zeros(rows)
    r = 0
    for i in range(n):
        A[r, i * K:(i + 1) * K] = 1.0
        lo[r] = hi[r] = 1.0
        r += 1
    for i in range(n):
        # t_i - sum_k g[i,k] x[i,k] <= 0
        A[r, i * K:(i + 1) * K] = -g[i]
        A[r, nx + i] = 1.0
        r += 1
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            # sum_k g[i,k] x[j,k] - t_j - sum_k g[i,k] x[i,k] + t_i <= 0
            A[r, j * K:(j + 1) * K] = g[i]
            A[r, i * K:(i + 1) * K] = -g[i]
            A[r, nx + j] = -1.0
            A[r, nx + i] = 1.0
            r += 1
    integrality = np.concatenate([np.ones(nx), np.zeros(n)])
    bounds = Bounds(np.zeros(nx + n), np.concatenate([np.ones(nx), np.full(n, np.inf)]))
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lo, hi), integrality=integrality,
               bounds=bounds, options={"time_limit": time_limit, "mip_rel_gap": 1e-9})
    if res.x is None:
        raise DomainError(f"mixed-integer solve failed: {res.message}")
    x = res.x[:nx].reshape(n, K)
    a = np.argmax(x, axis=1)
    pr = best_prices_for_assignment(instance, a)
    return DiscreteMechanism(tuple(int(v) for v in a), pr.prices, pr.revenue, "milp",
                             bool(res.status == 0))


# --------------------------------------------------------------------------
# incentive verification


@dataclass(frozen=True)
class ICReport:
    passed: bool
    worst: float
    kind: str
    mu: float | None
    contract: int | None
    n_types: int
    n_contracts: int
    tol: float

    def as_dict(self):
        return dict(self.__dict__)


def check_gains(mus, gains, own, prices, tol):
    """IC/IR audit given the full gain matrix ``gains[i, j]`` and own indices."""
    mus = np.asarray(mus, dtype=float)
    prices = np.asarray(prices, dtype=float)
    own = np.asarray(own, dtype=np.int64)
    n, m = gains.shape
    if n == 0 or m == 0:
        return ICReport(True, 0.0, "none", None, None, n, m, tol)
    rows = np.arange(n)
    s = gains[rows, own] - prices[own]
    dev = gains - prices[None, :] - s[:, None]
    j = np.argmax(dev, axis=1)
    ic = dev[rows, j]
    ir = -s
    i_ic, i_ir = int(np.argmax(ic)), int(np.argmax(ir))
    if ic[i_ic] >= ir[i_ir]:
        worst, kind, mu, c = float(ic[i_ic]), "IC", float(mus[i_ic]), int(j[i_ic])
    else:
        worst, kind, mu, c = float(ir[i_ir]), "IR", float(mus[i_ir]), None
    worst = max(worst, 0.0)
    return ICReport(worst <= tol, worst, kind if worst > 0 else "none", mu, c, n, m, tol)


def simple_gains(mus, is_l, noise, V, block=256):
    """Gain matrix for simple contracts given as arrays (``is_l``, ``noise``)."""
    mus = np.asarray(mus, dtype=float)
    is_l = np.asarray(is_l, dtype=bool)
    noise = np.asarray(noise, dtype=float)
    out = np.empty((mus.size, noise.size))
    for s in range(0, mus.size, block):
        m = mus[s:s + block, None]
        gl = core.simple_delta_v(m, "l", noise[None, :], V)
        gh = core.simple_delta_v(m, "h", noise[None, :], V)
        out[s:s + block] = np.where(is_l[None, :], gl, gh)
    return out


def verify_contract_arrays(mus, is_l, noise, price, V, own=None, tol=1e-7):
    """Audit simple contracts, type ``i`` holding contract ``own[i]`` (default ``i``)."""
    own = np.arange(len(mus)) if own is None else own
    return check_gains(mus, simple_gains(mus, is_l, noise, V), own, price, tol)


def verify_menu(menu, n=2001, tol=1e-7):
    """Global IC/IR of a solved menu on an ``n``-point type grid.

    The offered set is every contract on the menu grid plus the contract of
    every probe type; each probe type must weakly prefer its own.
    """
    mus = np.linspace(0.0, 1.0, n)
    th = menu.thresholds
    _, noise, _ = menu.contract_at(mus)
    is_l = mus >= th.mu0
    price = menu.price_at(mus)
    all_l = np.concatenate([is_l, menu.is_l])
    all_noise = np.concatenate([noise, menu.noise])
    all_price = np.concatenate([price, menu.price])
    gains = simple_gains(mus, all_l, all_noise, menu.V)
    return check_gains(mus, gains, np.arange(n), all_price, tol)


def verify_mechanism(instance, mechanism, tol=1e-10):
    """IC/IR audit of a discrete mechanism against its own contracts."""
    a = np.asarray(mechanism.assignment, dtype=np.int64)
    gains = instance.gains[:, a]
    return check_gains(instance.mus, gains, np.arange(a.size), mechanism.prices, tol)


def verify_ic_ir(obj, *args, **kwargs):
    """Dispatch to ``verify_menu`` or ``verify_mechanism``."""
    if isinstance(obj, DiscreteInstance):
        return verify_mechanism(obj, *args, **kwargs)
    return verify_menu(obj, *args, **kwargs)


# --------------------------------------------------------------------------
# spot checks of the structural properties


@dataclass(frozen=True)
class ExtensionReport:
    passed: bool
    base_revenue: float
    extended_revenue: float
    gain: float
    tol: float
    extra_experiments: int
    uses_three_signal: bool
    base: DiscreteMechanism
    extended: DiscreteMechanism

    def as_dict(self):
        return {"passed": self.passed, "base_revenue": self.base_revenue,
                "extended_revenue": self.extended_revenue, "gain": self.gain, "tol": self.tol,
                "extra_experiments": self.extra_experiments,
                "uses_three_signal": self.uses_three_signal}


def three_signal_no_improvement(instance, step=0.125, tol=1e-6, seed=0, restarts=RESTARTS,
                                exact=False):
    """Revenue gain from adding three-signal experiments to the catalog.

    The extended search is warm-started from the base optimum, so the gain
    is never negative. With ``exact=True`` both optima come from the
    mixed-integer formulation instead.
    """
    extra = [e for e in three_signal_catalog(step)
             if _key(e) not in {_key(x) for x in instance.catalog}]
    ext = DiscreteInstance(instance.mus, instance.weights, instance.catalog + tuple(extra), instance.V)
    if exact:
        base = milp_optimal(instance)
        big = milp_optimal(ext)
    else:
        base = brute_force_optimal(instance, seed=seed, restarts=restarts)
        big = brute_force_optimal(ext, seed=seed, restarts=restarts, starts=[base.assignment])
    gain = big.revenue - base.revenue
    uses = any(k >= len(instance.catalog) for k in big.assignment)
    return ExtensionReport(gain < tol, base.revenue, big.revenue, gain, tol, len(extra), uses, base, big)


@dataclass(frozen=True)
class PatternReport:
    applicable: bool
    passed: bool
    violations: list

    def as_dict(self):
        return {"applicable": self.applicable, "passed": self.passed, "violations": self.violations}


def _orientation(e):
    s = e.canonical() if isinstance(e, SimpleExperiment) else e.as_simple()
    return None if s is None else s.orientation


def revealed_state_pattern(mus, experiments, mu0):
    """Served types below ``mu0`` hold reveal-h (or full), above it reveal-l (or full)."""
    bad = []
    for mu, e in zip(np.asarray(mus, dtype=float), experiments):
        o = e if isinstance(e, str) else _orientation(e)
        if o is None:
            return PatternReport(False, False, [{"mu": float(mu), "reason": "non-simple experiment"}])
        if o in (NULL, FULL) or mu == mu0:
            continue
        want = REVEAL_H if mu < mu0 else REVEAL_L
        if o != want:
            bad.append({"mu": float(mu), "orientation": o, "expected": want})
    return PatternReport(True, not bad, bad)


def mechanism_pattern(instance, mechanism, mu0):
    return revealed_state_pattern(instance.mus, mechanism.experiments(instance), mu0)


def menu_pattern(menu):
    return revealed_state_pattern(menu.mu, list(menu.orientation), menu.thresholds.mu0)


def restricted_menu(menu, mus, weights):
    """Closed-form contracts and prices at the given types, with their revenue."""
    mus = np.asarray(mus, dtype=float)
    orient, noise, _ = menu.contract_at(mus)
    price = menu.price_at(mus)
    is_l = mus >= menu.thresholds.mu0
    return {"mus": mus, "orientation": orient, "noise": noise, "is_l": is_l, "price": price,
            "revenue": float(np.asarray(weights) @ price)}


def repriced_restriction(menu, instance):
    """Closed-form contracts at the instance's types, repriced optimally for the finite types.

    Each type keeps the contract the continuum menu assigns it; prices are
    then the best IC/IR prices for that assignment among the finite types.
    Returns ``(mechanism, closed_form_revenue)``.
    """
    r = restricted_menu(menu, instance.mus, instance.weights)
    cat = [SimpleExperiment.null(), SimpleExperiment.full()]
    assign = []
    for o, x in zip(r["orientation"], r["noise"]):
        e = SimpleExperiment(o, float(x)).canonical()
        if e.orientation == NULL:
            assign.append(0)
        elif e.orientation == FULL:
            assign.append(1)
        else:
            cat.append(e)
            assign.append(len(cat) - 1)
    inst = DiscreteInstance(instance.mus, instance.weights, tuple(cat), instance.V)
    pr = best_prices_for_assignment(inst, assign)
    mech = DiscreteMechanism(tuple(assign), pr.prices, pr.revenue, "restricted", pr.feasible)
    return mech, r["revenue"]
