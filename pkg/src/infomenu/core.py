"""Beliefs, value functions, experiments and the buyer's surplus.

A buyer holds a private belief ``mu`` that the seller's binary signal is
``h``. An experiment is a table of signal likelihoods ``(g(s|h), g(s|l))``;
observing signal ``s`` moves the belief to its Bayes posterior and the
buyer then earns ``V(posterior)``. Everything the solver integrates or
differentiates is built from the functions in this module.

All evaluators accept scalars or numpy arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, UnsupportedKindError

REVEAL_H = "reveal-h"
REVEAL_L = "reveal-l"
FULL = "full"
NULL = "null"
ORIENTATIONS = (REVEAL_H, REVEAL_L, FULL, NULL)


def check_belief(mu):
    """Raise ``DomainError`` unless every belief lies in [0, 1]."""
    arr = np.asarray(mu, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise DomainError(f"belief outside [0, 1]: {mu!r}")
    return mu


# --------------------------------------------------------------------------
# value functions


@dataclass(frozen=True)
class ValueFunction:
    """Buyer's value of holding belief ``mu``.

    ``kind`` is ``"smooth"`` (closed-form ``V, V', V''``) or ``"actions"``
    (upper envelope of a finite action table, piecewise linear).
    ``actions`` rows are ``(u(a, l), u(a, h))``.
    """

    kind: str
    value: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    actions: Optional[np.ndarray] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, mu):
        return self.value(mu)

    @property
    def smooth(self):
        return self.kind == "smooth"

    def require_smooth(self, what="this operation"):
        if not self.smooth:
            raise UnsupportedKindError(
                f"{what} needs a twice continuously differentiable V; "
                f"got an action-table value function ({self.name or 'actions'})"
            )

    def dV(self, mu):
        self.require_smooth("V'")
        return self.d1(mu)

    def d2V(self, mu):
        self.require_smooth("V''")
        return self.d2(mu)

    def best_action(self, mu):
        """Index of the payoff-maximising action (ties to the lower index)."""
        if self.actions is None:
            raise UnsupportedKindError("best_action needs an action-table value function")
        mu = np.asarray(mu, dtype=float)
        pay = _action_payoffs(self.actions, mu)
        return np.argmax(pay, axis=-1)

    def subgradient(self, mu, tol=1e-12):
        """Smallest and largest slope among maximising actions at ``mu``."""
        if self.actions is None:
            d = float(self.d1(mu))
            return d, d
        pay = _action_payoffs(self.actions, np.asarray(float(mu)))
        best = pay.max()
        active = np.nonzero(pay >= best - tol)[0]
        slopes = self.actions[active, 1] - self.actions[active, 0]
        return float(slopes.min()), float(slopes.max())


def _action_payoffs(actions, mu):
    mu = np.asarray(mu, dtype=float)[..., None]
    return mu * actions[:, 1] + (1.0 - mu) * actions[:, 0]


def quadratic_value(scale=1.0):
    """``V(mu) = scale * (mu**2 - mu)``: quadratic loss over actions in [0, 1]."""
    s = float(scale)
    return ValueFunction(
        kind="smooth",
        value=lambda m: s * (np.asarray(m, dtype=float) ** 2 - np.asarray(m, dtype=float)),
        d1=lambda m: s * (2.0 * np.asarray(m, dtype=float) - 1.0),
        d2=lambda m: s * 2.0 + 0.0 * np.asarray(m, dtype=float),
        name="quadratic",
        params={"scale": s},
    )


def polynomial_value(coefficients):
    """Polynomial ``V`` from ascending-power coefficients."""
    c = np.asarray(coefficients, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise DomainError("polynomial value needs a non-empty coefficient list")
    p = np.polynomial.Polynomial(c)
    p1, p2 = p.deriv(1), p.deriv(2)
    return ValueFunction(
        kind="smooth",
        value=lambda m: p(np.asarray(m, dtype=float)),
        d1=lambda m: p1(np.asarray(m, dtype=float)),
        d2=lambda m: p2(np.asarray(m, dtype=float)),
        name="polynomial",
        params={"coefficients": c.tolist()},
    )


def value_from_actions(table):
    """Value function of a finite decision problem.

    ``table`` rows are ``(u(a, l), u(a, h))``. ``V(mu)`` is the maximum over
    actions of ``mu * u(a, h) + (1 - mu) * u(a, l)``.
    """
    acts = np.asarray(table, dtype=float)
    if acts.size == 0:
        raise DomainError("action table is empty")
    acts = acts.reshape(-1, 2)

    def value(m):
        return _action_payoffs(acts, m).max(axis=-1)

    return ValueFunction(
        kind="actions",
        value=value,
        actions=acts,
        name="actions",
        params={"actions": acts.tolist()},
    )


def quadratic_loss_actions(n):
    """Action table for ``u(a, theta) = -(a - theta)**2`` on ``n`` equally spaced actions."""
    a = np.linspace(0.0, 1.0, n)
    return np.column_stack([-(a ** 2), -((1.0 - a) ** 2)])


def four_action_table():
    """Symmetric four-action problem with kinks at 1/6, 1/2 and 5/6."""
    return quadratic_loss_actions(4)


# --------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class SimpleExperiment:
    """Two-signal experiment with one conclusive signal.

    ``reveal-l`` with noise ``q``: state ``l`` emits the conclusive signal
    with probability ``q``; state ``h`` never does. ``reveal-h`` with noise
    ``p`` mirrors this. ``full`` and ``null`` carry no free parameter (their
    noise is stored as 1 and 0).

    Signal 0 is the conclusive signal and signal 1 the noisy one; for
    ``full`` they are the ``h`` and ``l`` signals, ``null`` has one signal.
    """

    orientation: str
    noise: float = 0.0

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise DomainError(f"unknown orientation {self.orientation!r}")
        if not (0.0 <= self.noise <= 1.0):
            raise DomainError(f"noise must lie in [0, 1], got {self.noise!r}")
        if self.orientation == FULL:
            object.__setattr__(self, "noise", 1.0)
        elif self.orientation == NULL:
            object.__setattr__(self, "noise", 0.0)

    @classmethod
    def full(cls):
        return cls(FULL, 1.0)

    @classmethod
    def null(cls):
        return cls(NULL, 0.0)

    def canonical(self):
        """Collapse boundary noise values onto ``full``/``null``."""
        if self.orientation in (REVEAL_H, REVEAL_L):
            if self.noise == 1.0:
                return SimpleExperiment.full()
            if self.noise == 0.0:
                return SimpleExperiment.null()
        return self

    def likelihoods(self):
        """Array of shape (signals, 2) with columns ``g(s|h), g(s|l)``."""
        x = self.noise
        if self.orientation == REVEAL_L:
            return np.array([[0.0, x], [1.0, 1.0 - x]])
        if self.orientation == REVEAL_H:
            return np.array([[x, 0.0], [1.0 - x, 1.0]])
        if self.orientation == FULL:
            return np.array([[1.0, 0.0], [0.0, 1.0]])
        return np.array([[1.0, 1.0]])

    def to_general(self):
        return GeneralExperiment(self.likelihoods())


@dataclass(frozen=True, eq=False)
class GeneralExperiment:
    """Finite experiment given by its likelihood table (signals x 2)."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float).reshape(-1, 2)
        if np.any(t < -1e-15) or np.any(t > 1 + 1e-15):
            raise DomainError("likelihoods must lie in [0, 1]")
        sums = t.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > 1e-12):
            raise DomainError(f"likelihood columns must sum to 1, got {sums.tolist()}")
        t = np.clip(t, 0.0, 1.0)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def likelihoods(self):
        return self.table

    def key(self, digits=12):
        """Relabelling-invariant key: merge same-ratio signals, drop empty ones, sort."""
        rows = {}
        for gh, gl in self.table:
            if gh == 0 and gl == 0:
                continue
            tot = gh + gl
            ratio = round(gh / tot, digits)
            a, b = rows.get(ratio, (0.0, 0.0))
            rows[ratio] = (a + gh, b + gl)
        return tuple(sorted((round(a, digits), round(b, digits)) for a, b in rows.values()))

    def canonical(self):
        return GeneralExperiment(np.array(self.key(), dtype=float).reshape(-1, 2))

    def __eq__(self, other):
        if not isinstance(other, GeneralExperiment):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def as_simple(self, tol=1e-12):
        """Return the equivalent ``SimpleExperiment`` or ``None``."""
        rows = [(gh, gl) for gh, gl in self.key() if gh + gl > 0]
        if len(rows) == 1:
            return SimpleExperiment.null()
        if len(rows) != 2:
            return None
        l_sig = [r for r in rows if r[0] <= tol]
        h_sig = [r for r in rows if r[1] <= tol]
        if l_sig and h_sig:
            return SimpleExperiment.full()
        if l_sig:
            return SimpleExperiment(REVEAL_L, float(l_sig[0][1])).canonical()
        if h_sig:
            return SimpleExperiment(REVEAL_H, float(h_sig[0][0])).canonical()
        return None


def _table(e):
    return np.asarray(e.likelihoods(), dtype=float)


@dataclass(frozen=True)
class MenuContract:
    """An experiment offered at a price (utility units)."""

    experiment: object
    price: float

    def __post_init__(self):
        if self.price < 0:
            raise DomainError(f"price must be non-negative, got {self.price!r}")


# --------------------------------------------------------------------------
# Bayes updating and values


def posterior(e, s, prior):
    """Posterior belief in ``h`` after signal ``s`` of experiment ``e``."""
    t = _table(e)
    if not 0 <= s < len(t):
        raise DomainError(f"signal index {s} out of range for {len(t)} signals")
    mu = np.asarray(prior, dtype=float)
    gh, gl = t[s]
    prob = gh * mu + gl * (1.0 - mu)
    if np.any(prob <= 0):
        raise DomainError(f"signal {s} has zero probability at prior {prior!r}")
    out = gh * mu / prob
    return out if out.ndim else float(out)


def signal_probabilities(e, prior):
    """Probability of each signal at ``prior`` (last axis indexes signals)."""
    t = _table(e)
    mu = np.asarray(prior, dtype=float)[..., None]
    return t[:, 0] * mu + t[:, 1] * (1.0 - mu)


def experiment_value(e, mu, V):
    """Expected value ``U(e, mu)`` of acting after observing ``e``."""
    t = _table(e)
    mu = np.asarray(mu, dtype=float)
    total = np.zeros_like(mu)
    for gh, gl in t:
        prob = gh * mu + gl * (1.0 - mu)
        safe = np.where(prob > 0, prob, 1.0)
        post = np.clip(gh * mu / safe, 0.0, 1.0)
        total = total + np.where(prob > 0, prob * V(post), 0.0)
    return total if total.ndim else float(total)


def _split(e):
    if isinstance(e, GeneralExperiment):
        s = e.as_simple()
        if s is None:
            return None, None
        e = s
    return e.orientation, e.noise


def simple_delta_v(mu, side, noise, V):
    """Surplus over ``V(mu)`` of a simple experiment, vectorised.

    ``side`` is ``"h"`` (conclusive signal reveals h, parameter ``p``) or
    ``"l"`` (reveals l, parameter ``q``). Arrays broadcast. ``noise`` 1 is
    full revelation and 0 is the null experiment on either side.
    """
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(noise, dtype=float)
    if side == "l":
        mass = 1.0 - x * (1.0 - mu)
        safe = np.where(mass > 0, mass, 1.0)
        nu = np.clip(mu / safe, 0.0, 1.0)
        out = x * (1.0 - mu) * V(0.0) + np.where(mass > 0, mass * V(nu), 0.0) - V(mu)
    else:
        mass = 1.0 - x * mu
        safe = np.where(mass > 0, mass, 1.0)
        nu = np.clip((1.0 - x) * mu / safe, 0.0, 1.0)
        out = x * mu * V(1.0) + np.where(mass > 0, mass * V(nu), 0.0) - V(mu)
    return out


def delta_V(mu, e, V):
    """Buyer surplus ``U(e, mu) - V(mu)`` from the two-branch closed form."""
    orientation, noise = _split(e)
    if orientation is None:
        out = np.asarray(experiment_value(e, mu, V)) - V(np.asarray(mu, dtype=float))
    elif orientation == NULL:
        out = np.zeros_like(np.asarray(mu, dtype=float))
    elif orientation == FULL:
        m = np.asarray(mu, dtype=float)
        out = m * V(1.0) + (1.0 - m) * V(0.0) - V(m)
    else:
        out = simple_delta_v(mu, "h" if orientation == REVEAL_H else "l", noise, V)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def simple_delta_v_mu(mu, side, noise, V):
    """Partial derivative in ``mu`` of ``simple_delta_v`` at fixed noise."""
    V.require_smooth("delta_V_mu")
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(noise, dtype=float)
    if side == "l":
        mass = 1.0 - x * (1.0 - mu)
        safe = np.where(mass > 0, mass, 1.0)
        nu = np.clip(mu / safe, 0.0, 1.0)
        live = x * (V(nu) - V(0.0)) + V.d1(nu) * (1.0 - x) / safe
        out = np.where(mass > 0, live, 0.0) - V.d1(mu)
        # q = 1: the noisy signal is the conclusive h signal
        out = np.where(x == 1.0, V(1.0) - V(0.0) - V.d1(mu), out)
    else:
        mass = 1.0 - x * mu
        safe = np.where(mass > 0, mass, 1.0)
        nu = np.clip((1.0 - x) * mu / safe, 0.0, 1.0)
        live = x * (V(1.0) - V(nu)) + V.d1(nu) * (1.0 - x) / safe
        out = np.where(mass > 0, live, 0.0) - V.d1(mu)
        out = np.where(x == 1.0, V(1.0) - V(0.0) - V.d1(mu), out)
    return np.where(x == 0.0, 0.0, out)


def delta_V_mu(mu, e, V):
    """``d/dmu`` of ``delta_V`` holding the experiment fixed."""
    V.require_smooth("delta_V_mu")
    orientation, noise = _split(e)
    m = np.asarray(mu, dtype=float)
    if orientation is None:
        t = _table(e)
        out = -V.d1(m)
        for gh, gl in t:
            prob = gh * m + gl * (1.0 - m)
            safe = np.where(prob > 0, prob, 1.0)
            post = gh * m / safe
            term = (gh - gl) * V(post) + V.d1(post) * gh * gl / safe
            out = out + np.where(prob > 0, term, 0.0)
    elif orientation == NULL:
        out = np.zeros_like(m)
    elif orientation == FULL:
        out = V(1.0) - V(0.0) - V.d1(m)
    else:
        out = simple_delta_v_mu(m, "h" if orientation == REVEAL_H else "l", noise, V)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# hull, contract choice, belief reduction


def concave_hull(V, grid_size=1025):
    """Upper concave hull of ``V`` on [0, 1], as a callable.

    Built from ``grid_size`` samples with a monotone-chain upper hull and
    evaluated by linear interpolation between hull vertices.
    """
    if grid_size < 3:
        raise DomainError("concave_hull needs at least 3 grid points")
    xs = np.linspace(0.0, 1.0, grid_size)
    ys = np.asarray(V(xs), dtype=float)
    hull = []
    for p in zip(xs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point if it lies on or below the chord
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) >= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    hx = np.array([h[0] for h in hull])
    hy = np.array([h[1] for h in hull])

    def co_v(mu):
        out = np.interp(np.asarray(mu, dtype=float), hx, hy)
        return out if np.ndim(out) else float(out)

    co_v.vertices = (hx, hy)
    return co_v


def buyer_best_contract(menu: Sequence[MenuContract], mu, V, tol=1e-12):
    """Index of the contract type ``mu`` buys, or ``None`` for the outside option.

    Net payoffs within ``tol`` of the best are ties; ties go to the lower
    price and then the lower index, the outside option counting as a
    price-0 contract listed after the menu.
    """
    nets = [experiment_value(c.experiment, mu, V) - c.price for c in menu]
    prices = [c.price for c in menu]
    nets.append(float(V(mu)))
    prices.append(0.0)
    best = max(nets)
    cands = [i for i, n in enumerate(nets) if n >= best - tol]
    choice = min(cands, key=lambda i: (prices[i], i))
    return None if choice == len(menu) else choice


def belief_of_type(joint, prior_x):
    """Reduce a joint signal model to buyer beliefs about the seller's signal.

    ``joint[x, s, b]`` is ``pi(t_S = s, t_B = b | x)`` with ``s`` in
    ``(h, l)``; ``prior_x`` is the state prior. Returns ``(beliefs,
    warnings)`` where ``beliefs`` maps buyer-signal index to
    ``Prob(t_S = h | t_B)`` and zero-probability buyer signals are left out
    and recorded in ``warnings``.
    """
    pi = np.asarray(joint, dtype=float)
    px = np.asarray(prior_x, dtype=float)
    if pi.ndim != 3 or pi.shape[1] != 2:
        raise DomainError("joint table must have shape (states, 2, buyer signals)")
    if abs(px.sum() - 1.0) > 1e-12:
        raise DomainError("state prior must sum to 1")
    mass = np.einsum("xsb,x->sb", pi, px)
    beliefs, notes = {}, []
    for b in range(mass.shape[1]):
        tot = mass[:, b].sum()
        if tot <= 0:
            notes.append({"buyer_signal": b, "reason": "zero probability"})
            warnings.warn(f"buyer signal {b} has zero probability; excluded")
            continue
        beliefs[b] = float(mass[0, b] / tot)
    return beliefs, notes
