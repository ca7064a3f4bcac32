"""Pure numpy versions of the screening kernels.

``gains[i, k]`` is the surplus type ``i`` gets from catalog entry ``k``.
For a fixed assignment the revenue-maximal IC/IR prices are shortest-path
distances from a virtual outside-option root: ``d_i`` starts at type ``i``'s
own gain and is relaxed along arcs ``j -> i`` of weight
``gains[i, a_i] - gains[i, a_j]``.
"""

import numpy as np

NEG_TOL = 1e-12
RELAX_EPS = 1e-14


def assignment_prices(gains, assign):
    """Return ``(prices, feasible)`` for one assignment."""
    prices, ok = _batch_prices(gains, np.asarray(assign, dtype=np.int64)[None, :])
    return prices[0], bool(ok[0])


def _batch_prices(gains, assigns):
    """Shortest-path prices for a batch of assignments, shape ``(B, n)``."""
    B, n = assigns.shape
    rows = np.arange(n)
    # own[b, i] = gains[i, a_bi]; cross[b, i, j] = gains[i, a_bj]
    own = gains[rows[None, :], assigns]
    cross = gains[rows[None, :, None], assigns[:, None, :]]
    w = own[:, :, None] - cross
    d = own.copy()
    changed = np.ones(B, dtype=bool)
    for _ in range(n + 1):
        cand = np.min(d[:, None, :] + w, axis=2)
        new = np.minimum(d, cand)
        changed = np.any(new < d - RELAX_EPS, axis=1)
        d = new
        if not changed.any():
            break
    ok = ~changed & np.all(d >= -NEG_TOL, axis=1)
    # infeasible assignments report zero prices
    return np.where(ok[:, None], np.maximum(d, 0.0), 0.0), ok


def move_revenues(gains, weights, assign, i):
    """Revenue of every single move of type ``i``; ``-inf`` where infeasible."""
    K = gains.shape[1]
    batch = np.repeat(np.asarray(assign, dtype=np.int64)[None, :], K, axis=0)
    batch[:, i] = np.arange(K)
    prices, ok = _batch_prices(gains, batch)
    rev = prices @ weights
    return np.where(ok, rev, -np.inf)


def enumerate_best(gains, weights, chunk=4096):
    """Exhaustive search in lexicographic order; first strict maximum wins."""
    n, K = gains.shape
    total = K ** n
    best_rev, best_idx = -np.inf, -1
    powers = K ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        assigns = (idx[:, None] // powers[None, :]) % K
        prices, ok = _batch_prices(gains, assigns)
        rev = np.where(ok, prices @ weights, -np.inf)
        # same outcome as a sequential scan that replaces only on strict gain
        pos = 0
        while True:
            hit = np.nonzero(rev[pos:] > best_rev + NEG_TOL)[0]
            if hit.size == 0:
                break
            pos += int(hit[0])
            best_rev, best_idx = float(rev[pos]), int(idx[pos])
            pos += 1
    assign = (best_idx // powers) % K
    return assign.astype(np.int64), best_rev
