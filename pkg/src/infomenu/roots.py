"""Bracketed root finding used throughout the solver.

Everything here is plain bisection: the equations we solve are monotone on
their brackets under the regularity assumptions, so bisection always
converges and needs no derivatives.
"""

import numpy as np

MAX_ITER = 200


def bisect(fn, lo, hi, xtol=1e-15, maxiter=MAX_ITER):
    """Vectorised bisection.

    ``fn`` maps an array of points to an array of values. ``lo`` and ``hi``
    are broadcast together; every bracket must carry a sign change (or an
    exact zero at an endpoint). Returns the midpoint of the final bracket.
    """
    lo0, hi0 = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    lo, hi = lo0.copy(), hi0.copy()
    flo = np.asarray(fn(lo), dtype=float)
    fhi = np.asarray(fn(hi), dtype=float)
    if np.any(np.sign(flo) * np.sign(fhi) > 0):
        raise ValueError("bisect: bracket without sign change")
    neg_lo = flo < 0
    for _ in range(maxiter):
        if np.all(hi - lo <= xtol):
            break
        mid = 0.5 * (lo + hi)
        fmid = np.asarray(fn(mid), dtype=float)
        same = (fmid < 0) == neg_lo
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    root = 0.5 * (lo + hi)
    root = np.where(fhi == 0, hi0, root)
    root = np.where(flo == 0, lo0, root)
    return root if root.ndim else float(root)


def bisect_scalar(fn, lo, hi, xtol=1e-15, maxiter=MAX_ITER):
    """Scalar bisection; ``fn`` takes and returns floats."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo < 0) == (fhi < 0):
        raise ValueError("bisect_scalar: bracket without sign change")
    neg_lo = flo < 0
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0:
            return mid
        if (fmid < 0) == neg_lo:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)


def last_sign_change(fn, lo, hi, n=512):
    """Bracket the right-most sign change of ``fn`` on a uniform scan.

    Returns ``(a, b)`` with a sign change between them, or ``None`` when
    the scan never changes sign.
    """
    xs = np.linspace(lo, hi, n + 1)
    ys = np.asarray(fn(xs), dtype=float)
    s = np.sign(ys)
    idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
    idx = [i for i in idx if not (s[i] == 0 and s[i + 1] == 0)]
    if not idx:
        return None
    i = idx[-1]
    return float(xs[i]), float(xs[i + 1])


def first_sign_change(fn, lo, hi, n=512):
    """Bracket the left-most sign change of ``fn`` on a uniform scan."""
    xs = np.linspace(lo, hi, n + 1)
    ys = np.asarray(fn(xs), dtype=float)
    s = np.sign(ys)
    idx = np.nonzero(s[:-1] * s[1:] <= 0)[0]
    idx = [i for i in idx if not (s[i] == 0 and s[i + 1] == 0)]
    if not idx:
        return None
    i = idx[0]
    return float(xs[i]), float(xs[i + 1])
