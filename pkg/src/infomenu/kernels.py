"""Backend selection for the screening kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``INFOMENU_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("INFOMENU_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

assignment_prices = _impl.assignment_prices
move_revenues = _impl.move_revenues
enumerate_best = _impl.enumerate_best


def implementation(name):
    """Kernel module by name (``"python"`` or ``"cython"``), for benchmarks."""
    if name == "python":
        return _fallback
    from . import _kernels
    return _kernels
