"""Backend selection for the hot round kernel.

The compiled Cython kernel is used when it was built; otherwise the numpy
implementation. Set ``DGNE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from dgne import _kernels_py

try:
    if os.environ.get("DGNE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from dgne import _kernels_cy
except ImportError:
    _kernels_cy = None

BACKENDS = {"python": _kernels_py}
if _kernels_cy is not None:
    BACKENDS["cython"] = _kernels_cy

BACKEND = "cython" if _kernels_cy is not None else "python"


def get_backend(name=None):
    """Module implementing ``decentralized_step`` for ``name`` (default: the selected one)."""
    name = BACKEND if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


decentralized_step = get_backend().decentralized_step
