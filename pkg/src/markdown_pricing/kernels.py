"""Kernel backend selection.

The compiled extension is used when it was built and the environment
variable ``MARKDOWN_PRICING_PURE`` is not set to a true value.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("MARKDOWN_PRICING_PURE", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

mle_greedy_linear = _impl.mle_greedy_linear


def available_backends() -> dict:
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
